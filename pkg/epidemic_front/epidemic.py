"""The interacting particle engine.

Particles are stepped together with a projected Euler scheme against the
end-of-step front. Hazards use the start-of-step contagiousness, infections
of one step are applied in ascending particle index at the step end, and the
front and contagiousness are then recomputed from their closed forms.
"""
import logging
import math
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import Enum
from typing import Any
from typing import List
from typing import Optional
from typing import Tuple

import numpy as np

from epidemic_front.coefficients import CoefficientSet
from epidemic_front.coefficients import DiffusionFamily
from epidemic_front.coefficients import DriftFamily
from epidemic_front.coefficients import InitialLaw
from epidemic_front.coefficients import KernelSpec
from epidemic_front.coefficients import ValidationReport
from epidemic_front.coefficients import validate_config
from epidemic_front.sde import NoiseStream
from epidemic_front.sde import StreamPurpose
from epidemic_front.sde import reflected_euler_step
from epidemic_front.utils import InvalidConfigError
from epidemic_front.utils import map_parallel

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    TRUE = "true"
    GLOBALLY_REFLECTED = "globally-reflected"
    ARTIFICIAL = "artificial"
    BARNES_TILDE = "barnes-tilde"
    BARNES_BAR = "barnes-bar"

    @property
    def is_barnes(self) -> bool:
        return self in (Mode.BARNES_TILDE, Mode.BARNES_BAR)

    @property
    def removes_infected(self) -> bool:
        return self in (Mode.TRUE, Mode.ARTIFICIAL)


@dataclass(frozen=True)
class RunConfig:
    n: int
    horizon: float
    dt: float
    kernel: KernelSpec
    coefficients: CoefficientSet = field(default_factory=CoefficientSet)
    initial: InitialLaw = field(default_factory=InitialLaw)
    a0: float = 0.0
    alpha: float = 0.0
    mode: Mode = Mode.TRUE
    seed: int = 0
    tagged: Optional[int] = None
    u: float = 0.0
    kappa: float = 1.0
    replication: int = 0
    record_paths: bool = False
    threads: int = 1

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    @property
    def initial_law(self) -> InitialLaw:
        return replace(self.initial, a0=self.a0)

    def step_index(self, t: float) -> int:
        return min(self.steps, max(0, int(round(t / self.dt))))

    def with_changes(self, **changes: Any) -> "RunConfig":
        return replace(self, **changes)

    def check(self, lamperti: bool = False) -> ValidationReport:
        report = validate_config(
            self.kernel, self.coefficients, self.initial_law, lamperti=lamperti
        )
        report.add("population size", self.n >= 1, f"n = {self.n}")
        report.add(
            "time grid",
            self.dt > 0 and self.horizon > 0 and self.steps >= 1,
            f"T = {self.horizon}, dt = {self.dt}",
        )
        report.add("master seed", self.seed >= 0, f"seed = {self.seed}")
        if self.mode == Mode.ARTIFICIAL:
            report.add(
                "tagged particle",
                self.tagged is not None and 0 <= self.tagged < self.n,
                f"tagged = {self.tagged}",
            )
        if self.mode.is_barnes:
            drift, diffusion = self.coefficients.drift, self.coefficients.diffusion
            report.add(
                "Brownian particles",
                drift.family == DriftFamily.CONSTANT
                and drift.mu == 0
                and diffusion.family == DiffusionFamily.CONSTANT
                and diffusion.c == 1,
                "Newtonian barrier variants need b = 0 and sigma = 1",
            )
        return report


@dataclass
class FrontState:
    a0: float
    alpha: float
    kernel: KernelSpec
    infection_times: List[float] = field(default_factory=list)


def _known_infections(front: FrontState, t: float) -> np.ndarray:
    taus = np.asarray(front.infection_times, dtype=float)
    return taus[taus <= t]


def front_level(front: FrontState, t: float, n: int) -> float:
    taus = _known_infections(front, t)
    # fsum is correctly rounded, so the front stays exactly nondecreasing
    mass = math.fsum(np.atleast_1d(front.kernel.cdf(t - taus)))
    return front.a0 + front.alpha / n * mass


def contagiousness(front: FrontState, t: float, n: int) -> float:
    taus = _known_infections(front, t)
    kernel = front.kernel
    active = np.atleast_1d(kernel.cdf(t - taus)) - np.atleast_1d(
        kernel.cdf(t - taus - kernel.dbar)
    )
    return math.fsum(active) / n


@dataclass
class ParticleState:
    position: np.ndarray
    susceptible: np.ndarray
    local_time: np.ndarray
    hazard: np.ndarray
    clock: np.ndarray
    tau: np.ndarray


@dataclass(frozen=True)
class FrozenEnvironment:
    """Prescribed boundary and contagion paths on the run grid; infections
    are recorded but never fed back."""

    boundary: np.ndarray
    contagion: np.ndarray


@dataclass
class SystemState:
    step: int
    particles: ParticleState
    front: FrontState
    noise: np.ndarray
    infects: np.ndarray
    boundary: float
    contagion: float
    velocity: float = 0.0
    last_increments: Optional[np.ndarray] = None
    last_new: Optional[np.ndarray] = None


def _draw_particle(config: RunConfig, index: int) -> Tuple[float, float, np.ndarray]:
    seed, replication = config.seed, config.replication
    uniforms = NoiseStream(seed, index, StreamPurpose.INITIAL, replication).uniforms(1)
    clock = NoiseStream(seed, index, StreamPurpose.CLOCKS, replication).exponentials(1)
    noise = NoiseStream(seed, index, StreamPurpose.INCREMENTS, replication).normals(
        config.steps
    )
    return float(config.initial_law.sample(uniforms)[0]), float(clock[0]), noise


def initial_state(
    config: RunConfig, environment: Optional[FrozenEnvironment] = None
) -> SystemState:
    draws = map_parallel(
        lambda i: _draw_particle(config, i), range(config.n), config.threads
    )
    n = config.n
    particles = ParticleState(
        position=np.array([d[0] for d in draws], dtype=float),
        susceptible=np.ones(n, dtype=bool),
        local_time=np.zeros(n),
        hazard=np.zeros(n),
        clock=np.array([d[1] for d in draws], dtype=float),
        tau=np.full(n, np.inf),
    )
    infects = np.ones(n, dtype=bool)
    if config.mode == Mode.ARTIFICIAL and config.tagged is not None:
        infects[config.tagged] = False
    if environment is not None:
        boundary, contagion = environment.boundary[0], environment.contagion[0]
    elif config.mode.is_barnes:
        boundary, contagion = config.a0, config.u
    else:
        boundary, contagion = config.a0, 0.0
    return SystemState(
        step=0,
        particles=particles,
        front=FrontState(config.a0, config.alpha, config.kernel),
        noise=np.stack([d[2] for d in draws]) if n else np.zeros((0, config.steps)),
        infects=infects,
        boundary=float(boundary),
        contagion=float(contagion),
        velocity=config.u if config.mode.is_barnes else 0.0,
    )


def step_system(
    state: SystemState,
    config: RunConfig,
    environment: Optional[FrozenEnvironment] = None,
) -> SystemState:
    """Advance the state from grid time t_k to t_{k+1} in place."""
    k, n, dt = state.step, config.n, config.dt
    t, t_next = dt * k, dt * (k + 1)
    particles = state.particles

    if environment is not None:
        boundary_next = float(environment.boundary[k + 1])
        contagion = float(environment.contagion[k])
    elif config.mode.is_barnes:
        boundary_next = state.boundary + state.velocity * dt
        contagion = state.velocity
    else:
        boundary_next = front_level(state.front, t_next, n)
        contagion = state.contagion

    moving = np.isfinite(particles.position)
    increments = np.zeros(n)
    if moving.any():
        result = reflected_euler_step(
            particles.position[moving],
            t,
            dt,
            boundary_next,
            config.coefficients,
            state.noise[moving, k],
        )
        particles.position[moving] = result.position
        increments[moving] = result.local_time
    particles.local_time += increments

    rate = config.coefficients.rate.value(t, contagion)
    hazard_increments = np.where(particles.susceptible, rate * increments, 0.0)
    particles.hazard += hazard_increments

    fired = particles.hazard >= particles.clock
    newly = particles.susceptible & state.infects & fired
    new_indices = np.flatnonzero(newly)
    particles.tau[new_indices] = t_next
    particles.susceptible[new_indices] = False
    if config.mode.removes_infected:
        particles.position[new_indices] = np.nan
    state.front.infection_times.extend([t_next] * len(new_indices))

    if config.mode == Mode.BARNES_TILDE:
        state.velocity -= config.kappa / n * float(np.sum(hazard_increments))
    elif config.mode == Mode.BARNES_BAR:
        state.velocity = config.u - len(state.front.infection_times) / n

    if environment is not None:
        state.boundary = boundary_next
        state.contagion = float(environment.contagion[k + 1])
    elif config.mode.is_barnes:
        state.boundary = boundary_next
        state.contagion = state.velocity
    else:
        state.boundary = front_level(state.front, t_next, n)
        state.contagion = contagiousness(state.front, t_next, n)

    state.last_increments = increments
    state.last_new = new_indices
    state.step = k + 1
    return state


@dataclass
class SystemTrace:
    times: np.ndarray
    front: np.ndarray
    infected: np.ndarray
    contagion: np.ndarray
    infection_times: np.ndarray
    local_time_increments: np.ndarray
    new_infections: np.ndarray
    clocks: np.ndarray
    n: int
    mode: Mode = Mode.TRUE
    tagged: Optional[int] = None
    positions: Optional[np.ndarray] = None
    velocity: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def counted(self) -> np.ndarray:
        """Particles whose infections enter I; the tagged one never does."""
        mask = np.ones(self.n, dtype=bool)
        if self.mode == Mode.ARTIFICIAL and self.tagged is not None:
            mask[self.tagged] = False
        return mask

    def alive(self) -> np.ndarray:
        """(n, K) mask of particles still susceptible at the start of each step."""
        return self.times[None, :-1] < self.infection_times[:, None]

    def hazard(self, rate: Any) -> np.ndarray:
        """Cumulative hazard paths (n, K+1) rebuilt from the increments."""
        gamma = rate.value(self.times[:-1], self.contagion[:-1])
        increments = np.where(
            self.alive() | ~self.counted[:, None],
            gamma[None, :] * self.local_time_increments,
            0.0,
        )
        out = np.zeros((self.n, self.steps + 1))
        np.cumsum(increments, axis=1, out=out[:, 1:])
        return out


def run(
    config: RunConfig, environment: Optional[FrozenEnvironment] = None
) -> SystemTrace:
    report = config.check()
    if not report.ok:
        raise InvalidConfigError(report)
    if environment is not None and len(environment.boundary) != config.steps + 1:
        raise ValueError("frozen environment does not match the run grid")

    state = initial_state(config, environment)
    n, steps = config.n, config.steps
    front = np.empty(steps + 1)
    infected = np.zeros(steps + 1)
    contagion = np.empty(steps + 1)
    increments = np.zeros((n, steps))
    new_infections = np.zeros(steps, dtype=int)
    positions = np.empty((n, steps + 1)) if config.record_paths else None
    velocity = np.empty(steps + 1) if config.mode.is_barnes else None

    front[0], contagion[0] = state.boundary, state.contagion
    if positions is not None:
        positions[:, 0] = state.particles.position
    if velocity is not None:
        velocity[0] = state.velocity

    infected_count = 0
    for k in range(steps):
        step_system(state, config, environment)
        new = len(state.last_new)
        infected_count += new
        new_infections[k] = new
        increments[:, k] = state.last_increments
        front[k + 1] = state.boundary
        contagion[k + 1] = state.contagion
        infected[k + 1] = infected_count / n
        if positions is not None:
            positions[:, k + 1] = state.particles.position
        if velocity is not None:
            velocity[k + 1] = state.velocity

    logger.debug(
        "run seed=%d replication=%d mode=%s: %d infections",
        config.seed,
        config.replication,
        config.mode.value,
        infected_count,
    )
    return SystemTrace(
        times=config.times,
        front=front,
        infected=infected,
        contagion=contagion,
        infection_times=state.particles.tau.copy(),
        local_time_increments=increments,
        new_infections=new_infections,
        clocks=state.particles.clock.copy(),
        n=n,
        mode=config.mode,
        tagged=config.tagged if config.mode == Mode.ARTIFICIAL else None,
        positions=positions,
        velocity=velocity,
    )


def run_barnes(config: RunConfig) -> SystemTrace:
    """Brownian particles reflected off a barrier whose velocity is lowered by
    collisions (tilde variant) or by infections (bar variant)."""
    if not config.mode.is_barnes:
        raise ValueError(f"run_barnes needs a barnes mode, got {config.mode.value}")
    return run(config)


def frozen_environment(
    config: RunConfig, tagged: Optional[int] = None
) -> FrozenEnvironment:
    """Boundary and contagion paths of the system without particle ``tagged``."""
    if tagged is None:
        tagged = config.tagged if config.tagged is not None else 0
    trace = run(config.with_changes(mode=Mode.ARTIFICIAL, tagged=tagged))
    return FrozenEnvironment(boundary=trace.front, contagion=trace.contagion)
