"""Change of frame and scale that turns a reflected particle into a
unit-diffusion process reflected at zero."""
import logging
import math
from dataclasses import dataclass
from dataclasses import field
from typing import List
from typing import Optional
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy import optimize
from scipy import stats

from epidemic_front.coefficients import ArrayLike
from epidemic_front.coefficients import CoefficientSet
from epidemic_front.coefficients import DiffusionFamily
from epidemic_front.coefficients import DiffusionSpec
from epidemic_front.coefficients import DriftFamily
from epidemic_front.coefficients import InitialLaw
from epidemic_front.coefficients import RateSpec
from epidemic_front.epidemic import FrozenEnvironment
from epidemic_front.epidemic import Mode
from epidemic_front.epidemic import RunConfig
from epidemic_front.epidemic import frozen_environment
from epidemic_front.epidemic import initial_state
from epidemic_front.epidemic import run
from epidemic_front.epidemic import step_system
from epidemic_front.sde import NoiseStream
from epidemic_front.sde import StreamPurpose
from epidemic_front.sde import increment_block
from epidemic_front.sde import occupation_local_time
from epidemic_front.utils import BracketingError
from epidemic_front.utils import QuadratureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TransformContext:
    diffusion: DiffusionSpec
    times: np.ndarray
    boundary: np.ndarray
    tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if len(self.times) != len(self.boundary):
            raise ValueError("boundary must be sampled on the time grid")
        if np.any(np.diff(self.boundary) < 0):
            raise ValueError("boundary path must be nondecreasing")
        if not self.diffusion.c_min > 0:
            raise ValueError("diffusion must be bounded away from zero")

    def boundary_at(self, t: ArrayLike) -> ArrayLike:
        values = np.interp(t, self.times, self.boundary)
        return float(values) if np.ndim(values) == 0 else values

    def velocity_at(self, t: ArrayLike) -> ArrayLike:
        """Forward difference of the boundary over the grid cell holding t."""
        if len(self.times) < 2:
            return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
        cell = np.searchsorted(self.times, t, side="right") - 1
        cell = np.clip(cell, 0, len(self.times) - 2)
        slope = (self.boundary[cell + 1] - self.boundary[cell]) / (
            self.times[cell + 1] - self.times[cell]
        )
        return float(slope) if np.ndim(slope) == 0 else slope

    @classmethod
    def from_environment(
        cls,
        diffusion: DiffusionSpec,
        times: np.ndarray,
        environment: FrozenEnvironment,
        tolerance: float = 1e-10,
    ) -> "TransformContext":
        return cls(diffusion, np.asarray(times), environment.boundary, tolerance)


def _require_nonnegative(name: str, value: ArrayLike) -> None:
    if np.any(np.asarray(value) < 0):
        raise ValueError(f"{name} must be nonnegative, got {value}")


def _space_integral(ctx: TransformContext, t: float, y: float) -> float:
    shift = ctx.boundary_at(t)
    value, error = integrate.quad(
        lambda x: 1.0 / ctx.diffusion.value(t, x + shift),
        0.0,
        y,
        epsabs=ctx.tolerance,
        epsrel=ctx.tolerance,
        limit=200,
    )
    if error > 10 * ctx.tolerance * max(1.0, abs(value)):
        raise QuadratureError(
            f"quadrature did not converge at t={t}, y={y} (error {error:.3g})"
        )
    return value


def upsilon(ctx: TransformContext, t: ArrayLike, y: ArrayLike) -> ArrayLike:
    """Rescaled level: integral of 1/sigma(t, x + A_t) over [0, y]."""
    _require_nonnegative("y", y)
    if ctx.diffusion.space_dependent:
        values = np.vectorize(lambda s, v: _space_integral(ctx, s, v) if v else 0.0)(
            t, y
        )
        return float(values) if np.ndim(values) == 0 else values
    # sigma does not depend on the level, so the integral is a ratio
    return y / ctx.diffusion.value(t, ctx.boundary_at(t))


def _invert(ctx: TransformContext, t: float, z: float) -> float:
    if z == 0:
        return 0.0
    lower, upper = z * ctx.diffusion.c_min, z * ctx.diffusion.c_max
    f_lower = _space_integral(ctx, t, lower) - z
    f_upper = _space_integral(ctx, t, upper) - z
    if f_lower > 0 or f_upper < 0:
        raise BracketingError(f"no root for z={z} in [{lower}, {upper}] at t={t}")
    if f_lower == 0:
        return lower
    if f_upper == 0:
        return upper
    return optimize.brentq(
        lambda y: _space_integral(ctx, t, y) - z,
        lower,
        upper,
        xtol=ctx.tolerance * 1e-2,
        rtol=4 * np.finfo(float).eps,
    )


def upsilon_inverse(ctx: TransformContext, t: ArrayLike, z: ArrayLike) -> ArrayLike:
    _require_nonnegative("z", z)
    if ctx.diffusion.space_dependent:
        values = np.vectorize(lambda s, v: _invert(ctx, s, v))(t, z)
        return float(values) if np.ndim(values) == 0 else values
    return z * ctx.diffusion.value(t, ctx.boundary_at(t))


def transformed_drift(
    ctx: TransformContext,
    coefficients: CoefficientSet,
    t: ArrayLike,
    z: ArrayLike,
) -> ArrayLike:
    """Drift of the rescaled process in the frame of the boundary.

    Combines the time derivative of the map, the scaled drift, the Ito
    correction and the frame velocity term -A'(t) / sigma(t, A_t).
    """
    diffusion = coefficients.diffusion
    shift = ctx.boundary_at(t)
    y = upsilon_inverse(ctx, t, z)
    x = y + shift
    sigma = diffusion.value(t, x)
    # only the time-modulated family has a time derivative, and it is flat in x
    time_term = -y * diffusion.dt(t, x) / sigma**2
    drift = (
        time_term
        + coefficients.drift.value(t, x) / sigma
        - 0.5 * diffusion.dx(t, x)
        - ctx.velocity_at(t) / diffusion.value(t, shift)
    )
    return float(drift) if np.ndim(drift) == 0 else drift


def growth_bound(ctx: TransformContext, coefficients: CoefficientSet) -> float:
    """Constant C with |drift(t, z)| <= C (1 + z) from the catalog bounds."""
    diffusion, drift = coefficients.diffusion, coefficients.drift
    c_min, c_max = diffusion.c_min, diffusion.c_max
    max_shift = float(np.max(np.abs(ctx.boundary))) if len(ctx.boundary) else 0.0
    velocities = np.abs(np.diff(ctx.boundary) / np.diff(ctx.times))
    max_velocity = float(np.max(velocities)) if len(velocities) else 0.0
    if drift.family == DriftFamily.MEAN_REVERTING:
        drift_const = drift.theta * (abs(drift.m) + max_shift)
        drift_slope = drift.theta * c_max
    else:
        drift_const, drift_slope = abs(drift.mu), 0.0
    const = drift_const / c_min + 0.5 * diffusion.dx_bound + max_velocity / c_min
    slope = diffusion.dt_bound * c_max / c_min**2 + drift_slope / c_min
    return const + slope


@dataclass
class ZTrace:
    times: np.ndarray
    positions: np.ndarray
    local_time: np.ndarray
    killing_time: np.ndarray

    def survivors(self, step: int) -> np.ndarray:
        return self.killing_time > self.times[step]


def simulate_Z(
    ctx: TransformContext,
    coefficients: CoefficientSet,
    rate: RateSpec,
    contagion: np.ndarray,
    horizon: float,
    dt: float,
    seed: int,
    initial: InitialLaw = InitialLaw(),
    paths: int = 1,
    replication: int = 0,
) -> ZTrace:
    """Projected Euler scheme for dZ = b~ dt + dW + dl0, reflected at zero and
    killed once the integral of sigma(t, A_t) gamma(t, C_t) dl0 passes an
    exponential clock.

    Path ``i`` uses the increment, clock and initial streams of particle ``i``,
    so it is pathwise coupled to the particle system run with the same seed.
    """
    steps = int(round(horizon / dt))
    times = dt * np.arange(steps + 1)
    contagion_grid = np.interp(times, ctx.times, contagion)
    indices = range(paths)
    noise = increment_block(seed, indices, steps, replication)
    clocks = np.array(
        [
            NoiseStream(seed, i, StreamPurpose.CLOCKS, replication).exponentials(1)[0]
            for i in indices
        ]
    )
    start = np.array(
        [
            initial.sample(
                NoiseStream(seed, i, StreamPurpose.INITIAL, replication).uniforms(1)
            )[0]
            for i in indices
        ]
    )
    positions = np.zeros((paths, steps + 1))
    local_time = np.zeros((paths, steps + 1))
    positions[:, 0] = upsilon(ctx, 0.0, np.maximum(start - ctx.boundary_at(0.0), 0.0))
    hazard = np.zeros(paths)
    killing_time = np.full(paths, np.inf)
    root_dt = math.sqrt(dt)
    for k in range(steps):
        t = times[k]
        z = positions[:, k]
        drift = transformed_drift(ctx, coefficients, t, z)
        pre = z + drift * dt + root_dt * noise[:, k]
        positions[:, k + 1] = np.maximum(pre, 0.0)
        increment = positions[:, k + 1] - pre
        local_time[:, k + 1] = local_time[:, k] + increment
        weight = coefficients.diffusion.value(t, ctx.boundary_at(t)) * rate.value(
            t, contagion_grid[k]
        )
        hazard += weight * increment
        killed = (hazard >= clocks) & np.isinf(killing_time)
        killing_time[killed] = times[k + 1]
    return ZTrace(times, positions, local_time, killing_time)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"check": self.name, "passed": self.passed, **self.details}


def pathwise_check(config: RunConfig, tolerance: float = 1e-12) -> CheckResult:
    """Constant sigma: Z equals (X - A) / c path by path, and its local time
    equals the particle local time divided by c."""
    diffusion = config.coefficients.diffusion
    if diffusion.family != DiffusionFamily.CONSTANT:
        raise ValueError("the pathwise identity needs a constant diffusion")
    reflected = config.with_changes(mode=Mode.GLOBALLY_REFLECTED, record_paths=True)
    trace = run(reflected)
    ctx = TransformContext(diffusion, trace.times, trace.front)
    z_trace = simulate_Z(
        ctx,
        config.coefficients,
        config.coefficients.rate,
        trace.contagion,
        config.horizon,
        config.dt,
        config.seed,
        initial=config.initial_law,
        paths=config.n,
        replication=config.replication,
    )
    expected = (trace.positions - trace.front[None, :]) / diffusion.c
    position_error = float(np.max(np.abs(z_trace.positions - expected)))
    particle_local_time = np.cumsum(trace.local_time_increments, axis=1) / diffusion.c
    local_time_error = float(
        np.max(np.abs(z_trace.local_time[:, 1:] - particle_local_time))
    )
    return CheckResult(
        "pathwise",
        position_error <= tolerance and local_time_error <= tolerance,
        {
            "max_position_error": position_error,
            "max_local_time_error": local_time_error,
            "tolerance": tolerance,
        },
    )


def _frozen_snapshots(
    config: RunConfig,
    environment: FrozenEnvironment,
    check_steps: Sequence[int],
) -> dict:
    state = initial_state(config, environment)
    snapshots = {}
    for k in range(config.steps):
        step_system(state, config, environment)
        if k + 1 in check_steps:
            snapshots[k + 1] = (
                state.particles.position.copy(),
                state.particles.tau.copy(),
            )
    return snapshots


def distribution_identity_check(
    config: RunConfig,
    paths: int = 10_000,
    check_times: Sequence[float] = (0.25, 0.5, 1.0),
    level: float = 0.01,
    fresh_seed: Optional[int] = None,
) -> CheckResult:
    """Two-sample KS between rescaled surviving particles in a frozen
    environment and surviving Z paths driven by independent noise."""
    environment = frozen_environment(config)
    ctx = TransformContext.from_environment(
        config.coefficients.diffusion, config.times, environment
    )
    seed = config.seed + 1 if fresh_seed is None else fresh_seed
    check_steps = [config.step_index(t) for t in check_times]

    particles = config.with_changes(n=paths, seed=seed, mode=Mode.TRUE, tagged=None)
    snapshots = _frozen_snapshots(particles, environment, check_steps)
    z_trace = simulate_Z(
        ctx,
        config.coefficients,
        config.coefficients.rate,
        environment.contagion,
        config.horizon,
        config.dt,
        seed + 1,
        initial=config.initial_law,
        paths=paths,
    )

    rows: List[dict] = []
    for t, k in zip(check_times, check_steps):
        position, tau = snapshots[k]
        alive = tau > config.times[k]
        frame = np.maximum(position[alive] - environment.boundary[k], 0.0)
        rescaled = np.asarray(upsilon(ctx, config.times[k], frame))
        z_alive = z_trace.positions[z_trace.survivors(k), k]
        if len(rescaled) == 0 or len(z_alive) == 0:
            rows.append({"t": t, "pvalue": None, "survivors": [0, 0]})
            continue
        result = stats.ks_2samp(rescaled, z_alive)
        rows.append(
            {
                "t": t,
                "statistic": float(result.statistic),
                "pvalue": float(result.pvalue),
                "survivors": [int(len(rescaled)), int(len(z_alive))],
            }
        )
    passed = all(p["pvalue"] is None or p["pvalue"] > level for p in rows)
    return CheckResult("distribution_identity", passed, {"times": rows})


@dataclass(frozen=True)
class RescalingRow:
    dt: float
    eps: Optional[float]
    mean_relative_error: float
    paths: int


@dataclass
class RescalingReport:
    rows: List[RescalingRow]

    def regulator_errors(self) -> List[float]:
        return [row.mean_relative_error for row in self.rows if row.eps is None]

    @property
    def decreasing(self) -> bool:
        errors = self.regulator_errors()
        return all(a > b for a, b in zip(errors, errors[1:])) or all(
            e == 0 for e in errors
        )

    def to_dict(self) -> dict:
        return {
            "rows": [row.__dict__ for row in self.rows],
            "decreasing": self.decreasing,
        }


def _relative_error(lhs: np.ndarray, rhs: np.ndarray) -> float:
    # pooled over paths
    if len(lhs) == 0:
        return 0.0
    scale = float(np.mean(np.maximum(np.abs(lhs), np.abs(rhs))))
    if scale == 0:
        return 0.0
    return float(np.mean(np.abs(lhs - rhs))) / scale


def local_time_rescaling_check(
    ctx: TransformContext,
    coefficients: CoefficientSet,
    paths: int,
    dt_ladder: Sequence[float],
    eps_ladder: Sequence[float] = (),
    horizon: Optional[float] = None,
    seed: int = 0,
) -> RescalingReport:
    """Compare the local time of the rescaled path with the rescaled local
    time of the particle, for each step size and band width.

    The particle starts on the boundary and reflects off it; the rescaled
    local time is the sum of pushes weighted by 1/sigma(t, A_t) at the push
    instant.
    """
    horizon = float(ctx.times[-1]) if horizon is None else horizon
    rows: List[RescalingRow] = []
    for rung, dt in enumerate(dt_ladder):
        steps = int(round(horizon / dt))
        times = dt * np.arange(steps + 1)
        boundary = np.atleast_1d(np.asarray(ctx.boundary_at(times), dtype=float))
        # velocities must be forward differences on this grid
        grid_ctx = TransformContext(ctx.diffusion, times, boundary, ctx.tolerance)
        sigma_boundary = coefficients.diffusion.value(times, boundary)
        noise = increment_block(seed, range(paths), steps, replication=rung)
        x = np.zeros((paths, steps + 1))
        x[:, 0] = boundary[0]
        pushes = np.zeros((paths, steps))
        for k in range(steps):
            pre = (
                x[:, k]
                + coefficients.drift.value(times[k], x[:, k]) * dt
                + coefficients.diffusion.value(times[k], x[:, k])
                * math.sqrt(dt)
                * noise[:, k]
            )
            x[:, k + 1] = np.maximum(pre, boundary[k + 1])
            pushes[:, k] = x[:, k + 1] - pre
        rhs = np.sum(pushes / sigma_boundary[None, 1:], axis=1)

        u = np.column_stack(
            [
                np.atleast_1d(
                    upsilon(grid_ctx, times[k], np.maximum(x[:, k] - boundary[k], 0.0))
                )
                for k in range(steps + 1)
            ]
        )
        drift_sum = np.zeros(paths)
        for k in range(steps):
            drift = transformed_drift(grid_ctx, coefficients, times[k], u[:, k])
            drift_sum += drift * dt
        lhs = u[:, -1] - u[:, 0] - drift_sum - math.sqrt(dt) * np.sum(noise, axis=1)
        rows.append(RescalingRow(dt, None, _relative_error(lhs, rhs), paths))

        for eps in eps_ladder:
            if steps == 0:
                rows.append(RescalingRow(dt, eps, 0.0, paths))
                continue
            unit = DiffusionSpec(DiffusionFamily.CONSTANT, c=1.0)
            lhs_eps = occupation_local_time(u, 0.0, eps, unit, times)
            band = (x[:, :-1] >= boundary[None, :-1]) & (
                x[:, :-1] < boundary[None, :-1] + eps
            )
            weight = coefficients.diffusion.value(times[:-1], x[:, :-1]) ** 2 * dt / eps
            rhs_eps = np.sum(
                np.where(band, weight, 0.0) / sigma_boundary[None, :-1], axis=1
            )
            rows.append(
                RescalingRow(dt, eps, _relative_error(lhs_eps, rhs_eps), paths)
            )
        logger.debug("rescaling check: dt=%g done", dt)
    return RescalingReport(rows)
