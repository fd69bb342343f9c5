"""Statistics over traces: the local-time compensator, martingale and decay
checks, infection ties, the conditional infection law, effective
reproduction numbers, coupling invariants and the SIR baseline."""
import logging
import math
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from functools import partial
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import TypeVar

import numpy as np
from scipy import integrate
from scipy import stats

from epidemic_front.coefficients import RateSpec
from epidemic_front.coefficients import ValidationReport
from epidemic_front.epidemic import FrontState
from epidemic_front.epidemic import FrozenEnvironment
from epidemic_front.epidemic import Mode
from epidemic_front.epidemic import RunConfig
from epidemic_front.epidemic import SystemTrace
from epidemic_front.epidemic import contagiousness
from epidemic_front.epidemic import initial_state
from epidemic_front.epidemic import run
from epidemic_front.epidemic import step_system
from epidemic_front.sde import NoiseStream
from epidemic_front.sde import StreamPurpose
from epidemic_front.utils import InvalidConfigError
from epidemic_front.utils import map_processes

logger = logging.getLogger(__name__)

R = TypeVar("R")

MIN_MARTINGALE_REPLICATIONS = 30
SIGNIFICANCE = 0.01
DEFAULT_WINDOWS = ((0.25, 0.5), (0.25, 0.75), (0.5, 1.0))


def replicate(
    config: RunConfig, replications: int, worker: Callable[[RunConfig], R]
) -> List[R]:
    """Run ``worker`` on independent replications, in replication order.

    Replications go to ``config.threads`` worker processes, so ``worker``
    must be picklable.
    """
    logger.debug(
        "running %d replications in %d processes", replications, config.threads
    )
    configs = [
        config.with_changes(replication=r, threads=1) for r in range(replications)
    ]
    return map_processes(worker, configs, config.threads)


def compute_V(trace: SystemTrace, rate: RateSpec, exact: bool = False) -> np.ndarray:
    """Population average of the hazard accrued while susceptible.

    With ``exact`` each step contributes the conditional infection
    probability 1 - exp(-gamma dl) instead of gamma dl; this is the exact
    compensator of I on the grid.
    """
    increments = trace.local_time_increments
    if increments is None or increments.shape != (trace.n, trace.steps):
        raise ValueError("trace does not carry per-particle local time increments")
    gamma = np.asarray(rate.value(trace.times[:-1], trace.contagion[:-1]))
    hazard = gamma[None, :] * increments
    if exact:
        hazard = -np.expm1(-hazard)
    mask = trace.alive() & trace.counted[:, None]
    per_step = np.sum(np.where(mask, hazard, 0.0), axis=0) / trace.n
    return np.concatenate([[0.0], np.cumsum(per_step)])


def martingale_series(
    trace: SystemTrace, rate: RateSpec, exact: bool = True, corrupt: float = 1.0
) -> np.ndarray:
    return trace.infected - corrupt * compute_V(trace, rate, exact=exact)


def compensator_name(exact: bool) -> str:
    return "exact" if exact else "literal"


@dataclass(frozen=True)
class WindowStatistic:
    s: float
    t: float
    mean: float
    stderr: float
    slope: float
    pvalue: float

    @property
    def consistent(self) -> bool:
        return abs(self.mean) <= 3 * self.stderr and self.pvalue >= SIGNIFICANCE


def _window_dicts(windows: Sequence[WindowStatistic]) -> List[Dict[str, Any]]:
    return [{**asdict(window), "consistent": window.consistent} for window in windows]


@dataclass
class MartingaleReport:
    """Increment statistics of I - V under both compensators.

    ``literal`` takes V as the running sum of gamma dl, ``exact`` as the
    running sum of 1 - exp(-gamma dl). ``consistent`` keys on the one
    selected by ``exact``; the other is reported alongside.
    """

    exact_windows: List[WindowStatistic]
    literal_windows: List[WindowStatistic]
    replications: int
    corrupt: float = 1.0
    exact: bool = True

    @property
    def windows(self) -> List[WindowStatistic]:
        return self.exact_windows if self.exact else self.literal_windows

    @property
    def consistent(self) -> bool:
        return all(window.consistent for window in self.windows)

    @property
    def exact_consistent(self) -> bool:
        return all(window.consistent for window in self.exact_windows)

    @property
    def literal_consistent(self) -> bool:
        return all(window.consistent for window in self.literal_windows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "replications": self.replications,
            "corrupt": self.corrupt,
            "compensator": compensator_name(self.exact),
            "consistent": self.consistent,
            "windows": _window_dicts(self.windows),
            "exact": {
                "consistent": self.exact_consistent,
                "windows": _window_dicts(self.exact_windows),
            },
            "literal": {
                "consistent": self.literal_consistent,
                "windows": _window_dicts(self.literal_windows),
            },
        }


def _mean_and_stderr(values: np.ndarray) -> Tuple[float, float]:
    if len(values) < 2:
        return float(np.mean(values)), 0.0
    stderr = np.std(values, ddof=1) / math.sqrt(len(values))
    return float(np.mean(values)), float(stderr)


def _increment_regression(
    level: np.ndarray, increment: np.ndarray
) -> Tuple[float, float]:
    if np.ptp(level) == 0 or np.ptp(increment) == 0:
        return 0.0, 1.0
    result = stats.linregress(level, increment)
    return float(result.slope), float(result.pvalue)


def _martingale_samples(
    cfg: RunConfig, indices: Sequence[int], corrupt: float
) -> np.ndarray:
    """M at ``indices``; row 0 under the exact compensator, row 1 literal."""
    trace = run(cfg)
    rate = cfg.coefficients.rate
    return np.stack(
        [
            martingale_series(trace, rate, exact=exact, corrupt=corrupt)[indices]
            for exact in (True, False)
        ]
    )


def _window_statistics(
    config: RunConfig,
    samples: np.ndarray,
    indices: Sequence[int],
    windows: Sequence[Tuple[float, float]],
) -> List[WindowStatistic]:
    column = {index: j for j, index in enumerate(indices)}
    statistics = []
    for s, t in windows:
        level = samples[:, column[config.step_index(s)]]
        increment = samples[:, column[config.step_index(t)]] - level
        mean, stderr = _mean_and_stderr(increment)
        slope, pvalue = _increment_regression(level, increment)
        statistics.append(WindowStatistic(s, t, mean, stderr, slope, pvalue))
    return statistics


def martingale_test(
    config: RunConfig,
    replications: int = 200,
    windows: Sequence[Tuple[float, float]] = DEFAULT_WINDOWS,
    corrupt: float = 1.0,
    exact: bool = True,
) -> MartingaleReport:
    if replications < MIN_MARTINGALE_REPLICATIONS:
        raise ValueError(
            f"martingale test needs at least {MIN_MARTINGALE_REPLICATIONS} "
            f"replications, got {replications}"
        )
    indices = sorted({config.step_index(t) for pair in windows for t in pair})
    worker = partial(_martingale_samples, indices=indices, corrupt=corrupt)
    samples = np.array(replicate(config, replications, worker))
    return MartingaleReport(
        exact_windows=_window_statistics(config, samples[:, 0], indices, windows),
        literal_windows=_window_statistics(config, samples[:, 1], indices, windows),
        replications=replications,
        corrupt=corrupt,
        exact=exact,
    )


@dataclass(frozen=True)
class CompensatorBiasRow:
    dt: float
    literal_mean: float
    literal_stderr: float
    exact_mean: float
    exact_stderr: float
    gap: float


@dataclass
class CompensatorBias:
    rows: List[CompensatorBiasRow]
    horizon: float
    replications: int

    @property
    def shrinking(self) -> bool:
        gaps = [row.gap for row in self.rows]
        return all(a > b for a, b in zip(gaps, gaps[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "horizon": self.horizon,
            "replications": self.replications,
            "shrinking": self.shrinking,
            "rows": [asdict(row) for row in self.rows],
        }


def _terminal_martingales(cfg: RunConfig) -> Tuple[float, float]:
    trace = run(cfg)
    rate = cfg.coefficients.rate
    exact = martingale_series(trace, rate, exact=True)
    literal = martingale_series(trace, rate, exact=False)
    return float(exact[-1]), float(literal[-1])


def compensator_bias(
    config: RunConfig,
    dt_ladder: Sequence[float] = (0.004, 0.002, 0.001),
    replications: int = 200,
) -> CompensatorBias:
    """Mean of M at the horizon under both compensators along a step ladder.

    The literal compensator overshoots by about half the sum of (gamma dl)^2,
    which vanishes with the step; ``gap`` is that overshoot averaged.
    """
    if list(dt_ladder) != sorted(dt_ladder, reverse=True):
        raise ValueError(f"dt ladder must be decreasing, got {list(dt_ladder)}")
    rows = []
    for dt in dt_ladder:
        values = np.array(
            replicate(config.with_changes(dt=dt), replications, _terminal_martingales)
        )
        exact_mean, exact_stderr = _mean_and_stderr(values[:, 0])
        literal_mean, literal_stderr = _mean_and_stderr(values[:, 1])
        rows.append(
            CompensatorBiasRow(
                dt=dt,
                literal_mean=literal_mean,
                literal_stderr=literal_stderr,
                exact_mean=exact_mean,
                exact_stderr=exact_stderr,
                gap=float(np.mean(values[:, 0] - values[:, 1])),
            )
        )
        logger.debug("compensator bias: dt=%g done", dt)
    return CompensatorBias(rows, config.horizon, replications)


@dataclass
class DecayFit:
    sizes: List[int]
    estimates: List[float]
    replications: int
    slope: float = math.nan
    ci: Tuple[float, float] = (math.nan, math.nan)
    degenerate: bool = False
    exact: bool = True
    other_estimates: List[float] = field(default_factory=list)
    other_slope: float = math.nan

    @property
    def monotone(self) -> bool:
        return all(a >= b for a, b in zip(self.estimates, self.estimates[1:]))

    def to_dict(self) -> Dict[str, Any]:
        other_defined = bool(self.other_estimates) and math.isfinite(self.other_slope)
        return {
            "sizes": self.sizes,
            "compensator": compensator_name(self.exact),
            "estimates": self.estimates,
            "replications": self.replications,
            "slope": None if self.degenerate else self.slope,
            "ci": None if self.degenerate else list(self.ci),
            "degenerate": self.degenerate,
            "monotone": self.monotone,
            compensator_name(not self.exact): {
                "estimates": self.other_estimates,
                "slope": self.other_slope if other_defined else None,
            },
        }


def _check_sizes(sizes: Sequence[int]) -> None:
    if len(sizes) < 4:
        raise ValueError(f"need at least 4 population sizes, got {list(sizes)}")
    ratios = np.asarray(sizes[1:], dtype=float) / np.asarray(sizes[:-1], dtype=float)
    if np.any(ratios <= 1) or not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError(
            f"sizes must be strictly increasing and geometric, got {list(sizes)}"
        )


def _log_log_slopes(log_sizes: np.ndarray, log_estimates: np.ndarray) -> np.ndarray:
    """Least-squares slopes of each row of ``log_estimates`` against ``log_sizes``."""
    x = log_sizes - log_sizes.mean()
    y = log_estimates - log_estimates.mean(axis=-1, keepdims=True)
    return (y @ x) / (x @ x)


def _sup_squares(cfg: RunConfig, exact: bool) -> Tuple[float, float]:
    """sup_t M_t^2 under the selected compensator, then under the other."""
    trace = run(cfg)
    rate = cfg.coefficients.rate
    selected = martingale_series(trace, rate, exact=exact)
    other = martingale_series(trace, rate, exact=not exact)
    return float(np.max(selected**2)), float(np.max(other**2))


def l2_decay(
    config: RunConfig,
    sizes: Sequence[int] = (64, 128, 256, 512),
    replications: int = 200,
    bootstrap: int = 1000,
    exact: bool = True,
    level: float = 0.95,
) -> DecayFit:
    """Monte Carlo estimate of E[sup_t M_t^2] per population size and its
    log-log slope with a percentile bootstrap interval.

    The slope and interval use the compensator selected by ``exact``; the
    other compensator's estimates and point slope ride along.
    """
    _check_sizes(sizes)
    worker = partial(_sup_squares, exact=exact)

    sup_squares, other = [], []
    for n in sizes:
        values = np.array(replicate(config.with_changes(n=n), replications, worker))
        sup_squares.append(values[:, 0])
        other.append(values[:, 1])
        logger.debug("decay: n=%d done", n)
    estimates = [float(np.mean(values)) for values in sup_squares]
    fit = DecayFit(list(sizes), estimates, replications, exact=exact)
    fit.other_estimates = [float(np.mean(values)) for values in other]
    log_sizes = np.log(np.asarray(sizes, dtype=float))
    if all(estimate > 0 for estimate in fit.other_estimates):
        fit.other_slope = float(
            _log_log_slopes(log_sizes, np.log(np.asarray(fit.other_estimates)))
        )
    if any(estimate == 0 for estimate in estimates):
        fit.degenerate = True
        return fit

    fit.slope = float(_log_log_slopes(log_sizes, np.log(np.asarray(estimates))))
    stream = NoiseStream(config.seed, 0, StreamPurpose.BOOTSTRAP)
    resampled = np.column_stack(
        [
            values[stream.integers(replications, (bootstrap, replications))].mean(
                axis=1
            )
            for values in sup_squares
        ]
    )
    with np.errstate(divide="ignore"):
        slopes = _log_log_slopes(log_sizes, np.log(resampled))
    slopes = slopes[np.isfinite(slopes)]
    tail = 100 * (1 - level) / 2
    fit.ci = (
        float(np.percentile(slopes, tail)),
        float(np.percentile(slopes, 100 - tail)),
    )
    return fit


@dataclass(frozen=True)
class TieRow:
    dt: float
    steps: int
    tie_step_fraction: float
    tied_infection_fraction: float
    infections: int
    replications: int


@dataclass
class TieTable:
    rows: List[TieRow]

    @property
    def decreasing(self) -> bool:
        fractions = [row.tie_step_fraction for row in self.rows]
        if all(f == 0 for f in fractions):
            return True
        return all(a > b for a, b in zip(fractions, fractions[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": [asdict(row) for row in self.rows],
            "decreasing": self.decreasing,
        }


def _new_infections(cfg: RunConfig) -> np.ndarray:
    return run(cfg).new_infections


def tie_stats(
    config: RunConfig,
    dt_ladder: Sequence[float] = (4e-3, 2e-3, 1e-3),
    replications: int = 20,
) -> TieTable:
    """Fraction of steps in which two or more particles get infected."""
    rows = []
    for dt in dt_ladder:
        counts = np.concatenate(
            replicate(config.with_changes(dt=dt), replications, _new_infections)
        )
        tied = counts >= 2
        infections = int(counts.sum())
        rows.append(
            TieRow(
                dt=dt,
                steps=len(counts),
                tie_step_fraction=float(tied.mean()) if len(counts) else 0.0,
                tied_infection_fraction=(
                    float(counts[tied].sum() / infections) if infections else 0.0
                ),
                infections=infections,
                replications=replications,
            )
        )
    return TieTable(rows)


@dataclass(frozen=True)
class TauLawPoint:
    t: float
    empirical: float
    predicted: float
    stderr: float

    @property
    def discrepancy(self) -> float:
        return abs(self.empirical - self.predicted)

    @property
    def consistent(self) -> bool:
        return self.discrepancy <= 3 * self.stderr


@dataclass
class TauLawReport:
    points: List[TauLawPoint]
    tagged: int
    replications: int

    @property
    def max_discrepancy(self) -> float:
        return max((point.discrepancy for point in self.points), default=0.0)

    @property
    def consistent(self) -> bool:
        return all(point.consistent for point in self.points)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tagged": self.tagged,
            "replications": self.replications,
            "max_discrepancy": self.max_discrepancy,
            "consistent": self.consistent,
            "points": [
                {**asdict(point), "discrepancy": point.discrepancy}
                for point in self.points
            ],
        }


def _tau_law_sample(
    cfg: RunConfig, tagged: int, indices: Sequence[int]
) -> Tuple[np.ndarray, np.ndarray]:
    times = cfg.times[list(indices)]
    true_trace = run(cfg.with_changes(mode=Mode.TRUE, tagged=None))
    artificial = run(cfg.with_changes(mode=Mode.ARTIFICIAL, tagged=tagged))
    infected = true_trace.infection_times[tagged] <= times
    hazard = artificial.hazard(cfg.coefficients.rate)[tagged, list(indices)]
    return infected.astype(float), -np.expm1(-hazard)


def tau_law_check(
    config: RunConfig,
    replications: int = 10_000,
    check_times: Sequence[float] = (0.25, 0.5, 1.0),
    tagged: int = 0,
) -> TauLawReport:
    """Empirical law of the tagged infection time against the mean of
    1 - exp(-hazard) accumulated in the coupled system without that particle."""
    if config.n > 8:
        raise ValueError(f"the infection law check is meant for n <= 8, got {config.n}")
    indices = [config.step_index(t) for t in check_times]
    worker = partial(_tau_law_sample, tagged=tagged, indices=indices)
    results = replicate(config, replications, worker)
    indicators = np.array([r[0] for r in results])
    predictions = np.array([r[1] for r in results])
    points = []
    for j, t in enumerate(check_times):
        empirical, se_empirical = _mean_and_stderr(indicators[:, j])
        predicted, se_predicted = _mean_and_stderr(predictions[:, j])
        points.append(
            TauLawPoint(t, empirical, predicted, math.hypot(se_empirical, se_predicted))
        )
    return TauLawReport(points, tagged, replications)


@dataclass(frozen=True)
class EffectiveR:
    time: float
    estimate: float
    stderr: float
    replications: int


def _continuation(cfg: RunConfig, t: float) -> float:
    state = initial_state(cfg)
    start = cfg.step_index(t)
    for _ in range(start):
        step_system(state, cfg)
    times = cfg.times
    kernel = cfg.kernel
    own_share = np.asarray(kernel.cdf(times - times[start]))
    boundary = state.boundary + cfg.alpha / cfg.n * own_share
    contagion = np.full(len(times), 1.0 / cfg.n)
    environment = FrozenEnvironment(boundary, contagion)
    rate = cfg.coefficients.rate
    total = 0.0
    for k in range(start, cfg.steps):
        susceptible = state.particles.susceptible.copy()
        step_system(state, cfg, environment)
        total += rate.value(times[k], 1.0 / cfg.n) * float(
            np.sum(state.last_increments[susceptible])
        )
    return total


def effective_R(config: RunConfig, t: float, replications: int = 1000) -> EffectiveR:
    """Expected hazard collected over [t, t + dbar] by the population when one
    infection happens at t and nothing else feeds back.

    The front moves only by that infection's own kernel contribution and the
    contagiousness is held at 1/n.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    extended = config.with_changes(horizon=t + config.kernel.dbar)
    report = extended.check()
    if not report.ok:
        raise InvalidConfigError(report)
    values = np.array(
        replicate(extended, replications, partial(_continuation, t=t))
    )
    estimate, stderr = _mean_and_stderr(values)
    return EffectiveR(t, estimate, stderr, replications)


@dataclass(frozen=True)
class SirState:
    infected: float
    contagion: float
    beta: float
    dbar: float

    @property
    def susceptible(self) -> float:
        return 1.0 - self.infected

    @property
    def basic_reproduction(self) -> float:
        return self.beta * self.dbar

    @property
    def effective_reproduction(self) -> float:
        return self.basic_reproduction * self.susceptible


@dataclass
class SirSeries:
    times: np.ndarray
    infected: np.ndarray
    contagion: np.ndarray
    beta: float
    dbar: float

    @property
    def susceptible(self) -> np.ndarray:
        return 1.0 - self.infected

    @property
    def basic_reproduction(self) -> float:
        return self.beta * self.dbar

    @property
    def effective_reproduction(self) -> np.ndarray:
        return self.basic_reproduction * self.susceptible

    def state(self, k: int) -> SirState:
        return SirState(
            float(self.infected[k]), float(self.contagion[k]), self.beta, self.dbar
        )


def _sir_rhs(beta: float, dbar: float, infected: float, contagion: float) -> np.ndarray:
    new = beta * (1.0 - infected) * contagion
    return np.array([new, new - contagion / dbar])


def sir_integrate(
    beta: float,
    dbar: float,
    i0: float,
    c0: float,
    horizon: float,
    dt: float,
) -> SirSeries:
    """Classical fourth-order Runge-Kutta for dI = beta S C, dC = dI - C / dbar."""
    if beta < 0 or not dbar > 0:
        raise ValueError(f"need beta >= 0 and dbar > 0, got {beta}, {dbar}")
    if not 0 <= i0 <= 1 or c0 < 0:
        raise ValueError(f"need 0 <= I0 <= 1 and C0 >= 0, got {i0}, {c0}")
    if not dt > 0 or horizon < 0:
        raise ValueError(f"need dt > 0 and T >= 0, got {dt}, {horizon}")
    steps = int(round(horizon / dt))
    values = np.zeros((steps + 1, 2))
    values[0] = (i0, c0)
    for k in range(steps):
        y = values[k]
        k1 = _sir_rhs(beta, dbar, *y)
        k2 = _sir_rhs(beta, dbar, *(y + 0.5 * dt * k1))
        k3 = _sir_rhs(beta, dbar, *(y + 0.5 * dt * k2))
        k4 = _sir_rhs(beta, dbar, *(y + dt * k3))
        values[k + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return SirSeries(dt * np.arange(steps + 1), values[:, 0], values[:, 1], beta, dbar)


def _quadrature_contagion(trace: SystemTrace, front: FrontState, t: float) -> float:
    kernel = front.kernel
    total = 0.0
    for tau in front.infection_times:
        if tau > t:
            continue
        upper = min(t, tau + kernel.dbar)
        points = [t - p for p in kernel.breakpoints() if tau < t - p < upper] or None
        value, _ = integrate.quad(
            lambda s: kernel.density(t - s),
            tau,
            upper,
            points=points,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=200,
        )
        total += value
    return total / trace.n


def check_trace_invariants(
    trace: SystemTrace,
    config: RunConfig,
    samples: int = 100,
    tolerance: float = 1e-6,
) -> ValidationReport:
    """Evaluate the structural invariants of a finished run."""
    report = ValidationReport()
    counts = trace.infected * trace.n
    report.add(
        "infected proportion jumps by 1/n",
        bool(
            np.allclose(counts, np.round(counts), atol=1e-9)
            and np.all(np.diff(np.round(counts)) >= 0)
        ),
    )
    report.add(
        "infections match the step log",
        int(np.sum(trace.new_infections)) == int(np.round(counts[-1])),
    )
    if config.mode.is_barnes:
        report.add("front starts at a0", trace.front[0] == config.a0)
        return report

    report.add("front nondecreasing", bool(np.all(np.diff(trace.front) >= 0)))
    report.add("front starts at a0", trace.front[0] == config.a0)
    report.add(
        "front below a0 + alpha I",
        bool(np.all(trace.front <= config.a0 + config.alpha * trace.infected + 1e-12)),
    )
    report.add("contagiousness nonnegative", bool(np.all(trace.contagion >= -1e-15)))

    if trace.positions is not None:
        finite = np.isfinite(trace.positions)
        above = np.where(finite, trace.positions >= trace.front[None, :], True)
        report.add("positions above the front", bool(np.all(above)))
        pushed = trace.local_time_increments > 0
        on_front = trace.positions[:, 1:] == trace.front[None, 1:]
        # particles removed at the end of a step have no position to compare
        removed = ~finite[:, 1:]
        report.add(
            "local time complementarity",
            bool(np.all(~pushed | on_front | removed)),
        )
    else:
        report.warn("positions above the front", "paths were not recorded")

    front = FrontState(
        config.a0,
        config.alpha,
        config.kernel,
        sorted(float(tau) for tau in trace.infection_times if np.isfinite(tau)),
    )
    if front.infection_times and samples > 0:
        times = NoiseStream(config.seed, 1, StreamPurpose.BOOTSTRAP).uniforms(samples)
        times = times * trace.times[-1]
        worst = max(
            abs(
                contagiousness(front, t, trace.n)
                - _quadrature_contagion(trace, front, t)
            )
            for t in times
        )
        report.add(
            "contagiousness matches quadrature",
            worst <= tolerance,
            f"max deviation {worst:.3g}",
        )
    return report


def _before(taus: np.ndarray, cutoff: float) -> np.ndarray:
    return np.where(taus < cutoff, taus, np.inf)


def coupling_check(
    config: RunConfig, seeds: Sequence[int] = tuple(range(20)), tagged: int = 0
) -> ValidationReport:
    """Exact agreement of the true system with its artificial and globally
    reflected counterparts under common noise."""
    report = ValidationReport()
    artificial_ok, reflected_ok = True, True
    for seed in seeds:
        base = config.with_changes(seed=seed, record_paths=True, tagged=None)
        true_trace = run(base.with_changes(mode=Mode.TRUE))
        artificial = run(base.with_changes(mode=Mode.ARTIFICIAL, tagged=tagged))
        reflected = run(base.with_changes(mode=Mode.GLOBALLY_REFLECTED))

        tau_i = true_trace.infection_times[tagged]
        before = true_trace.times < tau_i
        others = np.arange(config.n) != tagged
        same_paths = np.array_equal(
            true_trace.positions[others][:, before],
            artificial.positions[others][:, before],
            equal_nan=True,
        )
        cut_true = _before(true_trace.infection_times, tau_i)
        cut_artificial = _before(artificial.infection_times, tau_i)
        artificial_ok &= same_paths and np.array_equal(
            cut_true[others], cut_artificial[others]
        )

        same_taus = np.array_equal(
            true_trace.infection_times, reflected.infection_times
        )
        own = true_trace.times[None, :] < true_trace.infection_times[:, None]
        same_own = np.array_equal(true_trace.positions[own], reflected.positions[own])
        same_front = np.array_equal(true_trace.front, reflected.front)
        reflected_ok &= same_taus and same_own and same_front
    report.add("artificial coupling", bool(artificial_ok), f"{len(seeds)} seeds")
    report.add("globally reflected coupling", bool(reflected_ok), f"{len(seeds)} seeds")
    return report


@dataclass
class BarnesGap:
    sizes: List[int]
    gaps: List[float]
    stderr: List[float]
    replications: int

    @property
    def decreasing(self) -> bool:
        return all(a > b for a, b in zip(self.gaps, self.gaps[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "decreasing": self.decreasing}


def _barrier_gap(cfg: RunConfig) -> float:
    tilde = run(cfg.with_changes(mode=Mode.BARNES_TILDE))
    bar = run(cfg.with_changes(mode=Mode.BARNES_BAR))
    return float(np.max(np.abs(tilde.front - bar.front)))


def barnes_gap(
    config: RunConfig,
    sizes: Sequence[int] = (32, 128, 512),
    replications: int = 20,
) -> BarnesGap:
    """sup_t of the distance between the two barrier variants under common noise."""
    gaps, errors = [], []
    for n in sizes:
        mean, stderr = _mean_and_stderr(
            np.array(replicate(config.with_changes(n=n), replications, _barrier_gap))
        )
        gaps.append(mean)
        errors.append(stderr)
    return BarnesGap(list(sizes), gaps, errors, replications)


def barnes_comparison(
    config: RunConfig,
) -> Tuple[SystemTrace, SystemTrace]:
    """Both barrier variants on common noise."""
    return (
        run(config.with_changes(mode=Mode.BARNES_TILDE)),
        run(config.with_changes(mode=Mode.BARNES_BAR)),
    )


def summarize_trace(trace: SystemTrace, rate: RateSpec) -> Dict[str, Optional[float]]:
    martingale = martingale_series(trace, rate, exact=False)
    exact = martingale_series(trace, rate, exact=True)
    return {
        "final_infected": float(trace.infected[-1]),
        "max_abs_martingale": float(np.max(np.abs(martingale))),
        "max_abs_martingale_exact": float(np.max(np.abs(exact))),
        "final_front": float(trace.front[-1]),
    }
