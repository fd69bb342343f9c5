"""Parametric catalogs for the kernel, drift, diffusion, infection rate and
initial law, and the structural validation of a configuration."""
import math
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from typing import List
from typing import Optional
from typing import Union

import numpy as np
from scipy import integrate
from scipy import stats

ArrayLike = Union[float, np.ndarray]

NORMALIZATION_TOLERANCE = 1e-10


def _as_output(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _shaped(values: ArrayLike, *args: ArrayLike) -> ArrayLike:
    """Broadcast ``values`` to the joint shape of the arguments."""
    shape = np.broadcast_shapes(*(np.shape(arg) for arg in args))
    if shape == ():
        return float(values)
    return np.array(np.broadcast_to(values, shape), dtype=float)


class KernelFamily(str, Enum):
    UNIFORM = "uniform"
    TRUNCATED_WEIBULL = "truncated_weibull"
    TAPERED_UNIFORM = "tapered_uniform"


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily
    dbar: float
    shape: float = 2.0
    scale: float = 1.0
    taper: float = 0.0

    @property
    def smooth(self) -> bool:
        if self.family == KernelFamily.TRUNCATED_WEIBULL:
            return self.shape > 1
        return self.family == KernelFamily.TAPERED_UNIFORM

    def _weibull_cdf(self, u: np.ndarray) -> np.ndarray:
        return -np.expm1(-np.power(u / self.scale, self.shape))

    def _taper_mass(self, u: np.ndarray) -> np.ndarray:
        # integral of the rising cosine taper from 0 to u, u in [0, taper]
        eps = self.taper
        return 0.5 * u - eps / (2 * math.pi) * np.sin(math.pi * u / eps)

    def density(self, u: ArrayLike) -> ArrayLike:
        x = np.asarray(u, dtype=float)
        inside = (x >= 0) & (x <= self.dbar)
        if self.family == KernelFamily.UNIFORM:
            values = np.full_like(x, 1.0 / self.dbar)
        elif self.family == KernelFamily.TRUNCATED_WEIBULL:
            weibull = stats.weibull_min(c=self.shape, scale=self.scale)
            norm = float(self._weibull_cdf(np.asarray(self.dbar)))
            values = weibull.pdf(np.clip(x, 0.0, self.dbar)) / norm
        else:
            eps, dbar = self.taper, self.dbar
            y = np.clip(x, 0.0, dbar)
            rising = 0.5 * (1 - np.cos(math.pi * np.minimum(y, eps) / eps))
            falling = 0.5 * (1 - np.cos(math.pi * np.minimum(dbar - y, eps) / eps))
            values = np.minimum(rising, falling) / (dbar - eps)
        return _as_output(np.where(inside, values, 0.0), u)

    def cdf(self, u: ArrayLike) -> ArrayLike:
        x = np.clip(np.asarray(u, dtype=float), 0.0, self.dbar)
        if self.family == KernelFamily.UNIFORM:
            values = x / self.dbar
        elif self.family == KernelFamily.TRUNCATED_WEIBULL:
            values = self._weibull_cdf(x) / self._weibull_cdf(np.asarray(self.dbar))
        else:
            eps, dbar = self.taper, self.dbar
            norm = dbar - eps
            head = self._taper_mass(np.minimum(x, eps))
            body = np.clip(x - eps, 0.0, dbar - 2 * eps)
            tail_start = dbar - eps
            tail = np.where(
                x > tail_start,
                0.5 * eps - self._taper_mass(np.clip(dbar - x, 0.0, eps)),
                0.0,
            )
            values = (head + body + tail) / norm
        values = np.where(x >= self.dbar, 1.0, values)
        return _as_output(np.clip(values, 0.0, 1.0), u)

    def breakpoints(self) -> List[float]:
        if self.family == KernelFamily.TAPERED_UNIFORM:
            return [self.taper, self.dbar - self.taper]
        return []


def kernel_density(spec: KernelSpec, u: ArrayLike) -> ArrayLike:
    return spec.density(u)


def kernel_cdf(spec: KernelSpec, u: ArrayLike) -> ArrayLike:
    return spec.cdf(u)


class DriftFamily(str, Enum):
    CONSTANT = "constant"
    MEAN_REVERTING = "mean_reverting"


@dataclass(frozen=True)
class DriftSpec:
    family: DriftFamily = DriftFamily.CONSTANT
    mu: float = 0.0
    theta: float = 0.0
    m: float = 0.0

    @property
    def lipschitz(self) -> float:
        return self.theta if self.family == DriftFamily.MEAN_REVERTING else 0.0

    def value(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        values: ArrayLike = self.mu
        if self.family == DriftFamily.MEAN_REVERTING:
            values = self.theta * (self.m - np.asarray(x, dtype=float))
        return _shaped(values, t, x)


class DiffusionFamily(str, Enum):
    CONSTANT = "constant"
    TIME_MODULATED = "time_modulated"
    SPACE_MODULATED = "space_modulated"


@dataclass(frozen=True)
class DiffusionSpec:
    """sigma(t, x) from the catalog; ``c`` is the level c (constant) or c0."""

    family: DiffusionFamily = DiffusionFamily.CONSTANT
    c: float = 1.0
    amplitude: float = 0.0
    frequency: float = 0.0
    center: float = 0.0
    width: float = 1.0

    @property
    def c_min(self) -> float:
        if self.family == DiffusionFamily.CONSTANT:
            return self.c
        return self.c * (1 - self.amplitude)

    @property
    def c_max(self) -> float:
        if self.family == DiffusionFamily.CONSTANT:
            return self.c
        return self.c * (1 + self.amplitude)

    @property
    def space_dependent(self) -> bool:
        return self.family == DiffusionFamily.SPACE_MODULATED

    @property
    def time_dependent(self) -> bool:
        return self.family == DiffusionFamily.TIME_MODULATED

    @property
    def dx_bound(self) -> float:
        if self.space_dependent:
            return self.c * self.amplitude / self.width
        return 0.0

    @property
    def dt_bound(self) -> float:
        if self.time_dependent:
            return self.c * self.amplitude * abs(self.frequency)
        return 0.0

    def value(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        if self.family == DiffusionFamily.CONSTANT:
            values: ArrayLike = self.c
        elif self.family == DiffusionFamily.TIME_MODULATED:
            values = self.c * (
                1 + self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float))
            )
        else:
            u = (np.asarray(x, dtype=float) - self.center) / self.width
            values = self.c * (1 + self.amplitude * np.tanh(u))
        return _shaped(values, t, x)

    def dt(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        values: ArrayLike = 0.0
        if self.time_dependent:
            phase = self.frequency * np.asarray(t, dtype=float)
            values = self.c * self.amplitude * self.frequency * np.cos(phase)
        return _shaped(values, t, x)

    def dx(self, t: ArrayLike, x: ArrayLike) -> ArrayLike:
        values: ArrayLike = 0.0
        if self.space_dependent:
            slope = np.tanh((np.asarray(x, dtype=float) - self.center) / self.width)
            values = self.c * self.amplitude / self.width * (1 - slope**2)
        return _shaped(values, t, x)


class RateFamily(str, Enum):
    CONSTANT = "constant"
    AFFINE = "affine"


@dataclass(frozen=True)
class RateSpec:
    """gamma(t, c) = g0 + g1 * c; the constant family has g1 = 0."""

    family: RateFamily = RateFamily.CONSTANT
    g0: float = 0.0
    g1: float = 0.0

    @property
    def identically_zero(self) -> bool:
        return self.g0 == 0 and (self.family == RateFamily.CONSTANT or self.g1 == 0)

    def value(self, t: ArrayLike, c: ArrayLike) -> ArrayLike:
        values: ArrayLike = self.g0
        if self.family == RateFamily.AFFINE:
            # contagion is nonnegative in the epidemic; barrier velocities may not be
            values = self.g0 + self.g1 * np.maximum(np.asarray(c, dtype=float), 0.0)
        return _shaped(values, t, c)


@dataclass(frozen=True)
class CoefficientSet:
    drift: DriftSpec = field(default_factory=DriftSpec)
    diffusion: DiffusionSpec = field(default_factory=DiffusionSpec)
    rate: RateSpec = field(default_factory=RateSpec)


class InitialFamily(str, Enum):
    POINT = "point"
    TRUNCATED_GAUSSIAN = "truncated_gaussian"


@dataclass(frozen=True)
class InitialLaw:
    family: InitialFamily = InitialFamily.POINT
    a0: float = 0.0
    x0: float = 1.0
    mean: float = 1.0
    stdev: float = 1.0

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        """Map uniform draws in (0, 1) to starting levels strictly above a0."""
        u = np.asarray(uniforms, dtype=float)
        if self.family == InitialFamily.POINT:
            return np.full(u.shape, self.x0)
        lower = (self.a0 - self.mean) / self.stdev
        values = stats.truncnorm.ppf(
            u, lower, np.inf, loc=self.mean, scale=self.stdev
        )
        return np.maximum(values, np.nextafter(self.a0, np.inf))


class Status(str, Enum):
    PASS = "pass"
    WARN = "warn"
    FAIL = "fail"


@dataclass(frozen=True)
class ValidationEntry:
    condition: str
    status: Status
    message: str = ""


@dataclass
class ValidationReport:
    entries: List[ValidationEntry] = field(default_factory=list)
    lamperti_eligible: bool = False

    def add(self, condition: str, passed: bool, message: str = "") -> None:
        self.entries.append(
            ValidationEntry(condition, Status.PASS if passed else Status.FAIL, message)
        )

    def warn(self, condition: str, message: str) -> None:
        self.entries.append(ValidationEntry(condition, Status.WARN, message))

    def extend(self, other: "ValidationReport") -> None:
        self.entries.extend(other.entries)

    @property
    def ok(self) -> bool:
        return all(entry.status != Status.FAIL for entry in self.entries)

    def failures(self) -> List[ValidationEntry]:
        return [entry for entry in self.entries if entry.status == Status.FAIL]

    def status_of(self, condition: str) -> Optional[Status]:
        for entry in self.entries:
            if entry.condition == condition:
                return entry.status
        return None

    def __str__(self) -> str:
        return "\n".join(
            f"[{entry.status.value}] {entry.condition}"
            + (f": {entry.message}" if entry.message else "")
            for entry in self.entries
        )


def _kernel_mass(kernel: KernelSpec) -> float:
    points = kernel.breakpoints() or None
    mass, _ = integrate.quad(
        kernel.density,
        0.0,
        kernel.dbar,
        points=points,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=200,
    )
    return mass


def _check_kernel(kernel: KernelSpec, report: ValidationReport) -> None:
    if not kernel.dbar > 0 or not math.isfinite(kernel.dbar):
        report.add("kernel support", False, f"dbar must be positive, got {kernel.dbar}")
        return
    if kernel.family == KernelFamily.TRUNCATED_WEIBULL and not (
        kernel.shape > 0 and kernel.scale > 0
    ):
        report.add(
            "kernel support",
            False,
            f"Weibull shape and scale must be positive, got {kernel.shape}, "
            f"{kernel.scale}",
        )
        return
    if kernel.family == KernelFamily.TAPERED_UNIFORM and not (
        0 < kernel.taper <= kernel.dbar / 2
    ):
        report.add(
            "kernel support",
            False,
            f"taper width must lie in (0, dbar/2], got {kernel.taper}",
        )
        return
    report.add("kernel support", True, f"[0, {kernel.dbar}]")
    mass = _kernel_mass(kernel)
    report.add(
        "kernel normalization",
        abs(mass - 1.0) <= NORMALIZATION_TOLERANCE,
        f"integral {mass:.12f}",
    )


def _check_coefficients(coefficients: CoefficientSet, report: ValidationReport) -> None:
    drift = coefficients.drift
    if drift.family == DriftFamily.MEAN_REVERTING:
        report.add(
            "Lipschitz drift",
            drift.theta >= 0 and math.isfinite(drift.theta),
            f"L = {drift.lipschitz}",
        )
    else:
        report.add("Lipschitz drift", math.isfinite(drift.mu), "L = 0")

    diffusion = coefficients.diffusion
    if not diffusion.c > 0:
        report.add(
            "non-degenerate diffusion",
            False,
            f"level must be positive, got {diffusion.c}",
        )
    elif diffusion.family != DiffusionFamily.CONSTANT and not (
        0 <= diffusion.amplitude < 1
    ):
        report.add(
            "non-degenerate diffusion",
            False,
            f"amplitude must lie in [0, 1), got {diffusion.amplitude}",
        )
    elif diffusion.space_dependent and not diffusion.width > 0:
        report.add(
            "non-degenerate diffusion",
            False,
            f"width must be positive, got {diffusion.width}",
        )
    else:
        report.add(
            "non-degenerate diffusion",
            True,
            f"{diffusion.c_min} <= sigma <= {diffusion.c_max}",
        )
    report.add(
        "bounded diffusion",
        math.isfinite(diffusion.c_max),
        f"c_max = {diffusion.c_max}",
    )

    rate = coefficients.rate
    nonnegative = rate.g0 >= 0 and (rate.family == RateFamily.CONSTANT or rate.g1 >= 0)
    report.add(
        "continuous nonnegative rate",
        nonnegative,
        f"g0 = {rate.g0}, g1 = {rate.g1}",
    )


def _check_initial(initial: InitialLaw, report: ValidationReport) -> None:
    if initial.family == InitialFamily.POINT:
        report.add(
            "initial support above a0",
            initial.x0 > initial.a0,
            f"x0 = {initial.x0}, a0 = {initial.a0}",
        )
    else:
        report.add(
            "initial support above a0",
            initial.stdev > 0,
            f"truncated at {initial.a0}, stdev = {initial.stdev}",
        )
    # Gaussian tails are exp(delta x^2)-integrable for any delta < 1/(2 stdev^2)
    report.add("sub-Gaussian initial law", True, "holds analytically")


def validate_config(
    kernel: KernelSpec,
    coefficients: CoefficientSet,
    initial: InitialLaw,
    lamperti: bool = False,
) -> ValidationReport:
    report = ValidationReport()
    _check_kernel(kernel, report)
    _check_coefficients(coefficients, report)
    _check_initial(initial, report)
    report.lamperti_eligible = kernel.smooth
    if lamperti and not kernel.smooth:
        report.warn(
            "Lamperti eligibility",
            f"kernel {kernel.family.value} is not absolutely continuous",
        )
    return report
