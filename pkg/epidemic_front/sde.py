import logging
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import List
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np

from epidemic_front.coefficients import ArrayLike
from epidemic_front.coefficients import CoefficientSet
from epidemic_front.coefficients import DiffusionSpec
from epidemic_front.utils import NonFiniteInputError
from epidemic_front.utils import map_parallel

logger = logging.getLogger(__name__)

CHUNK_SIZE = 256


class StreamPurpose(IntEnum):
    INCREMENTS = 0
    CLOCKS = 1
    INITIAL = 2
    BOOTSTRAP = 3


class NoiseStream:
    """Counter-based stream of draws owned by one particle.

    The Philox key is derived from ``(seed, replication)`` and the spawn key
    ``(purpose, index)``, so the draws of a particle never depend on how many
    other particles exist or in which order they are generated.
    """

    def __init__(
        self,
        seed: int,
        index: int,
        purpose: StreamPurpose = StreamPurpose.INCREMENTS,
        replication: int = 0,
    ):
        if seed < 0 or index < 0 or replication < 0:
            raise ValueError(
                f"seed, index and replication must be nonnegative, got "
                f"{seed}, {index}, {replication}"
            )
        self.seed = int(seed)
        self.index = int(index)
        self.purpose = StreamPurpose(purpose)
        self.replication = int(replication)
        self.counter = 0
        self._generator = self._make_generator()

    def _make_generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=[self.seed, self.replication],
            spawn_key=(int(self.purpose), self.index),
        )
        return np.random.Generator(np.random.Philox(sequence))

    def normals(self, size: int) -> np.ndarray:
        draws = self._generator.standard_normal(size)
        self.counter += size
        return draws

    def exponentials(self, size: int) -> np.ndarray:
        draws = self._generator.standard_exponential(size)
        self.counter += size
        return draws

    def uniforms(self, size: int) -> np.ndarray:
        # strictly inside (0, 1)
        draws = (self._generator.integers(0, 2**53, size) + 0.5) / 2.0**53
        self.counter += size
        return draws

    def integers(self, high: int, size: Union[int, Tuple[int, ...]]) -> np.ndarray:
        draws = self._generator.integers(0, high, size)
        self.counter += int(np.prod(size))
        return draws

    def replay(self) -> "NoiseStream":
        return NoiseStream(self.seed, self.index, self.purpose, self.replication)


def increment_block(
    seed: int, indices: Sequence[int], steps: int, replication: int = 0
) -> np.ndarray:
    """Stack the first ``steps`` normal draws of each index into a matrix."""
    block = np.zeros((len(indices), steps))
    for row, i in enumerate(indices):
        stream = NoiseStream(seed, i, StreamPurpose.INCREMENTS, replication)
        block[row] = stream.normals(steps)
    return block


@dataclass(frozen=True)
class StepResult:
    position: ArrayLike
    local_time: ArrayLike
    pre_reflection: ArrayLike


def _require_finite(**values: ArrayLike) -> None:
    for name, value in values.items():
        if not np.all(np.isfinite(value)):
            raise NonFiniteInputError(f"{name} must be finite, got {value}")


def reflected_euler_step(
    x: ArrayLike,
    t: float,
    dt: float,
    boundary_next: ArrayLike,
    coeffs: CoefficientSet,
    xi: ArrayLike,
) -> StepResult:
    """One projected Euler step against the end-of-step boundary.

    The local-time increment is the Skorokhod push ``max(0, boundary - x*)``.
    Works elementwise on arrays of particles.
    """
    _require_finite(x=x, t=t, dt=dt, boundary_next=boundary_next, xi=xi)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    drift = coeffs.drift.value(t, x)
    sigma = coeffs.diffusion.value(t, x)
    pre_reflection = x + drift * dt + sigma * math.sqrt(dt) * np.asarray(xi)
    position = np.maximum(pre_reflection, boundary_next)
    local_time = position - pre_reflection
    if np.ndim(position) == 0:
        return StepResult(float(position), float(local_time), float(pre_reflection))
    return StepResult(position, local_time, pre_reflection)


def occupation_local_time(
    path: np.ndarray,
    boundary: Union[np.ndarray, float],
    eps: float,
    coeffs: Union[CoefficientSet, DiffusionSpec],
    times: np.ndarray,
) -> Union[float, np.ndarray]:
    """Occupation-density estimate of the local time along the boundary.

    Sums ``sigma(t_k, x_k)^2 dt_k / eps`` over left grid points where the path
    sits in ``[boundary_k, boundary_k + eps)``. ``path`` may carry leading
    batch dimensions; the grid is the last axis.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    diffusion = coeffs.diffusion if isinstance(coeffs, CoefficientSet) else coeffs
    path = np.asarray(path, dtype=float)
    times = np.asarray(times, dtype=float)
    boundary = np.broadcast_to(np.asarray(boundary, dtype=float), times.shape)
    if path.shape[-1] != times.shape[0]:
        raise ValueError("path and boundary must share the time grid")
    left = path[..., :-1]
    band = (left >= boundary[:-1]) & (left < boundary[:-1] + eps)
    weight = diffusion.value(times[:-1], left) ** 2 * np.diff(times)
    total = np.sum(np.where(band, weight, 0.0), axis=-1) / eps
    return float(total) if np.ndim(total) == 0 else total


@dataclass(frozen=True)
class LocalTimeStatistics:
    paths: int
    dt: float
    horizon: float
    regulator_mean: float
    regulator_stderr: float
    eps: Tuple[float, ...]
    occupation_mean: Tuple[float, ...]

    @property
    def ratios(self) -> Tuple[float, ...]:
        if self.regulator_mean == 0:
            return tuple(math.nan for _ in self.eps)
        return tuple(value / self.regulator_mean for value in self.occupation_mean)


def _local_time_chunk(
    indices: List[int],
    steps: int,
    dt: float,
    eps_ladder: Sequence[float],
    coeffs: CoefficientSet,
    x0: float,
    seed: int,
) -> Tuple[np.ndarray, np.ndarray]:
    noise = increment_block(seed, indices, steps)
    position = np.full(len(indices), x0, dtype=float)
    regulator = np.zeros(len(indices))
    occupation = np.zeros((len(eps_ladder), len(indices)))
    eps = np.asarray(eps_ladder, dtype=float)[:, None]
    for k in range(steps):
        t = k * dt
        weight = coeffs.diffusion.value(t, position) ** 2 * dt
        occupation += np.where(position < eps, weight, 0.0) / eps
        result = reflected_euler_step(position, t, dt, 0.0, coeffs, noise[:, k])
        position = result.position
        regulator += result.local_time
    return regulator, occupation


def reflected_local_time_statistics(
    paths: int,
    horizon: float,
    dt: float,
    eps_ladder: Sequence[float],
    seed: int = 0,
    coeffs: CoefficientSet = CoefficientSet(),
    x0: float = 0.0,
    threads: int = 1,
) -> LocalTimeStatistics:
    """Simulate paths reflected at the fixed level 0 and compare the regulator
    with occupation-density local times for each band width."""
    steps = int(round(horizon / dt))
    chunks = [
        list(range(start, min(start + CHUNK_SIZE, paths)))
        for start in range(0, paths, CHUNK_SIZE)
    ]
    logger.debug("local time statistics: %d paths in %d chunks", paths, len(chunks))
    results = map_parallel(
        lambda chunk: _local_time_chunk(
            chunk, steps, dt, eps_ladder, coeffs, x0, seed
        ),
        chunks,
        threads,
    )
    regulator = np.concatenate([r for r, _ in results])
    occupation = np.concatenate([o for _, o in results], axis=1)
    stderr = float(np.std(regulator, ddof=1) / math.sqrt(paths)) if paths > 1 else 0.0
    return LocalTimeStatistics(
        paths=paths,
        dt=dt,
        horizon=horizon,
        regulator_mean=float(np.mean(regulator)),
        regulator_stderr=stderr,
        eps=tuple(float(e) for e in eps_ladder),
        occupation_mean=tuple(float(v) for v in occupation.mean(axis=1)),
    )
