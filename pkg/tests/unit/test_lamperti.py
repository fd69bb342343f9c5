import math

import numpy as np
import pytest

from epidemic_front.coefficients import CoefficientSet
from epidemic_front.coefficients import DiffusionFamily
from epidemic_front.coefficients import DiffusionSpec
from epidemic_front.coefficients import DriftFamily
from epidemic_front.coefficients import DriftSpec
from epidemic_front.coefficients import KernelFamily
from epidemic_front.coefficients import KernelSpec
from epidemic_front.coefficients import RateSpec
from epidemic_front.lamperti import RescalingReport
from epidemic_front.lamperti import RescalingRow
from epidemic_front.lamperti import TransformContext
from epidemic_front.lamperti import distribution_identity_check
from epidemic_front.lamperti import growth_bound
from epidemic_front.lamperti import local_time_rescaling_check
from epidemic_front.lamperti import pathwise_check
from epidemic_front.lamperti import simulate_Z
from epidemic_front.lamperti import transformed_drift
from epidemic_front.lamperti import upsilon
from epidemic_front.lamperti import upsilon_inverse

TIMES = np.linspace(0.0, 1.0, 11)
CONSTANT = DiffusionSpec(c=2.0)
TIME_MODULATED = DiffusionSpec(
    DiffusionFamily.TIME_MODULATED, c=1.0, amplitude=0.3, frequency=math.pi
)
SPACE_MODULATED = DiffusionSpec(
    DiffusionFamily.SPACE_MODULATED, c=1.0, amplitude=0.4, center=0.5, width=0.3
)


def context(diffusion, boundary=None):
    boundary = np.zeros_like(TIMES) if boundary is None else boundary
    return TransformContext(diffusion, TIMES, boundary)


def test_context_rejects_decreasing_boundary():
    with pytest.raises(ValueError):
        context(CONSTANT, np.linspace(1.0, 0.0, 11))


def test_context_rejects_grid_mismatch():
    with pytest.raises(ValueError):
        TransformContext(CONSTANT, TIMES, np.zeros(3))


def test_context_rejects_degenerate_diffusion():
    with pytest.raises(ValueError):
        context(DiffusionSpec(c=0.0))


def test_context_boundary_and_velocity():
    ctx = context(CONSTANT, TIMES.copy())
    assert ctx.boundary_at(0.55) == pytest.approx(0.55)
    assert ctx.velocity_at(0.55) == pytest.approx(1.0)
    assert ctx.velocity_at(1.0) == pytest.approx(1.0)


def test_upsilon_constant_diffusion():
    ctx = context(CONSTANT)
    assert upsilon(ctx, 0.3, 1.0) == pytest.approx(0.5)
    assert upsilon_inverse(ctx, 0.3, 0.5) == pytest.approx(1.0)
    np.testing.assert_allclose(upsilon(ctx, 0.3, np.array([0.0, 2.0])), [0.0, 1.0])


def test_upsilon_time_modulated():
    ctx = context(TIME_MODULATED)
    assert upsilon(ctx, 0.5, 1.3) == pytest.approx(1.0)


def test_upsilon_space_modulated_inverse():
    ctx = context(SPACE_MODULATED)
    z = upsilon(ctx, 0.2, 0.8)
    assert 0.8 / SPACE_MODULATED.c_max < z < 0.8 / SPACE_MODULATED.c_min
    assert upsilon_inverse(ctx, 0.2, z) == pytest.approx(0.8, abs=1e-9)
    assert upsilon(ctx, 0.2, 0.0) == 0.0
    assert upsilon_inverse(ctx, 0.2, 0.0) == 0.0


def test_upsilon_rejects_negative_level():
    with pytest.raises(ValueError):
        upsilon(context(CONSTANT), 0.0, -0.1)


@pytest.mark.parametrize("diffusion", [CONSTANT, TIME_MODULATED, SPACE_MODULATED])
def test_upsilon_round_trip(diffusion):
    generator = np.random.default_rng(11)
    t = generator.uniform(0.0, 1.0, 1_000)
    z = generator.uniform(0.0, 3.0, 1_000)
    ctx = context(diffusion, 0.5 * TIMES)
    round_trip = upsilon(ctx, t, upsilon_inverse(ctx, t, z))
    np.testing.assert_allclose(round_trip, z, atol=1e-9)


def test_upsilon_increasing_in_level():
    ctx = context(SPACE_MODULATED)
    generator = np.random.default_rng(12)
    t = generator.uniform(0.0, 1.0, 1_000)
    y = np.sort(generator.uniform(0.0, 2.0, (1_000, 2)), axis=1) + [0.0, 1e-3]
    assert np.all(upsilon(ctx, t, y[:, 0]) < upsilon(ctx, t, y[:, 1]))


COEFFICIENT_SETS = (
    CoefficientSet(drift=DriftSpec(mu=-0.7), diffusion=CONSTANT),
    CoefficientSet(
        drift=DriftSpec(DriftFamily.MEAN_REVERTING, theta=0.8, m=1.5),
        diffusion=TIME_MODULATED,
    ),
    CoefficientSet(drift=DriftSpec(mu=0.3), diffusion=SPACE_MODULATED),
    CoefficientSet(
        drift=DriftSpec(DriftFamily.MEAN_REVERTING, theta=2.0, m=-0.5),
        diffusion=SPACE_MODULATED,
    ),
)


@pytest.mark.parametrize("coefficients", COEFFICIENT_SETS)
def test_transformed_drift_within_growth_bound(coefficients):
    ctx = context(coefficients.diffusion, 0.5 * TIMES**2)
    bound = growth_bound(ctx, coefficients)
    z = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 25)])
    for t in (0.0, 0.35, 0.8):
        drift = transformed_drift(ctx, coefficients, np.full_like(z, t), z)
        assert np.all(np.abs(drift) <= bound * (1 + z) + 1e-9)


@pytest.mark.parametrize(
    "boundary,expected",
    [(None, 0.5), (TIMES.copy(), 0.0)],
)
def test_transformed_drift_constant_diffusion(boundary, expected):
    ctx = context(CONSTANT, boundary)
    coefficients = CoefficientSet(drift=DriftSpec(mu=1.0), diffusion=CONSTANT)
    assert transformed_drift(ctx, coefficients, 0.25, 0.7) == pytest.approx(expected)


def test_transformed_drift_time_term():
    ctx = context(TIME_MODULATED)
    coefficients = CoefficientSet(diffusion=TIME_MODULATED)
    assert transformed_drift(ctx, coefficients, 0.0, 1.0) == pytest.approx(
        -0.3 * math.pi
    )


def test_growth_bound():
    coefficients = CoefficientSet(drift=DriftSpec(mu=1.0), diffusion=CONSTANT)
    assert growth_bound(context(CONSTANT), coefficients) == pytest.approx(0.5)
    moving = context(CONSTANT, TIMES.copy())
    assert growth_bound(moving, coefficients) == pytest.approx(1.0)


def test_simulate_Z_reflected_at_zero():
    ctx = context(CONSTANT)
    z_trace = simulate_Z(
        ctx,
        CoefficientSet(diffusion=CONSTANT),
        RateSpec(),
        np.zeros_like(TIMES),
        horizon=1.0,
        dt=0.01,
        seed=4,
        paths=50,
    )
    assert z_trace.positions.shape == (50, 101)
    assert np.all(z_trace.positions >= 0)
    assert np.all(np.diff(z_trace.local_time, axis=1) >= 0)
    assert np.all(np.isinf(z_trace.killing_time))
    assert z_trace.survivors(100).all()


def test_pathwise_check(small_config):
    result = pathwise_check(small_config)
    assert result.passed
    assert result.details["max_position_error"] <= 1e-12
    assert result.to_dict()["check"] == "pathwise"


def test_pathwise_check_needs_constant_diffusion(small_config):
    coefficients = CoefficientSet(diffusion=TIME_MODULATED)
    with pytest.raises(ValueError):
        pathwise_check(small_config.with_changes(coefficients=coefficients))


def test_distribution_identity_check_passes(small_config):
    config = small_config.with_changes(
        kernel=KernelSpec(KernelFamily.TRUNCATED_WEIBULL, dbar=1.0, scale=0.3),
        coefficients=CoefficientSet(
            diffusion=TIME_MODULATED, rate=small_config.coefficients.rate
        ),
    )
    result = distribution_identity_check(config, paths=400, check_times=(0.1, 0.2))
    rows = result.details["times"]
    assert [row["t"] for row in rows] == [0.1, 0.2]
    for row in rows:
        assert row["pvalue"] > 0.01
        assert min(row["survivors"]) > 100
    assert result.passed


def test_local_time_rescaling_constant_diffusion():
    ctx = context(CONSTANT)
    report = local_time_rescaling_check(
        ctx,
        CoefficientSet(diffusion=CONSTANT),
        paths=40,
        dt_ladder=(0.02, 0.01),
        eps_ladder=(0.2,),
        horizon=0.2,
    )
    assert len(report.rows) == 4
    assert all(error < 1e-9 for error in report.regulator_errors())
    assert set(report.to_dict()) == {"rows", "decreasing"}


@pytest.mark.parametrize(
    "errors,decreasing",
    [
        ([0.3, 0.2, 0.1], True),
        ([0.3, 0.3, 0.1], False),
        ([0.0, 0.0], True),
    ],
)
def test_rescaling_report_decreasing(errors, decreasing):
    rows = [RescalingRow(0.01, None, error, 10) for error in errors]
    rows.append(RescalingRow(0.01, 0.1, 5.0, 10))
    assert RescalingReport(rows).decreasing is decreasing
