import math
from operator import attrgetter

import numpy as np
import pytest

from epidemic_front.analysis import DecayFit
from epidemic_front.analysis import TieRow
from epidemic_front.analysis import TieTable
from epidemic_front.analysis import _terminal_martingales
from epidemic_front.analysis import barnes_comparison
from epidemic_front.analysis import barnes_gap
from epidemic_front.analysis import check_trace_invariants
from epidemic_front.analysis import compensator_bias
from epidemic_front.analysis import compute_V
from epidemic_front.analysis import coupling_check
from epidemic_front.analysis import effective_R
from epidemic_front.analysis import l2_decay
from epidemic_front.analysis import martingale_series
from epidemic_front.analysis import martingale_test
from epidemic_front.analysis import replicate
from epidemic_front.analysis import sir_integrate
from epidemic_front.analysis import summarize_trace
from epidemic_front.analysis import tau_law_check
from epidemic_front.analysis import tie_stats
from epidemic_front.coefficients import CoefficientSet
from epidemic_front.coefficients import InitialFamily
from epidemic_front.coefficients import InitialLaw
from epidemic_front.coefficients import RateSpec
from epidemic_front.coefficients import Status
from epidemic_front.epidemic import Mode
from epidemic_front.epidemic import SystemTrace
from epidemic_front.epidemic import run

CONSTANT_RATE = RateSpec(g0=2.0)


def two_particle_trace():
    return SystemTrace(
        times=np.array([0.0, 0.1, 0.2]),
        front=np.zeros(3),
        infected=np.array([0.0, 0.5, 0.5]),
        contagion=np.zeros(3),
        infection_times=np.array([0.1, np.inf]),
        local_time_increments=np.array([[0.1, 0.2], [0.0, 0.3]]),
        new_infections=np.array([1, 0]),
        clocks=np.array([0.1, 5.0]),
        n=2,
    )


def test_compute_V_linear():
    V = compute_V(two_particle_trace(), CONSTANT_RATE)
    np.testing.assert_allclose(V, [0.0, 0.1, 0.4])


def test_compute_V_exact():
    V = compute_V(two_particle_trace(), CONSTANT_RATE, exact=True)
    first = -math.expm1(-0.2) / 2
    np.testing.assert_allclose(V, [0.0, first, first - math.expm1(-0.6) / 2])


def test_compute_V_exact_below_linear(small_config):
    trace = run(small_config)
    rate = small_config.coefficients.rate
    assert np.all(compute_V(trace, rate, exact=True) <= compute_V(trace, rate) + 1e-15)


def test_compute_V_quiet(quiet_config):
    trace = run(quiet_config)
    V = compute_V(trace, quiet_config.coefficients.rate)
    np.testing.assert_array_equal(V, np.zeros(quiet_config.steps + 1))


def test_compute_V_rejects_missing_increments():
    trace = two_particle_trace()
    trace.local_time_increments = np.zeros((2, 5))
    with pytest.raises(ValueError):
        compute_V(trace, CONSTANT_RATE)


def test_martingale_series_corrupt():
    trace = two_particle_trace()
    plain = martingale_series(trace, CONSTANT_RATE, exact=False)
    scaled = martingale_series(trace, CONSTANT_RATE, exact=False, corrupt=2.0)
    np.testing.assert_allclose(plain, [0.0, 0.4, 0.1])
    np.testing.assert_allclose(scaled, [0.0, 0.3, -0.3])


def test_replicate_keeps_order(small_config):
    config = small_config.with_changes(threads=3)
    results = replicate(config, 4, attrgetter("replication", "threads"))
    assert results == [(0, 1), (1, 1), (2, 1), (3, 1)]


def test_replicate_same_results_in_processes(small_config):
    single = replicate(small_config, 6, _terminal_martingales)
    pooled = replicate(small_config.with_changes(threads=2), 6, _terminal_martingales)
    assert single == pooled


def test_martingale_test_needs_replications(small_config):
    with pytest.raises(ValueError):
        martingale_test(small_config, replications=29)


@pytest.fixture(scope="function")
def unit_horizon_config(small_config):
    yield small_config.with_changes(n=32, horizon=1.0, dt=0.02)


def test_martingale_test_flags_corrupted_compensator(unit_horizon_config):
    honest = martingale_test(unit_horizon_config, replications=100)
    corrupted = martingale_test(unit_horizon_config, replications=100, corrupt=3.0)
    assert honest.consistent
    assert honest.exact_consistent
    assert not corrupted.consistent
    for good, bad in zip(honest.windows, corrupted.windows):
        assert bad.mean < good.mean


def test_martingale_report_carries_both_compensators(small_config):
    windows = ((0.05, 0.1), (0.1, 0.2))
    report = martingale_test(small_config, replications=30, windows=windows)
    content = report.to_dict()
    assert content["compensator"] == "exact"
    assert content["windows"] == content["exact"]["windows"]
    assert len(content["literal"]["windows"]) == 2
    for exact, literal in zip(report.exact_windows, report.literal_windows):
        # gamma dl >= 1 - exp(-gamma dl), so the literal increments sit lower
        assert literal.mean <= exact.mean + 1e-12
    literal_keyed = martingale_test(
        small_config, replications=30, windows=windows, exact=False
    )
    assert literal_keyed.windows == report.literal_windows
    assert literal_keyed.to_dict()["compensator"] == "literal"


def test_compensator_bias_shrinks_with_step(small_config):
    config = small_config.with_changes(n=64, horizon=0.5)
    table = compensator_bias(config, dt_ladder=(0.02, 0.01, 0.005), replications=60)
    assert table.shrinking
    assert all(row.gap > 0 for row in table.rows)
    coarse, fine = table.rows[0], table.rows[-1]
    assert coarse.literal_mean < 0
    assert abs(fine.literal_mean) < abs(coarse.literal_mean)
    assert table.to_dict()["shrinking"] is True


def test_compensator_bias_rejects_increasing_ladder(small_config):
    with pytest.raises(ValueError):
        compensator_bias(small_config, dt_ladder=(0.01, 0.02), replications=2)


@pytest.mark.parametrize(
    "sizes",
    [(8, 16, 32), (8, 16, 32, 48), (64, 32, 16, 8)],
)
def test_l2_decay_rejects_sizes(small_config, sizes):
    with pytest.raises(ValueError):
        l2_decay(small_config, sizes=sizes, replications=2)


def test_l2_decay_degenerate_without_infections(quiet_config):
    fit = l2_decay(quiet_config, sizes=(2, 4, 8, 16), replications=2, bootstrap=10)
    assert fit.degenerate
    assert fit.to_dict()["slope"] is None
    assert fit.monotone


def test_l2_decay_fit(small_config):
    fit = l2_decay(small_config, sizes=(4, 8, 16, 32), replications=5, bootstrap=50)
    assert len(fit.estimates) == 4
    content = fit.to_dict()
    assert content["compensator"] == "exact"
    assert len(content["literal"]["estimates"]) == 4
    if not fit.degenerate:
        assert fit.ci[0] <= fit.ci[1]
        assert math.isfinite(fit.slope)


def test_decay_fit_monotone():
    assert DecayFit([1, 2], [0.5, 0.25], 10).monotone
    assert not DecayFit([1, 2], [0.25, 0.5], 10).monotone


def test_tie_stats_without_infections(quiet_config):
    table = tie_stats(quiet_config, dt_ladder=(0.02, 0.01), replications=2)
    assert [row.dt for row in table.rows] == [0.02, 0.01]
    assert table.rows[1].steps == 2 * quiet_config.steps
    assert table.decreasing
    assert table.to_dict()["decreasing"] is True


@pytest.mark.parametrize(
    "fractions,decreasing",
    [([0.2, 0.1, 0.05], True), ([0.2, 0.2, 0.05], False), ([0.0, 0.0], True)],
)
def test_tie_table_decreasing(fractions, decreasing):
    rows = [TieRow(0.01, 100, f, f, 10, 5) for f in fractions]
    assert TieTable(rows).decreasing is decreasing


def test_tau_law_check_needs_small_population(small_config):
    with pytest.raises(ValueError):
        tau_law_check(small_config, replications=5)


def test_tau_law_check_points(small_config):
    report = tau_law_check(
        small_config.with_changes(n=4), replications=20, check_times=(0.1, 0.2)
    )
    assert [point.t for point in report.points] == [0.1, 0.2]
    for point in report.points:
        assert 0.0 <= point.empirical <= 1.0
        assert 0.0 <= point.predicted <= 1.0
    assert report.to_dict()["tagged"] == 0


def test_tau_law_check_consistent_in_small_population(small_config):
    config = small_config.with_changes(n=4, horizon=1.0, dt=0.02)
    report = tau_law_check(config, replications=400)
    assert [point.t for point in report.points] == [0.25, 0.5, 1.0]
    assert report.consistent
    assert all(0 < point.stderr < 0.05 for point in report.points)


def test_tau_law_check_single_particle_constant_rate(small_config):
    config = small_config.with_changes(
        n=1,
        horizon=1.0,
        dt=0.02,
        coefficients=CoefficientSet(rate=RateSpec(g0=2.0)),
        initial=InitialLaw(InitialFamily.POINT, x0=0.01),
    )
    report = tau_law_check(config, replications=400)
    assert report.consistent
    infected = [point.empirical for point in report.points]
    assert infected == sorted(infected)
    assert infected[-1] > 0.3


def test_effective_R_rejects_negative_time(small_config):
    with pytest.raises(ValueError):
        effective_R(small_config, -0.1, replications=2)


def test_effective_R_without_rate(quiet_config):
    result = effective_R(quiet_config, 0.05, replications=3)
    assert result.estimate == 0.0
    assert result.replications == 3


def test_effective_R_nonnegative(small_config):
    result = effective_R(small_config, 0.05, replications=3)
    assert result.estimate >= 0.0
    assert result.time == 0.05


def test_sir_without_transmission():
    series = sir_integrate(0.0, 15.0, 0.1, 0.2, horizon=10.0, dt=0.1)
    np.testing.assert_allclose(series.infected, 0.1)
    np.testing.assert_allclose(
        series.contagion, 0.2 * np.exp(-series.times / 15.0), rtol=1e-9
    )


def test_sir_quantities():
    series = sir_integrate(0.3, 15.0, 0.01, 0.01, horizon=50.0, dt=0.1)
    np.testing.assert_allclose(series.susceptible + series.infected, 1.0)
    assert series.basic_reproduction == pytest.approx(4.5)
    np.testing.assert_allclose(
        series.effective_reproduction, 4.5 * series.susceptible
    )
    assert np.all(np.diff(series.infected) >= 0)
    state = series.state(len(series.times) - 1)
    assert state.effective_reproduction == pytest.approx(
        series.effective_reproduction[-1]
    )


def test_sir_step_refinement():
    coarse = sir_integrate(0.3, 15.0, 0.01, 0.01, horizon=50.0, dt=0.1)
    fine = sir_integrate(0.3, 15.0, 0.01, 0.01, horizon=50.0, dt=0.05)
    assert coarse.infected[-1] == pytest.approx(fine.infected[-1], abs=1e-6)
    assert coarse.contagion[-1] == pytest.approx(fine.contagion[-1], abs=1e-6)


@pytest.mark.parametrize(
    "args",
    [
        (-0.1, 15.0, 0.01, 0.01, 10.0, 0.1),
        (0.3, 0.0, 0.01, 0.01, 10.0, 0.1),
        (0.3, 15.0, 1.5, 0.01, 10.0, 0.1),
        (0.3, 15.0, 0.01, -0.01, 10.0, 0.1),
        (0.3, 15.0, 0.01, 0.01, 10.0, 0.0),
        (0.3, 15.0, 0.01, 0.01, -1.0, 0.1),
    ],
)
def test_sir_rejects_inputs(args):
    with pytest.raises(ValueError):
        sir_integrate(*args)


def test_trace_invariants_hold(small_config):
    config = small_config.with_changes(n=32, record_paths=True)
    report = check_trace_invariants(run(config), config, samples=20)
    assert report.ok, str(report)
    assert report.status_of("local time complementarity") == Status.PASS


def test_trace_invariants_without_paths(small_config):
    report = check_trace_invariants(run(small_config), small_config, samples=5)
    assert report.status_of("positions above the front") == Status.WARN


def test_trace_invariants_catch_receding_front(small_config):
    trace = run(small_config)
    trace.front[-1] = trace.front[-2] - 0.1
    report = check_trace_invariants(trace, small_config, samples=0)
    assert report.status_of("front nondecreasing") == Status.FAIL
    assert not report.ok


def test_trace_invariants_barnes(small_config):
    config = small_config.with_changes(mode=Mode.BARNES_BAR, u=1.0)
    report = check_trace_invariants(run(config), config)
    assert report.ok


def test_coupling_check(small_config):
    report = coupling_check(small_config, seeds=range(3))
    assert report.status_of("artificial coupling") == Status.PASS
    assert report.status_of("globally reflected coupling") == Status.PASS


def test_barnes_gap(small_config):
    config = small_config.with_changes(mode=Mode.BARNES_TILDE, u=1.0)
    gap = barnes_gap(config, sizes=(4, 8), replications=2)
    assert gap.sizes == [4, 8]
    assert all(g >= 0 for g in gap.gaps)
    assert set(gap.to_dict()) == {
        "sizes",
        "gaps",
        "stderr",
        "replications",
        "decreasing",
    }


def test_barnes_comparison_common_noise(quiet_config):
    tilde, bar = barnes_comparison(quiet_config.with_changes(u=1.0))
    assert tilde.mode == Mode.BARNES_TILDE
    assert bar.mode == Mode.BARNES_BAR
    np.testing.assert_allclose(tilde.front, bar.front)


def test_summarize_trace(small_config):
    trace = run(small_config)
    summary = summarize_trace(trace, small_config.coefficients.rate)
    assert set(summary) == {
        "final_infected",
        "max_abs_martingale",
        "max_abs_martingale_exact",
        "final_front",
    }
    assert summary["final_front"] == trace.front[-1]
