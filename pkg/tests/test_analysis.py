import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustdd.analysis import (
    MAP_T_P,
    MEAN_FIDELITY,
    MEAN_PROPAGATOR,
    MapResult,
    decay_time,
    default_map_program,
    duty_cycle_sweep,
    fidelity_map,
    fidelity_vs_pulses,
)
from robustdd.noise import GaussianEnsemble, NoiseProcess, ensemble_epsilons
from robustdd.sequences import Family, SequenceSpec, expand_sequence
from robustdd.simulator import TraceResult

PI = math.pi
AXIS = np.linspace(-0.2, 0.2, 17)


def spec(family, **kw):
    return SequenceSpec(Family(family), 2 * MAP_T_P, MAP_T_P, **kw)


MAP_SPECS = [spec("cpmg"), spec("udd", pulse_count=4), spec("xy4"), spec("xy4", symmetric=True),
             spec("xy4", robust_pulses=True), spec("xy4", symmetric=True, robust_pulses=True), spec("xy8"),
             spec("xy8", symmetric=True), spec("xy16"), spec("xy16", symmetric=True),
             spec("cdd", concatenation_level=2), spec("cdd", concatenation_level=2, symmetric=True), spec("kdd")]


def test_error_free_xy4_curve():
    c = fidelity_vs_pulses(spec("xy4"), GaussianEnsemble(0.0, 1), 40)
    np.testing.assert_allclose(c.fidelity[3::4], 1.0, atol=1e-12)
    # after X then Y the propagator is proportional to sigma_z
    assert c.fidelity[1] == pytest.approx(0.0, abs=1e-12)
    assert list(c.pulse_count[:3]) == [1, 2, 3]


def test_curve_recipes_and_validation():
    ens = GaussianEnsemble(0.1, 400, seed=1)
    a = fidelity_vs_pulses(spec("cpmg"), ens, 30, MEAN_FIDELITY)
    b = fidelity_vs_pulses(spec("cpmg"), ens, 30, MEAN_PROPAGATOR)
    assert a.recipe == MEAN_FIDELITY and b.recipe == MEAN_PROPAGATOR
    assert not np.allclose(a.fidelity, b.fidelity)
    assert np.all(a.stderr > 0) and not np.any(b.stderr)
    with pytest.raises(ValueError):
        fidelity_vs_pulses(spec("cpmg"), ens, 0)
    with pytest.raises(ValueError):
        fidelity_vs_pulses(spec("cpmg"), ens, 5, "median")


def test_cpmg_curve_closed_form():
    # colinear pulses: F_N = |cos(N pi (1 + eps) / 2)|
    ens = GaussianEnsemble(0.1, 50, seed=4)
    eps = ensemble_epsilons(ens)
    c = fidelity_vs_pulses(spec("cpmg"), ens, 20)
    n = np.arange(1, 21)
    want = np.abs(np.cos(np.outer(1 + eps, n) * PI / 2)).mean(axis=0)
    np.testing.assert_allclose(c.fidelity, want, atol=1e-12)


@pytest.mark.parametrize("s", MAP_SPECS, ids=lambda s: s.label)
def test_map_origin_is_ideal(s):
    m = fidelity_map(default_map_program(s), [0.0], [0.0])
    assert m.fidelity_grid[0, 0] >= 0.999


def test_cpmg_delta_map_row_closed_form():
    eps = np.linspace(-0.2, 0.2, 81)
    m = fidelity_map(spec("cpmg"), eps, [0.0], 100, delta_pulses=True)
    np.testing.assert_allclose(m.fidelity_grid[:, 0], np.abs(np.cos(50 * PI * eps)), atol=1e-9)
    finite = fidelity_map(spec("cpmg"), eps, [0.0], 100)
    np.testing.assert_allclose(finite.fidelity_grid[:, 0], np.abs(np.cos(50 * PI * eps)), atol=1e-9)


# Offset reflection maps the cycle onto its time reverse; sequences equal to
# their reverse up to cyclic shift and phase relabelling have even maps.
EVEN = [spec("cpmg"), spec("udd", pulse_count=4), spec("xy4"), spec("xy4", symmetric=True),
        spec("xy4", robust_pulses=True), spec("kdd")]


@pytest.mark.parametrize("s", EVEN, ids=lambda s: s.label)
def test_map_even_in_offset(s):
    m = fidelity_map(s, AXIS, AXIS, 100)
    np.testing.assert_allclose(m.fidelity_grid, m.fidelity_grid[:, ::-1], atol=1e-9)


@pytest.mark.parametrize("s", [spec("xy8"), spec("xy8", symmetric=True), spec("xy16"), spec("xy16", symmetric=True)], ids=lambda s: s.label)
def test_map_even_in_offset_over_whole_cycles(s):
    m = fidelity_map(s, AXIS, AXIS, 96)
    np.testing.assert_allclose(m.fidelity_grid, m.fidelity_grid[:, ::-1], atol=1e-9)


def test_cdd2_map_is_not_even_in_offset():
    m = fidelity_map(spec("cdd", concatenation_level=2), AXIS, AXIS, 100)
    assert np.max(np.abs(m.fidelity_grid - m.fidelity_grid[:, ::-1])) > 0.1


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(MAP_SPECS), st.integers(1, 60), st.booleans())
def test_offset_reflection_equals_time_reversal(s, pulses, delta):
    p = default_map_program(s)
    n = pulses * p.slot_count  # whole cycles
    a = fidelity_map(p, AXIS[::4], AXIS[::4], n, delta)
    b = fidelity_map(p.reversed(), AXIS[::4], AXIS[::4], n, delta)
    np.testing.assert_allclose(a.fidelity_grid, b.fidelity_grid[:, ::-1], atol=1e-9)


def test_map_metadata_and_determinism():
    a = fidelity_map(spec("kdd"), AXIS, AXIS, 100, workers=1)
    b = fidelity_map(spec("kdd"), AXIS, AXIS, 100, workers=3)
    assert np.array_equal(a.fidelity_grid, b.fidelity_grid)
    assert a.metadata["tau_d_us"] == pytest.approx(2 * MAP_T_P)
    assert a.pulses_applied == 100 and a.label == "KDD"
    assert np.all((a.fidelity_grid >= 0) & (a.fidelity_grid <= 1))
    with pytest.raises(ValueError):
        fidelity_map(spec("kdd"), [], AXIS)
    with pytest.raises(ValueError):
        MapResult([0, 1], [0], np.zeros((1, 1)))


def trace(t, m, se=None):
    return TraceResult(t, np.arange(len(t)), m, se)


def test_decay_time_exponential():
    t = np.linspace(0, 400, 50)
    fit = decay_time(trace(t, np.exp(-t / 100)))
    assert fit.valid and fit.t_1e == pytest.approx(100, abs=1)
    fit2 = decay_time(trace(t, np.exp(-t / 100)), "exponential_fit")
    assert fit2.t_1e == pytest.approx(100, rel=1e-9)


def test_decay_time_gaussian():
    t = np.linspace(0, 300, 40)
    fit = decay_time(trace(t, np.exp(-(t / 100) ** 2)))
    assert abs(fit.t_1e - 100) <= (t[1] - t[0]) / 2


def test_decay_time_censored():
    t = np.linspace(0, 50, 20)
    fit = decay_time(trace(t, np.exp(-t / 1000)))
    assert not fit.valid and fit.censored and fit.t_1e == 50
    assert not decay_time(trace(t, np.ones_like(t)), "exponential_fit").valid


@given(st.floats(1e-3, 1e3), st.floats(5, 500))
def test_decay_time_amplitude_invariant(scale, tau):
    t = np.linspace(0, 1000, 80)
    m = np.exp(-t / tau)
    assert decay_time(trace(t, scale * m)).t_1e == pytest.approx(decay_time(trace(t, m)).t_1e, rel=1e-12)


def test_decay_time_errors():
    with pytest.raises(ValueError):
        decay_time(trace([], []))
    with pytest.raises(ValueError):
        decay_time(trace([0, 1], [np.nan, np.nan]))
    with pytest.raises(ValueError):
        decay_time(trace([0, 1], [1, 0]), "spline")


def test_decay_time_stderr_from_band():
    t = np.linspace(0, 400, 50)
    fit = decay_time(trace(t, np.exp(-t / 100), np.full(50, 0.01)))
    # slope at the crossing is e^-1 / 100 per us
    assert fit.stderr == pytest.approx(0.01 / (math.exp(-1) / 100), rel=0.05)


def test_sweep_without_errors_is_censored():
    rows = duty_cycle_sweep([spec("xy4"), spec("kdd")], [10.0, 40.0], NoiseProcess(sigma_b=0.0),
                            GaussianEnsemble(0.0, 1), horizon=20)
    assert [r.sequence for r in rows] == ["XY4", "XY4", "KDD", "KDD"]
    assert all(r.censored for r in rows)
    dc = expand_sequence(SequenceSpec(Family.XY4, 10.0, MAP_T_P))
    assert rows[0].duty_cycle == pytest.approx(dc.irradiation_time / dc.cycle_time)


def test_sweep_is_worker_independent():
    args = ([spec("xy4"), spec("xy4", symmetric=True)], [5.0, 60.0], NoiseProcess(sigma_b=0.05, seed=3),
            GaussianEnsemble(0.02, 4, seed=3))
    a = duty_cycle_sweep(*args, trajectory_count=4, horizon=60, workers=1)
    b = duty_cycle_sweep(*args, trajectory_count=4, horizon=60, workers=2)
    assert a == b
    assert all(r.t1e_us > 0 for r in a) and not any(r.censored for r in a)
