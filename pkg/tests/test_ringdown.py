import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest
from pytest import approx

from siloss.budget import Participation, QBudget
from siloss.errors import DomainError, InsufficientDataError, NonDecayingTraceError
from siloss.ringdown import (CouplingCalibration, RingdownTrace, extract_q_loaded,
                             field_centered_window, field_from_power, noise_floor_cutoff_dbm,
                             parametric_loss_vs_field, photons_from_field, power_from_field,
                             q_from_slope, slope_from_q, trace_fields, window_centre_field)
from siloss.synth import SynthSpec, synth_ringdown, synth_ringdown_field_dependent

from conftest import OMEGA


def line_trace(slope, n=100, dt=1e-4, p0=-120.0, **meta):
    t = np.arange(n) * dt
    return RingdownTrace(t, p0 + slope * t, 2.6e9, meta)


def test_trace_validation():
    with pytest.raises(InsufficientDataError):
        RingdownTrace([0.0, 1.0], [0.0, -1.0], 2.6e9)
    with pytest.raises(DomainError):
        RingdownTrace([0.0, 1.0, 1.0], [0.0, -1.0, -2.0], 2.6e9)
    with pytest.raises(DomainError):
        RingdownTrace([0.0, 1.0, 2.0], [0.0, -1.0], 2.6e9)
    with pytest.raises(DomainError):
        RingdownTrace([0.0, 1.0, 2.0], [0.0, -1.0, -2.0], 0.0)


def test_slope_q_inverse():
    assert slope_from_q(1e9, OMEGA) == approx(-70.947570399775750, rel=1e-13)
    assert q_from_slope(slope_from_q(3.3e8, OMEGA), OMEGA) == approx(3.3e8, rel=1e-14)


def test_noiseless_trace_exact():
    est = extract_q_loaded(line_trace(slope_from_q(1e9, OMEGA), n=2000, dt=1e-3))
    assert est.q_loaded == approx(1e9, rel=1e-9)
    assert est.slope == approx(-70.947570399775750, rel=1e-9)
    assert est.window == (0, 2000)
    assert est.sigma_q / est.q_loaded < 1e-9


def test_constant_trace_is_non_decaying():
    with pytest.raises(NonDecayingTraceError):
        extract_q_loaded(line_trace(0.0))
    with pytest.raises(NonDecayingTraceError):
        extract_q_loaded(line_trace(+5.0))


def test_window_too_small():
    with pytest.raises(InsufficientDataError):
        extract_q_loaded(line_trace(-100.0), (10, 12))


def test_window_forms_agree():
    trace = line_trace(-100.0, n=50)
    a = extract_q_loaded(trace, (5, 30))
    b = extract_q_loaded(trace, slice(5, 30))
    assert a == b


def test_noisy_trace_within_half_percent():
    q = 3e8
    tau = q / OMEGA
    spec = SynthSpec(seed=11, duration=3 * tau, sample_rate=1999 / (3 * tau), noise_db=0.05)
    trace = synth_ringdown(q, spec)
    assert len(trace) == 2000
    est = extract_q_loaded(trace)
    assert est.q_loaded == approx(q, rel=5e-3)
    # the regression uncertainty should describe the actual scatter
    assert abs(est.q_loaded - q) < 5 * est.sigma_q


@settings(deadline=None)
@given(st.floats(-50.0, 50.0))
def test_offset_invariance(offset):
    trace = line_trace(-80.0)
    shifted = RingdownTrace(trace.times, trace.powers + offset, trace.frequency)
    assert extract_q_loaded(shifted).q_loaded == approx(extract_q_loaded(trace).q_loaded,
                                                        rel=1e-9)


@given(st.floats(0.1, 10.0))
def test_time_rescaling(a):
    trace = line_trace(-80.0)
    squeezed = RingdownTrace(trace.times / a, trace.powers, trace.frequency)
    e1, e2 = extract_q_loaded(trace), extract_q_loaded(squeezed)
    assert e2.slope == approx(a * e1.slope, rel=1e-9)
    assert e2.q_loaded == approx(e1.q_loaded / a, rel=1e-9)


@given(st.integers(0, 90))
def test_noiseless_any_window_position(start):
    trace = line_trace(slope_from_q(5e8, OMEGA), n=100, dt=1e-3)
    assert extract_q_loaded(trace, (start, start + 10)).q_loaded == approx(5e8, rel=1e-9)


def test_field_from_power_examples(cal):
    assert field_from_power(0.0, cal) == 0.0
    assert field_from_power(2.277e-16, cal) == approx(10.0, rel=5e-3)
    assert field_from_power(4 * 1e-16, cal) == approx(2 * field_from_power(1e-16, cal))
    assert power_from_field(field_from_power(3e-16, cal), cal) == approx(3e-16)
    with pytest.raises(DomainError):
        field_from_power(-1e-16, cal)


def test_photons_examples(cal):
    assert photons_from_field(0.0, cal, OMEGA) == 0.0
    # (10 / (822 omega))^2 / hbar at 50 digits
    n10 = photons_from_field(10.0, cal, OMEGA)
    assert n10 == approx(5258644006.5293579, rel=1e-12)
    assert n10 == approx(5e9, rel=0.10)
    assert photons_from_field(20.0, cal, OMEGA) == approx(4 * n10)
    with pytest.raises(DomainError):
        photons_from_field(1.0, cal, 0.0)


def test_calibration_validation():
    with pytest.raises(DomainError):
        CouplingCalibration(kappa=0.0)


def test_gain_removed_before_field(cal):
    trace = line_trace(-50.0, gain_db=30.0, p0=-96.0)
    plain = line_trace(-50.0, p0=-126.0)
    assert trace_fields(trace, cal) == approx(trace_fields(plain, cal))
    assert extract_q_loaded(trace).q_loaded == approx(extract_q_loaded(plain).q_loaded)


def test_field_centered_window(cal):
    spec = SynthSpec(seed=0, duration=0.1, sample_rate=20000)
    trace = synth_ringdown(3e8, spec)
    start, stop = field_centered_window(trace, cal, 5.0, 200)
    assert stop - start == 200
    fields = trace_fields(trace, cal)
    centre = start + 100
    assert abs(fields[centre] - 5.0) == approx(np.min(np.abs(fields - 5.0)))
    assert window_centre_field(trace, cal, (start, stop)) == approx(fields[centre])


def test_field_centered_window_clipped_to_trace(cal):
    trace = synth_ringdown(3e8, SynthSpec(seed=0, duration=0.01, sample_rate=20000))
    # target above the initial field: window pinned at the start
    assert field_centered_window(trace, cal, 1e3, 50) == (0, 50)
    assert field_centered_window(trace, cal, 5.0, 10_000) == (0, len(trace))


def test_noise_floor_cutoff():
    t = np.arange(1000) * 1e-3
    p = np.maximum(-120 - 100 * t, -150.0)
    trace = RingdownTrace(t, p, 2.6e9)
    assert noise_floor_cutoff_dbm(trace) == approx(-147.0)


def constant_q_trace(q_l, seed=3, noise_db=0.02):
    spec = SynthSpec(seed=seed, duration=0.1, sample_rate=20000, noise_db=noise_db)
    return synth_ringdown(q_l, spec)


def test_parametric_flat_for_constant_q(cal, budget, part):
    curve = parametric_loss_vs_field(constant_q_trace(3e8), cal, budget, part, 200)
    assert len(curve) > 10
    assert np.all(np.diff(curve.field) < 0)
    expected = 3.1400530503978780e-6
    assert np.mean(curve.loss) == approx(expected, rel=0.02)
    assert np.all(np.abs(curve.loss - expected) < 5 * curve.sigma)


def test_parametric_scatter_shrinks_with_window(cal, budget, part):
    trace = constant_q_trace(3e8, seed=5, noise_db=0.2)
    spreads = [np.std(parametric_loss_vs_field(trace, cal, budget, part, w).loss)
               for w in (50, 200, 800)]
    assert spreads[0] > spreads[1] > spreads[2]


def test_parametric_skips_noise_floor(cal, budget, part):
    t = np.arange(4000) / 20000
    p = np.maximum(-126 + slope_from_q(3e8, OMEGA) * t, -160.0)
    rng = np.random.default_rng(0)
    trace = RingdownTrace(t, p + 0.01 * rng.standard_normal(len(t)), 2.6e9)
    curve = parametric_loss_vs_field(trace, cal, budget, part, 200)
    assert curve.skipped_below_floor > 0
    assert np.mean(curve.loss) == approx(3.14e-6, rel=0.02)


def test_parametric_counts_budget_failures(cal, part):
    # Q_L larger than the parasitic bound in every window
    b = QBudget(q0=1e8, q1=5.8e9, q2=6.5e11)
    curve = parametric_loss_vs_field(constant_q_trace(3e8), cal, b, part, 200)
    assert len(curve) == 0
    assert curve.skipped_budget > 0


def test_parametric_needs_temperature_for_table(cal, part):
    b = QBudget(q0=[(0.05, 3e9), (1.0, 3e9)], q1=5.8e9, q2=6.5e11)
    with pytest.raises(DomainError):
        parametric_loss_vs_field(constant_q_trace(3e8), cal, b, part, 200)
    curve = parametric_loss_vs_field(constant_q_trace(3e8), cal, b, part, 200, temperature=0.1)
    assert len(curve) > 0


def test_parametric_recovers_generating_law(cal, budget, part):
    law = lambda e: 2e-6 * (1 + e / 3.0)  # noqa: E731
    spec = SynthSpec(seed=0, duration=0.1, sample_rate=20000)
    trace = synth_ringdown_field_dependent(law, budget, part, cal, spec)
    curve = parametric_loss_vs_field(trace, cal, budget, part, 200)
    assert curve.field.max() / curve.field.min() > 10
    assert np.max(np.abs(curve.loss / law(curve.field) - 1)) < 0.02


def test_parametric_independent_of_starting_power(cal, budget, part):
    law = lambda e: 2e-6 * (1 + e / 3.0)  # noqa: E731
    curves = []
    for p0 in (-126.0, -120.0):
        spec = SynthSpec(seed=1, p0_dbm=p0, duration=0.12, sample_rate=20000, noise_db=0.01)
        trace = synth_ringdown_field_dependent(law, budget, part, cal, spec)
        curves.append(parametric_loss_vs_field(trace, cal, budget, part, 200))
    low, high = curves
    # compare on the shared field range, interpolating the high-power curve
    lo, hi = max(low.field.min(), high.field.min()), min(low.field.max(), high.field.max())
    mask = (low.field >= lo) & (low.field <= hi)
    assert mask.sum() > 5
    other = np.interp(low.field[mask], high.field[::-1], high.loss[::-1])
    other_sigma = np.interp(low.field[mask], high.field[::-1], high.sigma[::-1])
    diff = np.abs(low.loss[mask] - other)
    assert np.all(diff < 2 * np.hypot(low.sigma[mask], other_sigma))
    assert np.all(diff / other < 0.02)
