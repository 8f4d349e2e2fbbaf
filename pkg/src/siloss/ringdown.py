"""Loaded-Q extraction from transmitted-power free decays.

After the drive is switched off the stored energy decays exponentially, so
the transmitted power in dBm falls on a straight line with slope
``-10 omega / (ln10 Q_L)``. The slope comes from ordinary least squares over
a window of samples; the slope's standard error gives sigma(Q_L).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import budget as _budget
from .errors import DomainError, InsufficientDataError, NonDecayingTraceError
from .units import HBAR, dbm_to_watts

LN10 = math.log(10.0)


@dataclass
class RingdownTrace:
    times: np.ndarray
    powers: np.ndarray
    frequency: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.powers = np.asarray(self.powers, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.powers.shape:
            raise DomainError("times and powers must be 1-D sequences of equal length")
        if len(self.times) < 3:
            raise InsufficientDataError(f"a trace needs at least 3 samples, got {len(self.times)}")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("trace times must be strictly increasing")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.powers))):
            raise DomainError("trace contains non-finite samples")
        if not self.frequency > 0:
            raise DomainError(f"frequency must be positive, got {self.frequency!r}")

    def __len__(self):
        return len(self.times)

    @property
    def omega(self):
        return 2.0 * math.pi * self.frequency

    @property
    def gain_db(self):
        return float(self.meta.get("gain_db", 0.0))

    def device_powers_dbm(self):
        """Powers referred to the device output (gain removed)."""
        return self.powers - self.gain_db


@dataclass(frozen=True)
class QEstimate:
    q_loaded: float
    sigma_q: float
    slope: float  # dB/s
    sigma_slope: float
    window: tuple  # (start, stop), stop exclusive
    residual_rms: float = 0.0


@dataclass(frozen=True)
class CouplingCalibration:
    kappa: float = 822.0  # V m^-1 W^-1/2
    q2: float = 6.5e11

    def __post_init__(self):
        if not self.kappa > 0 or not self.q2 > 0:
            raise DomainError("kappa and q2 must be positive")


def q_from_slope(slope, omega):
    return -10.0 * omega / (LN10 * slope)


def slope_from_q(q_loaded, omega):
    return -10.0 * omega / (LN10 * q_loaded)


def _ols(t, y):
    n = len(t)
    tm = t.mean()
    ym = y.mean()
    dt = t - tm
    sxx = np.dot(dt, dt)
    slope = np.dot(dt, y - ym) / sxx
    resid = y - ym - slope * dt
    ssr = float(np.dot(resid, resid))
    s2 = ssr / (n - 2) if n > 2 else 0.0
    return float(slope), math.sqrt(s2 / sxx), math.sqrt(ssr / n)


def _resolve_window(window, n):
    if window is None:
        return 0, n
    if isinstance(window, slice):
        start, stop, step = window.indices(n)
        if step != 1:
            raise DomainError("window slices must be contiguous")
        return start, stop
    start, stop = window
    start = max(0, int(start))
    stop = min(n, int(stop))
    return start, stop


def extract_q_loaded(trace, window=None):
    """Fit a line to power (dBm) vs time over ``window`` and convert to Q_L.

    ``window`` is None (whole trace), a slice, or a ``(start, stop)`` index
    pair; see :func:`field_centered_window` for selecting by field.
    """
    start, stop = _resolve_window(window, len(trace))
    if stop - start < 3:
        raise InsufficientDataError(
            f"window [{start}, {stop}) holds {max(stop - start, 0)} points, need at least 3")
    t = trace.times[start:stop]
    y = trace.powers[start:stop]
    slope, sigma_slope, rms = _ols(t - t[0], y)
    if not slope < 0:
        raise NonDecayingTraceError(
            f"fitted slope {slope:.6g} dB/s over window [{start}, {stop}) is not negative")
    q = q_from_slope(slope, trace.omega)
    return QEstimate(q_loaded=q, sigma_q=q * sigma_slope / abs(slope), slope=slope,
                     sigma_slope=sigma_slope, window=(start, stop), residual_rms=rms)


def field_from_power(p_t, cal):
    """Peak on-sample field (V/m) for transmitted power ``p_t`` (W)."""
    p_t = np.asarray(p_t, dtype=float)
    if np.any(p_t < 0):
        raise DomainError("transmitted power must be non-negative")
    out = cal.kappa * np.sqrt(p_t * cal.q2)
    return float(out) if out.ndim == 0 else out


def power_from_field(e_si, cal):
    e_si = np.asarray(e_si, dtype=float)
    out = (e_si / cal.kappa) ** 2 / cal.q2
    return float(out) if out.ndim == 0 else out


def photons_from_field(e_si, cal, omega):
    """Mean photon number in the resonator for on-sample field ``e_si``."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega!r}")
    e_si = np.asarray(e_si, dtype=float)
    if np.any(e_si < 0):
        raise DomainError("field must be non-negative")
    out = (e_si / (cal.kappa * omega)) ** 2 / HBAR
    return float(out) if out.ndim == 0 else out


def trace_fields(trace, cal):
    """On-sample field for every sample of the trace."""
    watts = 1e-3 * 10.0 ** (trace.device_powers_dbm() / 10.0)
    return field_from_power(watts, cal)


def field_centered_window(trace, cal, target_field=5.0, width=200):
    """Index window of ``width`` points centred on the sample nearest ``target_field``."""
    if width < 3:
        raise InsufficientDataError(f"window width must be at least 3, got {width}")
    n = len(trace)
    if width >= n:
        return 0, n
    centre = int(np.argmin(np.abs(trace_fields(trace, cal) - target_field)))
    start = centre - width // 2
    start = min(max(start, 0), n - width)
    return start, start + width


def noise_floor_cutoff_dbm(trace, margin_db=3.0, tail_fraction=0.01):
    """Minimum usable power: ``margin_db`` above the mean of the trace's last samples.

    The tail mean is taken in linear power.
    """
    n_tail = max(1, int(round(len(trace) * tail_fraction)))
    tail = trace.powers[-n_tail:]
    mean_w = float(np.mean(10.0 ** (tail / 10.0)))
    return 10.0 * math.log10(mean_w) + margin_db


@dataclass
class ParametricCurve:
    """Loss tangent vs field from sliding-window local slopes, highest field first."""

    field: np.ndarray
    loss: np.ndarray
    sigma: np.ndarray
    q_loaded: np.ndarray
    sigma_q: np.ndarray
    centres: np.ndarray
    skipped_non_decaying: int = 0
    skipped_below_floor: int = 0
    skipped_budget: int = 0

    def __len__(self):
        return len(self.field)


def parametric_loss_vs_field(trace, cal, budget, part, window_width=200, stride=None,
                             temperature=None, floor_margin_db=3.0):
    """Local Q_L in sliding windows -> silicon loss as a function of field.

    The field of each window is taken from the power at the window centre.
    Windows with a non-negative slope, windows whose centre lies below the
    noise-floor cutoff, and windows violating the budget are skipped and counted.
    """
    if window_width < 3:
        raise InsufficientDataError(f"window_width must be at least 3, got {window_width}")
    n = len(trace)
    if n < window_width:
        raise InsufficientDataError(
            f"trace has {n} samples, fewer than one window of {window_width}")
    stride = max(1, int(stride if stride is not None else window_width // 2))
    if temperature is None:
        temperature = trace.meta.get("temperature_k")
    if budget.is_table:
        if temperature is None:
            raise DomainError("a temperature is required to evaluate a tabulated q0")
        q0 = _budget.q0_at(budget, float(temperature))
    else:
        q0 = float(budget.q0)

    cutoff = noise_floor_cutoff_dbm(trace, floor_margin_db)
    fields_all = trace_fields(trace, cal)
    rows = []
    skipped = {"slope": 0, "floor": 0, "budget": 0}
    for start in range(0, n - window_width + 1, stride):
        stop = start + window_width
        centre = start + window_width // 2
        if trace.powers[centre] < cutoff:
            skipped["floor"] += 1
            continue
        try:
            est = extract_q_loaded(trace, (start, stop))
        except NonDecayingTraceError:
            skipped["slope"] += 1
            continue
        try:
            loss = _budget.silicon_loss(_budget.sample_inverse_q(est.q_loaded, q0, budget), part)
        except _budget.BudgetInconsistencyError:
            skipped["budget"] += 1
            continue
        sigma = _budget.propagate_loss_error(est.q_loaded, est.sigma_q, q0, budget, part)
        rows.append((fields_all[centre], loss, sigma, est.q_loaded, est.sigma_q, centre))

    rows.sort(key=lambda r: -r[0])
    cols = np.array(rows, dtype=float).reshape(-1, 6).T
    return ParametricCurve(field=cols[0], loss=cols[1], sigma=cols[2], q_loaded=cols[3],
                           sigma_q=cols[4], centres=cols[5].astype(int),
                           skipped_non_decaying=skipped["slope"],
                           skipped_below_floor=skipped["floor"],
                           skipped_budget=skipped["budget"])


def window_centre_field(trace, cal, window):
    start, stop = _resolve_window(window, len(trace))
    centre = start + (stop - start) // 2
    return field_from_power(dbm_to_watts(float(trace.device_powers_dbm()[centre])), cal)
