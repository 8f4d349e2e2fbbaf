"""Variable-range-hopping conduction loss model.

A hop over distance r costs the dimensionless range

    R(r) = 2 alpha r + (W(r) + b e r E) / (k_B T),   W(r) = 81 / (256 pi g r^3)

with b = +1 for hops that climb the field (the "+" branch) and b = -1 for
hops that gain energy from it (the "-" branch). Each branch is minimized over
r numerically; the hop probability is exp(-min R) and the branch current is
J = 2 e gamma g k_B T r_opt exp(-min R). The hopping conductivity is
|J+ - J-| / E and the loss tangent is (sigma_h + sigma_0) / (omega eps0 eps_r).

Without any activation clamp the "-" branch is unbounded below once
e E >= 2 alpha k_B T (see :func:`breakdown_field`). There the bracketing scan
runs into the upper end of the search interval and OptimizationError is raised.
``clamp=True`` switches to the activation-clamped variant max(0, W - e r E).
"""
from dataclasses import dataclass
from enum import IntEnum
import math

import numpy as np

from .errors import DomainError, OptimizationError
from .units import E_CHARGE, EPS0, K_B, dos_from_si, dos_to_si

HOP_ENERGY_COEFF = 81.0 / (256.0 * math.pi)  # 3^4 / (4^4 pi)

R_BOUNDS = (1e-9, 1e-3)
N_PROBE = 64
XTOL = 1e-10
E_SWITCH = 1e-3

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class Branch(IntEnum):
    """Sign of the field term in the activation energy."""

    WITH = 1  # "+": field opposes the hop, activation W + e r E
    AGAINST = -1  # "-": field assists the hop, activation W - e r E


@dataclass(frozen=True)
class VrhParams:
    alpha: float  # inverse localization length, 1/m
    gamma: float  # attempt frequency, Hz
    g_f: float  # density of states at the Fermi level, 1/(J m^3)
    sigma0: float = 0.0  # residual conductivity, S/m
    tls_loss: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha!r}")
        if not self.gamma >= 0:
            raise DomainError(f"gamma must be non-negative, got {self.gamma!r}")
        if not self.g_f > 0:
            raise DomainError(f"g_f must be positive, got {self.g_f!r}")
        if not self.sigma0 >= 0 or not self.tls_loss >= 0:
            raise DomainError("sigma0 and tls_loss must be non-negative")

    @classmethod
    def from_reporting_units(cls, loc_length_um, gamma_thz, g_ev_cm3, sigma0_us_per_m,
                             tls_loss=0.0):
        """Build from alpha^-1 in um, gamma in THz, g in 1/(eV cm^3), sigma0 in uS/m."""
        return cls(alpha=1.0 / (loc_length_um * 1e-6), gamma=gamma_thz * 1e12,
                   g_f=dos_to_si(g_ev_cm3), sigma0=sigma0_us_per_m * 1e-6, tls_loss=tls_loss)

    def reporting_units(self):
        return {
            "loc_length_um": 1e6 / self.alpha,
            "gamma_thz": self.gamma * 1e-12,
            "g_ev_cm3": dos_from_si(self.g_f),
            "sigma0_us_per_m": self.sigma0 * 1e6,
            "tls_loss": self.tls_loss,
        }

    def replace(self, **changes):
        values = dict(alpha=self.alpha, gamma=self.gamma, g_f=self.g_f, sigma0=self.sigma0,
                      tls_loss=self.tls_loss)
        values.update(changes)
        return VrhParams(**values)


# Values reported for the high-resistivity Si fit at 2.6 GHz.
PAPER_FIT = VrhParams.from_reporting_units(1.05, 11.4, 1.33e13, 0.52)


@dataclass(frozen=True)
class Environment:
    temperature: float  # K
    field: float  # V/m
    omega: float  # rad/s
    eps_r: float = 11.5

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature!r}")
        if not self.field >= 0:
            raise DomainError(f"field must be non-negative, got {self.field!r}")
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega!r}")
        if not self.eps_r >= 1:
            raise DomainError(f"eps_r must be >= 1, got {self.eps_r!r}")

    @classmethod
    def at(cls, temperature, field, frequency=2.6e9, eps_r=11.5):
        return cls(temperature, field, 2.0 * math.pi * frequency, eps_r)

    def with_field(self, field):
        return Environment(self.temperature, field, self.omega, self.eps_r)


@dataclass(frozen=True)
class HopSolution:
    r_opt: float
    range_min: float
    branch: Branch
    clamped: bool


def hop_energy(r, g_f):
    """Mean level spacing W (J) of states within distance ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("hop distance must be positive")
    if not g_f > 0:
        raise DomainError(f"g_f must be positive, got {g_f!r}")
    out = HOP_ENERGY_COEFF / (g_f * r ** 3)
    return float(out) if out.ndim == 0 else out


def hopping_range(r, env, branch, params, clamp=False):
    r = np.asarray(r, dtype=float)
    act = hop_energy(r, params.g_f) + int(branch) * E_CHARGE * r * env.field
    if clamp:
        act = np.maximum(0.0, act)
    out = 2.0 * params.alpha * r + act / (K_B * env.temperature)
    return float(out) if np.ndim(out) == 0 else out


def clamp_radius(field, params):
    """Distance where the field energy gain e r E equals W (inf at zero field)."""
    if field <= 0:
        return math.inf
    return (HOP_ENERGY_COEFF / (params.g_f * E_CHARGE * field)) ** 0.25


def breakdown_field(temperature, params):
    """Field above which the unclamped against-field range has no minimum."""
    return 2.0 * params.alpha * K_B * temperature / E_CHARGE


def _objective(r, kT, be, alpha, a_coef, clamp):
    act = a_coef / r ** 3 + be * r
    if clamp:
        act = np.maximum(0.0, act)
    return 2.0 * alpha * r + act / kT


def _minimize_batch(kT, be, params, clamp=False, r_bounds=R_BOUNDS, n_probe=N_PROBE,
                    xtol=XTOL):
    """Minimize the hopping range for many (kT, b e E) pairs at once.

    Returns (r_opt, range_min, clamped, ok). ``ok`` is False where the probe
    scan found its minimum on an end of the search interval.
    """
    kT = np.asarray(kT, dtype=float)
    be = np.asarray(be, dtype=float)
    kT, be = np.broadcast_arrays(kT, be)
    shape = kT.shape
    kT = kT.ravel()
    be = be.ravel()
    alpha = params.alpha
    a_coef = HOP_ENERGY_COEFF / params.g_f

    x_probe = np.linspace(math.log(r_bounds[0]), math.log(r_bounds[1]), n_probe)
    f_probe = _objective(np.exp(x_probe)[None, :], kT[:, None], be[:, None], alpha, a_coef,
                         clamp)
    i = np.argmin(f_probe, axis=1)
    ok = (i > 0) & (i < n_probe - 1)
    ic = np.clip(i, 1, n_probe - 2)

    def f(x):
        return _objective(np.exp(x), kT, be, alpha, a_coef, clamp)

    a = x_probe[ic - 1].copy()
    b = x_probe[ic + 1].copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c)
    fd = f(d)
    width = x_probe[2] - x_probe[0]
    n_iter = int(math.ceil(math.log(xtol / width) / math.log(_INVPHI))) + 1
    for _ in range(n_iter):
        # a < c < d < b; keep [a, d] where f(c) < f(d), else [c, b]
        left = fc < fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        keep_x = np.where(left, c, d)
        keep_f = np.where(left, fc, fd)
        x_new = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        f_new = f(x_new)
        c, fc = np.where(left, x_new, keep_x), np.where(left, f_new, keep_f)
        d, fd = np.where(left, keep_x, x_new), np.where(left, keep_f, f_new)
    x_best = np.where(fc <= fd, c, d)

    # Golden section cannot place a flat minimum better than ~sqrt(eps); a few
    # Newton steps on dR/dln r = 0 bring r_opt to full precision, which keeps
    # J (linear in r_opt) smooth in the parameters.
    x_newton = x_best.copy()
    for _ in range(3):
        r = np.exp(x_newton)
        grad = 2.0 * alpha * r + (-3.0 * a_coef / r ** 3 + be * r) / kT
        curv = 2.0 * alpha * r + (9.0 * a_coef / r ** 3 + be * r) / kT
        with np.errstate(divide="ignore", invalid="ignore"):
            x_newton = x_newton - np.where(curv > 0, grad / curv, 0.0)
    smooth = (a_coef / np.exp(x_newton) ** 3 + be * np.exp(x_newton)) > 0 if clamp else True
    accept = np.isfinite(x_newton) & (np.abs(x_newton - x_best) < 1e-6) & smooth
    x_best = np.where(accept, x_newton, x_best)
    f_best = f(x_best)
    r_best = np.exp(x_best)

    clamped = np.zeros_like(ok)
    if clamp:
        with np.errstate(divide="ignore", invalid="ignore"):
            r_c = np.where(be < 0, (a_coef / np.where(be < 0, -be, 1.0)) ** 0.25, np.nan)
        in_range = np.isfinite(r_c) & (r_c >= r_bounds[0]) & (r_c <= r_bounds[1])
        f_c = np.where(in_range, 2.0 * alpha * np.where(in_range, r_c, 1.0), np.inf)
        use_c = f_c <= f_best
        r_best = np.where(use_c, r_c, r_best)
        f_best = np.where(use_c, f_c, f_best)
        act = a_coef / r_best ** 3 + be * r_best
        clamped = use_c | (act <= 0)
        f_best = np.where(clamped, 2.0 * alpha * r_best, f_best)
    return (r_best.reshape(shape), f_best.reshape(shape), clamped.reshape(shape),
            ok.reshape(shape))


def _raise_failure(temperature, field, branch, ok, params):
    temperature, field, branch = np.broadcast_arrays(temperature, field, branch)
    idx = np.flatnonzero(~np.asarray(ok).ravel())[0]
    t = float(temperature.ravel()[idx])
    e = float(field.ravel()[idx])
    b = Branch(int(branch.ravel()[idx]))
    diag = {"temperature_k": t, "field_v_per_m": e, "branch": b.name,
            "breakdown_field_v_per_m": breakdown_field(t, params),
            "r_bounds_m": R_BOUNDS, "index": int(idx)}
    raise OptimizationError(
        f"no bracketed minimum of the hopping range for the {b.name} branch at "
        f"T={t:g} K, E={e:g} V/m (breakdown field {diag['breakdown_field_v_per_m']:.4g} V/m)",
        diag)


def minimize_range(env, branch, params, clamp=False):
    """Minimum of the hopping range over r in the search interval."""
    branch = Branch(branch)
    kT = K_B * env.temperature
    be = int(branch) * E_CHARGE * env.field
    r, rng, clamped, ok = _minimize_batch(kT, be, params, clamp)
    if not ok:
        _raise_failure(env.temperature, env.field, int(branch), ok, params)
    return HopSolution(r_opt=float(r), range_min=float(rng), branch=branch,
                       clamped=bool(clamped))


def _branch_currents(temperature, field, params, clamp):
    temperature, field = np.broadcast_arrays(np.asarray(temperature, dtype=float),
                                             np.asarray(field, dtype=float))
    kT = K_B * temperature
    signs = np.array([1.0, -1.0]).reshape((2,) + (1,) * temperature.ndim)
    r, rng, _, ok = _minimize_batch(kT[None], signs * E_CHARGE * field[None], params, clamp)
    pref = 2.0 * E_CHARGE * params.gamma * params.g_f * kT
    # beyond breakdown the scan ends at the edge with a huge negative range;
    # those entries are flagged by ok and must not warn on the way out
    with np.errstate(over="ignore"):
        currents = pref[None] * r * np.exp(-rng)
    return currents, ok, signs


def hop_current(env, branch, params, clamp=False):
    """Branch current density J (A/m^2) at the branch-specific optimal hop."""
    sol = minimize_range(env, branch, params, clamp)
    return (2.0 * E_CHARGE * params.gamma * params.g_f * K_B * env.temperature * sol.r_opt
            * math.exp(-sol.range_min))


def _conductivity(temperature, field, params, e_switch, clamp):
    field = np.asarray(field, dtype=float)
    e_eval = np.maximum(field, e_switch)
    currents, ok, _ = _branch_currents(temperature, e_eval, params, clamp)
    sigma_h = np.abs(currents[0] - currents[1]) / e_eval
    return sigma_h, ok


def conductivity_curve(temperature, field, params, e_switch=E_SWITCH, clamp=False):
    """Hopping conductivity (S/m) over broadcast temperature/field arrays.

    Below ``e_switch`` the difference quotient is evaluated at ``e_switch``.
    """
    if not e_switch > 0:
        raise DomainError("e_switch must be positive")
    sigma_h, ok = _conductivity(temperature, field, params, e_switch, clamp)
    if not np.all(ok):
        t, e = np.broadcast_arrays(temperature, np.maximum(field, e_switch))
        branch_ok = ok.reshape(2, -1)
        b = 1 if not np.all(branch_ok[0]) else -1
        _raise_failure(t, e, b, branch_ok[0 if b == 1 else 1].reshape(t.shape), params)
    return sigma_h


def hopping_conductivity(env, params, e_switch=E_SWITCH, clamp=False):
    return float(conductivity_curve(env.temperature, env.field, params, e_switch, clamp))


def _loss_from_sigma(sigma_h, params, omega, eps_r):
    return params.tls_loss + (sigma_h + params.sigma0) / (omega * EPS0 * eps_r)


def loss_tangent_curve(temperature, field, params, omega, eps_r=11.5, e_switch=E_SWITCH,
                       clamp=False):
    sigma_h = conductivity_curve(temperature, field, params, e_switch, clamp)
    return _loss_from_sigma(sigma_h, params, omega, eps_r)


def loss_tangent_unchecked(temperature, field, params, omega, eps_r=11.5, e_switch=E_SWITCH,
                           clamp=False):
    """Like loss_tangent_curve, but returns (loss, ok) instead of raising."""
    sigma_h, ok = _conductivity(temperature, field, params, e_switch, clamp)
    return _loss_from_sigma(sigma_h, params, omega, eps_r), np.all(ok, axis=0)


def loss_tangent_model(env, params, e_switch=E_SWITCH, clamp=False):
    """Silicon loss tangent tls_loss + (sigma_h + sigma_0) / (omega eps0 eps_r)."""
    return float(loss_tangent_curve(env.temperature, env.field, params, env.omega, env.eps_r,
                                    e_switch, clamp))


def sinh_low_field_reference(env, params):
    """Shape-only low-field reference sinh(e r0 E / k_B T), r0 the zero-field optimum."""
    if env.field == 0:
        return 0.0
    r0 = minimize_range(env.with_field(0.0), Branch.WITH, params).r_opt
    return math.sinh(E_CHARGE * r0 * env.field / (K_B * env.temperature))
