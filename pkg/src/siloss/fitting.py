"""Weighted least-squares fit of the VRH loss model to loss-vs-temperature data.

The four free parameters (alpha, gamma, g_f, sigma0) are optimized as base-10
logarithms. Each of several randomized restarts runs a bounded Nelder-Mead
simplex and then polishes the result with a trust-region least-squares step.
The clamped model variant has a derivative kink, so there the simplex result is
kept as is. The covariance is the usual linearized estimate from a
central-difference Jacobian at the optimum.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.optimize import least_squares, minimize

from .errors import DomainError, FitEvaluationError
from .units import E_CHARGE, K_B, dos_to_si
from .vrh import E_SWITCH, PAPER_FIT, VrhParams, loss_tangent_unchecked

PARAM_NAMES = ("alpha", "gamma", "g_f", "sigma0")
SIGMA0_FLOOR = 1e-12  # S/m; stands in for 0 on the log axis
JACOBIAN_STEP = 1e-4  # log10 units
_INFEASIBLE = 1e10
BREAKDOWN_MARGIN = 1.5  # infeasible starts are moved to this multiple of the minimum alpha

DEFAULT_BOUNDS = {
    "alpha": (1.0 / 100e-6, 1.0 / 1e-9),
    "gamma": (0.1e12, 100e12),
    "g_f": (dos_to_si(1e10), dos_to_si(1e25)),
    "sigma0": (SIGMA0_FLOOR, 1e-3),
}


class IdentifiabilityWarning(UserWarning):
    pass


@dataclass
class FitConfig:
    initial: VrhParams = PAPER_FIT
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    e_fit: float = 5.0
    omega: float = 2.0 * math.pi * 2.6e9
    eps_r: float = 11.5
    max_iterations: int = 2000
    tolerance: float = 1e-10
    restarts: int = 8
    seed: int = 0
    restart_spread: float = 0.3  # log10 units
    weighted: bool = True
    e_switch: float = E_SWITCH
    clamp: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if self.restarts < 1:
            raise DomainError("restarts must be at least 1")
        for name, value in zip(PARAM_NAMES, _natural(self.initial)):
            lo, hi = self.bounds[name]
            if name == "sigma0":
                value = max(value, SIGMA0_FLOOR)
            if not lo <= value <= hi:
                raise DomainError(f"initial {name}={value:g} outside bounds [{lo:g}, {hi:g}]")

    def log_bounds(self):
        return np.log10(np.array([self.bounds[n] for n in PARAM_NAMES], dtype=float))


@dataclass
class FitResult:
    params: VrhParams
    covariance: np.ndarray  # log10 of (alpha, gamma, g_f, sigma0)
    residuals: np.ndarray
    chi2: float
    dof: int
    converged: bool
    objective_evaluations: int
    restart_chi2: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else math.nan

    @property
    def log10_errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def _natural(params):
    return np.array([params.alpha, params.gamma, params.g_f, params.sigma0], dtype=float)


def _theta(params):
    nat = _natural(params)
    nat[3] = max(nat[3], SIGMA0_FLOOR)
    return np.log10(nat)


def _params_from_theta(theta, tls_loss=0.0):
    a, g, d, s = 10.0 ** np.asarray(theta, dtype=float)
    return VrhParams(alpha=a, gamma=g, g_f=d, sigma0=s, tls_loss=tls_loss)


def _arrays(points):
    t = np.array([p.temperature for p in points], dtype=float)
    y = np.array([p.loss for p in points], dtype=float)
    s = np.array([p.sigma for p in points], dtype=float)
    return t, y, s


def _weights(sigma, weighted):
    if not weighted:
        return np.ones_like(sigma)
    return np.where(sigma > 0, sigma, 1.0)


def residuals(params, points, e_fit=5.0, omega=2.0 * math.pi * 2.6e9, eps_r=11.5,
              weighted=True, e_switch=E_SWITCH, clamp=False):
    """(model - loss) / sigma per point; sigma = 0 points get unit weight."""
    t, y, s = _arrays(points)
    if weighted and np.any(s <= 0):
        warnings.warn(f"{int(np.sum(s <= 0))} point(s) with sigma = 0 given unit weight",
                      IdentifiabilityWarning, stacklevel=2)
    model, ok = loss_tangent_unchecked(t, e_fit, params, omega, eps_r, e_switch, clamp)
    if not np.all(ok):
        i = int(np.flatnonzero(~ok)[0])
        raise FitEvaluationError(
            f"model evaluation failed at point {i} (T={t[i]:g} K, E={e_fit:g} V/m)",
            index=i, point=points[i])
    return (model - y) / _weights(s, weighted)


class _Objective:
    def __init__(self, points, cfg):
        self.t, self.y, s = _arrays(points)
        self.w = _weights(s, cfg.weighted)
        self.cfg = cfg
        self.tls = cfg.initial.tls_loss
        self.nfev = 0

    def resid(self, theta):
        cfg = self.cfg
        params = _params_from_theta(theta, self.tls)
        model, ok = loss_tangent_unchecked(self.t, cfg.e_fit, params, cfg.omega, cfg.eps_r,
                                           cfg.e_switch, cfg.clamp)
        return (model - self.y) / self.w, bool(np.all(ok))

    def __call__(self, theta):
        self.nfev += 1
        r, ok = self.resid(theta)
        if not ok:
            return math.inf
        return float(np.dot(r, r))


def _simplex(x0, lo, hi, step):
    pts = [x0.copy()]
    for k in range(len(x0)):
        x = x0.copy()
        x[k] = x[k] + step if x[k] + step <= hi[k] else x[k] - step
        pts.append(x)
    return np.array(pts)


def _run_local(obj, x0, free, lo, hi, cfg, step):
    """One restart: bounded simplex, then a least-squares polish of the residuals.

    The polish is skipped for the clamped model, whose objective has a kink.
    """
    x_full = x0.copy()

    def expand(z):
        x = x_full.copy()
        x[free] = z
        return x

    def f(z):
        return obj(expand(z))

    z = x0[free].copy()
    fz = f(z)
    res = minimize(f, z, method="Nelder-Mead", bounds=list(zip(lo[free], hi[free])),
                   options={"maxfev": cfg.max_iterations, "xatol": math.inf,
                            "fatol": cfg.tolerance * max(abs(fz), 1e-300),
                            "initial_simplex": _simplex(z, lo[free], hi[free], step),
                            "adaptive": True})
    converged = bool(res.success)
    if res.fun <= fz:
        z, fz = res.x, float(res.fun)
    if not cfg.clamp and math.isfinite(fz) and fz > 0:
        # normalized so that the absolute gradient tolerance does not depend on
        # the overall scale of the sigmas
        norm = 1.0 / math.sqrt(fz)

        def resid(zz):
            r, ok = obj.resid(expand(zz))
            obj.nfev += 1
            return r * norm if ok else np.full_like(r, _INFEASIBLE)

        ls = least_squares(resid, np.clip(z, lo[free], hi[free]),
                           bounds=(lo[free], hi[free]), method="trf", x_scale="jac",
                           ftol=cfg.tolerance, xtol=cfg.tolerance, gtol=cfg.tolerance,
                           max_nfev=cfg.max_iterations)
        f_ls = float(np.dot(ls.fun, ls.fun)) / (norm * norm)
        if f_ls <= fz:
            z, fz = ls.x, f_ls
        converged = ls.status > 0
    x_full[free] = z
    return x_full, fz, converged


def _jacobian(obj, theta, h=JACOBIAN_STEP):
    cols = []
    for k in range(len(theta)):
        up = theta.copy()
        dn = theta.copy()
        up[k] += h
        dn[k] -= h
        r_up, ok_up = obj.resid(up)
        r_dn, ok_dn = obj.resid(dn)
        if ok_up and ok_dn:
            cols.append((r_up - r_dn) / (2.0 * h))
            continue
        r0, _ = obj.resid(theta)
        if ok_up:
            cols.append((r_up - r0) / h)
        elif ok_dn:
            cols.append((r0 - r_dn) / h)
        else:
            cols.append(np.zeros_like(r0))
    return np.column_stack(cols)


def _covariance(jac, scale=1.0, rcond=1e-12):
    """Regularized (J^T J)^-1: unresolved directions get a huge, finite variance."""
    _, s, vt = np.linalg.svd(jac, full_matrices=True)
    s = np.concatenate([s, np.zeros(vt.shape[0] - s.size)])
    smax = s[0] if s.size and s[0] > 0 else 1.0
    floor = smax * rcond if smax > 0 else 1.0
    s_eff = np.maximum(s, floor)
    cov = (vt.T / s_eff ** 2) @ vt
    cov = 0.5 * (cov + cov.T)
    return scale * cov


def _check_design(points):
    notes = []
    t = np.array([p.temperature for p in points])
    y = np.array([p.loss for p in points])
    if len(points) < 8:
        notes.append(f"only {len(points)} points; at least 8 are needed to identify 4 parameters")
    if len(np.unique(t)) < 3:
        notes.append("fewer than 3 distinct temperatures; parameters are not identifiable")
    elif len(t) >= 3:
        order = np.argsort(t)
        i = int(np.argmin(y[order]))
        if i in (0, len(t) - 1):
            notes.append("data do not bracket a loss minimum; parameters may be poorly constrained")
    for note in notes:
        warnings.warn(note, IdentifiabilityWarning, stacklevel=3)
    return notes


def _lift_alpha(theta, obj, free, hi):
    """Raise alpha above the against-field breakdown at the coldest point.

    The unclamped model has no hopping-range minimum when e E >= 2 alpha k_B T,
    so a start below that line cannot be evaluated at all.
    """
    if obj.cfg.clamp or not free[0]:
        return theta
    alpha_min = E_CHARGE * obj.cfg.e_fit / (2.0 * K_B * float(np.min(obj.t)))
    floor = math.log10(alpha_min) + math.log10(BREAKDOWN_MARGIN)
    if theta[0] < floor:
        theta = theta.copy()
        theta[0] = min(floor, hi[0])
    return theta


def _optimize(points, cfg, fixed=None):
    obj = _Objective(points, cfg)
    lb = cfg.log_bounds()
    lo, hi = lb[:, 0], lb[:, 1]
    theta0 = np.clip(_theta(cfg.initial), lo, hi)
    free = np.ones(4, dtype=bool)
    for k, value in (fixed or {}).items():
        theta0[k] = value
        free[k] = False
    rng = np.random.default_rng(cfg.seed)
    runs = []
    for k in range(cfg.restarts):
        start = theta0.copy()
        if k > 0:
            jitter = rng.standard_normal(4) * cfg.restart_spread
            start[free] = np.clip(start[free] + jitter[free], lo[free], hi[free])
        if not math.isfinite(obj(start)):
            start = _lift_alpha(start, obj, free, hi)
        if not math.isfinite(obj(start)):
            runs.append((math.inf, k, start, False))
            continue
        theta, chi2, ok = _run_local(obj, start, free, lo, hi, cfg, cfg.restart_spread)
        runs.append((chi2, k, theta, ok))
    runs.sort(key=lambda r: (r[0], r[1]))
    return obj, runs


def fit_vrh(points, config=None):
    """Fit alpha, gamma, g_f and sigma0 to a sequence of LossPoint."""
    cfg = config or FitConfig()
    points = list(points)
    if not points:
        raise DomainError("no points to fit")
    notes = _check_design(points)
    obj, runs = _optimize(points, cfg)
    chi2, _, theta, _ = runs[0]
    converged = any(r[3] for r in runs) and math.isfinite(chi2)
    if not math.isfinite(chi2):
        theta = np.clip(_theta(cfg.initial), *cfg.log_bounds().T)
    params = _params_from_theta(theta, cfg.initial.tls_loss)
    resid, ok = obj.resid(theta)
    n = len(points)
    dof = max(n - 4, 0)
    if ok:
        jac = _jacobian(obj, theta)
        scale = 1.0 if cfg.weighted else (chi2 / dof if dof > 0 else 1.0)
        cov = _covariance(jac, scale)
    else:
        cov = np.full((4, 4), np.inf)
    return FitResult(params=params, covariance=cov, residuals=resid, chi2=float(chi2), dof=dof,
                     converged=bool(converged), objective_evaluations=obj.nfev,
                     restart_chi2=[float(r[0]) for r in sorted(runs, key=lambda r: r[1])],
                     warnings=notes)


def profile_parameter(points, config, which, grid):
    """chi2 profile: fix one parameter on ``grid`` and re-fit the other three."""
    cfg = config or FitConfig()
    if which not in PARAM_NAMES:
        raise DomainError(f"unknown parameter {which!r}; expected one of {PARAM_NAMES}")
    k = PARAM_NAMES.index(which)
    lo, hi = cfg.bounds[which]
    out = []
    for value in grid:
        if not lo <= value <= hi:
            raise DomainError(f"profile value {value:g} outside bounds [{lo:g}, {hi:g}]")
        _, runs = _optimize(list(points), cfg, fixed={k: math.log10(value)})
        out.append((float(value), float(runs[0][0])))
    return out
