"""Synthetic ring-down traces and loss curves with seeded noise.

These are the generating models the analysis code is checked against, so
every stochastic path takes an explicit integer seed.
"""
from dataclasses import dataclass
import math

import numpy as np

from .budget import LossPoint, q0_at
from .errors import DomainError, IntegrationError
from .ringdown import RingdownTrace, slope_from_q
from .units import dbm_to_watts
from .vrh import E_SWITCH, loss_tangent_curve

STEPS_PER_DECAY = 10_000


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    frequency: float = 2.6e9
    p0_dbm: float = -126.0
    duration: float = 0.1
    sample_rate: float = 20_000.0
    noise_db: float = 0.0
    gain_db: float = 0.0

    def __post_init__(self):
        if self.seed is None or isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise DomainError("a deterministic integer seed is required")
        if not self.duration > 0 or not self.sample_rate > 0:
            raise DomainError("duration and sample_rate must be positive")
        if not self.noise_db >= 0:
            raise DomainError("noise_db must be non-negative")
        if not self.frequency > 0:
            raise DomainError("frequency must be positive")

    @property
    def omega(self):
        return 2.0 * math.pi * self.frequency

    def times(self):
        n = int(round(self.duration * self.sample_rate)) + 1
        return np.arange(n) / self.sample_rate

    def noise(self, n):
        rng = np.random.default_rng(self.seed)
        return self.noise_db * rng.standard_normal(n)


def _meta(spec, extra=None):
    meta = {"gain_db": spec.gain_db, "frequency_hz": spec.frequency, "seed": spec.seed}
    if extra:
        meta.update(extra)
    return meta


def synth_ringdown(q_l, spec, meta=None):
    """Exponential free decay: a straight line in dBm with seeded Gaussian noise."""
    if not q_l > 0:
        raise DomainError(f"q_l must be positive, got {q_l!r}")
    t = spec.times()
    powers = spec.p0_dbm + spec.gain_db + slope_from_q(q_l, spec.omega) * t + spec.noise(len(t))
    return RingdownTrace(t, powers, spec.frequency, _meta(spec, meta))


def _rk4_log_energy(rate, y0, h, n_steps, sample_every):
    """Integrate d(ln U)/dt = -rate(ln U) with fixed RK4 steps; return sampled ln U."""
    out = np.empty(n_steps // sample_every + 1)
    y = y0
    out[0] = y
    j = 1
    for k in range(1, n_steps + 1):
        k1 = rate(y)
        k2 = rate(y - 0.5 * h * k1)
        k3 = rate(y - 0.5 * h * k2)
        k4 = rate(y - h * k3)
        y = y - h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if k % sample_every == 0:
            out[j] = y
            j += 1
    return out


def synth_ringdown_field_dependent(loss_law, budget, part, cal, spec, temperature=None,
                                   meta=None):
    """Free decay with a field-dependent silicon loss ``loss_law(E)``.

    Integrates dU/dt = -omega U / Q_L with
    1/Q_L = p_si loss_law(E) + 1/Q0 + 1/Q1 + 1/Q2 and E = kappa sqrt(omega U),
    so that E matches field_from_power(P_t) for P_t = omega U / Q2. The loss
    law is the silicon loss tangent as the budget module reports it (the oxide
    channel folded in).
    """
    omega = spec.omega
    if budget.is_table:
        if temperature is None:
            raise DomainError("a temperature is required for a tabulated q0")
        q0 = q0_at(budget, temperature)
    else:
        q0 = float(budget.q0)
    parasitic = sum(0.0 if math.isinf(q) else 1.0 / q for q in (q0, budget.q1, budget.q2))
    p_si = part.p_si
    kappa_sq_omega = cal.kappa ** 2 * omega

    def inv_q(log_u):
        e_si = math.sqrt(kappa_sq_omega * math.exp(log_u))
        loss = float(loss_law(e_si))
        if not (loss >= 0 and math.isfinite(loss)):
            raise DomainError(f"loss_law returned {loss!r} at E={e_si:g} V/m")
        return p_si * loss + parasitic

    def rate(log_u):
        return omega * inv_q(log_u)

    u0 = dbm_to_watts(spec.p0_dbm) * cal.q2 / omega
    y0 = math.log(u0)
    dt_sample = 1.0 / spec.sample_rate
    tau0 = 1.0 / rate(y0)
    sub = max(1, int(math.ceil(dt_sample * STEPS_PER_DECAY / tau0)))
    h = dt_sample / sub
    t = spec.times()
    n_steps = (len(t) - 1) * sub

    limit = 1.0 / (h * STEPS_PER_DECAY)

    def checked_rate(log_u):
        r = rate(log_u)
        if r > limit * (1.0 + 1e-9):
            raise IntegrationError(
                f"decay time {1.0 / r:.4g} s shorter than {STEPS_PER_DECAY} fixed steps of {h:.4g} s")
        return r

    log_u = _rk4_log_energy(checked_rate, y0, h, n_steps, sub)
    p_t = omega * np.exp(log_u) / cal.q2
    powers = 10.0 * np.log10(p_t / 1e-3) + spec.gain_db + spec.noise(len(t))
    extra = {"temperature_k": temperature} if temperature is not None else {}
    extra.update(meta or {})
    return RingdownTrace(t, powers, spec.frequency, _meta(spec, extra))


def synth_loss_curve(params, env_template, t_grid, noise_rel, seed, sigma_floor=1e-12,
                     e_switch=E_SWITCH):
    """Model loss tangent on ``t_grid`` with multiplicative Gaussian noise.

    ``env_template`` supplies field, omega and eps_r; its temperature is ignored.
    """
    if seed is None or isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError("a deterministic integer seed is required")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0:
        raise DomainError("t_grid is empty")
    if not noise_rel >= 0:
        raise DomainError("noise_rel must be non-negative")
    model = loss_tangent_curve(t_grid, env_template.field, params, env_template.omega,
                               env_template.eps_r, e_switch)
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal(t_grid.size)
    loss = model * (1.0 + noise_rel * draws)
    sigma = model * noise_rel if noise_rel > 0 else np.full_like(model, sigma_floor)
    return [LossPoint(float(t), env_template.field, float(y), float(s))
            for t, y, s in zip(t_grid, loss, sigma)]
