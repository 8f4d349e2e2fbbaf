"""Loss budget: loaded Q -> silicon loss tangent, with error propagation.

The measured loss rate 1/Q_L is the sum of the sample loss and the parasitic
channels (bare resonator 1/Q0, the two antennas 1/Q1 and 1/Q2). The sample
part is then divided by the silicon participation ratio.

A channel can be switched off by giving it ``DISABLED`` (infinite Q).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import BudgetInconsistencyError, DomainError, ExtrapolationError

DISABLED = math.inf


@dataclass(frozen=True)
class QBudget:
    """Parasitic Q-factors and their relative standard uncertainties.

    ``q0`` is either a scalar or a sequence of ``(temperature_K, Q0)`` pairs
    with strictly increasing temperatures.
    """

    q0: object
    q1: float
    q2: float
    rel_err_q0: float = 0.10
    rel_err_q1: float = 0.10
    rel_err_q2: float = 0.10
    _table: tuple = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if np.ndim(self.q0) == 0:
            if not float(self.q0) > 0:
                raise DomainError(f"q0 must be positive, got {self.q0!r}")
        else:
            table = np.asarray(self.q0, dtype=float)
            if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 1:
                raise DomainError("q0 table must be a sequence of (temperature, q0) pairs")
            temps, qs = table[:, 0], table[:, 1]
            if np.any(temps <= 0) or np.any(qs <= 0):
                raise DomainError("q0 table temperatures and Q values must be positive")
            if np.any(np.diff(temps) <= 0):
                raise DomainError("q0 table temperatures must be strictly increasing")
            object.__setattr__(self, "_table", (np.log(temps), np.log(qs), temps))
        for name in ("q1", "q2"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("rel_err_q0", "rel_err_q1", "rel_err_q2"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative")

    @property
    def is_table(self):
        return self._table is not None


@dataclass(frozen=True)
class Participation:
    p_si: float = 9e-4
    p_sio2: float = 3e-9
    rel_err_p_si: float = 0.25
    q_sio2_inv: float = 5e-3

    def __post_init__(self):
        if not 0 < self.p_si <= 1:
            raise DomainError(f"p_si must lie in (0, 1], got {self.p_si!r}")
        if not 0 <= self.p_sio2 < self.p_si:
            raise DomainError(f"p_sio2 must lie in [0, p_si), got {self.p_sio2!r}")
        if not self.rel_err_p_si >= 0 or not self.q_sio2_inv >= 0:
            raise DomainError("participation uncertainties and oxide loss must be non-negative")


@dataclass(frozen=True)
class LossPoint:
    temperature: float
    field: float
    loss: float
    sigma: float

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature!r}")
        if not self.loss > 0:
            raise DomainError(f"loss must be positive, got {self.loss!r}")
        if not self.sigma >= 0:
            raise DomainError(f"sigma must be non-negative, got {self.sigma!r}")


def q0_at(budget, t):
    """Intrinsic Q at temperature ``t``; log-log interpolation for tables.

    Raises ExtrapolationError outside the tabulated range.
    """
    if not budget.is_table:
        return float(budget.q0)
    log_t, log_q, temps = budget._table
    if not temps[0] <= t <= temps[-1]:
        raise ExtrapolationError(
            f"temperature {t} K outside q0 table range [{temps[0]}, {temps[-1]}] K")
    if len(temps) == 1:
        return float(math.exp(log_q[0]))
    return float(np.exp(np.interp(math.log(t), log_t, log_q)))


def _inv(q):
    return 0.0 if math.isinf(q) else 1.0 / q


def sample_inverse_q(q_l, q0, budget):
    """1/Q_S = 1/Q_L - 1/Q0 - 1/Q1 - 1/Q2."""
    for name, q in (("q_l", q_l), ("q0", q0)):
        if not q > 0:
            raise DomainError(f"{name} must be positive, got {q!r}")
    value = _inv(q_l) - _inv(q0) - _inv(budget.q1) - _inv(budget.q2)
    if not value > 0:
        raise BudgetInconsistencyError(
            f"parasitic losses exceed measured loss: 1/Q_S = {value:.4g} "
            f"(Q_L={q_l:.4g}, Q0={q0:.4g}, Q1={budget.q1:.4g}, Q2={budget.q2:.4g})")
    return value


def silicon_loss(q_s_inv, part):
    if not q_s_inv > 0:
        raise DomainError(f"1/Q_S must be positive, got {q_s_inv!r}")
    return q_s_inv / part.p_si


def oxide_equivalent_q(part):
    """Q the oxide layer alone would impose on the resonator."""
    if part.p_sio2 == 0 or part.q_sio2_inv == 0:
        return math.inf
    return 1.0 / (part.p_sio2 * part.q_sio2_inv)


def oxide_negligible(part, q_l, ratio=100.0):
    return oxide_equivalent_q(part) >= ratio * q_l


def propagate_loss_error(q_l, sigma_q_l, q0, budget, part):
    """First-order standard uncertainty of 1/Q_Si.

    Inputs are independent; Q_L carries an absolute sigma, the parasitic Qs and
    p_Si carry the relative errors stored in ``budget`` and ``part``.
    Disabled (infinite) channels contribute nothing.
    """
    if not sigma_q_l >= 0:
        raise DomainError(f"sigma_q_l must be non-negative, got {sigma_q_l!r}")
    loss = silicon_loss(sample_inverse_q(q_l, q0, budget), part)
    p = part.p_si
    # d(1/Q_Si)/dQ_x = -+1/(p Q_x^2); with sigma_x = rel_x Q_x this is rel_x/(p Q_x)
    terms = [sigma_q_l / (p * q_l * q_l)]
    for q, rel in ((q0, budget.rel_err_q0), (budget.q1, budget.rel_err_q1),
                   (budget.q2, budget.rel_err_q2)):
        terms.append(rel * _inv(q) / p)
    terms.append(loss * part.rel_err_p_si)
    return math.sqrt(math.fsum(t * t for t in terms))


def loss_from_q(q_l, sigma_q_l, temperature, budget, part, field=0.0):
    """Full conversion of one Q measurement into a LossPoint."""
    q0 = q0_at(budget, temperature)
    loss = silicon_loss(sample_inverse_q(q_l, q0, budget), part)
    sigma = propagate_loss_error(q_l, sigma_q_l, q0, budget, part)
    return LossPoint(temperature=temperature, field=field, loss=loss, sigma=sigma)
