import math

from hypothesis import assume, given, settings, strategies as st
import numpy as np
import pytest
from pytest import approx

from siloss.budget import (DISABLED, LossPoint, Participation, QBudget, loss_from_q,
                           oxide_equivalent_q, oxide_negligible, propagate_loss_error, q0_at,
                           sample_inverse_q, silicon_loss)
from siloss.errors import BudgetInconsistencyError, DomainError, ExtrapolationError

TABLE = QBudget(q0=[(0.1, 1e10), (1.0, 1e11)], q1=5.8e9, q2=6.5e11)


def test_q0_scalar(budget):
    assert q0_at(budget, 0.02) == 3e9
    assert q0_at(budget, 5.0) == 3e9


def test_q0_table_node_and_midpoint():
    assert q0_at(TABLE, 0.1) == approx(1e10, rel=1e-12)
    assert q0_at(TABLE, 1.0) == approx(1e11, rel=1e-12)
    assert q0_at(TABLE, math.sqrt(0.1)) == approx(10 ** 10.5, rel=1e-12)
    assert q0_at(TABLE, 0.3162) == approx(3.162e10, rel=1e-3)


@pytest.mark.parametrize("t", [0.05, 1.5])
def test_q0_table_no_extrapolation(t):
    with pytest.raises(ExtrapolationError):
        q0_at(TABLE, t)


def test_q0_table_validation():
    with pytest.raises(DomainError):
        QBudget(q0=[(0.2, 1e10), (0.1, 1e11)], q1=1e9, q2=1e9)
    with pytest.raises(DomainError):
        QBudget(q0=[(0.1, -1.0)], q1=1e9, q2=1e9)
    with pytest.raises(DomainError):
        QBudget(q0=1e9, q1=0.0, q2=1e9)


def test_sample_inverse_q_disabled_channels():
    b = QBudget(q0=DISABLED, q1=DISABLED, q2=DISABLED)
    assert sample_inverse_q(3e8, DISABLED, b) == 1 / 3e8


def test_sample_inverse_q_example(budget):
    assert sample_inverse_q(3.0e8, 3.0e9, budget) == approx(2.8260477453580902e-9, rel=1e-12)


def test_sample_inverse_q_inconsistent():
    b = QBudget(q0=3e9, q1=DISABLED, q2=DISABLED)
    with pytest.raises(BudgetInconsistencyError):
        sample_inverse_q(1e10, 3e9, b)


def test_silicon_loss(part):
    assert silicon_loss(2.8260e-9, part) == approx(3.140e-6, rel=1e-4)
    assert silicon_loss(2.5e-9, Participation(p_si=1.0, p_sio2=0.0)) == 2.5e-9
    half = silicon_loss(1e-9, Participation(p_si=2 * part.p_si))
    assert half == approx(silicon_loss(1e-9, part) / 2, rel=1e-15)


def test_oxide_equivalent_q():
    assert oxide_equivalent_q(Participation()) == approx(6.6667e10, rel=1e-4)
    assert oxide_equivalent_q(Participation(p_sio2=0.0)) == math.inf
    assert oxide_equivalent_q(Participation(q_sio2_inv=0.0)) == math.inf
    assert oxide_negligible(Participation(), 3e8)
    assert not oxide_negligible(Participation(), 3e9)


def test_error_zero_inputs():
    b = QBudget(3e9, 5.8e9, 6.5e11, 0.0, 0.0, 0.0)
    p = Participation(rel_err_p_si=0.0)
    assert propagate_loss_error(3e8, 0.0, 3e9, b, p) == 0.0


def test_error_only_p_si():
    b = QBudget(3e9, 5.8e9, 6.5e11, 0.0, 0.0, 0.0)
    loss = silicon_loss(sample_inverse_q(3e8, 3e9, b), Participation())
    assert propagate_loss_error(3e8, 0.0, 3e9, b, Participation()) == approx(0.25 * loss)


def test_error_hand_computed(budget, part):
    # partial derivatives written out for this configuration
    p = 9e-4
    terms = [3e6 / (p * 3e8 ** 2), 0.1 / (p * 3e9), 0.1 / (p * 5.8e9), 0.1 / (p * 6.5e11),
             0.25 * 3.1400530503978780e-6]
    expected = math.sqrt(sum(t * t for t in terms))
    assert propagate_loss_error(3e8, 3e6, 3e9, budget, part) == approx(expected, rel=1e-12)


def test_loss_from_q(budget, part):
    point = loss_from_q(3e8, 3e6, 0.1, budget, part, field=5.0)
    assert isinstance(point, LossPoint)
    assert point.loss == approx(3.1400530503978780e-6, rel=1e-12)
    assert point.field == 5.0


def test_loss_point_validation():
    with pytest.raises(DomainError):
        LossPoint(0.0, 5.0, 1e-6, 1e-7)
    with pytest.raises(DomainError):
        LossPoint(0.1, 5.0, 0.0, 1e-7)
    with pytest.raises(DomainError):
        LossPoint(0.1, 5.0, 1e-6, -1.0)


q_values = st.floats(1e7, 1e12)


@given(q_values, q_values, q_values, q_values)
def test_monotone_in_each_parasitic_q(q_l, q0, q1, q2):
    b = QBudget(q0, q1, q2)
    assume(1 / q_l > 1.01 * (1 / q0 + 1 / q1 + 1 / q2))
    base = sample_inverse_q(q_l, q0, b)
    assert sample_inverse_q(q_l, 2 * q0, b) > base
    assert sample_inverse_q(q_l, q0, QBudget(q0, 2 * q1, q2)) > base
    assert sample_inverse_q(q_l, q0, QBudget(q0, q1, 2 * q2)) > base
    assert sample_inverse_q(q_l / 2, q0, b) > base


@given(st.floats(0.1, 10.0))
def test_homogeneous_degree_minus_one(a):
    b1 = QBudget(3e9, 5.8e9, 6.5e11)
    b2 = QBudget(a * 3e9, a * 5.8e9, a * 6.5e11)
    part = Participation()
    l1 = silicon_loss(sample_inverse_q(3e8, 3e9, b1), part)
    l2 = silicon_loss(sample_inverse_q(a * 3e8, a * 3e9, b2), part)
    assert l2 == approx(l1 / a, rel=1e-10)


def _mc_rates(q_l, s_l, q0, q1, q2, rel_q, p, rel_p, n, seed):
    """Monte-Carlo std with Gaussian errors on the loss rates 1/Q and on 1/p.

    In this parametrisation the estimator is linear in every random input
    except the product with 1/p, so first-order propagation is exact up to the
    product term.
    """
    rng = np.random.default_rng(seed)
    inv_l = 1 / q_l + (s_l / q_l ** 2) * rng.standard_normal(n)
    parasitic = sum((1 / q) * (1 + rel_q * rng.standard_normal(n)) for q in (q0, q1, q2))
    inv_p = (1 / p) * (1 + rel_p * rng.standard_normal(n))
    return np.std((inv_l - parasitic) * inv_p, ddof=1)


@settings(max_examples=10, deadline=None, derandomize=True)
@given(st.floats(1e8, 1e9), st.floats(0.001, 0.05), st.floats(0.01, 0.25),
       st.floats(0.01, 0.25), st.integers(0, 2 ** 31))
def test_error_matches_monte_carlo_on_rates(q_l, rel_l, rel_q, rel_p, seed):
    q0, q1, q2, p = 10 * q_l, 20 * q_l, 2000 * q_l, 9e-4
    b = QBudget(q0, q1, q2, rel_q, rel_q, rel_q)
    part = Participation(p_si=p, rel_err_p_si=rel_p)
    analytic = propagate_loss_error(q_l, rel_l * q_l, q0, b, part)
    mc = _mc_rates(q_l, rel_l * q_l, q0, q1, q2, rel_q, p, rel_p, 100_000, seed)
    # the product term adds var(a) var(b) on top of the linear propagation
    assert mc == approx(analytic, rel=0.02 + rel_p * rel_q)


def test_error_matches_monte_carlo_small_errors():
    # Gaussian draws on Q values and p_si directly; fine when all errors are small
    q_l, q0, q1, q2, p = 3e8, 3e9, 5.8e9, 6.5e11, 9e-4
    rel = 0.02
    b = QBudget(q0, q1, q2, rel, rel, rel)
    part = Participation(rel_err_p_si=rel)
    analytic = propagate_loss_error(q_l, 0.01 * q_l, q0, b, part)
    rng = np.random.default_rng(7)
    n = 100_000
    draw = lambda q, r: q * (1 + r * rng.standard_normal(n))  # noqa: E731
    loss = (1 / draw(q_l, 0.01) - 1 / draw(q0, rel) - 1 / draw(q1, rel) - 1 / draw(q2, rel)) \
        / draw(p, rel)
    assert np.std(loss, ddof=1) == approx(analytic, rel=0.02)
