"""Numeric optimizer cross-checks against every closed form it shadows.

The optimizer is deliberately independent of the analytic modules: routing
aside, it only trusts feasibility and cost.  These tests tie the two
implementations together.
"""

import numpy as np
import pytest

from sysrisk.closed_forms import expected_shortfall, rho_ag, rho_deterministic
from sysrisk.core import (
    EisenbergNoe,
    ExpectationFloor,
    ExpectedShortfall,
    ExponentialLoss,
    InfeasibleError,
    RiskVector,
    ScenarioSpace,
    ShortfallSum,
    Sum,
    WorstCase,
)
from sysrisk.finite_alloc import solve_grouped
from sysrisk.oracle import (
    Deterministic,
    FloorConstrained,
    FullyFlexible,
    Grouped,
    ThetaMap,
    TwoStateParametric,
    allocation_total,
    check_cash_invariance,
    check_structural_properties,
    check_sum_reduction,
    numeric_rho,
    numeric_rho_family,
    sample_instance,
)

EXP_FLOOR_50 = ExpectationFloor(-50.0)


# ---------------------------------------------------------------------------
# exponential branch vs the grouped closed form


@pytest.mark.parametrize(
    "partition",
    [
        ((0, 1, 2, 3),),
        ((0,), (1,), (2,), (3,)),
        ((0, 2), (1,), (3,)),
        ((0, 1), (2, 3)),
    ],
)
def test_exponential_matches_grouped_solver(four_bank_example, partition):
    x, alphas, gamma = four_bank_example
    analytic = solve_grouped(x, alphas, gamma, partition)
    numeric = numeric_rho(
        x, Grouped(partition), ExponentialLoss(alphas), ExpectationFloor(-gamma)
    )
    assert numeric.rho == pytest.approx(analytic.rho, rel=1e-8, abs=1e-8)
    # allocations only identify where the constraint can see them; deep in
    # the safe region the exponential underflows and any within-group split
    # is numerically optimal, so compare consumption instead of cash
    consume = lambda y: np.exp(-alphas[:, None] * (x.positions + y))
    np.testing.assert_allclose(
        consume(numeric.allocation), consume(analytic.allocation), atol=1e-8
    )
    for block in partition:
        np.testing.assert_allclose(
            numeric.allocation[list(block)].sum(axis=0),
            analytic.allocation[list(block)].sum(axis=0),
            atol=1e-6,
        )


def test_flexible_is_grand_coalition(four_bank_example):
    x, alphas, gamma = four_bank_example
    lam, crit = ExponentialLoss(alphas), ExpectationFloor(-gamma)
    flex = numeric_rho(x, FullyFlexible(), lam, crit)
    grand = numeric_rho(x, Grouped(((0, 1, 2, 3),)), lam, crit)
    assert flex.rho == pytest.approx(grand.rho, rel=1e-10)
    assert flex.rho == pytest.approx(-26.403056761, abs=1e-6)


def test_deterministic_is_all_singletons(four_bank_example):
    x, alphas, gamma = four_bank_example
    lam, crit = ExponentialLoss(alphas), ExpectationFloor(-gamma)
    det = numeric_rho(x, Deterministic(), lam, crit)
    singles = numeric_rho(x, Grouped(((0,), (1,), (2,), (3,))), lam, crit)
    assert det.rho == pytest.approx(singles.rho, rel=1e-10)
    # a deterministic allocation is scenario-constant row by row
    assert float(np.ptp(det.allocation, axis=1).max()) <= 1e-8


def test_random_instances_exponential(small_risk_vector):
    for seed in range(10):
        x, alphas, gamma = sample_instance(seed, low=-30.0, high=30.0)
        partition = tuple((i,) for i in range(x.n))
        analytic = solve_grouped(x, alphas, gamma, partition)
        numeric = numeric_rho(
            x, Grouped(partition), ExponentialLoss(alphas), ExpectationFloor(-gamma)
        )
        assert numeric.rho == pytest.approx(analytic.rho, rel=1e-8, abs=1e-8)


# ---------------------------------------------------------------------------
# exact worst-case branch


def test_worst_case_sum_closed_form(small_risk_vector):
    res = numeric_rho(small_risk_vector, FullyFlexible(), Sum(), WorstCase())
    expected = -small_risk_vector.positions.sum(axis=0).min()
    assert res.rho == expected
    assert res.diagnostics["method"] == "exact-worst-case"


def test_worst_case_shortfall_deterministic(small_risk_vector):
    d = np.array([1.0, -0.5])
    res = numeric_rho(
        small_risk_vector, Deterministic(), ShortfallSum(d), WorstCase()
    )
    expected = (d[:, None] - small_risk_vector.positions).max(axis=1).sum()
    assert res.rho == expected


def test_worst_case_shortfall_flexible(small_risk_vector):
    d = np.zeros(2)
    res = numeric_rho(
        small_risk_vector, FullyFlexible(), ShortfallSum(d), WorstCase()
    )
    expected = (d[:, None] - small_risk_vector.positions).sum(axis=0).max()
    assert res.rho == expected


def test_worst_case_zero_floors_meet_aggregated_measure(small_risk_vector):
    # cash kept nonnegative can only top institutions up, which is exactly
    # what adding capital after aggregation buys: the two costs coincide
    res = numeric_rho(
        small_risk_vector,
        FloorConstrained(np.zeros(2)),
        ShortfallSum(np.zeros(2)),
        WorstCase(),
    )
    assert res.rho == rho_ag(small_risk_vector, criterion=WorstCase())


def test_worst_case_clearing_equals_zero_shortfall(small_risk_vector):
    pi = np.array([[0.0, 0.4], [0.3, 0.0]])
    a = numeric_rho(
        small_risk_vector, FullyFlexible(), EisenbergNoe(pi), WorstCase()
    )
    b = numeric_rho(
        small_risk_vector, FullyFlexible(), ShortfallSum(np.zeros(2)), WorstCase()
    )
    assert a.rho == b.rho
    assert a.diagnostics["method"] == "exact-worst-case-clearing"


# ---------------------------------------------------------------------------
# exact linear branch


def test_expectation_floor_sum_is_linear(small_risk_vector):
    x = small_risk_vector
    b = -4.0
    res = numeric_rho(x, FullyFlexible(), Sum(), ExpectationFloor(b))
    expected = b - float(x.space.probabilities @ x.positions.sum(axis=0))
    assert res.rho == expected
    assert res.diagnostics["method"] == "exact-linear"
    assert allocation_total(res.allocation) == pytest.approx(res.rho, abs=1e-12)


def test_expectation_floor_sum_with_floors(small_risk_vector):
    x = small_risk_vector
    base = -4.0 - float(x.space.probabilities @ x.positions.sum(axis=0))
    # binding floors push the cost up to their sum
    tight = numeric_rho(
        x, FloorConstrained(np.array([0.0, 0.0])), Sum(), ExpectationFloor(-4.0)
    )
    assert tight.rho == max(base, 0.0)
    assert np.all(tight.allocation >= 0.0)
    # one unconstrained institution absorbs the sink and restores the base cost
    loose = numeric_rho(
        x,
        FloorConstrained(np.array([0.0, -np.inf])),
        Sum(),
        ExpectationFloor(-4.0),
    )
    assert loose.rho == base
    assert np.all(loose.allocation[0] >= 0.0)


# ---------------------------------------------------------------------------
# penalty branch (expected shortfall criterion)


def test_expected_shortfall_flexible_reduces_to_sum(small_risk_vector):
    x = small_risk_vector
    res = numeric_rho(x, FullyFlexible(), Sum(), ExpectedShortfall(0.05))
    expected = expected_shortfall(
        x.positions.sum(axis=0), x.space.probabilities, 0.05
    )
    assert res.rho == pytest.approx(expected, abs=1e-6)


def test_class_nesting_orders_costs(small_risk_vector):
    """Deterministic within two-state within fully flexible, so the optimal
    costs must be weakly decreasing along that chain."""
    x = small_risk_vector
    lam, crit = Sum(), ExpectedShortfall(0.05)
    det = numeric_rho(x, Deterministic(), lam, crit).rho
    two = numeric_rho(
        x, TwoStateParametric(np.array([1.0, 0.0, 0.0])), lam, crit
    ).rho
    flex = numeric_rho(x, FullyFlexible(), lam, crit).rho
    assert flex <= two + 1e-6
    assert two <= det + 1e-6


def test_two_state_allocation_structure(small_risk_vector):
    ind = np.array([1.0, 0.0, 0.0])
    res = numeric_rho(
        small_risk_vector,
        TwoStateParametric(ind),
        ShortfallSum(np.zeros(2)),
        ExpectedShortfall(0.05),
    )
    y = res.allocation
    # off-state columns all agree; on-state column differs by a zero-sum alpha
    np.testing.assert_allclose(y[:, 1], y[:, 2], atol=1e-9)
    alpha = y[:, 0] - y[:, 1]
    assert float(alpha.sum()) == pytest.approx(0.0, abs=1e-8)


# ---------------------------------------------------------------------------
# routing refusals


def test_exponential_rejects_sign_criteria(small_risk_vector):
    lam = ExponentialLoss(np.array([0.2, 0.3]))
    with pytest.raises(InfeasibleError):
        numeric_rho(small_risk_vector, FullyFlexible(), lam, WorstCase())
    with pytest.raises(InfeasibleError):
        numeric_rho(small_risk_vector, FullyFlexible(), lam, ExpectedShortfall(0.05))
    with pytest.raises(InfeasibleError):
        numeric_rho(small_risk_vector, FullyFlexible(), lam, ExpectationFloor(3.0))


# ---------------------------------------------------------------------------
# structural audits


def _exp_rho(x, alphas=(0.3, 0.3), gamma=10.0):
    return numeric_rho(
        x,
        FullyFlexible(),
        ExponentialLoss(np.asarray(alphas)),
        ExpectationFloor(-gamma),
    ).rho


def test_cash_invariance_holds(small_risk_vector):
    for v in ([1.0, -2.0], [0.5, 0.5], [-3.0, 0.0]):
        gap = check_cash_invariance(_exp_rho, small_risk_vector, v)
        assert gap <= 1e-6


def test_sum_reduction_flexible_vs_deterministic(small_risk_vector):
    flex = check_sum_reduction(_exp_rho, small_risk_vector, n_transfers=10)
    assert flex.invariant
    assert flex.max_deviation <= 1e-6

    def det_rho(x):
        return numeric_rho(
            x,
            Deterministic(),
            ExponentialLoss(np.array([0.3, 0.3])),
            ExpectationFloor(-10.0),
        ).rho

    det = check_sum_reduction(det_rho, small_risk_vector, n_transfers=10)
    assert not det.invariant


def test_structural_properties_smoke(small_risk_vector):
    reports = check_structural_properties(
        _exp_rho, small_risk_vector, trials=60, seed=3
    )
    assert [r.property for r in reports] == [
        "monotonicity",
        "quasi-convexity",
        "convexity",
    ]
    for r in reports:
        assert r.trials == 60
        assert r.failures == 0
        assert r.worst_violation <= 1e-6


# ---------------------------------------------------------------------------
# self-financing budget schedules


def test_constant_schedule_recovers_plain_measure(four_bank_example):
    x, alphas, gamma = four_bank_example
    theta = ThetaMap(np.array([-100.0, 200.0]), np.array([gamma, gamma]))
    res = numeric_rho_family(x, FullyFlexible(), ExponentialLoss(alphas), theta)
    assert res.rho == pytest.approx(-26.403056761, abs=1e-6)


def test_increasing_schedule_self_consistency(four_bank_example):
    x, alphas, _ = four_bank_example
    theta = ThetaMap(np.array([-80.0, 120.0]), np.array([20.0, 90.0]))
    res = numeric_rho_family(x, FullyFlexible(), ExponentialLoss(alphas), theta)
    direct = numeric_rho(
        x, FullyFlexible(), ExponentialLoss(alphas), ExpectationFloor(-theta(res.rho))
    )
    # the found level finances exactly the acceptance it induces
    assert direct.rho == pytest.approx(res.rho, abs=1e-6)
    # every level enjoys a budget of at least 20, so the self-consistent
    # cost can never exceed the flat-20 cost
    flat = numeric_rho(
        x, FullyFlexible(), ExponentialLoss(alphas), ExpectationFloor(-20.0)
    )
    assert res.rho <= flat.rho + 1e-9


@pytest.mark.parametrize(
    "levels,budgets,msg",
    [
        ([0.0, 0.0], [1.0, 2.0], "strictly increasing"),
        ([0.0, 1.0], [2.0, 1.0], "nondecreasing"),
        ([0.0, 1.0], [0.0, 1.0], "positive"),
        ([0.0], [1.0, 2.0], "equal-length"),
    ],
)
def test_theta_map_validation(levels, budgets, msg):
    with pytest.raises(ValueError, match=msg):
        ThetaMap(np.array(levels), np.array(budgets))


# ---------------------------------------------------------------------------
# instance sampler


def test_sample_instance_reproducible():
    x1, a1, g1 = sample_instance(123)
    x2, a2, g2 = sample_instance(123)
    np.testing.assert_array_equal(x1.positions, x2.positions)
    np.testing.assert_array_equal(a1, a2)
    assert g1 == g2


def test_sample_instance_ranges():
    for seed in range(20):
        x, alphas, gamma = sample_instance(seed)
        assert 2 <= x.n <= 4 and 2 <= x.m <= 6
        assert x.space.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all((alphas >= 0.05) & (alphas <= 0.5))
        assert 1.0 <= gamma <= 100.0
        assert np.all(np.abs(x.positions) <= 100.0)
