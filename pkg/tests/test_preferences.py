import pathlib
import sys

script_dir = pathlib.Path(__file__).parent.absolute()
parent_dir = script_dir.parents[0]
sys.path.append(str(parent_dir))

import numpy as np
import pytest

from badmarket import builders, experiments, preferences
from badmarket.economy import Consumer
from badmarket.errors import DomainError, EmptyBudget, SchemaError, UnboundedProblem
from badmarket.preferences import Context, Externality, PreferenceSpec

GARBAGE_PRICE = np.array([-0.25, 0.25, 0.5])


def _consumer(spec, bounds, endowment=None, cid='c'):
    ell = len(bounds)
    return Consumer(cid, 1.0, endowment or (0.0,) * ell, (), bounds, spec)


def _garbage_consumer(omega, sign=-1.0):
    spec = PreferenceSpec.log_minus_linear(sign, good=2, bad=0)
    return _consumer(spec, (omega, np.inf, np.inf))


def test_utility_examples():
    quad = PreferenceSpec.quadratic_bad(1.0, good=1, bad=0)
    assert preferences.utility(quad, [1.0, 2.0]) == pytest.approx(1.0)
    lin = PreferenceSpec.linear((-1.0, 1.0))
    assert preferences.utility(lin, [1.0, 1.0]) == 0.0


def test_utility_log_family_at_zero():
    spec = PreferenceSpec.log_minus_linear(1.0, good=1, bad=0)
    assert preferences.utility(spec, [0.5, 0.0]) == -np.inf


def test_gradient_examples():
    quad = PreferenceSpec.quadratic_bad(0.5, good=1, bad=0)
    grad = preferences.utility_gradient(quad, [2.0, 3.0])
    np.testing.assert_allclose(grad, [-2.0, 1.0])
    log = PreferenceSpec.log_minus_linear(1.0, good=0, bad=1)
    np.testing.assert_allclose(preferences.utility_gradient(log, [2.0, 0.7]), [0.5, 1.0])


def test_gradient_at_log_boundary():
    log = PreferenceSpec.log_minus_linear(1.0, good=0, bad=1)
    with pytest.raises(DomainError):
        preferences.utility_gradient(log, [0.0, 1.0])


def _random_specs(rng):
    return [
        PreferenceSpec.quadratic_bad(rng.uniform(0.1, 2.0), good=1, bad=0),
        PreferenceSpec.log_minus_linear(rng.choice([-1.0, 1.0]), good=1, bad=0),
        PreferenceSpec.linear(tuple(rng.uniform(-1.0, 1.0, 2))),
        PreferenceSpec.cobb_douglas(tuple(rng.uniform(0.1, 1.0, 2)), shifts=tuple(rng.uniform(0.0, 0.5, 2))),
    ]


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(100):
        x = rng.uniform(0.2, 3.0, 2)
        for spec in _random_specs(rng):
            grad = preferences.utility_gradient(spec, x)
            fd = [
                (preferences.utility(spec, x + h * e) - preferences.utility(spec, x - h * e)) / (2 * h)
                for e in np.eye(2)
            ]
            np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-8, err_msg=spec.family)


def test_index_errors_and_schema():
    with pytest.raises(IndexError):
        preferences.utility(PreferenceSpec.quadratic_bad(1.0, good=3, bad=0), [1.0, 1.0])
    with pytest.raises(SchemaError):
        PreferenceSpec.log_minus_linear(0.0, good=1, bad=0)
    with pytest.raises(SchemaError):
        PreferenceSpec.quadratic_bad(1.0, good=1, bad=1)
    with pytest.raises(SchemaError):
        PreferenceSpec('cubic', {})


@pytest.mark.parametrize(
    'omega, expected',
    [
        (0.2, (0.2, 0.0, 0.3)),
        (0.4, (0.2, 0.0, 0.5)),
        (0.8, (0.0, 0.0, 0.8)),
    ],
)
def test_garbage_demand(omega, expected):
    income = GARBAGE_PRICE[1] * 2 * omega
    x = preferences.demand(_garbage_consumer(omega), GARBAGE_PRICE, income)
    np.testing.assert_allclose(x, expected, atol=1e-12)


def test_garbage_hoarder_demand():
    omega = 0.55
    income = GARBAGE_PRICE[1] * 2 * omega
    x = preferences.demand(_garbage_consumer(omega, sign=1.0), GARBAGE_PRICE, income)
    np.testing.assert_allclose(x, [omega, 0.0, 1.5 * omega], atol=1e-12)


def test_garbage_demand_on_a_fine_grid():
    econ = builders.build_garbage_economy(1000)
    ref = experiments.garbage_oracle()
    incomes = econ.endowments @ GARBAGE_PRICE
    x = preferences.demand_many(econ.consumers, GARBAGE_PRICE, incomes)
    np.testing.assert_allclose(x, ref.demand(econ.bounds[:, 0]), atol=1e-12)


def test_quadratic_bad_demand_matches_closed_form():
    # single Hara consumer at its equilibrium price (-2, 1) with zero income
    spec = PreferenceSpec.quadratic_bad(1.0, good=1, bad=0)
    consumer = _consumer(spec, (10.0, np.inf), endowment=(1.0, 2.0))
    x = preferences.demand(consumer, [-2.0, 1.0], 0.0)
    np.testing.assert_allclose(x, [1.0, 2.0], atol=1e-12)


def test_linear_demand_prefers_largest_total():
    consumer = _consumer(PreferenceSpec.linear((-1.0, 1.0)), (2.0, np.inf), endowment=(1.0, 1.0))
    x = preferences.demand(consumer, [-0.5, 0.5], 0.0)
    assert preferences.utility(consumer.preference, x) == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(x, [2.0, 2.0], atol=1e-8)


def test_cobb_douglas_demand_shares():
    consumer = _consumer(PreferenceSpec.cobb_douglas((0.25, 0.75)), (np.inf, np.inf))
    x = preferences.demand(consumer, [1.0, 0.5], 2.0)
    np.testing.assert_allclose(x, [0.5, 3.0], rtol=1e-12)


def test_demand_is_homogeneous_of_degree_zero():
    consumers = [
        _consumer(PreferenceSpec.cobb_douglas((0.4, 0.6)), (np.inf, np.inf)),
        _consumer(PreferenceSpec.quadratic_bad(0.7, good=1, bad=0), (5.0, np.inf)),
        _garbage_consumer(0.3),
    ]
    cases = [([0.3, 0.7], 1.0), ([-0.4, 0.6], 0.5), (GARBAGE_PRICE, 0.15)]
    for consumer, (p, w) in zip(consumers, cases):
        p = np.asarray(p, dtype=float)
        base = preferences.demand(consumer, p, w)
        for t in (0.5, 3.0):
            np.testing.assert_allclose(preferences.demand(consumer, t * p, t * w), base, atol=1e-10)


def test_demand_many_matches_single():
    consumers = [_garbage_consumer(w) for w in (0.1, 0.3, 0.5)]
    incomes = [0.05, 0.15, 0.25]
    many = preferences.demand_many(consumers, GARBAGE_PRICE, incomes)
    for consumer, w, row in zip(consumers, incomes, many):
        np.testing.assert_allclose(preferences.demand(consumer, GARBAGE_PRICE, w), row)


def test_empty_and_unbounded_demand():
    consumer = _consumer(PreferenceSpec.cobb_douglas((0.5, 0.5)), (np.inf, np.inf))
    with pytest.raises(EmptyBudget):
        preferences.demand(consumer, [1.0, 1.0], -1.0)
    with pytest.raises(UnboundedProblem):
        preferences.demand(consumer, [1.0, -1.0], 1.0)


def test_min_budget_value():
    assert preferences.min_budget_value([-0.5, 0.5], [2.0, np.inf]) == -1.0
    assert preferences.min_budget_value([0.5, 0.5], [2.0, np.inf]) == 0.0


def test_cheaper_point():
    agent = _consumer(PreferenceSpec.linear((-1.0, 1.0)), (2.0, np.inf))
    z = preferences.cheaper_point(agent, [-0.5, 0.5], 0.0)
    np.testing.assert_array_equal(z, [2.0, 0.0])
    assert preferences.cheaper_point(agent, [0.5, 0.5], 0.0) is None


def test_cheaper_point_unbounded_negative_price():
    consumer = _consumer(PreferenceSpec.cobb_douglas((0.5, 0.5)), (np.inf, np.inf))
    z = preferences.cheaper_point(consumer, [-1.0, 1.0], 5.0)
    assert np.dot([-1.0, 1.0], z) < 5.0


def test_is_quasi_demanded():
    agent = _consumer(PreferenceSpec.linear((-1.0, 1.0)), (2.0, np.inf), endowment=(1.0, 1.0))
    assert preferences.is_quasi_demanded(agent, [1.0, 1.0], [-0.5, 0.5], 0.0)
    assert not preferences.is_quasi_demanded(agent, [1.0, 0.5], [-0.5, 0.5], 0.0)
    # unaffordable
    assert not preferences.is_quasi_demanded(agent, [0.0, 1.0], [-0.5, 0.5], 0.0)


def test_demand_gaps():
    consumers = [_garbage_consumer(0.2), _garbage_consumer(0.8)]
    bundles = np.array([[0.2, 0.0, 0.3], [0.0, 0.0, 0.7]])
    budget, gap, box = preferences.demand_gaps(consumers, bundles, GARBAGE_PRICE, [0.1, 0.4])
    np.testing.assert_allclose(budget, [0.0, 0.0], atol=1e-12)
    assert gap[0] == pytest.approx(0.0, abs=1e-12)
    assert gap[1] == pytest.approx(np.log(0.8) - np.log(0.7))
    np.testing.assert_allclose(box, [0.0, 0.0])


def test_externality_shifts_utility_not_demand():
    ext = Externality(gamma=(1.0, 0.0), statistic='mean_allocation')
    spec = PreferenceSpec.linear((-1.0, 1.0), externality=ext)
    plain = PreferenceSpec.linear((-1.0, 1.0))
    ctx = Context.from_state([1.0], [[0.4, 1.0]], np.zeros((0, 2)), [-0.5, 0.5])
    assert preferences.utility(spec, [1.0, 1.0], ctx) == pytest.approx(preferences.utility(plain, [1.0, 1.0]) - 0.4)
    agent = _consumer(spec, (2.0, np.inf))
    np.testing.assert_allclose(
        preferences.demand(agent, [-0.5, 0.5], 0.0, ctx=ctx),
        preferences.demand(agent, [-0.5, 0.5], 0.0),
    )


def test_externality_schema():
    with pytest.raises(SchemaError):
        Externality(gamma=(1.0,), statistic='median')
    with pytest.raises(SchemaError):
        Externality(gamma=(1.0, 2.0), shift=(1.0,))
