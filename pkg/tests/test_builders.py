import pathlib
import sys

script_dir = pathlib.Path(__file__).parent.absolute()
parent_dir = script_dir.parents[0]
sys.path.append(str(parent_dir))

import numpy as np
import pytest

from badmarket import builders
from badmarket.errors import DomainError


def test_one_agent_economy():
    econ = builders.build_one_agent_economy()
    assert econ.n == 1
    assert econ.firms == ()
    assert econ.commodities.bad_count == 1
    np.testing.assert_array_equal(econ.endowments, [[1.0, 1.0]])
    assert econ.bounds[0, 0] == builders.ONE_AGENT_BAD_BOUND


def test_display_order_round_trip_on_one_vector():
    econ = builders.build_one_agent_economy()
    internal = np.array([-0.5, 0.5])
    np.testing.assert_array_equal(builders.to_display_order(econ, internal), [0.5, -0.5])
    np.testing.assert_array_equal(builders.from_display_order(econ, [0.5, -0.5]), internal)


def test_hara_economy():
    econ = builders.build_hara_economy(3)
    assert econ.consumer_ids == ('w1', 'w2', 'w3')
    np.testing.assert_allclose(econ.weights, [1 / 3] * 3)
    coefficients = [c.preference.params['coefficient'] for c in econ.consumers]
    np.testing.assert_allclose(coefficients, [1 / 3, 2 / 3, 1.0])
    # internal order is (bad, good); the good endowment is 2
    np.testing.assert_array_equal(econ.endowments[0], [1.0, 2.0])
    assert econ.bounds[0, 0] == builders.HARA_BOUND_FACTOR * 3


def test_garbage_economy_layout():
    econ = builders.build_garbage_economy(5)
    np.testing.assert_allclose(builders.garbage_omegas(5), [0.1, 0.3, 0.5, 0.7, 0.9])
    assert econ.firm_ids == ('firm1', 'firm2')
    assert econ.firms[0].generators == ((1.0, -1.0, 1.0),)
    assert econ.firms[1].generators == ((-1.0, -1.0, 0.0),)
    np.testing.assert_allclose(econ.endowments[:, 1], 2 * builders.garbage_omegas(5))
    np.testing.assert_allclose(econ.bounds[:, 0], builders.garbage_omegas(5))


def test_garbage_hoarders():
    econ = builders.build_garbage_economy(1200)
    signs = np.array([c.preference.params['sign'] for c in econ.consumers])
    assert int((signs > 0).sum()) == 120
    assert builders.is_hoarder(0.55)
    assert not builders.is_hoarder(0.5)
    assert not builders.is_hoarder(0.6)


@pytest.mark.parametrize('n', [0, -3, 2.5])
def test_builders_reject_bad_sizes(n):
    with pytest.raises(DomainError):
        builders.build_hara_economy(n)
    with pytest.raises(DomainError):
        builders.build_garbage_economy(n)
