import pathlib
import sys

script_dir = pathlib.Path(__file__).parent.absolute()
parent_dir = script_dir.parents[0]
sys.path.append(str(parent_dir))

import numpy as np
import pytest

from badmarket import builders, economy
from badmarket.economy import CommoditySpace, Consumer, Economy, Technology
from badmarket.errors import DimensionError, SchemaError, ZeroWeight
from badmarket.preferences import PreferenceSpec


def _cd_consumer(cid, weight=0.5, shares=(1.0,)):
    return Consumer(
        id=cid,
        weight=weight,
        endowment=(1.0, 0.0),
        shares=shares,
        bounds=(np.inf, np.inf),
        preference=PreferenceSpec.cobb_douglas((0.5, 0.5)),
    )


def _two_good_economy(generator=(-1.0, 1.0), shares=(1.0, 1.0), witnesses=None):
    consumers = (_cd_consumer('a', shares=(shares[0],)), _cd_consumer('b', shares=(shares[1],)))
    return Economy(
        CommoditySpace(ell=2),
        consumers,
        firms=(Technology.cone([generator]),),
        monotone_witnesses={0: ('a', 'b'), 1: ('a', 'b')} if witnesses is None else witnesses,
    )


def test_commodity_space_bounds():
    with pytest.raises(SchemaError):
        CommoditySpace(ell=2, bad_count=3)
    with pytest.raises(SchemaError):
        CommoditySpace(ell=0)
    cs = CommoditySpace(ell=3, bad_count=1)
    assert list(cs.bads) == [0]
    assert list(cs.goods) == [1, 2]
    assert cs.labels == ('c0', 'c1', 'c2')


def test_firm_ids_default_and_dimension_checks():
    econ = _two_good_economy()
    assert econ.firm_ids == ('firm1',)
    assert econ.firms[0].offset == (0.0, 0.0)
    with pytest.raises(DimensionError):
        Economy(CommoditySpace(ell=2), (_cd_consumer('a', shares=()),), firms=(Technology.cone([(1.0, -1.0)]),))


def test_free_disposal_generator_matrix():
    tech = Technology.cone([(1.0, -1.0, 1.0)], free_disposal=True)
    gens = tech.generator_matrix(3)
    assert gens.shape == (4, 3)
    np.testing.assert_array_equal(gens[1:], -np.eye(3))


def test_validate_builders_pass():
    for econ in (builders.build_one_agent_economy(), builders.build_hara_economy(100), builders.build_garbage_economy(100)):
        report = economy.validate_economy(econ)
        assert report.passed, report.summary()


def test_validate_garbage_warns_about_human_capital_witnesses():
    report = economy.validate_economy(builders.build_garbage_economy(10))
    assert report.passed
    assert 'monotone-witness-unverified' in report.rule_ids('warning')


def test_validate_positive_generator():
    econ = Economy(
        CommoditySpace(ell=3),
        (Consumer('a', 1.0, (1.0, 1.0, 1.0), (1.0,), (np.inf,) * 3, PreferenceSpec.cobb_douglas((1.0, 1.0, 1.0))),),
        firms=(Technology.cone([(1.0, 1.0, 0.0)]),),
        monotone_witnesses={0: ('a',), 1: ('a',), 2: ('a',)},
    )
    report = economy.validate_economy(econ)
    assert not report.passed
    assert 'cone-positive-generator' in report.rule_ids('error')


def test_validate_opposite_generators():
    econ = Economy(
        CommoditySpace(ell=2),
        (_cd_consumer('a', weight=1.0, shares=(1.0, 1.0)),),
        firms=(Technology.cone([(-1.0, 1.0)]), Technology.cone([(1.0, -1.0)])),
        monotone_witnesses={0: ('a',), 1: ('a',)},
    )
    assert 'cone-opposite-generators' in economy.validate_economy(econ).rule_ids('error')


def test_validate_missing_witness():
    econ = _two_good_economy(witnesses={0: ('a',)})
    report = economy.validate_economy(econ)
    assert 'monotone-witness-declared' in report.rule_ids('error')


def test_validate_unknown_witness():
    econ = _two_good_economy(witnesses={0: ('a',), 1: ('zed',)})
    assert 'monotone-witness-known' in economy.validate_economy(econ).rule_ids('error')


def test_validate_shares_not_summing_to_one():
    econ = _two_good_economy(shares=(0.9, 0.9))
    report = economy.validate_economy(econ)
    assert 'shares-sum' in report.rule_ids('error')
    assert not report.passed


def test_validate_weights_and_bad_bounds():
    consumer = Consumer('a', 0.5, (1.0, 1.0), (), (np.inf, np.inf), PreferenceSpec.linear((-1.0, 1.0)))
    econ = Economy(CommoditySpace(ell=2, bad_count=1), (consumer,), monotone_witnesses={1: ('a',)})
    ids = economy.validate_economy(econ).rule_ids('error')
    assert 'weights-sum' in ids
    assert 'bad-bounds-finite' in ids


def test_validate_survival_failure():
    # the owned firm consumes a fixed bundle the consumer cannot supply
    consumer = Consumer('a', 1.0, (0.0, 0.0), (1.0,), (np.inf, np.inf), PreferenceSpec.cobb_douglas((1.0, 1.0)))
    econ = Economy(
        CommoditySpace(ell=2),
        (consumer,),
        firms=(Technology(kind='zero_firm', offset=(-1.0, -1.0)),),
        monotone_witnesses={0: ('a',), 1: ('a',)},
    )
    assert 'survival' in economy.validate_economy(econ).rule_ids('error')


def test_validate_never_raises_on_bad_indices():
    consumer = Consumer('a', 1.0, (1.0, 1.0), (), (1.0, np.inf), PreferenceSpec.quadratic_bad(1.0, good=3, bad=0))
    econ = Economy(CommoditySpace(ell=2, bad_count=1), (consumer,), monotone_witnesses={1: ('a',)})
    assert 'preference-indices' in economy.validate_economy(econ).rule_ids('error')


def test_validate_mixed_kinds_warning():
    consumer = _cd_consumer('a', weight=1.0, shares=(1.0, 1.0))
    econ = Economy(
        CommoditySpace(ell=2),
        (consumer,),
        firms=(Technology.cone([(-1.0, 1.0)]), Technology.polytope([(0.0, 0.0), (-1.0, 0.5)])),
        monotone_witnesses={0: ('a',), 1: ('a',)},
    )
    report = economy.validate_economy(econ)
    assert 'aggregate-closedness-unverified' in report.rule_ids('warning')


def test_rescale_uniform_is_identity():
    econ = builders.build_hara_economy(4)
    rescaled = economy.rescale_to_unweighted(econ)
    np.testing.assert_array_equal(rescaled.endowments, econ.endowments)
    np.testing.assert_array_equal(rescaled.bounds, econ.bounds)
    assert all(c.preference.scale == 1.0 for c in rescaled.consumers)


def test_rescale_weighted_endowments():
    econ = _two_good_economy()
    consumers = (
        Consumer('a', 0.75, (2.0, 0.0), (1.0,), (np.inf, np.inf), PreferenceSpec.cobb_douglas((0.5, 0.5))),
        Consumer('b', 0.25, (4.0, 0.0), (1.0,), (np.inf, np.inf), PreferenceSpec.cobb_douglas((0.5, 0.5))),
    )
    econ = Economy(econ.commodities, consumers, econ.firms, econ.monotone_witnesses)
    rescaled = economy.rescale_to_unweighted(econ)
    np.testing.assert_allclose(rescaled.endowments[:, 0], [1.5 * 2.0, 0.5 * 4.0])
    np.testing.assert_allclose(rescaled.weights, [0.5, 0.5])
    np.testing.assert_allclose(rescaled.shares[:, 0], [1.5, 0.5])
    assert rescaled.consumers[0].preference.scale == pytest.approx(1.5)
    assert economy.validate_economy(rescaled).passed


def test_rescale_rejects_zero_weight():
    consumers = (
        Consumer('a', 1.0, (1.0, 0.0), (), (np.inf, np.inf), PreferenceSpec.cobb_douglas((0.5, 0.5))),
        Consumer('b', 0.0, (1.0, 0.0), (), (np.inf, np.inf), PreferenceSpec.cobb_douglas((0.5, 0.5))),
    )
    econ = Economy(CommoditySpace(ell=2), consumers, monotone_witnesses={0: ('a',), 1: ('a',)})
    with pytest.raises(ZeroWeight):
        economy.rescale_to_unweighted(econ)
