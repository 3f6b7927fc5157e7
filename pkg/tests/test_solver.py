import pathlib
import sys
from dataclasses import replace

script_dir = pathlib.Path(__file__).parent.absolute()
parent_dir = script_dir.parents[0]
sys.path.append(str(parent_dir))

import numpy as np
import pytest

from badmarket import builders, economy, solver
from badmarket.config import SolverConfig
from badmarket.economy import CommoditySpace, Consumer, Economy, Technology
from badmarket.errors import DimensionError, NoConvergence
from badmarket.preferences import PreferenceSpec, demand_many
from badmarket.solver import EquilibriumCertificate
from badmarket.welfare import check_nonnegative_price_rule, free_disposal_augment


def _one_agent_certificate(price=(-0.5, 0.5), bundle=(1.0, 1.0)):
    return EquilibriumCertificate(
        price=price,
        bundles=[bundle],
        activities=(),
        productions=np.zeros((0, 2)),
        consumer_ids=('agent',),
        firm_ids=(),
    )


def _cobb_douglas_economy(weights=(0.5, 0.5)):
    consumers = tuple(
        Consumer(cid, w, (1.0, 0.0), (1.0,), (np.inf, np.inf), PreferenceSpec.cobb_douglas((0.5, 0.5)))
        for cid, w in zip(('a', 'b'), weights)
    )
    return Economy(
        CommoditySpace(ell=2),
        consumers,
        firms=(Technology.cone([(-1.0, 1.0)]),),
        monotone_witnesses={0: ('a', 'b'), 1: ('a', 'b')},
    )


def test_one_agent_equilibrium():
    econ = builders.build_one_agent_economy()
    cert = solver.solve_equilibrium(econ)
    np.testing.assert_allclose(cert.price, [-0.5, 0.5], atol=1e-10)
    np.testing.assert_allclose(cert.bundle('agent'), [1.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(builders.to_display_order(econ, cert.price), [0.5, -0.5], atol=1e-10)
    assert solver.verify_equilibrium(econ, cert).passed


def test_hara_two_consumers():
    econ = builders.build_hara_economy(2)
    cert = solver.solve_equilibrium(econ)
    np.testing.assert_allclose(cert.price, [-4 / 7, 3 / 7], atol=1e-9)
    shown = builders.to_display_order(econ, cert.bundles)
    np.testing.assert_allclose(shown, [[22 / 9, 4 / 3], [14 / 9, 2 / 3]], atol=1e-9)


def test_cone_economy_activity():
    econ = _cobb_douglas_economy()
    cert = solver.solve_equilibrium(econ)
    np.testing.assert_allclose(cert.price, [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(cert.bundles, [[0.5, 0.5], [0.5, 0.5]], atol=1e-9)
    np.testing.assert_allclose(cert.activities[0].as_array(), [0.5], atol=1e-9)
    np.testing.assert_allclose(cert.production('firm1'), [-0.5, 0.5], atol=1e-9)


def test_rescaled_economy_maps_back():
    econ = _cobb_douglas_economy(weights=(0.75, 0.25))
    rescaled = economy.rescale_to_unweighted(econ)
    cert = solver.map_from_rescaled(econ, solver.solve_equilibrium(rescaled))
    np.testing.assert_allclose(cert.bundles, [[0.5, 0.5], [0.5, 0.5]], atol=1e-8)
    assert solver.verify_equilibrium(econ, cert).passed


def test_reweighted_hara_solves_directly_and_rescaled():
    hara = builders.build_hara_economy(2)
    consumers = tuple(replace(c, weight=w) for c, w in zip(hara.consumers, (0.75, 0.25)))
    econ = replace(hara, consumers=consumers)
    direct = solver.solve_equilibrium(econ)
    mapped = solver.map_from_rescaled(econ, solver.solve_equilibrium(economy.rescale_to_unweighted(econ)))
    # bad clears where (-p_bad / 2 p_good) (0.75 / 0.5 + 0.25 / 1) = 1
    np.testing.assert_allclose(direct.price, [-8 / 15, 7 / 15], atol=1e-9)
    np.testing.assert_allclose(mapped.price / np.abs(mapped.price).sum(), direct.price, atol=1e-9)
    np.testing.assert_allclose(mapped.bundles, direct.bundles, atol=1e-8)
    assert solver.verify_equilibrium(econ, mapped).passed


def test_verify_accepts_known_equilibrium():
    econ = builders.build_one_agent_economy()
    report = solver.verify_equilibrium(econ, _one_agent_certificate())
    assert report.passed, report.summary()
    assert report.gaps['clearing_norm'] == 0.0


def test_verify_rejects_wrong_price():
    econ = builders.build_one_agent_economy()
    # display order (1, 0): the good costs 1 and the bad is free
    cert = _one_agent_certificate(price=builders.from_display_order(econ, [1.0, 0.0]))
    report = solver.verify_equilibrium(econ, cert)
    assert not report.passed
    assert not report.demand_ok
    assert report.failing_subjects('demand') == ['agent']
    assert 'FAIL' in report.summary()


def test_verify_rejects_tampered_bundle():
    econ = builders.build_one_agent_economy()
    report = solver.verify_equilibrium(econ, _one_agent_certificate(bundle=(1.0, 0.9)))
    assert not report.clearing_ok


def test_verify_rejects_foreign_certificate():
    with pytest.raises(DimensionError):
        solver.verify_equilibrium(builders.build_hara_economy(2), _one_agent_certificate())


def test_aggregate_excess_at_autarky():
    econ = builders.build_hara_economy(2)
    excess = solver.aggregate_excess(econ, [-0.5, 0.5], econ.endowments, np.zeros((0, 2)))
    np.testing.assert_array_equal(excess, [0.0, 0.0])
    with pytest.raises(DimensionError):
        solver.aggregate_excess(econ, [-0.5, 0.5], econ.endowments[:1], np.zeros((0, 2)))


@pytest.mark.parametrize(
    'econ, tol',
    [(builders.build_hara_economy(3), 1e-10), (builders.build_one_agent_economy(), 1e-7)],
)
def test_walras_law(econ, tol):
    rng = np.random.default_rng(0)
    empty = np.zeros((0, 2))
    for _ in range(1000):
        p = np.array([rng.uniform(-1.0, 1.0), rng.uniform(0.05, 1.0)])
        p /= np.abs(p).sum()
        incomes = solver.incomes_at(econ, p, empty)
        x = demand_many(econ.consumers, p, incomes)
        excess = solver.aggregate_excess(econ, p, x, empty)
        assert p @ excess == pytest.approx(0.0, abs=tol), p


def test_solve_is_deterministic():
    econ = builders.build_hara_economy(3)
    cfg = SolverConfig(seed=11)
    assert solver.solve_equilibrium(econ, cfg) == solver.solve_equilibrium(econ, cfg)


def test_zero_restarts_raises():
    econ = builders.build_one_agent_economy()
    with pytest.raises(NoConvergence) as info:
        solver.solve_equilibrium(econ, SolverConfig(restarts=0))
    assert info.value.restarts_tried == 0
    assert info.value.best_residual == np.inf


def test_certificate_records_residuals():
    cert = solver.solve_equilibrium(builders.build_one_agent_economy())
    assert max(abs(v) for v in cert.residuals['clearing']) <= SolverConfig().clearing_tol
    assert cert.residuals['worst_optimality_gap'] <= SolverConfig().optimality_tol


def test_excess_map_scan_locates_one_agent_price():
    econ = builders.build_one_agent_economy()
    table = solver.excess_map_scan(econ, 4)
    assert list(table.columns) == ['p0', 'p1', 'residual']
    np.testing.assert_allclose(np.abs(table[['p0', 'p1']].to_numpy()).sum(axis=1), 1.0)
    best = table.loc[table['residual'].idxmin()]
    assert best['residual'] == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose([best['p0'], best['p1']], [-0.5, 0.5])
    # the good is free at (-1, 0) and demand is unbounded
    free_good = table[(table['p0'] == -1.0) & (table['p1'] == 0.0)]
    assert np.isinf(free_good['residual']).all()


def test_excess_map_scan_explicit_grid():
    econ = builders.build_hara_economy(2)
    table = solver.excess_map_scan(econ, [[-4.0, 3.0], [1.0, 1.0]])
    assert table['residual'].iloc[0] == pytest.approx(0.0, abs=1e-9)
    assert table['residual'].iloc[1] > 0.1


def test_free_disposal_solve_has_nonnegative_price():
    econ = builders.build_one_agent_economy()
    augmented = free_disposal_augment(econ)
    cert = solver.solve_equilibrium(augmented, free_disposal=True)
    assert cert.free_disposal
    assert np.all(cert.price >= 0.0)
    assert check_nonnegative_price_rule(augmented, cert, tol=0.0)
    np.testing.assert_allclose(cert.price, [0.0, 1.0], atol=1e-9)
