import pathlib
import sys
from dataclasses import replace

script_dir = pathlib.Path(__file__).parent.absolute()
parent_dir = script_dir.parents[0]
sys.path.append(str(parent_dir))

import numpy as np
import pytest

from badmarket import builders, quota, solver
from badmarket.errors import DimensionError, DomainError
from badmarket.preferences import Externality, PreferenceSpec
from badmarket.quota import QuotaScheme

GOVERNMENT_HALF = QuotaScheme(1, {'government': (-0.5,)})


def test_scheme_checks():
    with pytest.raises(DomainError):
        QuotaScheme(1, {'firm1': (0.1,)})
    with pytest.raises(DimensionError):
        QuotaScheme(1, {'firm1': (-0.1, 0.0)})
    with pytest.raises(DomainError):
        QuotaScheme(-1)
    assert QuotaScheme(2).is_zero()
    assert QuotaScheme(1, {'firm1': (0.0,)}).is_zero()
    np.testing.assert_array_equal(QuotaScheme(1, {'firm1': (-0.2,)}).quota('firm2'), [0.0])


def test_compliance_target():
    scheme = QuotaScheme(1, {'firm1': (-0.05,), 'firm2': (-0.05,)})
    np.testing.assert_allclose(quota.compliance_target(scheme, 3), [-0.1, 0.0, 0.0])
    np.testing.assert_array_equal(quota.compliance_target(QuotaScheme(2), 3), [0.0, 0.0, 0.0])
    with pytest.raises(DimensionError):
        quota.compliance_target(QuotaScheme(4, {'firm1': (-1.0, 0.0, 0.0, 0.0)}), 3)


def test_shift_economy_offsets():
    econ = builders.build_garbage_economy(5)
    scheme = QuotaScheme(1, {'firm1': (-0.05,), 'firm2': (-0.02,)})
    shifted = quota.shift_economy(econ, scheme)
    assert shifted.firms[0].offset == (-0.05, 0.0, 0.0)
    assert shifted.firms[1].offset == (-0.02, 0.0, 0.0)
    assert shifted.firms[0].generators == econ.firms[0].generators


def test_shift_economy_rejects_unknown_firm():
    with pytest.raises(DimensionError):
        quota.shift_economy(builders.build_garbage_economy(5), QuotaScheme(1, {'firm9': (-0.1,)}))


def test_attach_government():
    econ = builders.build_one_agent_economy()
    augmented = quota.attach_government(econ, GOVERNMENT_HALF)
    assert augmented.firm_ids == ('government',)
    assert augmented.consumers[0].shares == (1.0,)
    assert quota.attach_government(econ, QuotaScheme(1)) is econ
    assert quota.attach_government(augmented, GOVERNMENT_HALF) is augmented


def test_shift_moves_total_production_externality():
    econ = builders.build_one_agent_economy()
    ext = Externality(gamma=(1.0, 0.0), statistic='total_production')
    agent = econ.consumers[0]
    spec = PreferenceSpec.linear((-1.0, 1.0), externality=ext)
    econ = replace(econ, consumers=(replace(agent, preference=spec),))
    shifted = quota.shift_economy(econ, GOVERNMENT_HALF)
    assert shifted.consumers[0].preference.externality.shift == (-0.5, 0.0)


def test_one_agent_government_quota():
    econ = builders.build_one_agent_economy()
    cert = quota.solve_quota(econ, GOVERNMENT_HALF)
    np.testing.assert_allclose(cert.price, [-0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(cert.bundle('agent'), [0.5, 1.0], atol=1e-9)
    np.testing.assert_allclose(cert.production('government'), [0.0, 0.0])
    np.testing.assert_allclose(cert.residuals['clearing'], [-0.5, 0.0], atol=1e-9)
    np.testing.assert_allclose(cert.compliance_residual, [0.0, 0.0], atol=1e-9)
    assert cert.rents == pytest.approx((0.25,), abs=1e-9)
    report = quota.verify_quota(econ, GOVERNMENT_HALF, cert)
    assert report.passed, report.summary()


def test_quota_incomes_include_rents():
    econ = builders.build_one_agent_economy()
    cert = quota.solve_quota(econ, GOVERNMENT_HALF)
    incomes = quota.quota_income(econ, GOVERNMENT_HALF, cert)
    assert incomes[0] == pytest.approx(0.25, abs=1e-9)
    assert incomes[0] == pytest.approx(float(cert.price @ cert.bundle('agent')), abs=1e-9)


def test_verify_under_another_scheme_fails():
    econ = builders.build_one_agent_economy()
    cert = quota.solve_quota(econ, GOVERNMENT_HALF)
    other = QuotaScheme(1, {'government': (-0.25,)})
    assert not quota.verify_quota(econ, other, cert).passed


def test_zero_quota_matches_plain_solve():
    econ = builders.build_hara_economy(2)
    plain = solver.solve_equilibrium(econ)
    with_quota = quota.solve_quota(econ, QuotaScheme(1))
    assert with_quota == plain
    np.testing.assert_array_equal(with_quota.compliance_residual, with_quota.residuals['clearing'])
    assert with_quota.rents == ()


def test_garbage_quota_round_trip():
    econ = builders.build_garbage_economy(60)
    scheme = QuotaScheme(1, {'firm1': (-0.05,), 'firm2': (-0.05,)})
    q = quota.solve_quota(econ, scheme)
    shifted = solver.solve_equilibrium(quota.shift_economy(econ, scheme))
    np.testing.assert_array_equal(q.price, shifted.price)
    np.testing.assert_array_equal(q.bundles, shifted.bundles)
    shifts = np.array([quota.embed(scheme.quota(f), econ.ell) for f in econ.firm_ids])
    np.testing.assert_array_equal(q.productions, shifted.productions - shifts)
    np.testing.assert_allclose(q.compliance_residual, np.zeros(econ.ell), atol=1e-8)
    # both firms stay active, so break-even still pins the price
    np.testing.assert_allclose(q.price, [-0.25, 0.25, 0.5], atol=1e-8)
    report = quota.verify_quota(econ, scheme, q, tol=1e-8)
    assert report.passed, report.summary()


def test_zero_quota_on_garbage_matches_plain_solve():
    econ = builders.build_garbage_economy(60)
    assert quota.solve_quota(econ, QuotaScheme(1)) == solver.solve_equilibrium(econ)


def test_rents_at():
    econ = builders.build_garbage_economy(5)
    scheme = QuotaScheme(1, {'firm1': (-0.05,)})
    np.testing.assert_allclose(quota.rents_at(econ, scheme, [-0.25, 0.25, 0.5]), [0.0125, 0.0])
