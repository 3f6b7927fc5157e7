"""Quota economies: tradable emission rights held by firms.

A scheme gives each firm j a quota m^(j) <= 0 on the first t (regulated) commodities.
Writing E(m) for the embedding of a t-vector into commodity space (zeros after the
first t coordinates), a quota equilibrium clears to ``aggregate_excess = E(m)`` with
firm j earning the rent ``p[:t] . m^(j)`` on top of its profit.

Shifting every production set by E(m^(j)) turns the quota economy into an ordinary
one: profits of the shifted firms already include the rents and exact clearing of the
shifted economy is compliance of the original. :func:`solve_quota` solves the shifted
economy and maps the productions back.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from badmarket import vocabularies
from badmarket.economy import Economy, Technology, validate_economy
from badmarket.errors import DimensionError, DomainError, PreconditionError
from badmarket.preferences import Externality
from badmarket.solver import EquilibriumCertificate, aggregate_excess, solve_equilibrium, verify_equilibrium
from badmarket.utilities import _l1_normalize

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuotaScheme:
    regulated_count: int
    quotas: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.regulated_count < 0:
            raise DomainError(f"regulated_count must be >= 0, got {self.regulated_count}")
        quotas = {}
        for firm_id, m in dict(self.quotas).items():
            m = tuple(float(v) for v in m)
            if len(m) != self.regulated_count:
                raise DimensionError(f"quota of {firm_id} has length {len(m)}, expected {self.regulated_count}")
            if any(v > 0 for v in m):
                raise DomainError(f"quota of {firm_id} must be <= 0 componentwise, got {m}")
            quotas[str(firm_id)] = m
        object.__setattr__(self, 'quotas', quotas)

    def aggregate(self):
        """m = sum_j m^(j)."""
        total = np.zeros(self.regulated_count)
        for m in self.quotas.values():
            total = total + np.array(m)
        return total

    def quota(self, firm_id):
        return np.array(self.quotas.get(firm_id, (0.0,) * self.regulated_count))

    def is_zero(self):
        return all(v == 0 for m in self.quotas.values() for v in m)


@dataclass(frozen=True, eq=False)
class QuotaCertificate(EquilibriumCertificate):
    """Equilibrium certificate plus per-firm rents and the compliance residual."""

    rents: tuple = ()
    compliance_residual: Optional[np.ndarray] = None
    scheme: Optional[QuotaScheme] = None

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, 'rents', tuple(float(r) for r in self.rents))
        if self.compliance_residual is not None:
            object.__setattr__(self, 'compliance_residual', np.asarray(self.compliance_residual, dtype=float))

    def __eq__(self, other):
        same = super().__eq__(other)
        if same is NotImplemented or not same:
            return same
        if isinstance(other, QuotaCertificate):
            return self.rents == other.rents
        return True

    __hash__ = None


def embed(m, ell):
    """E(m): the t-vector m followed by ell - t zeros."""
    m = np.asarray(m, dtype=float)
    if m.shape[0] > ell:
        raise DimensionError(f"{m.shape[0]} regulated commodities exceed ell = {ell}")
    out = np.zeros(ell)
    out[:m.shape[0]] = m
    return out


def compliance_target(scheme, ell):
    """
    E(m) for the aggregate quota m.

    Raises
    ------
    DimensionError: regulated_count exceeds ell.
    """
    return embed(scheme.aggregate(), ell)


def rents_at(econ, scheme, price):
    """proj_t(p) . m^(j) for every firm of econ (0 for firms without a quota)."""
    t = scheme.regulated_count
    p = np.asarray(price, dtype=float)
    return np.array([float(p[:t] @ scheme.quota(firm_id)) for firm_id in econ.firm_ids])


def attach_government(econ, scheme):
    """
    Add the government ZeroFirm when the scheme assigns it a quota and econ lacks it.

    Every consumer owns the government firm with share 1, so the share column sums to 1.
    """
    gov = vocabularies.government_firm_id
    if gov not in scheme.quotas or gov in econ.firm_ids:
        return econ
    firm = Technology.zero(econ.ell, id=gov)
    consumers = tuple(replace(c, shares=c.shares + (1.0,)) for c in econ.consumers)
    _log.info(f"attaching government firm '{gov}' owned by all consumers")
    return Economy(
        econ.commodities,
        consumers,
        firms=econ.firms + (firm,),
        monotone_witnesses=econ.monotone_witnesses,
        metadata=econ.metadata,
    )


def _check_scheme(econ, scheme):
    if scheme.regulated_count > econ.ell:
        raise DimensionError(f"scheme regulates {scheme.regulated_count} commodities, economy has {econ.ell}")
    unknown = sorted(set(scheme.quotas) - set(econ.firm_ids))
    if unknown:
        raise DimensionError(f"scheme names firms the economy lacks: {unknown}")
    if econ.commodities.regulated_count not in (0, scheme.regulated_count):
        _log.warning(
            f"economy declares {econ.commodities.regulated_count} regulated commodities, "
            f"scheme regulates {scheme.regulated_count}"
        )


def shift_economy(econ, scheme):
    """
    Economy whose firm j produces in Y_j + E(m^(j)).

    Externalities reading ``total_production`` are shifted back by sum_j E(m^(j)) so
    they keep seeing the unshifted productions.

    Raises
    ------
    DimensionError: the scheme does not fit the economy.
    """
    econ = attach_government(econ, scheme)
    _check_scheme(econ, scheme)
    ell = econ.ell
    firms = tuple(
        replace(firm, offset=tuple(firm.offset_vector(ell) + embed(scheme.quota(firm.id), ell)))
        for firm in econ.firms
    )
    total = compliance_target(scheme, ell)
    consumers = []
    for c in econ.consumers:
        ext = c.preference.externality
        if ext is not None and ext.statistic == 'total_production' and np.any(total != 0):
            base = np.array(ext.shift) if ext.shift else np.zeros(ell)
            shifted = Externality(gamma=ext.gamma, statistic=ext.statistic, shift=tuple(base + total))
            c = replace(c, preference=replace(c.preference, externality=shifted))
        consumers.append(c)
    return Economy(
        econ.commodities,
        tuple(consumers),
        firms=firms,
        monotone_witnesses=econ.monotone_witnesses,
        metadata=econ.metadata,
    )


def quota_income(econ, scheme, cert):
    """
    p.e + sum_j theta_j (p.y_j + rent_j) for every consumer, at the normalised price.
    """
    econ = attach_government(econ, scheme)
    p, _ = _l1_normalize(cert.price)
    profits = cert.productions.reshape(len(econ.firms), econ.ell) @ p + rents_at(econ, scheme, p)
    return econ.endowments @ p + econ.shares @ profits


def solve_quota(econ, scheme, cfg=None):
    """
    Quota equilibrium through the shifted economy.

    Parameters
    ----------
    econ (Economy): economy without the shift.
    scheme (QuotaScheme): quotas per firm id; 'government' is attached when named.
    cfg (SolverConfig, optional): solver settings.

    Returns
    -------
    QuotaCertificate: certificate for ``attach_government(econ, scheme)``.

    Raises
    ------
    PreconditionError: the shifted economy fails validation (survival failures are
        only logged, the solver then decides).
    NoConvergence: propagated from the solver.
    """
    base = attach_government(econ, scheme)
    shifted = shift_economy(econ, scheme)
    report = validate_economy(shifted)
    for finding in report.findings:
        if finding.severity == 'warning' or finding.rule_id == 'survival':
            _log.warning(f"shifted economy: {finding.rule_id}: {finding.message}")
        else:
            raise PreconditionError(finding.rule_id, f"shifted economy: {finding.message}")

    cert = solve_equilibrium(shifted, cfg)
    ell = base.ell
    shifts = np.array([embed(scheme.quota(f), ell) for f in base.firm_ids]).reshape(-1, ell)
    productions = cert.productions - shifts
    excess = aggregate_excess(base, cert.price, cert.bundles, productions)
    residuals = dict(cert.residuals)
    residuals['clearing'] = [float(v) for v in excess]
    return QuotaCertificate(
        price=cert.price,
        bundles=cert.bundles,
        activities=cert.activities,
        productions=productions,
        consumer_ids=cert.consumer_ids,
        firm_ids=cert.firm_ids,
        residuals=residuals,
        free_disposal=cert.free_disposal,
        rents=tuple(rents_at(base, scheme, cert.price)),
        compliance_residual=excess - compliance_target(scheme, ell),
        scheme=scheme,
    )


def verify_quota(econ, scheme, cert, tol=None, cfg=None):
    """
    Check a quota certificate: demand at quota incomes, profit maximisation and
    ``aggregate_excess = E(m)``.

    Returns
    -------
    VerificationReport

    Raises
    ------
    DimensionError: the certificate does not belong to the (government-augmented) economy.
    """
    base = attach_government(econ, scheme)
    _check_scheme(base, scheme)
    p, _ = _l1_normalize(cert.price)
    extra = base.shares @ rents_at(base, scheme, p)
    return verify_equilibrium(
        base, cert, tol=tol, cfg=cfg, extra_income=extra, target=compliance_target(scheme, base.ell)
    )
