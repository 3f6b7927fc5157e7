"""Economy data model, validation and the weighted-to-unweighted rescaling.

Commodities are stored with the bads first: coordinates ``0 .. bad_count-1`` are bads,
the rest are goods. Consumption sets are boxes ``[0, bounds_i]`` with ``inf`` allowed on
goods. Firms are ZeroFirm, ConeRays or Polytope technologies, each with an offset.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Optional, Tuple

import numpy as np
from scipy import optimize

from badmarket import vocabularies
from badmarket.errors import DimensionError, SchemaError, ZeroWeight
from badmarket.preferences import PreferenceSpec

_log = logging.getLogger(__name__)

ZERO_FIRM = 'zero_firm'
CONE_RAYS = 'cone_rays'
POLYTOPE = 'polytope'


def _floats(values):
    return tuple(float(v) for v in values)


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CommoditySpace:
    ell: int
    bad_count: int = 0
    regulated_count: int = 0
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.ell < 1:
            raise SchemaError(f"ell must be positive, got {self.ell}")
        if not 0 <= self.bad_count <= self.ell:
            raise SchemaError(f"bad_count must lie in [0, {self.ell}], got {self.bad_count}")
        if not 0 <= self.regulated_count <= self.ell:
            raise SchemaError(f"regulated_count must lie in [0, {self.ell}], got {self.regulated_count}")
        labels = tuple(self.labels) or tuple(f"c{i}" for i in range(self.ell))
        if len(labels) != self.ell:
            raise SchemaError(f"{len(labels)} labels given for {self.ell} commodities")
        object.__setattr__(self, 'labels', labels)

    @property
    def bads(self):
        return range(self.bad_count)

    @property
    def goods(self):
        return range(self.bad_count, self.ell)


@dataclass(frozen=True)
class Consumer:
    id: str
    weight: float
    endowment: Tuple[float, ...]
    shares: Tuple[float, ...]
    bounds: Tuple[float, ...]
    preference: PreferenceSpec

    def __post_init__(self):
        object.__setattr__(self, 'id', str(self.id))
        object.__setattr__(self, 'weight', float(self.weight))
        object.__setattr__(self, 'endowment', _floats(self.endowment))
        object.__setattr__(self, 'shares', _floats(self.shares))
        bounds = tuple(np.inf if b is None else float(b) for b in self.bounds)
        object.__setattr__(self, 'bounds', bounds)
        if len(self.bounds) != len(self.endowment):
            raise DimensionError(f"consumer {self.id}: {len(self.bounds)} bounds for {len(self.endowment)} commodities")


@dataclass(frozen=True)
class Technology:
    """
    Production set of one firm.

    zero_firm: ``{offset}``; cone_rays: ``offset + cone(generators)``, plus the rays
    ``-e_i`` when free_disposal is set; polytope: ``offset + conv(generators)``.
    An empty offset means the zero vector.
    """

    kind: str
    offset: Tuple[float, ...] = ()
    generators: Tuple[Tuple[float, ...], ...] = ()
    free_disposal: bool = False
    id: Optional[str] = None

    def __post_init__(self):
        if self.kind not in vocabularies.firm_kinds:
            raise SchemaError(f"unknown firm kind {self.kind!r}, expected one of {vocabularies.firm_kinds}")
        object.__setattr__(self, 'offset', _floats(self.offset))
        object.__setattr__(self, 'generators', tuple(_floats(g) for g in self.generators))
        object.__setattr__(self, 'free_disposal', bool(self.free_disposal))
        if self.kind == ZERO_FIRM and self.generators:
            raise SchemaError("a zero_firm has no generators")
        if self.kind == POLYTOPE and not self.generators:
            raise SchemaError("a polytope needs at least one vertex")
        if self.free_disposal and self.kind != CONE_RAYS:
            raise SchemaError("free_disposal applies to cone_rays firms only")
        lengths = {len(g) for g in self.generators}
        if len(lengths) > 1:
            raise DimensionError("generators of one firm differ in length")

    @classmethod
    def zero(cls, ell=None, id=None):
        return cls(ZERO_FIRM, offset=(0.0,) * ell if ell else (), id=id)

    @classmethod
    def cone(cls, generators, offset=(), free_disposal=False, id=None):
        return cls(CONE_RAYS, offset=offset, generators=generators, free_disposal=free_disposal, id=id)

    @classmethod
    def polytope(cls, vertices, offset=(), id=None):
        return cls(POLYTOPE, offset=offset, generators=vertices, id=id)

    def offset_vector(self, ell):
        if not self.offset:
            return np.zeros(ell)
        return np.array(self.offset)

    def generator_matrix(self, ell):
        """(R, ell) matrix of rays or vertices; disposal rays appended for free-disposal cones."""
        rows = np.array(self.generators, dtype=float).reshape(-1, ell)
        if self.free_disposal:
            rows = np.vstack([rows, -np.eye(ell)])
        return rows

    def activity_count(self, ell):
        return self.generator_matrix(ell).shape[0]


@dataclass
class Finding:
    rule_id: str
    severity: str
    message: str


@dataclass
class ValidationReport:
    findings: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.errors

    @property
    def errors(self):
        return [f for f in self.findings if f.severity == 'error']

    @property
    def warnings(self):
        return [f for f in self.findings if f.severity == 'warning']

    def rule_ids(self, severity=None):
        return {f.rule_id for f in self.findings if severity is None or f.severity == severity}

    def add(self, rule_id, **fmt):
        severity, template = vocabularies.rule(rule_id)
        self.findings.append(Finding(rule_id, severity, template.format(**fmt)))

    def summary(self):
        lines = [f"validation {'passed' if self.passed else 'FAILED'}: {len(self.errors)} errors, {len(self.warnings)} warnings"]
        lines += [f"  [{f.severity}] {f.rule_id}: {f.message}" for f in self.findings]
        return "\n".join(lines)


@dataclass(frozen=True)
class Economy:
    commodities: CommoditySpace
    consumers: Tuple[Consumer, ...]
    firms: Tuple[Technology, ...] = ()
    monotone_witnesses: Mapping = field(default_factory=dict)
    metadata: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ell = self.commodities.ell
        consumers = tuple(self.consumers)
        firms = []
        for j, firm in enumerate(self.firms):
            offset = firm.offset or (0.0,) * ell
            if len(offset) != ell:
                raise DimensionError(f"firm {j} offset has length {len(offset)}, expected {ell}")
            if firm.generators and len(firm.generators[0]) != ell:
                raise DimensionError(f"firm {j} generators have length {len(firm.generators[0])}, expected {ell}")
            firms.append(replace(firm, offset=offset, id=firm.id or f"firm{j + 1}"))
        ids = [f.id for f in firms]
        if len(set(ids)) != len(ids):
            raise SchemaError(f"duplicate firm ids: {ids}")
        cids = [c.id for c in consumers]
        if len(set(cids)) != len(cids):
            raise SchemaError("duplicate consumer ids")
        for c in consumers:
            if len(c.endowment) != ell:
                raise DimensionError(f"consumer {c.id}: endowment has length {len(c.endowment)}, expected {ell}")
            if len(c.shares) != len(firms):
                raise DimensionError(f"consumer {c.id}: {len(c.shares)} shares for {len(firms)} firms")
        witnesses = {int(k): tuple(str(v) for v in vals) for k, vals in dict(self.monotone_witnesses).items()}
        object.__setattr__(self, 'consumers', consumers)
        object.__setattr__(self, 'firms', tuple(firms))
        object.__setattr__(self, 'monotone_witnesses', witnesses)
        object.__setattr__(self, 'metadata', dict(self.metadata))

    @property
    def ell(self):
        return self.commodities.ell

    @property
    def n(self):
        return len(self.consumers)

    @property
    def consumer_ids(self):
        return tuple(c.id for c in self.consumers)

    @property
    def firm_ids(self):
        return tuple(f.id for f in self.firms)

    @cached_property
    def weights(self):
        return _readonly(np.array([c.weight for c in self.consumers], dtype=float))

    @cached_property
    def endowments(self):
        return _readonly(np.array([c.endowment for c in self.consumers], dtype=float).reshape(self.n, self.ell))

    @cached_property
    def bounds(self):
        return _readonly(np.array([c.bounds for c in self.consumers], dtype=float).reshape(self.n, self.ell))

    @cached_property
    def shares(self):
        return _readonly(np.array([c.shares for c in self.consumers], dtype=float).reshape(self.n, len(self.firms)))

    def mean_endowment(self):
        return self.weights @ self.endowments

    def firm_index(self, firm_id):
        return self.firm_ids.index(firm_id)


##------------------------------------------------------------------------------------
## Validation
##------------------------------------------------------------------------------------
def validate_economy(econ, tol=1e-9):
    """
    Check an economy against the model's standing assumptions.

    Parameters
    ----------
    econ (Economy): economy to check.
    tol (float): tolerance for sums and feasibility.

    Returns
    -------
    ValidationReport: every finding, keyed by rule id. Never raises.
    """
    report = ValidationReport()
    ell = econ.ell

    weights = econ.weights
    for c in econ.consumers:
        if c.weight < 0:
            report.add('weights-nonnegative', consumer=c.id, weight=c.weight)
    if econ.n == 0 or abs(weights.sum() - 1.0) > tol:
        report.add('weights-sum', total=float(weights.sum()))

    for j, firm in enumerate(econ.firms):
        total = float(weights @ econ.shares[:, j]) if econ.n else 0.0
        if abs(total - 1.0) > tol:
            report.add('shares-sum', firm=firm.id, total=total)

    for c in econ.consumers:
        e = np.array(c.endowment)
        b = np.array(c.bounds)
        if np.any(e < 0) or np.any(np.array(c.shares) < 0):
            report.add('endowment-nonnegative', consumer=c.id)
        elif np.any(e > b + tol):
            report.add('endowment-in-box', consumer=c.id)
        for k in econ.commodities.bads:
            if not np.isfinite(c.bounds[k]):
                report.add('bad-bounds-finite', consumer=c.id, commodity=k)
        needed = c.preference.required_ell()
        if needed > ell or (c.preference.family in ('linear', 'cobb_douglas') and needed != ell):
            report.add('preference-indices', consumer=c.id, index=needed - 1, ell=ell)

    _check_witnesses(econ, report)
    if 'preference-indices' not in report.rule_ids() and 'endowment-nonnegative' not in report.rule_ids():
        _check_survival(econ, report, tol)
    _check_cones(econ, report)
    return report


def _check_witnesses(econ, report):
    known = {c.id: c for c in econ.consumers}
    for s in econ.commodities.goods:
        declared = econ.monotone_witnesses.get(s, ())
        if not declared:
            report.add('monotone-witness-declared', commodity=s)
            continue
        unknown = [w for w in declared if w not in known]
        for w in unknown:
            report.add('monotone-witness-known', consumer=w, commodity=s)
        flat = []
        for w in declared:
            if w in known:
                spec = known[w].preference
                if spec.required_ell() <= econ.ell and not spec.is_strictly_increasing(s):
                    flat.append((w, spec.family))
        if flat:
            names = ", ".join(w for w, _ in flat[:3]) + (f" (+{len(flat) - 3} more)" if len(flat) > 3 else "")
            report.add('monotone-witness-unverified', consumer=names, commodity=s, family=flat[0][1])


def _firm_contains_zero(firm, ell):
    offset = firm.offset_vector(ell)
    if firm.kind == POLYTOPE:
        return bool(np.any(np.all(firm.generator_matrix(ell) + offset == 0, axis=1)))
    return not np.any(offset)


def _check_survival(econ, report, tol):
    """Endowment in X - sum_j theta_j Y_j, by inspection or a small LP."""
    ell = econ.ell
    zero_ok = [_firm_contains_zero(f, ell) for f in econ.firms]
    for i, c in enumerate(econ.consumers):
        e = np.array(c.endowment)
        b = np.array(c.bounds)
        owned = [j for j in range(len(econ.firms)) if c.shares[j] > 0]
        if np.all(e <= b + tol) and all(zero_ok[j] for j in owned):
            continue
        if not _survival_lp(econ, c, owned, tol):
            report.add('survival', consumer=c.id)


def _survival_lp(econ, consumer, owned, tol):
    ell = econ.ell
    e = np.array(consumer.endowment)
    blocks = [np.eye(ell)]
    box = [(0.0, None if np.isinf(b) else b) for b in consumer.bounds]
    rhs = e.copy()
    extra_rows = []
    for j in owned:
        firm = econ.firms[j]
        theta = consumer.shares[j]
        offset = firm.offset_vector(ell)
        rhs = rhs + theta * offset
        if firm.kind == ZERO_FIRM:
            continue
        gens = firm.generator_matrix(ell)
        blocks.append(-theta * gens.T)
        box += [(0.0, None)] * gens.shape[0]
        if firm.kind == POLYTOPE:
            extra_rows.append((len(box) - gens.shape[0], gens.shape[0]))
    a_eq = np.hstack(blocks)
    b_eq = rhs
    for start, count in extra_rows:
        row = np.zeros(a_eq.shape[1])
        row[start:start + count] = 1.0
        a_eq = np.vstack([a_eq, row])
        b_eq = np.append(b_eq, 1.0)
    res = optimize.linprog(np.zeros(a_eq.shape[1]), A_eq=a_eq, b_eq=b_eq, bounds=box, method='highs')
    return res.status == 0


def _check_cones(econ, report, tol=1e-12):
    ell = econ.ell
    directions = []
    kinds = {f.kind for f in econ.firms}
    for firm in econ.firms:
        if firm.kind != CONE_RAYS:
            continue
        gens = firm.generator_matrix(ell)
        for r, g in enumerate(gens):
            norm = np.linalg.norm(g)
            if norm == 0:
                continue
            if r < len(firm.generators) and np.all(g >= -tol) and np.any(g > tol):
                report.add('cone-positive-generator', firm=firm.id, generator=list(firm.generators[r]))
            directions.append((firm.id, r, g / norm))
    flagged = set()
    for a, (fid, r, d) in enumerate(directions):
        for fid2, r2, d2 in directions[a + 1:]:
            if np.allclose(d, -d2, atol=1e-12) and (fid, r) not in flagged:
                flagged.add((fid, r))
                report.add('cone-opposite-generators', firm=fid, generator=[float(v) for v in d])
    if CONE_RAYS in kinds and POLYTOPE in kinds:
        report.add('aggregate-closedness-unverified')


##------------------------------------------------------------------------------------
## Rescaling
##------------------------------------------------------------------------------------
def scale_factors(econ):
    """n * mu_omega for every consumer."""
    return econ.n * econ.weights


def rescale_to_unweighted(econ):
    """
    Equivalent economy with uniform weights 1/n.

    Each consumer's box, endowment and shares are multiplied by f = n * mu, and the
    preference evaluates u(x / f). A bundle x' of the rescaled economy corresponds to
    x' / f in the original, at the same price.

    Raises
    ------
    ZeroWeight: some consumer has weight 0.
    """
    if any(c.weight <= 0 for c in econ.consumers):
        zero = [c.id for c in econ.consumers if c.weight <= 0]
        raise ZeroWeight(f"consumers with zero weight cannot be rescaled: {zero}")
    n = econ.n
    factors = scale_factors(econ)
    consumers = []
    for c, f in zip(econ.consumers, factors):
        consumers.append(
            Consumer(
                id=c.id,
                weight=1.0 / n,
                endowment=tuple(f * np.array(c.endowment)),
                shares=tuple(f * np.array(c.shares)),
                bounds=tuple(f * np.array(c.bounds)),
                preference=replace(c.preference, scale=c.preference.scale * f),
            )
        )
    metadata = dict(econ.metadata)
    metadata['rescaled_from_weights'] = [c.weight for c in econ.consumers]
    return Economy(econ.commodities, tuple(consumers), econ.firms, econ.monotone_witnesses, metadata)
