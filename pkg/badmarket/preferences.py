"""Utility families, demand, quasi-demand and cheaper points.

Utilities are evaluated on the rescaled bundle ``x / scale`` (scale = 1 unless the
economy was produced by :func:`badmarket.economy.rescale_to_unweighted`). Prices may
be negative, so budget sets are boxes cut by a half-space that need not contain 0.

Closed forms:

- quadratic_bad ``u = x_g - c x_b^2``: interior first-order condition for the bad,
  the good takes the budget residue.
- log_minus_linear ``u = ln x_g + sigma x_b``: concave along the budget line, so the
  bad solves ``x_b = w/p_b - 1/sigma`` clamped to its feasible interval.
- linear ``u = a.x``: two linear programs, the second picks the largest total quantity
  on the optimal face.
- cobb_douglas ``u = sum alpha_i ln(x_i + eps_i)``: the multiplier is located exactly
  between the breakpoints of the clamped share formula.

Anything else falls back to projected gradient ascent.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np
from scipy import optimize

from badmarket import vocabularies
from badmarket.errors import DomainError, EmptyBudget, SchemaError, UnboundedProblem

_log = logging.getLogger(__name__)

QUADRATIC_BAD = 'quadratic_bad'
LOG_MINUS_LINEAR = 'log_minus_linear'
LINEAR = 'linear'
COBB_DOUGLAS = 'cobb_douglas'

GOOD_BAD_FAMILIES = (QUADRATIC_BAD, LOG_MINUS_LINEAR)


@dataclass(frozen=True)
class Externality:
    """Additive externality term ``-gamma . (statistic - shift)`` evaluated on a Context."""

    gamma: tuple
    statistic: str = 'mean_allocation'
    shift: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'gamma', tuple(float(g) for g in self.gamma))
        object.__setattr__(self, 'shift', tuple(float(s) for s in self.shift))
        if self.shift and len(self.shift) != len(self.gamma):
            raise SchemaError("externality shift and gamma differ in length")
        if self.statistic not in vocabularies.externality_statistics:
            raise SchemaError(
                f"unknown externality statistic {self.statistic!r}, "
                f"expected one of {vocabularies.externality_statistics}"
            )


@dataclass(frozen=True)
class PreferenceSpec:
    family: str
    params: Mapping = field(default_factory=dict)
    externality: Optional[Externality] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in vocabularies.family_params:
            raise SchemaError(f"unknown preference family {self.family!r}")
        missing = [k for k in vocabularies.family_params[self.family] if k not in self.params]
        if missing:
            raise SchemaError(f"{self.family} preference is missing params {missing}")
        object.__setattr__(self, 'params', _canonical_params(self.family, self.params))
        object.__setattr__(self, 'scale', float(self.scale))
        if not self.scale > 0:
            raise SchemaError(f"preference scale must be > 0, got {self.scale}")

    @classmethod
    def quadratic_bad(cls, coefficient, good, bad, **kwargs):
        return cls(QUADRATIC_BAD, {'coefficient': coefficient, 'good': good, 'bad': bad}, **kwargs)

    @classmethod
    def log_minus_linear(cls, sign, good, bad, **kwargs):
        return cls(LOG_MINUS_LINEAR, {'sign': sign, 'good': good, 'bad': bad}, **kwargs)

    @classmethod
    def linear(cls, coefficients, **kwargs):
        return cls(LINEAR, {'coefficients': coefficients}, **kwargs)

    @classmethod
    def cobb_douglas(cls, exponents, shifts=None, **kwargs):
        if shifts is None:
            shifts = [0.0] * len(exponents)
        return cls(COBB_DOUGLAS, {'exponents': exponents, 'shifts': shifts}, **kwargs)

    def required_ell(self):
        """Length of the bundle the family's parameters assume."""
        if self.family in GOOD_BAD_FAMILIES:
            return max(self.params['good'], self.params['bad']) + 1
        if self.family == LINEAR:
            return len(self.params['coefficients'])
        return len(self.params['exponents'])

    def is_strictly_increasing(self, commodity):
        """True when utility is strictly increasing in ``commodity`` everywhere."""
        if self.family in GOOD_BAD_FAMILIES:
            return commodity == self.params['good']
        if self.family == LINEAR:
            return self.params['coefficients'][commodity] > 0
        return self.params['exponents'][commodity] > 0

    def group_key(self):
        if self.family in GOOD_BAD_FAMILIES:
            return (self.family, self.params['good'], self.params['bad'])
        return (self.family,)


def _canonical_params(family, params):
    if family == QUADRATIC_BAD:
        out = {'coefficient': float(params['coefficient']), 'good': int(params['good']), 'bad': int(params['bad'])}
    elif family == LOG_MINUS_LINEAR:
        out = {'sign': float(params['sign']), 'good': int(params['good']), 'bad': int(params['bad'])}
        if out['sign'] == 0:
            raise SchemaError("log_minus_linear sign must be nonzero")
    elif family == LINEAR:
        out = {'coefficients': tuple(float(a) for a in params['coefficients'])}
    else:
        out = {
            'exponents': tuple(float(a) for a in params['exponents']),
            'shifts': tuple(float(e) for e in params['shifts']),
        }
        if len(out['exponents']) != len(out['shifts']):
            raise SchemaError("cobb_douglas exponents and shifts differ in length")
        if min(out['exponents'], default=0) < 0 or min(out['shifts'], default=0) < 0:
            raise SchemaError("cobb_douglas exponents and shifts must be >= 0")
        if not any(a > 0 for a in out['exponents']):
            raise SchemaError("cobb_douglas needs a positive exponent")
    if family in GOOD_BAD_FAMILIES:
        if out['good'] < 0 or out['bad'] < 0:
            raise SchemaError(f"{family} indices must be >= 0")
        if out['good'] == out['bad']:
            raise SchemaError(f"{family} good and bad must differ")
    return out


@dataclass(frozen=True, eq=False)
class Context:
    """Aggregate state an externality may depend on: (mean allocation, productions, price)."""

    mean_allocation: np.ndarray
    productions: np.ndarray
    price: np.ndarray

    @property
    def total_production(self):
        if len(self.productions) == 0:
            return np.zeros_like(self.mean_allocation)
        return self.productions.sum(axis=0)

    def statistic(self, name):
        if name == 'mean_allocation':
            return self.mean_allocation
        if name == 'total_production':
            return self.total_production
        if name == 'price':
            return self.price
        raise SchemaError(f"unknown externality statistic {name!r}")

    @classmethod
    def from_state(cls, weights, bundles, productions, price):
        bundles = np.asarray(bundles, dtype=float)
        ell = bundles.shape[-1]
        productions = np.asarray(productions, dtype=float).reshape(-1, ell)
        return cls(
            mean_allocation=np.asarray(weights, dtype=float) @ bundles,
            productions=productions,
            price=np.asarray(price, dtype=float),
        )


##------------------------------------------------------------------------------------
## Utility
##------------------------------------------------------------------------------------
def _check_indices(spec, ell):
    if spec.required_ell() > ell:
        raise IndexError(f"{spec.family} preference needs {spec.required_ell()} commodities, bundle has {ell}")
    if spec.family in (LINEAR, COBB_DOUGLAS) and spec.required_ell() != ell:
        raise IndexError(f"{spec.family} preference has {spec.required_ell()} coefficients, bundle has {ell}")


def _family_values(specs, z):
    """Family formula for specs sharing one group key. z has shape (..., m, ell)."""
    family = specs[0].family
    with np.errstate(divide='ignore', invalid='ignore'):
        if family == QUADRATIC_BAD:
            g, b = specs[0].params['good'], specs[0].params['bad']
            c = np.array([s.params['coefficient'] for s in specs])
            return z[..., g] - c * z[..., b] ** 2
        if family == LOG_MINUS_LINEAR:
            g, b = specs[0].params['good'], specs[0].params['bad']
            sigma = np.array([s.params['sign'] for s in specs])
            return np.log(z[..., g]) + sigma * z[..., b]
        if family == LINEAR:
            a = np.array([s.params['coefficients'] for s in specs])
            return (z * a).sum(axis=-1)
        alpha = np.array([s.params['exponents'] for s in specs])
        eps = np.array([s.params['shifts'] for s in specs])
        active = alpha > 0
        logs = np.log(np.where(active, z + eps, 1.0))
        return np.where(active, alpha * logs, 0.0).sum(axis=-1)


def _externality_term(spec, ctx):
    if spec.externality is None or ctx is None:
        return 0.0
    ext = spec.externality
    value = np.asarray(ctx.statistic(ext.statistic), dtype=float)
    if ext.shift:
        value = value - np.array(ext.shift)
    return float(np.dot(ext.gamma, value))


def utility(spec, bundle, ctx=None):
    """
    Utility of a bundle, including the externality term.

    Parameters
    ----------
    spec (PreferenceSpec): preference.
    bundle (array-like): shape (..., ell); leading axes are broadcast.
    ctx (Context, optional): aggregate state; the externality term is skipped without it.

    Returns
    -------
    float or numpy.ndarray: utility, -inf allowed for log families at zero.
    """
    x = np.asarray(bundle, dtype=float)
    _check_indices(spec, x.shape[-1])
    z = (x / spec.scale)[..., None, :]
    value = _family_values([spec], z)[..., 0] - _externality_term(spec, ctx)
    if np.ndim(value) == 0:
        return float(value)
    return value


def utilities_many(consumers, bundles, ctx=None):
    """Utilities of every consumer; bundles has shape (..., n, ell), result (..., n)."""
    x = np.asarray(bundles, dtype=float)
    scales = np.array([c.preference.scale for c in consumers])
    z = x / scales[:, None]
    out = np.empty(x.shape[:-1])
    for key, idx in _groups(consumers).items():
        specs = [consumers[i].preference for i in idx]
        for spec in specs:
            _check_indices(spec, x.shape[-1])
        out[..., idx] = _family_values(specs, z[..., idx, :])
    if ctx is not None:
        out = out - np.array([_externality_term(c.preference, ctx) for c in consumers])
    return out


def utility_gradient(spec, bundle, ctx=None):
    """
    Gradient of utility in the own bundle.

    The externality term does not depend on the own bundle and contributes nothing.

    Raises
    ------
    DomainError: at a boundary point of a log family.
    """
    x = np.asarray(bundle, dtype=float)
    ell = x.shape[-1]
    _check_indices(spec, ell)
    z = x / spec.scale
    grad = np.zeros(ell)
    params = spec.params
    if spec.family == QUADRATIC_BAD:
        grad[params['good']] = 1.0
        grad[params['bad']] = -2.0 * params['coefficient'] * z[params['bad']]
    elif spec.family == LOG_MINUS_LINEAR:
        if z[params['good']] <= 0:
            raise DomainError("log_minus_linear gradient undefined at x_g <= 0")
        grad[params['good']] = 1.0 / z[params['good']]
        grad[params['bad']] = params['sign']
    elif spec.family == LINEAR:
        grad[:] = params['coefficients']
    else:
        alpha = np.array(params['exponents'])
        shifted = z + np.array(params['shifts'])
        active = alpha > 0
        if np.any(shifted[active] <= 0):
            raise DomainError("cobb_douglas gradient undefined at x_i + eps_i <= 0")
        grad[active] = alpha[active] / shifted[active]
    return grad / spec.scale


##------------------------------------------------------------------------------------
## Demand
##------------------------------------------------------------------------------------
def _groups(consumers):
    groups = {}
    for i, consumer in enumerate(consumers):
        groups.setdefault(consumer.preference.group_key(), []).append(i)
    return groups


def min_budget_value(price, bounds):
    """Smallest p.z over the box [0, bounds]; -inf for negative prices on unbounded coordinates."""
    p = np.asarray(price, dtype=float)
    b = np.asarray(bounds, dtype=float)
    with np.errstate(invalid='ignore'):
        return np.where(p < 0, p * b, 0.0).sum(axis=-1)


def demand(consumer, price, income, ctx=None, cfg=None):
    """
    Utility-maximising bundle in the budget set {z in box : p.z <= income}.

    Parameters
    ----------
    consumer (Consumer): consumer with bounds and preference.
    price (array-like): price vector, signs unrestricted.
    income (float): income.
    ctx (Context, optional): accepted for symmetry with utility; demand does not depend on it.
    cfg (SolverConfig, optional): supplies fallback_iters.

    Returns
    -------
    numpy.ndarray: the demanded bundle.

    Raises
    ------
    UnboundedProblem: utility grows without bound on the budget set.
    EmptyBudget: income below the cheapest point of the box.
    """
    return demand_many([consumer], price, [income], ctx=ctx, cfg=cfg)[0]


def demand_many(consumers, price, incomes, ctx=None, cfg=None):
    """Demand of several consumers at one price; returns an (n, ell) array."""
    p = np.asarray(price, dtype=float)
    w = np.asarray(incomes, dtype=float)
    n, ell = len(consumers), p.shape[0]
    out = np.empty((n, ell))
    if n == 0:
        return out
    bounds = np.array([c.bounds for c in consumers], dtype=float)
    scales = np.array([c.preference.scale for c in consumers])

    floor = min_budget_value(p, bounds)
    short = w < floor - 1e-12 * np.maximum(1.0, np.abs(floor))
    if short.any():
        i = int(np.argmax(short))
        raise EmptyBudget(f"consumer {consumers[i].id}: income {w[i]:.6g} below cheapest bundle {floor[i]:.6g}")

    iters = cfg.fallback_iters if cfg is not None else vocabularies.solver_defaults['fallback_iters']
    for key, idx in _groups(consumers).items():
        idx = np.asarray(idx)
        specs = [consumers[i].preference for i in idx]
        sc = scales[idx]
        zw = w[idx] / sc
        zb = bounds[idx] / sc[:, None]
        for spec in specs:
            _check_indices(spec, ell)
        if key[0] in GOOD_BAD_FAMILIES:
            z = _good_bad_demand(p, zw, zb, specs, iters)
        elif key[0] == LINEAR:
            z = np.array([_linear_demand(p, zw[k], zb[k], specs[k]) for k in range(len(idx))])
        else:
            z = np.array([_cobb_douglas_demand(p, zw[k], zb[k], specs[k]) for k in range(len(idx))])
        out[idx] = z * sc[:, None]
    return out


def _good_bad_demand(p, w, bounds, specs, iters):
    family = specs[0].family
    g, b = specs[0].params['good'], specs[0].params['bad']
    m, ell = bounds.shape
    pg, pb = p[g], p[b]

    if pg <= 0 or np.isfinite(bounds[:, g]).any():
        if pg <= 0 and np.isinf(bounds[:, g]).any():
            raise UnboundedProblem(f"good {g} has price {pg:.6g} <= 0 and an unbounded box")
        return np.array([_fallback_demand(specs[k], p, w[k], bounds[k], iters) for k in range(m)])

    x = np.zeros((m, ell))
    neutral = [i for i in range(ell) if i not in (g, b)]
    for i in neutral:
        if p[i] < 0:
            if np.isinf(bounds[:, i]).any():
                raise UnboundedProblem(f"commodity {i} has negative price and an unbounded box")
            x[:, i] = bounds[:, i]
    w_res = w - x[:, neutral] @ p[neutral]

    cap = bounds[:, b]
    with np.errstate(divide='ignore', invalid='ignore'):
        if pb > 0:
            lo = np.zeros(m)
            hi = np.minimum(cap, w_res / pb)
        elif pb < 0:
            lo = np.maximum(0.0, w_res / pb)
            hi = cap.copy()
        else:
            lo = np.zeros(m)
            hi = cap.copy()
        hi = np.maximum(hi, lo)

        if family == QUADRATIC_BAD:
            c = np.array([s.params['coefficient'] for s in specs])
            interior = np.clip(-pb / (2.0 * c * pg), lo, hi)
            corner = hi if pb < 0 else lo

            def along_budget(t):
                return (w_res - pb * t) / pg - c * t ** 2

            endpoints = np.where(along_budget(hi) > along_budget(lo), hi, lo)
            xb = np.select([c > 0, c == 0], [interior, corner], endpoints)
        else:
            sigma = np.array([s.params['sign'] for s in specs])
            favoured = np.where(sigma > 0, hi, lo)
            if pb == 0:
                xb = favoured
            else:
                xb = np.where(pb * sigma > 0, np.clip(w_res / pb - 1.0 / sigma, lo, hi), favoured)

    if not np.all(np.isfinite(xb)):
        raise UnboundedProblem(f"bad {b} demand is unbounded at price {p}")
    x[:, b] = xb
    x[:, g] = np.maximum((w_res - pb * xb) / pg, 0.0)
    return x


def _linear_demand(p, w, bounds, spec):
    a = np.array(spec.params['coefficients'])
    pinned = (a == 0) & (p == 0)
    box = [(0.0, 0.0) if pinned[i] else (0.0, None if np.isinf(bounds[i]) else bounds[i]) for i in range(len(p))]
    first = optimize.linprog(-a, A_ub=p[None, :], b_ub=[w], bounds=box, method='highs')
    if first.status == 3:
        raise UnboundedProblem(f"linear utility is unbounded on the budget set at price {p}")
    if first.status != 0:
        raise EmptyBudget(f"linear demand LP failed: {first.message}")
    best = -first.fun
    slack = 1e-12 * max(1.0, abs(best))
    second = optimize.linprog(
        -np.ones(len(p)),
        A_ub=np.vstack([p, -a]),
        b_ub=[w, -(best - slack)],
        bounds=box,
        method='highs',
    )
    if second.status == 0:
        x = second.x
    else:
        _log.warning(f"linear tie-break LP failed ({second.message}); keeping first-stage bundle")
        x = first.x
    return np.clip(x, 0.0, bounds)


def _cobb_douglas_demand(p, w, bounds, spec):
    alpha = np.array(spec.params['exponents'])
    eps = np.array(spec.params['shifts'])
    ell = len(p)
    x = np.zeros(ell)
    active = alpha > 0

    idle = ~active
    if np.any(idle & (p < 0) & np.isinf(bounds)):
        raise UnboundedProblem("unvalued commodity with negative price and unbounded box")
    x[idle & (p < 0)] = bounds[idle & (p < 0)]

    free_lunch = active & (p <= 0)
    if np.any(np.isinf(bounds[free_lunch])):
        raise UnboundedProblem("valued commodity with nonpositive price and unbounded box")
    x[free_lunch] = bounds[free_lunch]

    paid = np.flatnonzero(active & (p > 0))
    budget = w - p @ x
    if paid.size == 0 or budget <= 0:
        return x
    pp, aa, ee, bb = p[paid], alpha[paid], eps[paid], bounds[paid]

    def spend(nu):
        return pp @ np.clip(aa / (nu * pp) - ee, 0.0, bb)

    # Breakpoints of nu where a coordinate leaves its upper or lower bound.
    with np.errstate(divide='ignore'):
        upper_bp = aa / (pp * (bb + ee))
        lower_bp = aa / (pp * ee)
    points = np.unique(np.concatenate([upper_bp, lower_bp]))
    points = points[np.isfinite(points) & (points > 0)]
    if np.all(np.isfinite(bb)) and budget >= pp @ bb:
        x[paid] = bb
        return x

    # spend() is nonincreasing in nu; find the bracketing pair of breakpoints.
    left, right = 0.0, np.inf
    for nu in points:
        if spend(nu) >= budget:
            left = nu
        else:
            right = nu
            break
    trial = left * 2.0 if not np.isfinite(right) else (0.5 * (left + right) if left > 0 else 0.5 * right)
    if trial == 0:
        trial = 1.0
    interior = (aa / (trial * pp) - ee > 0) & (aa / (trial * pp) - ee < bb)
    at_upper = aa / (trial * pp) - ee >= bb
    share = aa[interior].sum()
    fixed = pp[at_upper] @ bb[at_upper] - pp[interior] @ ee[interior]
    if share > 0 and budget - fixed > 0:
        nu = share / (budget - fixed)
    else:
        nu = left if left > 0 else trial
    x[paid] = np.clip(aa / (nu * pp) - ee, 0.0, bb)
    return x


##------------------------------------------------------------------------------------
## Projected gradient fallback
##------------------------------------------------------------------------------------
def _project_budget_box(v, p, w, bounds):
    """Euclidean projection of v onto {0 <= x <= bounds, p.x <= w}."""
    y = np.clip(v, 0.0, bounds)
    if p @ y <= w:
        return y

    def excess(nu):
        return p @ np.clip(v - nu * p, 0.0, bounds) - w

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise EmptyBudget("budget set is empty")
    nu = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return np.clip(v - nu * p, 0.0, bounds)


def _fallback_demand(spec, p, w, bounds, iters):
    plain = replace(spec, scale=1.0, externality=None)
    for i in range(len(p)):
        if np.isinf(bounds[i]) and p[i] <= 0 and plain.is_strictly_increasing(i):
            raise UnboundedProblem(f"commodity {i} is free or paid for and unbounded")

    start = np.where(np.isfinite(bounds), 0.5 * bounds, 1.0)
    x = _project_budget_box(start, p, w, bounds)
    fx = utility(plain, x)
    if not np.isfinite(fx):
        x = _project_budget_box(x + 1e-6, p, w, bounds)
        fx = utility(plain, x)

    step = 1.0
    for _ in range(iters):
        try:
            grad = utility_gradient(plain, x)
        except DomainError:
            grad = utility_gradient(plain, x + 1e-9)
        while True:
            y = _project_budget_box(x + step * grad, p, w, bounds)
            fy = utility(plain, y)
            if fy >= fx + 1e-4 * grad @ (y - x):
                break
            step *= 0.5
            if step < 1e-16:
                return x
        if np.linalg.norm(y - x) <= 1e-13 * (1.0 + np.linalg.norm(x)):
            return y
        x, fx = y, fy
        if np.linalg.norm(x) > 1e12:
            raise UnboundedProblem("projected gradient iterates diverge")
        step = min(step * 2.0, 1e6)
    _log.debug(f"projected gradient stopped after {iters} iterations")
    return x


##------------------------------------------------------------------------------------
## Cheaper points and quasi-demand
##------------------------------------------------------------------------------------
def cheaper_point(consumer, price, income, strict_margin=1e-12):
    """
    A bundle of the consumption box costing strictly less than income, or None.

    The cheapest corner of the box is tried; when a negative-price coordinate is
    unbounded it is pushed far enough to undercut the income.
    """
    p = np.asarray(price, dtype=float)
    bounds = np.asarray(consumer.bounds, dtype=float)
    z = np.zeros_like(p)
    negative = p < 0
    finite = np.isfinite(bounds)
    z[negative & finite] = bounds[negative & finite]
    open_ended = np.flatnonzero(negative & ~finite)
    if open_ended.size:
        i = open_ended[0]
        z[i] = (abs(income) + abs(p @ z) + 1.0) / -p[i]
    if p @ z < income - strict_margin:
        return z
    return None


def is_quasi_demanded(consumer, bundle, price, income, ctx=None, tol=1e-8, cfg=None):
    """
    True when the bundle is affordable and no affordable bundle beats it by more than tol.
    """
    x = np.asarray(bundle, dtype=float)
    p = np.asarray(price, dtype=float)
    bounds = np.asarray(consumer.bounds, dtype=float)
    if np.any(x < -tol) or np.any(x > bounds + tol):
        return False
    if p @ x > income + tol:
        return False
    best = demand(consumer, p, income, ctx=ctx, cfg=cfg)
    spec = consumer.preference
    return utility(spec, x, ctx) >= utility(spec, best, ctx) - tol


def demand_gaps(consumers, bundles, price, incomes, ctx=None, cfg=None):
    """
    Per-consumer (budget violation, optimality gap, box violation) of given bundles.

    Optimality gap is u(demand) - u(bundle) (externality terms cancel), +inf when the
    demand problem at this price is unbounded or empty.
    """
    x = np.asarray(bundles, dtype=float)
    p = np.asarray(price, dtype=float)
    w = np.asarray(incomes, dtype=float)
    bounds = np.array([c.bounds for c in consumers], dtype=float).reshape(x.shape)
    budget = np.maximum(x @ p - w, 0.0)
    box = np.maximum(np.maximum(-x, x - bounds), 0.0).max(axis=-1, initial=0.0)
    try:
        best = demand_many(consumers, p, w, cfg=cfg)
        gap = utilities_many(consumers, best) - utilities_many(consumers, x)
    except (UnboundedProblem, EmptyBudget):
        gap = np.empty(len(consumers))
        for i, consumer in enumerate(consumers):
            try:
                best_i = demand(consumer, p, w[i], cfg=cfg)
                gap[i] = utility(consumer.preference, best_i) - utility(consumer.preference, x[i])
            except (UnboundedProblem, EmptyBudget):
                gap[i] = np.inf
    with np.errstate(invalid='ignore'):
        gap = np.where(np.isnan(gap), 0.0, gap)
    return budget, gap, box
