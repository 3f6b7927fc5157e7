"""Equilibrium search and verification.

An equilibrium is a zero of a residual that stacks

- aggregate excess demand (or, for free disposal, complementarity between p >= 0
  and excess supply),
- Fischer-Burmeister pairs phi(-p.g, a) for every cone generator g and activity a,
- for polytope firms, phi(pi - p.v, lambda_v) and sum(lambda) - 1,
- for linear-utility consumers, whose demand is set valued, box complementarity of
  the bundle against lambda p - a and phi(lambda, income - p.x).

Other consumers enter through their closed-form demand. Prices live on the l1 sphere
with unrestricted signs; the largest coordinate is held fixed at each Gauss-Newton
step and the price is renormalised afterwards.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy import optimize

from badmarket.config import SolverConfig
from badmarket.economy import CONE_RAYS, POLYTOPE, ZERO_FIRM, scale_factors
from badmarket.errors import DimensionError, EmptyBudget, NoConvergence, UnboundedProblem
from badmarket.firms import ActivityVector, max_profit, production_from_activities
from badmarket.preferences import (
    LINEAR,
    Context,
    _linear_demand,
    cheaper_point,
    demand_gaps,
    demand_many,
)
from badmarket.utilities import (
    _box_fischer_burmeister,
    _fischer_burmeister,
    _l1_normalize,
    _sign_patterns,
    _worker_count,
    sphere_grid,
)

_log = logging.getLogger(__name__)

# Gauss-Newton stops once every residual entry is below this.
_RESIDUAL_FLOOR = 1e-14
_MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class EquilibriumCertificate:
    price: np.ndarray
    bundles: np.ndarray
    activities: tuple
    productions: np.ndarray
    consumer_ids: tuple
    firm_ids: tuple
    residuals: dict = field(default_factory=dict)
    free_disposal: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'price', np.asarray(self.price, dtype=float))
        ell = self.price.shape[0]
        object.__setattr__(self, 'bundles', np.asarray(self.bundles, dtype=float).reshape(-1, ell))
        object.__setattr__(self, 'productions', np.asarray(self.productions, dtype=float).reshape(-1, ell))
        acts = tuple(a if isinstance(a, ActivityVector) else ActivityVector(tuple(a)) for a in self.activities)
        object.__setattr__(self, 'activities', acts)
        object.__setattr__(self, 'consumer_ids', tuple(self.consumer_ids))
        object.__setattr__(self, 'firm_ids', tuple(self.firm_ids))

    def bundle(self, consumer_id):
        return self.bundles[self.consumer_ids.index(consumer_id)]

    def production(self, firm_id):
        return self.productions[self.firm_ids.index(firm_id)]

    def __eq__(self, other):
        if not isinstance(other, EquilibriumCertificate):
            return NotImplemented
        return (
            np.array_equal(self.price, other.price)
            and np.array_equal(self.bundles, other.bundles)
            and np.array_equal(self.productions, other.productions)
            and self.activities == other.activities
            and self.consumer_ids == other.consumer_ids
            and self.firm_ids == other.firm_ids
            and self.free_disposal == other.free_disposal
        )

    __hash__ = None


@dataclass
class VerificationReport:
    """Outcome of checking a certificate: demand, profit, clearing and promotion."""

    demand_ok: bool = True
    profit_ok: bool = True
    clearing_ok: bool = True
    promotion_ok: bool = True
    failures: list = field(default_factory=list)
    gaps: dict = field(default_factory=dict)
    free_disposal: bool = False

    @property
    def passed(self):
        return self.demand_ok and self.profit_ok and self.clearing_ok and self.promotion_ok

    def failed(self, condition, subject, message):
        setattr(self, f"{condition}_ok", False)
        self.failures.append((condition, subject, message))

    def failing_subjects(self, condition):
        return [s for c, s, _ in self.failures if c == condition]

    def summary(self):
        mark = {True: 'pass', False: 'FAIL'}
        mode = 'free-disposal' if self.free_disposal else 'exact clearing'
        lines = [
            f"verification ({mode}): {'passed' if self.passed else 'FAILED'}",
            f"  (i)   demand optimality : {mark[self.demand_ok]}",
            f"  (ii)  profit maximisation: {mark[self.profit_ok]}",
            f"  (iii) market clearing   : {mark[self.clearing_ok]}",
            f"  promotion (cheaper pts) : {mark[self.promotion_ok]}",
        ]
        for name, value in self.gaps.items():
            if np.ndim(value) == 0:
                lines.append(f"  {name} = {value:.3e}")
        for condition, subject, message in self.failures[:20]:
            lines.append(f"  - {condition} [{subject}]: {message}")
        if len(self.failures) > 20:
            lines.append(f"  ... {len(self.failures) - 20} more failures")
        return "\n".join(lines)


##------------------------------------------------------------------------------------
## Excess and verification
##------------------------------------------------------------------------------------
def aggregate_excess(econ, price, bundles, productions):
    """
    Aggregate excess demand sum mu x - sum mu e - sum_j y_j.

    Raises
    ------
    DimensionError: bundles or productions do not match the economy.
    """
    x = np.asarray(bundles, dtype=float)
    y = np.asarray(productions, dtype=float)
    if x.shape != (econ.n, econ.ell):
        raise DimensionError(f"bundles have shape {x.shape}, expected {(econ.n, econ.ell)}")
    if y.size == 0:
        y = np.zeros((0, econ.ell))
    if y.shape != (len(econ.firms), econ.ell):
        raise DimensionError(f"productions have shape {y.shape}, expected {(len(econ.firms), econ.ell)}")
    if price is not None and np.shape(price) != (econ.ell,):
        raise DimensionError(f"price has length {np.size(price)}, expected {econ.ell}")
    return econ.weights @ x - econ.weights @ econ.endowments - y.sum(axis=0)


def incomes_at(econ, price, productions, extra_income=None):
    """p.e + sum_j theta_j p.y_j (+ extra) for every consumer."""
    p = np.asarray(price, dtype=float)
    y = np.asarray(productions, dtype=float).reshape(len(econ.firms), econ.ell)
    income = econ.endowments @ p + econ.shares @ (y @ p)
    if extra_income is not None:
        income = income + np.asarray(extra_income, dtype=float)
    return income


def _check_shapes(econ, cert):
    if cert.price.shape != (econ.ell,):
        raise DimensionError(f"certificate price has length {cert.price.size}, economy has {econ.ell} commodities")
    if tuple(cert.consumer_ids) != econ.consumer_ids:
        raise DimensionError("certificate consumers do not match the economy")
    if tuple(cert.firm_ids) != econ.firm_ids:
        raise DimensionError("certificate firms do not match the economy")
    if len(cert.activities) != len(econ.firms):
        raise DimensionError("certificate carries activities for a different number of firms")


def verify_equilibrium(econ, cert, tol=None, cfg=None, extra_income=None, target=None):
    """
    Check a certificate against the equilibrium conditions.

    Parameters
    ----------
    econ (Economy): the economy.
    cert (EquilibriumCertificate): candidate; its price is l1-normalised first.
    tol (float, optional): one tolerance for every condition. Without it the
        clearing test uses cfg.clearing_tol and the others cfg.optimality_tol.
    cfg (SolverConfig, optional): tolerances and fallback settings.
    extra_income (array-like, optional): income added to each consumer (quota rents).
    target (array-like, optional): required value of the aggregate excess (default 0).

    Returns
    -------
    VerificationReport

    Raises
    ------
    DimensionError: the certificate does not belong to this economy.
    """
    cfg = cfg or SolverConfig()
    clear_tol = tol if tol is not None else cfg.clearing_tol
    opt_tol = tol if tol is not None else cfg.optimality_tol
    _check_shapes(econ, cert)
    report = VerificationReport(free_disposal=cert.free_disposal)

    try:
        p, _ = _l1_normalize(cert.price)
    except ValueError:
        report.failed('clearing', 'price', 'price is zero or not finite')
        return report

    ell = econ.ell
    y = cert.productions.reshape(len(econ.firms), ell)

    # (ii) profit maximisation, including y_j in Y_j
    worst_profit = 0.0
    for j, firm in enumerate(econ.firms):
        levels = cert.activities[j].as_array()
        try:
            implied = production_from_activities(firm, levels, ell=ell)
        except DimensionError as e:
            report.failed('profit', firm.id, str(e))
            continue
        if np.any(levels < -opt_tol):
            report.failed('profit', firm.id, 'negative activity level')
        if firm.kind == POLYTOPE and abs(levels.sum() - 1.0) > opt_tol:
            report.failed('profit', firm.id, 'polytope weights do not sum to 1')
        if np.max(np.abs(implied - y[j]), initial=0.0) > opt_tol:
            report.failed('profit', firm.id, 'production differs from its activities')
        best = max_profit(firm, p, tol=cfg.profit_tol)
        if not np.isfinite(best):
            report.failed('profit', firm.id, 'maximum profit is unbounded at this price')
            worst_profit = np.inf
            continue
        gap = best - float(p @ y[j])
        worst_profit = max(worst_profit, gap)
        if gap > opt_tol:
            report.failed('profit', firm.id, f"profit gap {gap:.3e}")

    # (i) demand optimality at the implied incomes
    incomes = incomes_at(econ, p, y, extra_income)
    budget, gap, box = demand_gaps(econ.consumers, cert.bundles, p, incomes, cfg=cfg)
    for i in np.flatnonzero((budget > opt_tol) | (gap > opt_tol) | (box > opt_tol)):
        cid = econ.consumers[i].id
        report.failed(
            'demand',
            cid,
            f"budget violation {budget[i]:.3e}, optimality gap {gap[i]:.3e}, box violation {box[i]:.3e}",
        )

    # (iii) clearing
    excess = aggregate_excess(econ, p, cert.bundles, y)
    if target is not None:
        excess = excess - np.asarray(target, dtype=float)
    if cert.free_disposal:
        if np.any(excess > clear_tol):
            report.failed('clearing', 'excess', f"excess demand {excess.max():.3e} under free disposal")
        if np.any(p < -clear_tol):
            report.failed('clearing', 'price', 'negative price under free disposal')
    elif np.max(np.abs(excess)) > clear_tol:
        report.failed('clearing', 'excess', f"clearing residual {np.max(np.abs(excess)):.3e}")

    # promotion: quasi-equilibrium is an equilibrium when every consumer has a cheaper point
    for i, consumer in enumerate(econ.consumers):
        if cheaper_point(consumer, p, incomes[i], cfg.strict_margin) is None:
            report.failed('promotion', consumer.id, 'no strictly cheaper point in the consumption set')

    report.gaps = {
        'clearing': excess,
        'clearing_norm': float(np.max(np.abs(excess))) if excess.size else 0.0,
        'worst_budget_violation': float(budget.max(initial=0.0)),
        'worst_optimality_gap': float(gap.max(initial=0.0)),
        'worst_profit_gap': float(worst_profit),
    }
    return report


##------------------------------------------------------------------------------------
## Residual system
##------------------------------------------------------------------------------------
class _System:
    """Unknown layout and residual of one economy."""

    def __init__(self, econ, cfg, free_disposal=False, extra_income=None, target=None):
        self.econ = econ
        self.cfg = cfg
        self.free_disposal = free_disposal
        ell = self.ell = econ.ell
        self.weights = np.array(econ.weights)
        self.endow = np.array(econ.endowments)
        self.shares = np.array(econ.shares)
        self.bounds = np.array(econ.bounds)
        self.mean_endow = self.weights @ self.endow
        self.extra_income = np.zeros(econ.n) if extra_income is None else np.asarray(extra_income, dtype=float)
        self.target = np.zeros(ell) if target is None else np.asarray(target, dtype=float)

        self.linear_idx = [i for i, c in enumerate(econ.consumers) if c.preference.family == LINEAR]
        self.closed_idx = [i for i, c in enumerate(econ.consumers) if c.preference.family != LINEAR]
        self.closed_consumers = [econ.consumers[i] for i in self.closed_idx]

        self.offsets = np.array([f.offset_vector(ell) for f in econ.firms]).reshape(-1, ell)
        self.gens = [f.generator_matrix(ell) for f in econ.firms]
        pos = ell
        self.firm_slices = []
        self.profit_slots = {}
        for j, firm in enumerate(econ.firms):
            count = self.gens[j].shape[0] if firm.kind != ZERO_FIRM else 0
            self.firm_slices.append(slice(pos, pos + count))
            pos += count
            if firm.kind == POLYTOPE:
                self.profit_slots[j] = pos
                pos += 1
        self.linear_slots = []
        for i in self.linear_idx:
            self.linear_slots.append((slice(pos, pos + ell), pos + ell))
            pos += ell + 1
        self.size = pos

    def unpack_productions(self, z, clip=False):
        y = self.offsets.copy()
        for j, firm in enumerate(self.econ.firms):
            if firm.kind == ZERO_FIRM:
                continue
            a = z[self.firm_slices[j]]
            if clip:
                a = np.maximum(a, 0.0)
                if firm.kind == POLYTOPE:
                    a = a / a.sum() if a.sum() > 0 else np.full(a.size, 1.0 / a.size)
            y[j] = y[j] + a @ self.gens[j]
        return y

    def bundles(self, z, p, incomes):
        x = np.empty((self.econ.n, self.ell))
        if self.closed_idx:
            x[self.closed_idx] = demand_many(self.closed_consumers, p, incomes[self.closed_idx], cfg=self.cfg)
        for k, i in enumerate(self.linear_idx):
            x[i] = z[self.linear_slots[k][0]]
        return x

    def residual(self, z):
        """Stacked residual, or None where some demand is undefined."""
        ell = self.ell
        p = z[:ell]
        y = self.unpack_productions(z)
        incomes = self.endow @ p + self.shares @ (y @ p) + self.extra_income
        try:
            x = self.bundles(z, p, incomes)
        except (UnboundedProblem, EmptyBudget):
            return None
        excess = self.weights @ x - self.mean_endow - y.sum(axis=0) - self.target
        rows = [_fischer_burmeister(p, -excess) if self.free_disposal else excess]
        for j, firm in enumerate(self.econ.firms):
            if firm.kind == CONE_RAYS:
                rows.append(_fischer_burmeister(-(self.gens[j] @ p), z[self.firm_slices[j]]))
            elif firm.kind == POLYTOPE:
                lam = z[self.firm_slices[j]]
                values = (self.gens[j] + self.offsets[j]) @ p
                rows.append(_fischer_burmeister(z[self.profit_slots[j]] - values, lam))
                rows.append(np.array([lam.sum() - 1.0]))
        for k, i in enumerate(self.linear_idx):
            xs, ls = self.linear_slots[k]
            spec = self.econ.consumers[i].preference
            a = np.array(spec.params['coefficients']) / spec.scale
            lam = z[ls]
            rows.append(_box_fischer_burmeister(z[xs], 0.0, self.bounds[i], lam * p - a))
            rows.append(np.array([_fischer_burmeister(lam, incomes[i] - p @ z[xs])]))
        return np.concatenate(rows)

    def initial_point(self, price):
        """Unknown vector for a starting price: demand-implied bundles and NNLS activities."""
        ell = self.ell
        p, _ = _l1_normalize(price)
        z = np.zeros(self.size)
        z[:ell] = p
        for j, firm in enumerate(self.econ.firms):
            if firm.kind == POLYTOPE:
                count = self.gens[j].shape[0]
                z[self.firm_slices[j]] = 1.0 / count
                z[self.profit_slots[j]] = float(np.max((self.gens[j] + self.offsets[j]) @ p))
        for k, i in enumerate(self.linear_idx):
            xs, ls = self.linear_slots[k]
            spec = self.econ.consumers[i].preference
            z[xs] = np.clip(self.endow[i], 0.0, self.bounds[i])
            z[ls] = np.abs(np.array(spec.params['coefficients']) / spec.scale).sum()

        y = self.unpack_productions(z)
        incomes = self.endow @ p + self.shares @ (y @ p) + self.extra_income
        x = self.bundles(z, p, incomes)
        cones = [j for j, f in enumerate(self.econ.firms) if f.kind == CONE_RAYS and self.gens[j].size]
        if cones:
            gap = self.weights @ x - self.mean_endow - y.sum(axis=0) - self.target
            matrix = np.hstack([self.gens[j].T for j in cones])
            levels, _ = optimize.nnls(matrix, gap)
            pos = 0
            for j in cones:
                count = self.gens[j].shape[0]
                z[self.firm_slices[j]] = levels[pos:pos + count]
                pos += count
        return z

    def renormalize(self, z):
        ell = self.ell
        norm = np.abs(z[:ell]).sum()
        if norm == 0 or not np.isfinite(norm):
            return None
        z = z.copy()
        z[:ell] /= norm
        for j in self.profit_slots.values():
            z[j] /= norm
        for _, ls in self.linear_slots:
            z[ls] *= norm
        return z


def _jacobian(system, z, f0, columns, step):
    jac = np.zeros((f0.size, len(columns)))
    for c, i in enumerate(columns):
        h = step * max(1.0, abs(z[i]))
        zp = z.copy()
        zp[i] += h
        fp = system.residual(zp)
        if fp is None:
            zp[i] = z[i] - h
            fm = system.residual(zp)
            if fm is None:
                continue
            jac[:, c] = (f0 - fm) / h
        else:
            jac[:, c] = (fp - f0) / h
    return jac


def _gauss_newton(system, z, cfg):
    """Damped Gauss-Newton on the residual. Returns (z, residual vector or None)."""
    f = system.residual(z)
    if f is None:
        return z, None
    ell = system.ell
    for it in range(cfg.max_inner_iters):
        norm = np.max(np.abs(f))
        if norm <= _RESIDUAL_FLOOR:
            break
        pivot = int(np.argmax(np.abs(z[:ell])))
        columns = [i for i in range(system.size) if i != pivot]
        jac = _jacobian(system, z, f, columns, cfg.jacobian_step)
        step, *_ = np.linalg.lstsq(jac, -f, rcond=None)
        objective = f @ f
        t = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            trial = z.copy()
            trial[columns] += t * step
            trial = system.renormalize(trial)
            if trial is not None:
                ft = system.residual(trial)
                if ft is not None and ft @ ft < objective:
                    z, f = trial, ft
                    accepted = True
                    break
            t *= 0.5
        _log.debug(f"gauss-newton iter {it}: |F| = {np.max(np.abs(f)):.3e}, step {t:.3g}")
        if not accepted:
            break
    return z, f


##------------------------------------------------------------------------------------
## Certificates from unknowns
##------------------------------------------------------------------------------------
def _certificate(system, z, residual_norm):
    econ = system.econ
    ell = system.ell
    p, _ = _l1_normalize(z[:ell])
    if system.free_disposal:
        # round-off below the clearing tolerance must not read as a negative price
        p, _ = _l1_normalize(np.where(p > -system.cfg.clearing_tol, np.maximum(p, 0.0), p))
    activities = []
    for j, firm in enumerate(econ.firms):
        if firm.kind == ZERO_FIRM:
            activities.append(ActivityVector(()))
            continue
        a = np.maximum(z[system.firm_slices[j]], 0.0)
        if firm.kind == POLYTOPE:
            a = a / a.sum() if a.sum() > 0 else np.full(a.size, 1.0 / a.size)
        activities.append(ActivityVector(tuple(a)))
    y = np.array([production_from_activities(f, activities[j], ell=ell) for j, f in enumerate(econ.firms)])
    y = y.reshape(len(econ.firms), ell)
    incomes = econ.endowments @ p + econ.shares @ (y @ p) + system.extra_income
    x = np.empty((econ.n, ell))
    if system.closed_idx:
        x[system.closed_idx] = demand_many(system.closed_consumers, p, incomes[system.closed_idx], cfg=system.cfg)
    for k, i in enumerate(system.linear_idx):
        x[i] = np.clip(z[system.linear_slots[k][0]], 0.0, system.bounds[i])
    return EquilibriumCertificate(
        price=p,
        bundles=x,
        activities=tuple(activities),
        productions=y,
        consumer_ids=econ.consumer_ids,
        firm_ids=econ.firm_ids,
        residuals={'residual_norm': float(residual_norm)},
        free_disposal=system.free_disposal,
    )


def _with_gaps(cert, report):
    residuals = dict(cert.residuals)
    residuals.update(
        {
            'clearing': [float(v) for v in report.gaps.get('clearing', [])],
            'worst_budget_violation': report.gaps.get('worst_budget_violation', np.inf),
            'worst_optimality_gap': report.gaps.get('worst_optimality_gap', np.inf),
            'worst_profit_gap': report.gaps.get('worst_profit_gap', np.inf),
        }
    )
    return EquilibriumCertificate(
        price=cert.price,
        bundles=cert.bundles,
        activities=cert.activities,
        productions=cert.productions,
        consumer_ids=cert.consumer_ids,
        firm_ids=cert.firm_ids,
        residuals=residuals,
        free_disposal=cert.free_disposal,
    )


@dataclass
class _Attempt:
    index: int
    start: np.ndarray
    residual_norm: float = np.inf
    price: Optional[np.ndarray] = None
    certificate: Optional[EquilibriumCertificate] = None
    message: str = ''


def _attempt(system, index, start, cfg):
    attempt = _Attempt(index=index, start=start)
    try:
        z0 = system.initial_point(start)
    except (UnboundedProblem, EmptyBudget, ValueError) as e:
        attempt.message = f"rejected start: {e}"
        return attempt
    z, f = _gauss_newton(system, z0, cfg)
    if f is None:
        attempt.message = 'demand undefined at start'
        return attempt
    attempt.residual_norm = float(np.max(np.abs(f)))
    attempt.price = _l1_normalize(z[:system.ell])[0]
    try:
        cert = _certificate(system, z, attempt.residual_norm)
    except (UnboundedProblem, EmptyBudget) as e:
        attempt.message = f"demand undefined at the final price: {e}"
        return attempt
    report = verify_equilibrium(
        system.econ, cert, cfg=cfg, extra_income=system.extra_income, target=system.target
    )
    if report.passed:
        attempt.certificate = _with_gaps(cert, report)
    else:
        attempt.message = '; '.join(f"{c}[{s}]" for c, s, _ in report.failures[:5])
    return attempt


##------------------------------------------------------------------------------------
## Starting points and the multi-start driver
##------------------------------------------------------------------------------------
def _starting_prices(econ, cfg, initial_price, free_disposal, extra_income, target):
    rng = np.random.default_rng(cfg.seed)
    ell = econ.ell
    starts = []
    if cfg.restarts == 0:
        return starts
    if initial_price is not None:
        starts.append(_l1_normalize(np.asarray(initial_price, dtype=float))[0])
    if cfg.scan_resolution and cfg.scan_seeds and ell <= 3 and not free_disposal:
        table = excess_map_scan(econ, cfg.scan_resolution, cfg=cfg, extra_income=extra_income, target=target)
        finite = table[np.isfinite(table['residual'])]
        best = finite.sort_values('residual', kind='mergesort').head(max(0, min(cfg.scan_seeds, cfg.restarts - len(starts))))
        for _, row in best.iterrows():
            starts.append(row[[f"p{k}" for k in range(ell)]].to_numpy(dtype=float))
    patterns = _sign_patterns(ell, econ.commodities.bad_count)
    if free_disposal:
        patterns = [np.ones(ell, dtype=int)]
    k = 0
    while len(starts) < cfg.restarts:
        magnitude = rng.dirichlet(np.ones(ell))
        starts.append(patterns[k % len(patterns)] * magnitude)
        k += 1
    return starts


def _run_starts(system, starts, cfg):
    attempts = []
    workers = _worker_count()
    for begin in range(0, len(starts), cfg.batch_size):
        batch = list(enumerate(starts))[begin:begin + cfg.batch_size]
        if workers > 1 and len(batch) > 1:
            with ThreadPoolExecutor(max_workers=min(workers, len(batch))) as pool:
                results = list(pool.map(lambda item: _attempt(system, item[0], item[1], cfg), batch))
        else:
            results = [_attempt(system, i, s, cfg) for i, s in batch]
        attempts.extend(results)
        for a in results:
            if a.certificate is None:
                _log.info(f"start {a.index}: residual {a.residual_norm:.3e} not verified ({a.message})")
        verified = [a for a in results if a.certificate is not None]
        if verified:
            chosen = min(verified, key=lambda a: (a.residual_norm, a.index))
            _log.info(f"start {chosen.index} verified with residual {chosen.residual_norm:.3e}")
            return chosen, attempts
    return None, attempts


def solve_equilibrium(econ, cfg=None, initial_price=None, free_disposal=False, extra_income=None, target=None):
    """
    Find a verified equilibrium.

    Parameters
    ----------
    econ (Economy): the economy.
    cfg (SolverConfig, optional): tolerances, restarts and seed.
    initial_price (array-like, optional): tried before any other start.
    free_disposal (bool): solve for a free-disposal equilibrium (p >= 0, excess <= 0).
    extra_income (array-like, optional): fixed income added to each consumer.
    target (array-like, optional): required aggregate excess (default 0).

    Returns
    -------
    EquilibriumCertificate: passes verify_equilibrium at the cfg tolerances.

    Raises
    ------
    NoConvergence: no start produced a verified certificate. Carries the smallest
        residual reached and its price.
    """
    cfg = cfg or SolverConfig()
    system = _System(econ, cfg, free_disposal=free_disposal, extra_income=extra_income, target=target)
    has_externality = any(c.preference.externality is not None for c in econ.consumers)
    outer_iters = cfg.max_outer_iters if has_externality else 1

    start_price = initial_price
    previous = None
    cert = None
    for outer in range(outer_iters):
        starts = _starting_prices(econ, cfg, start_price, free_disposal, extra_income, target)
        chosen, attempts = _run_starts(system, starts, cfg)
        if chosen is None:
            tried = [a for a in attempts if a.price is not None]
            best = min(tried, key=lambda a: (a.residual_norm, a.index)) if tried else None
            raise NoConvergence(
                f"no verified equilibrium after {len(attempts)} starts",
                best_residual=best.residual_norm if best else np.inf,
                best_price=best.price if best else None,
                restarts_tried=len(attempts),
            )
        cert = chosen.certificate
        if not has_externality:
            break
        # Externality terms are additively separable, so demand ignores the context; the
        # loop settles once the aggregate state stops moving between passes.
        ctx = Context.from_state(econ.weights, cert.bundles, cert.productions, cert.price)
        change = np.inf if previous is None else float(np.abs(ctx.mean_allocation - previous.mean_allocation).sum())
        _log.info(f"externality pass {outer}: mean allocation moved {change:.3e}")
        if change < cfg.clearing_tol:
            break
        d = cfg.damping
        start_price = cert.price if previous is None else (1 - d) * previous.price + d * cert.price
        previous = ctx
    return cert


def map_from_rescaled(econ, cert):
    """Carry a certificate of rescale_to_unweighted(econ) back to econ: x = x' / (n mu)."""
    factors = scale_factors(econ)
    return EquilibriumCertificate(
        price=cert.price,
        bundles=cert.bundles / factors[:, None],
        activities=cert.activities,
        productions=cert.productions,
        consumer_ids=cert.consumer_ids,
        firm_ids=cert.firm_ids,
        residuals=dict(cert.residuals),
        free_disposal=cert.free_disposal,
    )


##------------------------------------------------------------------------------------
## Excess map scan
##------------------------------------------------------------------------------------
def _scan_point(system, p, profit_tol):
    """Smallest sup-norm clearing residual at p over all selections from set-valued responses."""
    econ = system.econ
    ell = system.ell
    fixed_y = system.offsets.copy()
    columns = []
    eq_rows = []
    for j, firm in enumerate(econ.firms):
        if firm.kind == CONE_RAYS:
            profits = system.gens[j] @ p
            if np.any(profits > profit_tol):
                return np.inf
            for r in np.flatnonzero(np.abs(profits) <= profit_tol):
                columns.append(system.gens[j][r])
        elif firm.kind == POLYTOPE:
            values = (system.gens[j] + system.offsets[j]) @ p
            active = np.flatnonzero(values >= values.max() - profit_tol)
            if active.size == 1:
                fixed_y[j] = fixed_y[j] + system.gens[j][active[0]]
            else:
                first = len(columns)
                for v in active:
                    columns.append(system.gens[j][v])
                eq_rows.append((first, active.size))
    profits = fixed_y @ p
    for j, firm in enumerate(econ.firms):
        if firm.kind == POLYTOPE:
            profits[j] = float(np.max((system.gens[j] + system.offsets[j]) @ p))
    incomes = system.endow @ p + system.shares @ profits + system.extra_income
    try:
        x = np.zeros((econ.n, ell))
        if system.closed_idx:
            x[system.closed_idx] = demand_many(system.closed_consumers, p, incomes[system.closed_idx], cfg=system.cfg)
        best_linear = []
        for i in system.linear_idx:
            c = econ.consumers[i]
            scale = c.preference.scale
            xi = _linear_demand(p, incomes[i] / scale, system.bounds[i] / scale, c.preference) * scale
            best_linear.append(np.array(c.preference.params['coefficients']) @ xi / scale)
    except (UnboundedProblem, EmptyBudget):
        return np.inf

    base = system.weights @ x - system.mean_endow - fixed_y.sum(axis=0) - system.target
    if not columns and not system.linear_idx:
        return float(np.max(np.abs(base)))

    # Variables: supply columns, linear bundles, then t.
    n_sup = len(columns)
    n_lin = len(system.linear_idx)
    size = n_sup + n_lin * ell + 1
    effect = np.zeros((ell, size))
    if n_sup:
        effect[:, :n_sup] = -np.array(columns).T
    box = [(0.0, None)] * n_sup
    a_ub, b_ub = [], []
    for k, i in enumerate(system.linear_idx):
        cols = slice(n_sup + k * ell, n_sup + (k + 1) * ell)
        effect[:, cols] = system.weights[i] * np.eye(ell)
        box += [(0.0, None if np.isinf(b) else b) for b in system.bounds[i]]
        row = np.zeros(size)
        row[cols] = p
        a_ub.append(row)
        b_ub.append(incomes[i])
        spec = econ.consumers[i].preference
        row = np.zeros(size)
        row[cols] = -np.array(spec.params['coefficients']) / spec.scale
        a_ub.append(row)
        b_ub.append(-(best_linear[k] - 1e-12 * max(1.0, abs(best_linear[k]))))
    box.append((0.0, None))
    t_col = np.zeros((ell, 1))
    t_col[:, 0] = 1.0
    # base + effect v <= t and -(base + effect v) <= t
    upper = effect.copy()
    upper[:, -1] = -1.0
    lower = -effect
    lower[:, -1] = -1.0
    a_ub = np.vstack([upper, lower] + ([np.array(a_ub)] if a_ub else []))
    b_ub = np.concatenate([-base, base, np.array(b_ub, dtype=float)])
    a_eq, b_eq = None, None
    if eq_rows:
        a_eq = np.zeros((len(eq_rows), size))
        for r, (first, count) in enumerate(eq_rows):
            a_eq[r, first:first + count] = 1.0
        b_eq = np.ones(len(eq_rows))
    cost = np.zeros(size)
    cost[-1] = 1.0
    res = optimize.linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=box, method='highs')
    if res.status != 0:
        return np.inf
    return float(res.fun)


def excess_map_scan(econ, price_grid, cfg=None, signs=None, extra_income=None, target=None):
    """
    Clearing residual over a grid of prices on the l1 sphere.

    Parameters
    ----------
    econ (Economy): the economy.
    price_grid (int or array-like): grid resolution for :func:`sphere_grid`, or an
        explicit (m, ell) array of prices (normalised before use).
    cfg (SolverConfig, optional): profit tolerance and fallback settings.
    signs (sequence, optional): restrict a generated grid to one sign pattern.

    Returns
    -------
    pandas.DataFrame: columns p0..p{ell-1} and residual (+inf where some demand or
        supply is undefined).
    """
    cfg = cfg or SolverConfig()
    if np.ndim(price_grid) == 0:
        grid = sphere_grid(econ.ell, int(price_grid), signs=signs)
    else:
        grid = np.asarray(price_grid, dtype=float).reshape(-1, econ.ell)
    system = _System(econ, cfg, extra_income=extra_income, target=target)
    residuals = np.empty(len(grid))
    for k, price in enumerate(grid):
        p, _ = _l1_normalize(price)
        residuals[k] = _scan_point(system, p, cfg.profit_tol)
    table = pd.DataFrame(grid / np.abs(grid).sum(axis=1, keepdims=True), columns=[f"p{k}" for k in range(econ.ell)])
    table['residual'] = residuals
    return table
