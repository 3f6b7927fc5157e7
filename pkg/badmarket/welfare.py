"""Welfare comparisons and free-disposal constructions."""
import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd

from badmarket.builders import hara_omegas
from badmarket.config import SolverConfig
from badmarket.economy import CONE_RAYS, Economy, Technology
from badmarket.errors import DimensionError, PreconditionError
from badmarket.firms import ActivityVector, production_from_activities
from badmarket.preferences import utilities_many
from badmarket.solver import EquilibriumCertificate, aggregate_excess
from badmarket.utilities import _l1_normalize

_log = logging.getLogger(__name__)

# Strictness margin for Pareto comparisons.
PARETO_MARGIN = 1e-12

DISPOSAL_FIRM_ID = 'disposal'


def _bundles(econ, alloc):
    x = np.asarray(getattr(alloc, 'bundles', alloc), dtype=float)
    if x.shape != (econ.n, econ.ell):
        raise DimensionError(f"allocation has shape {x.shape}, expected {(econ.n, econ.ell)}")
    return x


@dataclass
class AllocationPair:
    """Two allocations of one economy, each with its productions and context."""

    bundles_a: np.ndarray
    bundles_b: np.ndarray
    productions_a: Optional[np.ndarray] = None
    productions_b: Optional[np.ndarray] = None
    ctx_a: object = None
    ctx_b: object = None

    def check(self, econ):
        _bundles(econ, self.bundles_a)
        _bundles(econ, self.bundles_b)
        return self

    def dominates(self, econ, margin=PARETO_MARGIN):
        """True when allocation a Pareto-dominates allocation b."""
        return pareto_dominates(econ, self.bundles_a, self.bundles_b, self.ctx_a, self.ctx_b, margin)


def pareto_dominates(econ, alloc_a, alloc_b, ctx_a=None, ctx_b=None, margin=PARETO_MARGIN):
    """
    Pareto dominance of allocation a over allocation b.

    Parameters
    ----------
    econ (Economy): the economy.
    alloc_a, alloc_b: (n, ell) bundle arrays or certificates.
    ctx_a, ctx_b (Context, optional): the context each allocation is evaluated under.
    margin (float): strictness margin.

    Returns
    -------
    bool: every consumer weakly better under a and at least one better by more than margin.
    """
    ua = utilities_many(econ.consumers, _bundles(econ, alloc_a), ctx_a)
    ub = utilities_many(econ.consumers, _bundles(econ, alloc_b), ctx_b)
    with np.errstate(invalid='ignore'):
        weak = np.all((ua >= ub - margin) | (ua == ub))
        strict = np.any(ua > ub + margin)
    return bool(weak and strict)


def utility_table(econ, allocations, contexts=None):
    """
    Per-consumer utilities under each named allocation.

    Parameters
    ----------
    econ (Economy): the economy.
    allocations (dict): name -> (n, ell) bundles or certificate.
    contexts (dict, optional): name -> Context.

    Returns
    -------
    pandas.DataFrame: one row per consumer plus 'sum (weighted)' and 'sum (unweighted)'.
    """
    contexts = contexts or {}
    columns = {}
    for name, alloc in allocations.items():
        u = utilities_many(econ.consumers, _bundles(econ, alloc), contexts.get(name))
        columns[name] = list(u) + [float(econ.weights @ u), float(u.sum())]
    index = list(econ.consumer_ids) + ['sum (weighted)', 'sum (unweighted)']
    return pd.DataFrame(columns, index=pd.Index(index, name='consumer'))


def has_free_disposal(econ):
    return any(f.free_disposal for f in econ.firms)


def check_nonnegative_price_rule(econ, cert, tol=None, cfg=None):
    """
    With a free-disposal firm, an equilibrium price is >= 0. Vacuously true otherwise.

    Entries down to ``-tol`` count as zero; ``tol`` defaults to the clearing tolerance
    the verifier uses.
    """
    if not has_free_disposal(econ):
        return True
    if tol is None:
        tol = (cfg or SolverConfig()).clearing_tol
    p, _ = _l1_normalize(cert.price)
    return bool(np.all(p >= -tol))


def free_disposal_augment(econ, owner_shares=None):
    """
    Append a free-disposal firm (the rays -e_i only).

    Parameters
    ----------
    econ (Economy): economy to augment.
    owner_shares (sequence, optional): share of each consumer; default 1 for everyone.

    Returns
    -------
    Economy
    """
    shares = np.ones(econ.n) if owner_shares is None else np.asarray(owner_shares, dtype=float)
    if shares.shape != (econ.n,):
        raise DimensionError(f"{shares.size} owner shares for {econ.n} consumers")
    consumers = tuple(replace(c, shares=c.shares + (float(s),)) for c, s in zip(econ.consumers, shares))
    firm = Technology.cone((), free_disposal=True, id=DISPOSAL_FIRM_ID)
    return Economy(
        econ.commodities,
        consumers,
        firms=econ.firms + (firm,),
        monotone_witnesses=econ.monotone_witnesses,
        metadata=econ.metadata,
    )


def excess_supply(econ, cert):
    """w = sum mu e + sum y - sum mu x."""
    return -aggregate_excess(econ, cert.price, cert.bundles, cert.productions)


def disguise_free_disposal(econ, fd_cert, tol=1e-9):
    """
    Rewrite a free-disposal equilibrium as an exact-clearing one.

    The first free-disposal firm absorbs the excess supply w through its disposal
    rays: y' = y - w. Everything else is unchanged.

    Raises
    ------
    PreconditionError: with hypothesis 'free-disposal-firm', 'excess-supply-nonnegative',
        'value-of-excess-supply' or 'production-independent-preferences'.
    """
    fd = [j for j, f in enumerate(econ.firms) if f.free_disposal and f.kind == CONE_RAYS]
    if not fd:
        raise PreconditionError('free-disposal-firm', "the economy has no free-disposal firm")
    for c in econ.consumers:
        ext = c.preference.externality
        if ext is not None and ext.statistic == 'total_production':
            raise PreconditionError(
                'production-independent-preferences', f"consumer {c.id} cares about total production"
            )
    p, _ = _l1_normalize(fd_cert.price)
    w = excess_supply(econ, fd_cert)
    if np.any(w < -tol):
        raise PreconditionError('excess-supply-nonnegative', f"excess supply {w} has a negative entry")
    value = float(p @ w)
    if abs(value) > tol:
        raise PreconditionError('value-of-excess-supply', f"p.w = {value:.6g}, expected 0")

    j = fd[0]
    firm = econ.firms[j]
    levels = fd_cert.activities[j].as_array().copy()
    # disposal rays -e_i are the last ell generators
    levels[-econ.ell:] += np.maximum(w, 0.0)
    activities = list(fd_cert.activities)
    activities[j] = ActivityVector(tuple(levels))
    productions = np.array(fd_cert.productions, dtype=float, copy=True)
    productions[j] = production_from_activities(firm, levels, ell=econ.ell)
    _log.info(f"firm {firm.id} disposes {w}")
    return EquilibriumCertificate(
        price=fd_cert.price,
        bundles=fd_cert.bundles,
        activities=tuple(activities),
        productions=productions,
        consumer_ids=fd_cert.consumer_ids,
        firm_ids=fd_cert.firm_ids,
        residuals=dict(fd_cert.residuals),
        free_disposal=False,
    )


class TransferEquilibrium(NamedTuple):
    price: np.ndarray
    transfers: np.ndarray
    allocation: np.ndarray


def harmonic(n):
    return math.fsum(1.0 / s for s in range(1, n + 1))


def hara_transfer_equilibrium(n):
    """
    Free-disposal equilibrium with transfers of the n-consumer Hara economy.

    Good price 1, bad price 0, transfer T(omega) = (2/S)(1/(S omega) - 1) with S the
    n-th harmonic number; every consumer eats 2 + T of the good and none of the bad.

    Returns
    -------
    TransferEquilibrium: price, transfers and allocation in internal order (bad, good).
    """
    omegas = hara_omegas(n)
    s = harmonic(len(omegas))
    transfers = (2.0 / s) * (1.0 / (s * omegas) - 1.0)
    allocation = np.zeros((len(omegas), 2))
    allocation[:, 1] = 2.0 + transfers
    return TransferEquilibrium(price=np.array([0.0, 1.0]), transfers=transfers, allocation=allocation)


##------------------------------------------------------------------------------------
## Pareto improvement search
##------------------------------------------------------------------------------------
_CHUNK = 10000


def _perturbed_productions(econ, cert, rng, count):
    """(count, J, ell) productions with cone activities scaled by U(0.9, 1.1) and polytope weights remixed."""
    ell = econ.ell
    out = np.broadcast_to(cert.productions.reshape(1, -1, ell), (count, len(econ.firms), ell)).copy()
    for j, firm in enumerate(econ.firms):
        gens = firm.generator_matrix(ell)
        if gens.shape[0] == 0:
            continue
        base = cert.activities[j].as_array()
        if firm.kind == CONE_RAYS:
            levels = base * rng.uniform(0.9, 1.1, size=(count, base.size))
        else:
            mix = rng.dirichlet(np.ones(base.size), size=count)
            t = rng.uniform(0.0, 1.0, size=(count, 1))
            levels = (1 - t) * base + t * mix
        out[:, j] = firm.offset_vector(ell) + levels @ gens
    return out


def _candidates(econ, cert, rng, count):
    ell, n = econ.ell, econ.n
    weights = econ.weights
    x = cert.bundles
    productions = _perturbed_productions(econ, cert, rng, count)
    resources = econ.mean_endowment() + productions.sum(axis=1)
    feasible = np.all(resources >= 0, axis=1)

    current = weights @ x
    with np.errstate(divide='ignore', invalid='ignore'):
        fit = np.where(current > 0, np.minimum(1.0, resources / current), 1.0)
    fitted = x[None, :, :] * fit[:, None, :]

    shares = rng.dirichlet(np.ones(n), size=(count, ell)).transpose(0, 2, 1)
    dirichlet = np.clip(resources, 0.0, None)[:, None, :] * shares / weights[None, :, None]
    t = rng.uniform(0.0, 1.0, size=(count, 1, 1))
    keep = rng.uniform(size=(count, 1, ell)) < 0.5
    disposal = np.where(keep, 1.0, rng.uniform(0.0, 1.0, size=(count, 1, ell)))
    bundles = ((1 - t) * fitted + t * dirichlet) * disposal
    bundles = np.minimum(bundles, econ.bounds[None, :, :])
    return bundles, productions, feasible


def search_pareto_improvement(econ, cert, samples, seed=0, ctx=None):
    """
    Look for a feasible allocation that Pareto-dominates the certificate's.

    Candidates rescale the current allocation into the perturbed resources, mix it
    with Dirichlet splits of those resources and dispose a random fraction of some
    commodities, so aggregate consumption never exceeds resources. A return of None
    is evidence of Pareto optimality, not a proof.

    Parameters
    ----------
    econ (Economy): externality-free economy.
    cert (EquilibriumCertificate): allocation to challenge.
    samples (int): number of candidates.
    seed (int): seed of numpy.random.default_rng.

    Returns
    -------
    AllocationPair or None: (improvement, certificate allocation), lowest sample index first.
    """
    if any(c.preference.externality is not None for c in econ.consumers):
        _log.warning("preferences carry externalities; the welfare theorem does not apply")
    if np.any(cert.price < 0):
        _log.warning("certificate price has negative entries; the welfare theorem does not apply")
    if samples <= 0:
        return None
    rng = np.random.default_rng(seed)
    base = utilities_many(econ.consumers, cert.bundles, ctx)
    done = 0
    while done < samples:
        count = min(_CHUNK, samples - done)
        bundles, productions, feasible = _candidates(econ, cert, rng, count)
        u = utilities_many(econ.consumers, bundles, ctx)
        with np.errstate(invalid='ignore'):
            weak = np.all((u >= base - PARETO_MARGIN) | (u == base), axis=1)
            strict = np.any(u > base + PARETO_MARGIN, axis=1)
        hits = np.flatnonzero(weak & strict & feasible)
        for k in hits:
            pair = AllocationPair(bundles[k], cert.bundles, productions[k], cert.productions, ctx, ctx)
            if pair.dominates(econ):
                _log.info(f"Pareto improvement found at sample {done + k}")
                return pair
        done += count
    _log.info(f"no Pareto improvement in {samples} samples")
    return None
