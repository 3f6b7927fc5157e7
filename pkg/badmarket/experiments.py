"""Closed-form oracles, family sweeps and the uniform-integrability diagnostic.

Oracles return quantities in the internal commodity order (bads first).
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from badmarket import vocabularies
from badmarket.builders import build_garbage_economy, build_hara_economy, hara_omegas
from badmarket.config import SolverConfig
from badmarket.errors import BadmarketError, DomainError, NoConvergence
from badmarket.solver import EquilibriumCertificate, solve_equilibrium, verify_equilibrium
from badmarket.utilities import _worker_count

_log = logging.getLogger(__name__)

HARA = 'hara'
GARBAGE = 'garbage'
BUILDERS = {HARA: build_hara_economy, GARBAGE: build_garbage_economy}


def harmonic_number(n):
    """S^n = sum_{s<=n} 1/s by compensated summation."""
    return math.fsum(1.0 / s for s in range(1, n + 1))


##------------------------------------------------------------------------------------
## Hara economy
##------------------------------------------------------------------------------------
def hara_oracle(n):
    """
    Exact equilibrium of build_hara_economy(n).

    The unnormalised price is (-2/S, 1) and consumer omega = s/n holds
    (1/(S omega), 2 + (2/S)(1/(S omega) - 1)), with S the n-th harmonic number.

    Returns
    -------
    EquilibriumCertificate

    Raises
    ------
    DomainError: n < 1.
    """
    omegas = hara_omegas(n)
    n = len(omegas)
    s = harmonic_number(n)
    bad = 1.0 / (s * omegas)
    bundles = np.column_stack([bad, 2.0 + (2.0 / s) * (bad - 1.0)])
    price = np.array([-2.0 / s, 1.0])
    price = price / np.abs(price).sum()
    return EquilibriumCertificate(
        price=price,
        bundles=bundles,
        activities=(),
        productions=np.zeros((0, 2)),
        consumer_ids=tuple(f"w{k}" for k in range(1, n + 1)),
        firm_ids=(),
        residuals={'source': 'hara_oracle'},
    )


def ui_cutoff(n):
    """a^n = min(n, ceil(n / ln n)), the number of heaviest bad consumers tracked."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n == 1:
        return 1
    # ceil(n / ln n) exceeds n for n = 2
    return min(int(n), int(math.ceil(n / math.log(n))))


def uniform_integrability_share(cert, fraction, weights=None, bad=0):
    """
    Share of total bad consumption held by the heaviest consumers.

    Consumers are sorted by consumption of commodity ``bad``, largest first; the result
    is the share of the weighted total held by the first ``fraction`` of total weight,
    taking the boundary consumer partially.

    Parameters
    ----------
    cert (EquilibriumCertificate): allocation.
    fraction (float): in (0, 1].
    weights (array-like, optional): consumer weights, uniform by default.
    bad (int): commodity index.

    Returns
    -------
    float: in [0, 1].

    Raises
    ------
    DomainError: fraction outside (0, 1].
    """
    if not 0 < fraction <= 1:
        raise DomainError(f"fraction must lie in (0, 1], got {fraction}")
    x = np.asarray(cert.bundles, dtype=float)[:, bad]
    w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float)
    order = np.argsort(-x, kind='stable')
    x, w = x[order], w[order]
    held = w * x
    total = held.sum()
    if total <= 0:
        _log.warning("no bad consumption; the share is reported as 0")
        return 0.0
    target = fraction * w.sum()
    before = np.concatenate([[0.0], np.cumsum(w)[:-1]])
    with np.errstate(divide='ignore', invalid='ignore'):
        taken = np.where(w > 0, np.clip((target - before) / w, 0.0, 1.0), 0.0)
    return float(min(1.0, (taken * held).sum() / total))


##------------------------------------------------------------------------------------
## Garbage economy
##------------------------------------------------------------------------------------
@dataclass(frozen=True)
class GarbageReference:
    """
    Continuum equilibrium of the garbage economy on omega in [0, 1].

    Demand pieces, as (garbage, human capital, consumption):

    - omega in [0, 1/3]: (omega, 0, 3 omega/2)
    - omega in (1/3, 1/2]: (1 - 2 omega, 0, 1/2)
    - omega in (1/2, 3/5): (omega, 0, 3 omega/2), the garbage hoarders
    - omega in [3/5, 1]: (0, 0, omega)
    """

    price: tuple = (-0.25, 0.25, 0.5)
    aggregates: tuple = (83 / 600, 0.0, 683 / 1200)
    activities: tuple = (683 / 1200, 517 / 1200)
    productions: tuple = ((683 / 1200, -683 / 1200, 683 / 1200), (-517 / 1200, -517 / 1200, 0.0))
    breakpoints: tuple = (1 / 3, 1 / 2, 3 / 5)

    def demand(self, omega):
        """Bundles for an array of omega values; shape (m, 3)."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        out = np.zeros((w.size, 3))
        low = w <= 1 / 3
        mid = (w > 1 / 3) & (w <= 1 / 2)
        hoard = (w > 1 / 2) & (w < 3 / 5)
        high = w >= 3 / 5
        out[low | hoard, 0] = w[low | hoard]
        out[low | hoard, 2] = 1.5 * w[low | hoard]
        out[mid, 0] = 1.0 - 2.0 * w[mid]
        out[mid, 2] = 0.5
        out[high, 2] = w[high]
        return out

    def quadrature(self, points):
        """Aggregate demand by the midpoint rule with ``points`` equal cells."""
        omega = (np.arange(points) + 0.5) / points
        return self.demand(omega).mean(axis=0)


def garbage_oracle():
    return GarbageReference()


# Jumps and slope changes of (garbage, consumption) demand at each breakpoint.
_GARBAGE_JUMPS = {1 / 3: (0.0, 0.0), 1 / 2: (0.5, 0.25), 3 / 5: (0.6, 0.3)}
_GARBAGE_KINKS = {1 / 3: (3.0, 1.5), 1 / 2: (3.0, 1.5), 3 / 5: (1.0, 0.5)}


def garbage_discretization_allowance(n):
    """
    Bound on |midpoint aggregate - continuum aggregate| for n cells.

    A breakpoint inside a cell contributes jump * h, plus slope change * h^2 / 8;
    breakpoints on cell boundaries contribute nothing.

    Returns
    -------
    numpy.ndarray: allowance per commodity (garbage, human capital, consumption).
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    h = 1.0 / n
    out = np.zeros(3)
    for b in GarbageReference().breakpoints:
        cells = b * n
        if abs(cells - round(cells)) < 1e-9:
            continue
        jump = np.array(_GARBAGE_JUMPS[b])
        kink = np.array(_GARBAGE_KINKS[b])
        out[[0, 2]] += jump * h + kink * h * h / 8.0
    return out


##------------------------------------------------------------------------------------
## Family sweeps
##------------------------------------------------------------------------------------
@dataclass
class FamilyRecord:
    n: int
    certificate: Optional[EquilibriumCertificate]
    oracle_gap: float
    ui_share: float
    runtime_ms: float
    converged: bool = True
    message: str = ''


def _hara_gap(cert, n):
    oracle = hara_oracle(n)
    return float(max(np.max(np.abs(cert.price - oracle.price)), np.max(np.abs(cert.bundles - oracle.bundles))))


def _garbage_gap(econ, cert, n):
    """Price gap plus aggregate and activity gaps beyond the discretization allowance."""
    ref = garbage_oracle()
    allowance = garbage_discretization_allowance(n)
    price_gap = float(np.max(np.abs(cert.price - np.array(ref.price))))
    aggregate = econ.weights @ cert.bundles
    aggregate_gap = np.maximum(np.abs(aggregate - np.array(ref.aggregates)) - allowance, 0.0)
    # firm 1 runs at the consumption aggregate, firm 2 at consumption minus garbage
    levels = np.concatenate([a.as_array() for a in cert.activities])
    activity_allowance = np.array([allowance[2], allowance[0] + allowance[2]])
    activity_gap = np.maximum(np.abs(levels - np.array(ref.activities)) - activity_allowance, 0.0)
    return max(price_gap, float(aggregate_gap.max()), float(activity_gap.max()))


def _failed(n, cert, start, message):
    runtime = 1000.0 * (time.perf_counter() - start)
    return FamilyRecord(n, cert, np.inf, np.nan, runtime, converged=False, message=message)


def _run_member(family, n, cfg):
    start = time.perf_counter()
    econ = BUILDERS[family](n)
    try:
        cert = solve_equilibrium(econ, cfg)
    except NoConvergence as e:
        _log.info(f"{family} n={n}: {e}")
        return _failed(n, None, start, str(e))
    except BadmarketError as e:
        _log.warning(f"{family} n={n}: solve failed: {e}")
        return _failed(n, None, start, f"{type(e).__name__}: {e}")
    try:
        report = verify_equilibrium(econ, cert, cfg=cfg)
        if family == HARA:
            gap = _hara_gap(cert, n)
        else:
            gap = _garbage_gap(econ, cert, n)
        share = uniform_integrability_share(cert, ui_cutoff(n) / n, weights=econ.weights)
    except BadmarketError as e:
        _log.warning(f"{family} n={n}: diagnostics failed: {e}")
        return _failed(n, cert, start, f"{type(e).__name__}: {e}")
    runtime = 1000.0 * (time.perf_counter() - start)
    message = '' if report.passed else 'verification failed'
    return FamilyRecord(n, cert, gap, share, runtime, converged=report.passed, message=message)


def run_family(builder, ns, cfg=None, progress=False):
    """
    Build, solve, verify and compare each member of a family against its oracle.

    Parameters
    ----------
    builder (str): 'hara' or 'garbage'.
    ns (list of int): instance sizes.
    cfg (SolverConfig, optional): solver settings.
    progress (bool): show a tqdm progress bar.

    Returns
    -------
    list of FamilyRecord: ordered by n; solver failures are recorded, not raised.
    """
    if builder not in BUILDERS:
        raise DomainError(f"unknown family {builder!r}, expected one of {sorted(BUILDERS)}")
    ns = [int(n) for n in ns]
    if not ns:
        raise DomainError("ns must be nonempty")
    cfg = cfg or SolverConfig()
    workers = min(_worker_count(), len(ns))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = pool.map(lambda n: _run_member(builder, n, cfg), ns)
        records = list(tqdm(futures, total=len(ns), desc=f"{builder} family", disable=not progress))
    return sorted(records, key=lambda r: r.n)


def records_to_frame(records, timing=False):
    """
    One row per record: n, price components, diagnostics and residual norms.
    """
    ell = max((len(r.certificate.price) for r in records if r.certificate is not None), default=0)
    columns = list(vocabularies.family_csv_columns)
    price_columns = [f"p{k}" for k in range(ell)]
    columns = columns[:1] + price_columns + columns[1:]
    rows = []
    for r in records:
        row = {'n': r.n, 'converged': r.converged, 'oracle_gap': r.oracle_gap, 'ui_share': r.ui_share}
        row['runtime_ms'] = r.runtime_ms if timing else None
        row['message'] = r.message
        if r.certificate is not None:
            res = r.certificate.residuals
            row.update({f"p{k}": v for k, v in enumerate(r.certificate.price)})
            clearing = res.get('clearing', [])
            row['clearing_residual'] = float(np.max(np.abs(clearing))) if len(clearing) else 0.0
            for key in ('worst_budget_violation', 'worst_optimality_gap', 'worst_profit_gap'):
                row[key] = res.get(key)
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def emit_csv(records, path, timing=False):
    """
    Write family records as CSV with 17 significant digits.

    runtime_ms is left empty unless ``timing`` is set, so reruns are byte-identical.
    """
    frame = records_to_frame(records, timing=timing)
    frame.to_csv(path, index=False, float_format='%.17g')
    return path


def garbage_reference_frame(reference=None):
    """The continuum reference as a small table (used by the oracle subcommand)."""
    ref = reference or garbage_oracle()
    labels = ('garbage', 'human_capital', 'consumption')
    frame = pd.DataFrame(
        {
            'price': ref.price,
            'aggregate': ref.aggregates,
            'firm1': ref.productions[0],
            'firm2': ref.productions[1],
        },
        index=pd.Index(labels, name='commodity'),
    )
    return frame
