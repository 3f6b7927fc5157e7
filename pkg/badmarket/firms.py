import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from badmarket.economy import CONE_RAYS, POLYTOPE, ZERO_FIRM
from badmarket.errors import DimensionError, UnboundedSupply

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActivityVector:
    """
    Activity levels of one firm.

    For cone_rays firms one nonnegative level per generator (disposal rays last);
    for polytope firms the convex weights of the vertices; empty for zero firms.
    """

    levels: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'levels', tuple(float(a) for a in self.levels))

    def as_array(self):
        return np.array(self.levels, dtype=float)


def generator_profits(tech, price):
    """p.g for every generator (cone rays) or p.(offset + v) for every vertex."""
    p = np.asarray(price, dtype=float)
    ell = len(p)
    gens = tech.generator_matrix(ell)
    if tech.kind == POLYTOPE:
        return (gens + tech.offset_vector(ell)) @ p
    return gens @ p


def max_profit(tech, price, tol=0.0):
    """
    Supremum of p.y over the production set.

    Parameters
    ----------
    tech (Technology): the firm.
    price (array-like): price vector.
    tol (float): cone generators with p.g <= tol count as unprofitable.

    Returns
    -------
    float: maximum profit, +inf when some cone ray earns a positive profit.
    """
    p = np.asarray(price, dtype=float)
    ell = len(p)
    base = float(p @ tech.offset_vector(ell))
    if tech.kind == ZERO_FIRM:
        return base
    if tech.kind == POLYTOPE:
        return float(np.max(generator_profits(tech, p)))
    if np.any(generator_profits(tech, p) > tol):
        return np.inf
    return base


def supply_active_set(tech, price, tol=1e-9):
    """
    Generators (cone) or vertices (polytope) on which activity is profit maximising.

    Raises
    ------
    UnboundedSupply: maximum profit is +inf.
    """
    p = np.asarray(price, dtype=float)
    if tech.kind == ZERO_FIRM:
        return ()
    profits = generator_profits(tech, p)
    if tech.kind == CONE_RAYS:
        if np.any(profits > tol):
            worst = int(np.argmax(profits))
            raise UnboundedSupply(f"firm {tech.id}: generator {worst} earns {profits[worst]:.6g} > 0")
        return tuple(int(r) for r in np.flatnonzero(np.abs(profits) <= tol))
    best = profits.max()
    return tuple(int(v) for v in np.flatnonzero(profits >= best - tol))


def production_from_activities(tech, activities, ell=None):
    """
    Production vector offset + sum_r a_r g_r (cone) or offset + sum_v a_v v (polytope).

    Raises
    ------
    DimensionError: the number of activity levels does not match the generators.
    """
    a = activities.as_array() if isinstance(activities, ActivityVector) else np.asarray(activities, dtype=float)
    if ell is None:
        if not tech.offset and not tech.generators:
            raise DimensionError(f"firm {tech.id}: pass ell, the technology does not fix it")
        ell = len(tech.offset) if tech.offset else len(tech.generators[0])
    gens = tech.generator_matrix(ell)
    if a.shape != (gens.shape[0],):
        raise DimensionError(f"firm {tech.id}: {a.size} activity levels for {gens.shape[0]} generators")
    offset = tech.offset_vector(ell)
    if gens.shape[0] == 0:
        return offset.copy()
    return offset + a @ gens

