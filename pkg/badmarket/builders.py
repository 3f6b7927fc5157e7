"""Builders for the worked example economies.

Commodities are stored bads first. When an example lists a good first, the builder
permutes it and records ``metadata['display_order']``: entry k is the internal index of
the example's k-th commodity.
"""
import logging

import numpy as np

from badmarket.economy import CommoditySpace, Consumer, Economy, Technology
from badmarket.errors import DomainError
from badmarket.preferences import PreferenceSpec

_log = logging.getLogger(__name__)

# Box bound on the bad in the one-agent economy. Any bound > 1 keeps (1, 1) the only
# exact-clearing equilibrium; a bound of exactly 1 makes every price with p_bad <= -p_good
# an equilibrium.
ONE_AGENT_BAD_BOUND = 2.0

# Hara bad bound per unit of n; the largest equilibrium bad consumption is n / S^n < n.
HARA_BOUND_FACTOR = 10.0

# Consumers in this interval like garbage.
HOARDING_BAND = (0.5, 0.6)


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return int(n)


def to_display_order(econ, vector):
    """Reorder an internal commodity vector (last axis) into the example's order."""
    order = econ.metadata.get('display_order')
    v = np.asarray(vector, dtype=float)
    if order is None:
        return v
    return v[..., list(order)]


def from_display_order(econ, vector):
    """Inverse of :func:`to_display_order`."""
    order = econ.metadata.get('display_order')
    v = np.asarray(vector, dtype=float)
    if order is None:
        return v
    out = np.empty_like(v)
    out[..., list(order)] = v
    return out


def build_one_agent_economy():
    """
    Exchange economy with one consumer, endowment (1, 1) and u = x_good - x_bad.

    Returns
    -------
    Economy: internal order (bad, good).
    """
    commodities = CommoditySpace(ell=2, bad_count=1, labels=('bad', 'good'))
    agent = Consumer(
        id='agent',
        weight=1.0,
        endowment=(1.0, 1.0),
        shares=(),
        bounds=(ONE_AGENT_BAD_BOUND, np.inf),
        preference=PreferenceSpec.linear((-1.0, 1.0)),
    )
    return Economy(
        commodities,
        (agent,),
        firms=(),
        monotone_witnesses={1: ('agent',)},
        metadata={'source': 'one_agent', 'display_order': [1, 0]},
    )


def hara_omegas(n):
    n = _check_n(n)
    return np.arange(1, n + 1) / n


def build_hara_economy(n):
    """
    Exchange economy with consumers omega = s/n, e = (2, 1), u = x_good - omega x_bad^2.

    Parameters
    ----------
    n (int): number of consumers, each of weight 1/n.

    Returns
    -------
    Economy: internal order (bad, good); bad bound 10 n.
    """
    n = _check_n(n)
    commodities = CommoditySpace(ell=2, bad_count=1, labels=('bad', 'good'))
    consumers = []
    for s, omega in enumerate(hara_omegas(n), start=1):
        consumers.append(
            Consumer(
                id=f"w{s}",
                weight=1.0 / n,
                endowment=(1.0, 2.0),
                shares=(),
                bounds=(HARA_BOUND_FACTOR * n, np.inf),
                preference=PreferenceSpec.quadratic_bad(omega, good=1, bad=0),
            )
        )
    ids = tuple(c.id for c in consumers)
    return Economy(
        commodities,
        tuple(consumers),
        firms=(),
        monotone_witnesses={1: ids},
        metadata={'source': 'hara', 'n': n, 'display_order': [1, 0]},
    )


def garbage_omegas(n):
    n = _check_n(n)
    return (np.arange(n) + 0.5) / n


def is_hoarder(omega):
    return HOARDING_BAND[0] < omega < HOARDING_BAND[1]


def build_garbage_economy(n):
    """
    Garbage economy: (garbage, human capital, consumption good).

    Consumers sit at the midpoints of n equal cells of [0, 1]. Each can absorb up to
    omega units of garbage, is endowed with 2 omega units of human capital and owns
    both firms. Firm 1 turns human capital into the good and garbage (ray (1, -1, 1));
    firm 2 uses human capital to remove garbage (ray (-1, -1, 0)).

    Parameters
    ----------
    n (int): number of consumers.

    Returns
    -------
    Economy
    """
    n = _check_n(n)
    commodities = CommoditySpace(ell=3, bad_count=1, labels=('garbage', 'human_capital', 'consumption'))
    consumers = []
    for i, omega in enumerate(garbage_omegas(n), start=1):
        sign = 1.0 if is_hoarder(omega) else -1.0
        consumers.append(
            Consumer(
                id=f"w{i}",
                weight=1.0 / n,
                endowment=(0.0, 2.0 * omega, 0.0),
                shares=(1.0, 1.0),
                bounds=(omega, np.inf, np.inf),
                preference=PreferenceSpec.log_minus_linear(sign, good=2, bad=0),
            )
        )
    firms = (
        Technology.cone([(1.0, -1.0, 1.0)], id='firm1'),
        Technology.cone([(-1.0, -1.0, 0.0)], id='firm2'),
    )
    ids = tuple(c.id for c in consumers)
    # Human capital is an input no consumer values: its witnesses are declared but the
    # validator reports them as unverified.
    return Economy(
        commodities,
        tuple(consumers),
        firms=firms,
        monotone_witnesses={1: ids, 2: ids},
        metadata={'source': 'garbage', 'n': n},
    )
