"""Solver configuration.

Defaults live in ``config/solver_defaults.yaml``; a user YAML file and keyword
overrides are layered on top by :func:`load_solver_config`.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional

import yaml

from badmarket import vocabularies
from badmarket.errors import ParseError, SchemaError

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    clearing_tol: float = vocabularies.solver_defaults['clearing_tol']
    optimality_tol: float = vocabularies.solver_defaults['optimality_tol']
    profit_tol: float = vocabularies.solver_defaults['profit_tol']
    strict_margin: float = vocabularies.solver_defaults['strict_margin']
    damping: float = vocabularies.solver_defaults['damping']
    max_outer_iters: int = vocabularies.solver_defaults['max_outer_iters']
    max_inner_iters: int = vocabularies.solver_defaults['max_inner_iters']
    restarts: int = vocabularies.solver_defaults['restarts']
    seed: int = vocabularies.solver_defaults['seed']
    jacobian_step: float = vocabularies.solver_defaults['jacobian_step']
    fallback_iters: int = vocabularies.solver_defaults['fallback_iters']
    batch_size: int = vocabularies.solver_defaults['batch_size']
    scan_resolution: int = vocabularies.solver_defaults['scan_resolution']
    scan_seeds: int = vocabularies.solver_defaults['scan_seeds']

    def __post_init__(self):
        for name in ('clearing_tol', 'optimality_tol', 'profit_tol', 'strict_margin', 'jacobian_step'):
            if not getattr(self, name) > 0:
                raise SchemaError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not 0 < self.damping <= 1:
            raise SchemaError(f"damping must lie in (0, 1], got {self.damping!r}")
        for name in ('max_outer_iters', 'max_inner_iters', 'fallback_iters', 'batch_size'):
            if getattr(self, name) < 1:
                raise SchemaError(f"{name} must be >= 1")
        for name in ('restarts', 'scan_resolution', 'scan_seeds'):
            if getattr(self, name) < 0:
                raise SchemaError(f"{name} must be >= 0")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def tightened(self, factor=10.0):
        """Return a copy with every tolerance divided by ``factor``."""
        return self.replace(
            clearing_tol=self.clearing_tol / factor,
            optimality_tol=self.optimality_tol / factor,
            profit_tol=self.profit_tol / factor,
        )


def load_solver_config(path: Optional[str] = None, **overrides) -> SolverConfig:
    """
    Build a SolverConfig from the packaged defaults, an optional YAML file and overrides.

    Parameters
    ----------
    path (str, optional): YAML file with a mapping of SolverConfig fields.
    **overrides: field values taking precedence over the file. None values are ignored.

    Returns
    -------
    SolverConfig
    """
    values = dict(vocabularies.solver_defaults)
    if path is not None:
        try:
            with open(path, 'r') as file:
                user = yaml.safe_load(file) or {}
        except yaml.YAMLError as e:
            raise ParseError(f"cannot parse solver config {path}: {e}") from e
        if not isinstance(user, dict):
            raise SchemaError(f"solver config {path} must be a mapping")
        values.update(user)
    values.update({k: v for k, v in overrides.items() if v is not None})

    known = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise SchemaError(f"unknown solver config keys: {', '.join(unknown)}")
    _log.debug(f"solver config: {values}")
    return SolverConfig(**values)
