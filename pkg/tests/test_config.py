import pathlib
import sys

script_dir = pathlib.Path(__file__).parent.absolute()
parent_dir = script_dir.parents[0]
sys.path.append(str(parent_dir))

import pytest

from badmarket.config import SolverConfig, load_solver_config
from badmarket.errors import ParseError, SchemaError


def test_defaults_come_from_packaged_yaml():
    cfg = load_solver_config()
    assert cfg == SolverConfig()
    assert cfg.clearing_tol == 1e-9
    assert cfg.optimality_tol == 1e-8
    assert cfg.damping == 0.5
    assert cfg.restarts == 64
    assert cfg.seed == 0


def test_overrides_take_precedence():
    cfg = load_solver_config(restarts=3, seed=None)
    assert cfg.restarts == 3
    assert cfg.seed == 0
    with pytest.raises(SchemaError):
        load_solver_config(step_size=0.1)


def test_user_file(tmp_path):
    path = tmp_path / 'solver.yaml'
    path.write_text("restarts: 5\nclearing_tol: 1.0e-6\n")
    cfg = load_solver_config(path, restarts=7)
    assert cfg.restarts == 7
    assert cfg.clearing_tol == 1e-6
    assert cfg.optimality_tol == 1e-8

    empty = tmp_path / 'empty.yaml'
    empty.write_text("")
    assert load_solver_config(empty) == SolverConfig()


def test_bad_user_files(tmp_path):
    broken = tmp_path / 'broken.yaml'
    broken.write_text("restarts: [1, 2\n")
    with pytest.raises(ParseError):
        load_solver_config(broken)
    listing = tmp_path / 'list.yaml'
    listing.write_text("- restarts\n- seed\n")
    with pytest.raises(SchemaError):
        load_solver_config(listing)


@pytest.mark.parametrize(
    'changes',
    [{'damping': 0.0}, {'damping': 1.5}, {'clearing_tol': 0.0}, {'max_outer_iters': 0}, {'restarts': -1}],
)
def test_invalid_values(changes):
    with pytest.raises(SchemaError):
        SolverConfig(**changes)


def test_tightened():
    cfg = SolverConfig().tightened()
    assert cfg.clearing_tol == pytest.approx(1e-10)
    assert cfg.optimality_tol == pytest.approx(1e-9)
    assert cfg.profit_tol == pytest.approx(1e-10)
    assert cfg.restarts == SolverConfig().restarts
    assert SolverConfig().replace(seed=4).seed == 4
