import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gldual.config import TASKS, field_from_spec, load_config, parse_config
from gldual.errors import MissingRequired, ParseError, UnknownKey
from gldual.grid import GridSpec, build_grid

VALID = "dim=1\nextent=1\nnodes=31\ngamma=0.05\nalpha=1\nbeta=1\nK=10\neps=0.1\nf=const:0.5\ntask=verify-thm1"


def test_valid_config():
    s = parse_config(VALID)
    assert s.task == "verify-thm1" and s.grid == GridSpec(1, 1.0, 31)
    assert s.params.gamma == 0.05 and np.all(s.params.f == 0.5)
    assert (s.tol, s.maxit, s.seed, s.radius, s.nsamples) == (1e-10, 200, 42, None, 100)


def test_comments_and_blank_lines():
    s = parse_config("# header\n\ngamma=1  # trailing\nalpha=2\nbeta=3\n")
    assert (s.params.gamma, s.params.alpha, s.params.beta) == (1.0, 2.0, 3.0)
    assert s.task == "solve-primal"


@pytest.mark.parametrize("drop", ["gamma", "alpha", "beta"])
def test_missing_required(drop):
    text = "\n".join(l for l in VALID.splitlines() if not l.startswith(drop + "="))
    with pytest.raises(MissingRequired):
        parse_config(text)


@pytest.mark.parametrize("text,exc", [
    (VALID.replace("verify-thm1", "frobnicate"), UnknownKey),
    (VALID + "\ncolour=blue", UnknownKey),
    (VALID + "\nno equals sign", ParseError),
    (VALID + "\ngamma=2", ParseError),
    (VALID.replace("nodes=31", "nodes=three"), ParseError),
    (VALID.replace("nodes=31", "nodes=0"), ParseError),
    (VALID.replace("alpha=1", "alpha=-1"), ParseError),
    (VALID + "\ntol=0", ParseError),
    (VALID + "\nradius=big", ParseError),
    (VALID.replace("const:0.5", "wave:1"), ParseError),
    (VALID.replace("verify-thm1", "sweep"), MissingRequired),
    (VALID.replace("verify-thm1", "sweep") + "\nsweep_param=nodes\nsweep_values=1", UnknownKey),
])
def test_bad_configs(text, exc):
    with pytest.raises(exc):
        parse_config(text)


def test_parse_error_carries_line():
    with pytest.raises(ParseError) as e:
        parse_config("gamma=1\nalpha=1\nbeta=x\n")
    assert e.value.line == 3


def test_all_tasks_accepted():
    for task in TASKS:
        extra = "\nsweep_values=1,2" if task == "sweep" else ""
        assert parse_config(VALID.replace("verify-thm1", task) + extra).task == task


def test_field_specs(tmp_path):
    g = build_grid(GridSpec(2, 2.0, 3))
    np.testing.assert_array_equal(field_from_spec("const:1.5", g), 1.5)
    s = field_from_spec("sin:2", g)
    x = g.coordinates()
    np.testing.assert_allclose(s, 2 * np.sin(np.pi * x[0] / 2) * np.sin(np.pi * x[1] / 2))
    (tmp_path / "f.txt").write_text("\n".join(str(i) for i in range(9)))
    np.testing.assert_array_equal(field_from_spec("file:f.txt", g, tmp_path), np.arange(9))
    (tmp_path / "short.txt").write_text("1\n2\n")
    with pytest.raises(ValueError):
        field_from_spec("file:short.txt", g, tmp_path)


def test_load_config_resolves_relative_file(tmp_path):
    (tmp_path / "f.txt").write_text("0.1\n0.2\n0.3\n")
    cfg = tmp_path / "a.cfg"
    cfg.write_text("nodes=3\ngamma=1\nalpha=1\nbeta=1\nf=file:f.txt\n")
    np.testing.assert_allclose(load_config(cfg).params.f, [0.1, 0.2, 0.3])


def test_with_sweep_and_seed():
    s = parse_config(VALID).with_sweep("K", [1, 2]).with_seed(7)
    assert s.task == "sweep" and s.sweep_task == "verify-thm1" and s.sweep_values == (1.0, 2.0)
    assert s.seed == 7 and s.echo()["seed"] == 7 and s.echo()["sweep_values"] == "1,2"


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100), st.integers(1, 9))
def test_round_trip_values(gamma, alpha, beta, nodes):
    s = parse_config(f"gamma={gamma!r}\nalpha={alpha!r}\nbeta={beta!r}\nnodes={nodes}")
    assert (s.params.gamma, s.params.alpha, s.params.beta, s.grid.nodes_per_axis) == (gamma, alpha, beta, nodes)
