import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from confgeo.errors import InputError
from confgeo.trajectory import Trajectory


def make(n=3, rows=5, J=True, seed=0):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.1, 1.0, rows))
    x, U, A, Jm = rng.normal(size=(4, rows, n))
    return Trajectory(t, x, U, A, Jm if J else None, "flat-euclidean", "cg3", {"method": "rkf45", "tol": np.float64(1e-10)})


def test_columns_and_header():
    names, data = make().columns()
    assert names == ["t", "x0", "x1", "x2", "U0", "U1", "U2", "A0", "A1", "A2", "J0", "J1", "J2"]
    assert data.shape == (5, 13)
    assert make(J=False).columns()[0][-1] == "A2"


@pytest.mark.parametrize("J", [True, False])
def test_csv_roundtrip_is_exact(J, tmp_path):
    tr = make(J=J)
    path = tmp_path / "traj.csv"
    tr.to_csv(path)
    back = Trajectory.from_csv(path, metric=tr.metric, equation=tr.equation)
    for k in ("t", "x", "U", "A"):
        assert np.array_equal(getattr(back, k), getattr(tr, k))
    assert (back.J is None) == (not J)
    if J:
        assert np.array_equal(back.J, tr.J)
    # from text as well as from a path
    assert np.array_equal(Trajectory.from_csv(tr.to_csv()).x, tr.x)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3))
def test_csv_preserves_doubles(values):
    x = np.array([values])
    tr = Trajectory([0.0], x, x, x)
    assert np.array_equal(Trajectory.from_csv(tr.to_csv()).x, x)


def test_json_roundtrip(tmp_path):
    tr = make()
    path = tmp_path / "traj.json"
    tr.to_json(path)
    d = json.loads(path.read_text())
    assert d["meta"]["tol"] == 1e-10 and d["equation"] == "cg3"
    back = Trajectory.from_dict(d)
    for k in ("t", "x", "U", "A", "J"):
        assert np.array_equal(getattr(back, k), getattr(tr, k))
    assert back.metric == tr.metric and back.meta == d["meta"]


def test_output_is_byte_identical():
    assert make().to_csv() == make().to_csv()
    assert make().to_json() == make().to_json()


def test_states_and_len():
    tr = make()
    assert len(tr) == 5 and tr.dim == 3
    s = tr.state(2)
    assert np.array_equal(s.U, tr.U[2]) and np.array_equal(s.J, tr.J[2])
    assert tr.states().x.shape == (5, 3)


def test_time_must_be_monotone():
    x = np.zeros((3, 3))
    with pytest.raises(InputError):
        Trajectory([0.0, 1.0, 0.5], x, x, x)
    with pytest.raises(InputError):
        Trajectory([0.0, 0.0, 1.0], x, x, x)
    with pytest.raises(InputError):
        Trajectory(np.zeros((0,)), x[:0], x[:0], x[:0])
    # backward runs are allowed
    assert len(Trajectory([1.0, 0.5, 0.0], x, x, x)) == 3


def test_csv_requires_time_column():
    with pytest.raises(InputError):
        Trajectory.from_csv("x0,t\n1,2\n")
