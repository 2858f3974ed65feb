import numpy as np
import pytest

from lrlandscape.trajectory import Trajectory


def test_append_and_columns():
    tr = Trajectory(("t", "a"))
    tr.append(0.0, 1.0)
    tr.append(1.0, 0.5)
    np.testing.assert_array_equal(tr.t, [0.0, 1.0])
    assert tr.last("a") == 0.5
    assert len(tr) == 2 and "a" in tr and "b" not in tr
    with pytest.raises(ValueError):
        tr.append(1.0)


def test_from_arrays_then_append():
    tr = Trajectory.from_arrays({"t": [0.0, 1.0], "x": [2.0, 3.0]})
    tr.append(2.0, 4.0)
    np.testing.assert_array_equal(tr["x"], [2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        Trajectory.from_arrays({"t": [0.0], "x": [1.0, 2.0]})


def test_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    tr = Trajectory.from_arrays({"t": np.arange(5.0), "v": rng.standard_normal(5) * 1e-7})
    path = tmp_path / "tr.csv"
    tr.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "t,v"
    back = Trajectory.from_csv(path)
    np.testing.assert_array_equal(back["v"], tr["v"])
    assert "e" in path.read_text().splitlines()[1]
