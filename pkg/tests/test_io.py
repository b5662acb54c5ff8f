import json

import numpy as np
import pytest

from radialnodes import io, problem_from_dict, solve


@pytest.fixture(scope="module")
def prob():
    return problem_from_dict({"p": 2, "weight": {"kind": "power", "params": {"N": 3}},
                              "nonlinearity": {"kind": "double_power", "params": {"gamma": 3, "m": 1}}})


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(7)
    xs = np.concatenate([rng.normal(size=200) * 10.0 ** rng.integers(-300, 300, 200), [0.1, 1 / 3, -0.0, 5e-324]])
    for x in xs:
        assert float(io.fmt(x)) == x


def test_trajectory_csv_round_trip(tmp_path, prob):
    tr = solve(prob, 10.0)
    path = io.write_trajectory_csv(tr, tmp_path / "t.csv")
    io.write_events(tr, tmp_path / "t.events.json")
    loaded = io.load_trajectory(path)
    assert np.array_equal(loaded.samples, tr.samples)
    assert loaded.events["nodes"] == tr.nodes
    assert loaded.events["terminal"] == tr.terminal
    assert path.read_text().splitlines()[0] == "r,v,w,E,theta"


def test_stride_resampling(tmp_path, prob):
    tr = solve(prob, 10.0)
    rows = io.trajectory_rows(tr, prob, stride=0.5)
    assert np.allclose(np.diff(rows[:, 0]), 0.5)
    pc = prob.p.pconj
    assert np.allclose(rows[:, 3], np.abs(rows[:, 2]) ** pc / pc + prob.nonlin.F(rows[:, 1]))
    with pytest.raises(ValueError):
        io.trajectory_rows(tr, None, stride=0.5)


def test_load_rejects_wrong_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("r,v,w\n1,2,3\n")
    with pytest.raises(ValueError, match="unexpected header"):
        io.load_trajectory(p)


def test_json_cleaning():
    text = io.dumps({"b": np.float64(1.5), "a": np.arange(3), "c": float("inf"), "d": np.bool_(True)})
    obj = json.loads(text)
    assert obj == {"a": [0, 1, 2], "b": 1.5, "c": "inf", "d": True}
    assert text.index('"a"') < text.index('"b"')


def test_config_digest_invariances():
    a = {"p": 2, "weight": {"kind": "power", "params": {"N": 3}}, "x": [1, 2.5]}
    b = {"x": [1.0, 2.5], "weight": {"params": {"N": 3.0}, "kind": "power"}, "p": 2.0}
    assert io.canonical_json(a) == io.canonical_json(b)
    assert io.config_digest(a) == io.config_digest(b)
    assert io.config_digest(a) != io.config_digest({**a, "p": 3})
    assert len(io.config_digest(a)) == 64


def test_timestamp_from_source_date_epoch(monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    assert io.timestamp() == "1970-01-01T00:00:00Z"
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    assert io.timestamp() == "2023-11-14T22:13:20Z"


def test_manifest_fields(tmp_path):
    cfg = {"p": 2}
    path = io.write_manifest(tmp_path, cfg, "radialnodes solve", {"rel_tol": 1e-10}, [tmp_path / "b.csv", tmp_path / "a.json"])
    m = json.loads(path.read_text())
    assert set(m) == {"config_digest", "tool", "version", "command", "tolerances", "timestamp", "outputs"}
    assert m["outputs"] == ["a.json", "b.csv"] and m["config_digest"] == io.config_digest(cfg)


def test_gnuplot_script():
    s = io.gnuplot_script("trajectory.csv", [1.25, 2.5], "k=2")
    lines = s.splitlines()
    assert lines[0] == "set datafile separator ','"
    assert sum(line.startswith("set arrow") for line in lines) == 2
    assert "from 1.25, graph 0" in s
    assert lines[-1].startswith("plot 'trajectory.csv' using 1:2")
