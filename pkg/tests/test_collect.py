import math
import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netbench import collect as C
from netbench.runfile import RunInfo, RunOutput, write_run_output

positive = st.floats(1e-6, 1e6, allow_nan=False)


def record(run_time, instance="g", algorithm="kadabra", c=10, seed=0):
    return RunOutput(RunInfo("abcd1234", "2024-01-01T00:00:00", "h"),
                     {"delta": 0.1, "epsilon": 0.05, "seed": seed, "c": c}, 100,
                     float(run_time), [3, 1], [0.5, 0.25], algorithm, instance)


def frame(rows):
    return pd.DataFrame(rows, columns=["configuration", "instance", "run_time"])


def test_geometric_mean_examples():
    assert C.geometric_mean([4, 9]) == pytest.approx(6)
    assert C.geometric_mean([7.25]) == pytest.approx(7.25)
    a, b = np.array([2, 8]), np.array([1, 2])
    assert C.geometric_mean(a / b) == pytest.approx(math.sqrt(8))
    assert C.geometric_mean(a) / C.geometric_mean(b) == pytest.approx(2.8284271247461903)


@given(st.lists(st.tuples(positive, positive), min_size=1, max_size=50))
def test_geometric_mean_ratio_identity(pairs):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    lhs = C.geometric_mean(a / b)
    rhs = C.geometric_mean(a) / C.geometric_mean(b)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_geometric_mean_huge_values_do_not_overflow():
    assert C.geometric_mean([1e300, 1e300, 1e300]) == pytest.approx(1e300)


@pytest.mark.parametrize("bad", [[], [1, 0], [2, -1], [np.nan]])
def test_geometric_mean_errors(bad):
    with pytest.raises(ValueError):
        C.geometric_mean(bad)


def test_speedup_examples():
    f = frame([("a", "g1", 1), ("a", "g1", 1), ("b", "g1", 3), ("b", "g1", 5)])
    t = C.speedup_table(f, "a", "b")
    assert t.ratios["g1"] == 4 and t.geometric_mean == pytest.approx(4)
    rows = []
    for inst, r in (("x", 2), ("y", 8), ("z", 4)):
        rows += [("a", inst, 1.0), ("b", inst, r)]
    assert C.speedup_table(frame(rows), "a", "b").geometric_mean == pytest.approx(4)


def test_speedup_identical_algorithms():
    rows = [(c, i, t) for c in ("a", "b") for i, t in (("x", 1.5), ("y", 7.0))]
    t = C.speedup_table(frame(rows), "a", "b")
    assert list(t.ratios) == [1.0, 1.0] and t.geometric_mean == 1.0


def test_speedup_missing_side_reported():
    f = frame([("a", "x", 1), ("b", "x", 2), ("a", "y", 1), ("b", "z", 1)])
    t = C.speedup_table(f, "a", "b")
    assert list(t.ratios.index) == ["x"]
    assert t.missing == ["y", "z"]


def test_speedup_no_shared_instance():
    with pytest.raises(ValueError):
        C.speedup_table(frame([("a", "x", 1), ("b", "y", 1)]), "a", "b")


def test_speedup_sorted_by_nodes():
    f = frame([(c, i, 1.0) for c in ("a", "b") for i in ("big", "small")])
    f["nodes"] = f["instance"].map({"big": 1000, "small": 10})
    assert list(C.speedup_table(f, "a", "b").ratios.index) == ["small", "big"]


@given(st.lists(st.tuples(positive, positive), min_size=1, max_size=10))
def test_speedup_antisymmetric(pairs):
    rows = []
    for k, (ta, tb) in enumerate(pairs):
        rows += [("a", f"i{k}", ta), ("b", f"i{k}", tb)]
    ab = C.speedup_table(frame(rows), "a", "b")
    ba = C.speedup_table(frame(rows), "b", "a")
    np.testing.assert_allclose(ab.ratios.values * ba.ratios.values, 1.0, rtol=1e-12)
    assert ab.geometric_mean * ba.geometric_mean == pytest.approx(1.0, rel=1e-12)


def test_speedup_skew_warning():
    times = [1, 1, 1, 1, 1, 1, 1, 1, 1, 50]
    rows = [("a", "x", t) for t in times] + [("b", "x", 2.0)] * 3
    with pytest.warns(UserWarning, match="skewed"):
        C.speedup_table(frame(rows), "a", "b")
    rows = [("a", "x", t) for t in (1, 2, 3)] + [("b", "x", 2.0)] * 3
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        C.speedup_table(frame(rows), "a", "b")


def test_standard_error_examples():
    assert C.standard_error([2, 4, 6]) == pytest.approx(2 / math.sqrt(3))
    assert C.standard_error([5, 5, 5]) == 0
    with pytest.raises(ValueError):
        C.standard_error([1])


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30), st.floats(0.01, 100))
def test_standard_error_homogeneous(values, lam):
    assert C.standard_error(np.array(values) * lam) == pytest.approx(
        lam * C.standard_error(values), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("var,target,k", [(4, 1, 4), (4, 2, 1), (1, 0.1, 100), (10, 1, 10),
                                          (10.5, 1, 11)])
def test_required_repetitions(var, target, k):
    assert C.required_repetitions(var, target) == k
    assert math.sqrt(var / k) <= target
    if k > 1:
        assert math.sqrt(var / (k - 1)) > target


@pytest.mark.parametrize("var,target", [(0, 1), (1, 0), (-1, 1)])
def test_required_repetitions_errors(var, target):
    with pytest.raises(ValueError):
        C.required_repetitions(var, target)


def test_split_examples():
    plan = C.stratified_split({"a1": "A", "a2": "A", "b1": "B", "b2": "B"}, 1, seed=0)
    assert len(plan.tuning) == 2
    assert {n[0] for n in plan.tuning} == {"a", "b"}
    whole = C.stratified_split({"a1": "A", "a2": "A", "b1": "B"}, per_class=5)
    assert whole.tuning == {"a1", "a2", "b1"} and not whole.evaluation
    with pytest.raises(ValueError):
        C.stratified_split({}, 1)


def test_split_min_class_size_keeps_singletons_for_evaluation():
    classes = {"a1": "A", "a2": "A", "solo": "S"}
    plan = C.stratified_split(classes, 1, seed=0, min_class_size=2)
    assert "solo" in plan.evaluation and len(plan.tuning) == 1


@given(st.dictionaries(st.text("abcdef", min_size=1, max_size=4), st.sampled_from("XYZ"),
                       min_size=1), st.integers(1, 3), st.integers(0, 100))
def test_split_disjoint_exhaustive_deterministic(classes, per_class, seed):
    plan = C.stratified_split(classes, per_class, seed)
    assert not plan.tuning & plan.evaluation
    assert plan.tuning | plan.evaluation == set(classes)
    for label in set(classes.values()):
        members = {n for n, c in classes.items() if c == label}
        assert len(members & plan.tuning) == min(per_class, len(members))
    assert plan == C.stratified_split(classes, per_class, seed)


def test_split_is_uniform_within_class():
    classes = {f"n{i}": "A" for i in range(4)}
    counts = {n: 0 for n in classes}
    for seed in range(2000):
        (picked,) = C.stratified_split(classes, 1, seed).tuning
        counts[picked] += 1
    assert all(abs(c - 500) < 100 for c in counts.values())


def tuning_frame(times):
    rows = []
    for c, per_inst in times.items():
        for inst, ts in per_inst.items():
            rows += [{"instance": inst, "c": c, "run_time": t} for t in ts]
    return pd.DataFrame(rows)


def test_tune_parameter_examples():
    f = tuning_frame({10: {"g": [200.0, 200.0]}, 4375: {"g": [140.0, 144.0]}})
    res = C.tune_parameter([10, 4375], f)
    assert res.best == 4375 and res.mean_times[4375] == pytest.approx(142)
    assert C.tune_parameter([10], f).best == 10
    tie = tuning_frame({5: {"g": [3.0]}, 2: {"g": [3.0]}})
    assert C.tune_parameter([5, 2], tie).best == 2


def test_tune_parameter_names_gaps():
    f = tuning_frame({10: {"g": [1.0], "h": [1.0]}, 20: {"g": [1.0]}})
    with pytest.raises(ValueError, match="c=20 on h"):
        C.tune_parameter([10, 20], f)
    with pytest.raises(ValueError):
        C.tune_parameter([], f)


def write_runs(root, layout):
    for (conf, inst, rep), text in layout.items():
        p = root / conf / inst / f"rep{rep}.yml"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)


def test_collect_classifies_every_file(tmp_path):
    layout = {(conf, inst, rep): write_run_output(record(1.0 + rep, inst, conf))
              for conf in ("kadabra", "rk") for inst in ("g1", "g2") for rep in range(2)}
    layout[("rk", "g2", 1)] = "iterations: [broken\n"
    write_runs(tmp_path, layout)
    (tmp_path / "rk" / "g1" / "rep1.yml").unlink()
    (tmp_path / "rk" / "g1" / "rep1.yml.failed").write_text("{}")
    (tmp_path / "rk" / "g1" / "rep2.yml.running").write_text("{}")
    (tmp_path / "notes.txt").write_text("hello")
    rep = C.collect_successful(tmp_path)
    assert len(rep.frame) == 6
    assert rep.failed == ["rk/g1/rep1.yml.failed"]
    assert [r for r, _ in rep.rejected] == ["notes.txt", "rk/g2/rep1.yml"]
    assert rep.in_progress == ["rk/g1/rep2.yml.running"]
    n_files = sum(1 for p in tmp_path.rglob("*") if p.is_file())
    assert rep.files_seen == n_files
    assert len(rep.frame) + len(rep.failed) + len(rep.rejected) + len(rep.in_progress) == n_files
    assert not rep.frame.duplicated(["configuration", "instance", "repetition"]).any()
    assert list(rep.frame.columns[:len(C.COLUMNS)]) == list(C.COLUMNS)


def test_collect_raises_without_success(tmp_path):
    write_runs(tmp_path, {("a", "g", 0): "garbage: ["})
    with pytest.raises(ValueError, match="no successful runs"):
        C.collect_successful(tmp_path)


def test_collect_joins_attributes_and_csv_round_trip(tmp_path):
    write_runs(tmp_path / "out", {("a", "g", r): write_run_output(record(0.1 * (r + 1) / 3, "g"))
                                  for r in range(3)})
    attrs = pd.DataFrame([{"instance": "g", "nodes": 10, "edges": 20, "diameter": 3}])
    rep = C.collect_successful(tmp_path / "out", attributes=attrs)
    assert list(rep.frame["nodes"]) == [10, 10, 10]
    C.write_results_csv(rep.frame, tmp_path / "runs.csv")
    back = C.read_results_csv(tmp_path / "runs.csv")
    assert list(back["run_time"]) == list(rep.frame["run_time"])
    assert back["topk_scores"][0] == "0.5 0.25"
