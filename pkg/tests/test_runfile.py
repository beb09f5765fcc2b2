import math
import subprocess
from dataclasses import replace
from pathlib import Path

import pytest
import yaml
from hypothesis import given

from netbench import runfile
from netbench.runfile import RunfileError, RunInfo, RunOutput
from strategies import run_records

DATA = Path(__file__).parent / "data"


def valid_record(**kw):
    base = dict(
        info=RunInfo("fef6c5ca", "2018-09-14T12:21:55.497368", "erle"),
        parameters={"delta": 0.1, "epsilon": 0.015, "seed": 0, "c": 10},
        iterations=12598, run_time=1.6034371852874756, topk_nodes=[156, 45, 596],
        topk_scores=[0.0651690744562629, 0.04643594221304969, 0.0349261787585331],
        algorithm="kadabra", instance="advogato",
    )
    base.update(kw)
    return RunOutput(**base)


@given(run_records())
def test_round_trip(record):
    assert runfile.parse_run_output(runfile.write_run_output(record)) == record


@given(run_records())
def test_round_trip_preserves_reals_bitwise(record):
    back = runfile.parse_run_output(runfile.write_run_output(record))
    assert math.copysign(1, back.run_time) == math.copysign(1, record.run_time)
    assert back.run_time.hex() == record.run_time.hex()
    assert [s.hex() for s in back.topk_scores] == [float(s).hex() for s in record.topk_scores]


def test_example_record_parses():
    r = runfile.parse_run_output((DATA / "example_record.yml").read_text())
    assert r.iterations == 12598
    assert r.parameters["seed"] == 0
    assert r.parameters["epsilon"] == 0.015
    assert r.topk_nodes == [156, 45, 596]
    assert r.run_time == 1.6034371852874756
    assert r.info.commit == "fef6c5ca"


def test_written_layout():
    text = runfile.write_run_output(valid_record())
    assert "iterations: 12598\n" in text
    assert "  epsilon: 0.015\n" in text
    assert "run_time: 1.6034371852874756\n" in text
    keys = [line.split(":")[0] for line in text.splitlines() if not line.startswith((" ", "-"))]
    assert keys == sorted(keys)


def test_empty_topk_accepted():
    r = valid_record(topk_nodes=[], topk_scores=[])
    assert "topk_nodes: []" in runfile.write_run_output(r)
    assert runfile.parse_run_output(runfile.write_run_output(r)) == r


@pytest.mark.parametrize("key", runfile._REQUIRED)
def test_missing_key_named(key):
    doc = yaml.safe_load(runfile.write_run_output(valid_record()))
    del doc[key]
    with pytest.raises(RunfileError) as exc:
        runfile.parse_run_output(yaml.safe_dump(doc))
    assert exc.value.kind == "missing" and exc.value.key == key
    assert key in str(exc.value)


@pytest.mark.parametrize("key", ["commit", "date", "host"])
def test_missing_info_key_named(key):
    doc = yaml.safe_load(runfile.write_run_output(valid_record()))
    del doc["info"][key]
    with pytest.raises(RunfileError) as exc:
        runfile.parse_run_output(yaml.safe_dump(doc))
    assert exc.value.key == f"info.{key}"


@pytest.mark.parametrize("key", ["delta", "epsilon", "seed"])
def test_missing_parameter_named(key):
    doc = yaml.safe_load(runfile.write_run_output(valid_record()))
    del doc["parameters"][key]
    with pytest.raises(RunfileError) as exc:
        runfile.parse_run_output(yaml.safe_dump(doc))
    assert exc.value.key == f"parameters.{key}"


@pytest.mark.parametrize("change,kind,key", [
    ({"topk_scores": [0.1, 0.2, 0.05]}, "invariant", "topk_scores"),
    ({"topk_scores": [0.3, 0.2]}, "invariant", "topk_scores"),
    ({"run_time": -1.0}, "invariant", "run_time"),
    ({"run_time": 2}, "type", "run_time"),
    ({"run_time": float("nan")}, "type", "run_time"),
    ({"iterations": 0}, "invariant", "iterations"),
    ({"iterations": 1.5}, "type", "iterations"),
    ({"info": RunInfo("xyz", "2018-09-14", "h")}, "invariant", "info.commit"),
    ({"info": RunInfo("abcd", "yesterday", "h")}, "invariant", "info.date"),
    ({"parameters": {"delta": 0.1, "epsilon": "a", "seed": 0}}, "type", "parameters.epsilon"),
    ({"parameters": {"delta": 0.1, "epsilon": 0.1, "seed": 0.5}}, "type", "parameters.seed"),
])
def test_invalid_records_rejected_on_write(change, kind, key):
    with pytest.raises(RunfileError) as exc:
        runfile.write_run_output(valid_record(**change))
    assert (exc.value.kind, exc.value.key) == (kind, key)


def test_brandes_may_have_zero_iterations():
    r = valid_record(algorithm="brandes", iterations=0)
    assert runfile.parse_run_output(runfile.write_run_output(r)).iterations == 0


def test_scores_out_of_order_rejected_on_parse():
    text = runfile.write_run_output(valid_record()).replace("0.0651690744562629", "0.01")
    with pytest.raises(RunfileError) as exc:
        runfile.parse_run_output(text)
    assert exc.value.kind == "invariant"


@pytest.mark.parametrize("cut", [10, 40, 120, 200])
def test_truncated_file_rejected(cut):
    text = runfile.write_run_output(valid_record())
    with pytest.raises(RunfileError):
        runfile.parse_run_output(text[:cut])


@pytest.mark.parametrize("text", ["", "- a\n- b\n", "key: [unclosed\n", "\tbad"])
def test_garbage_rejected(text):
    with pytest.raises(RunfileError):
        runfile.parse_run_output(text)


def test_unknown_key_rejected():
    text = runfile.write_run_output(valid_record()) + "surprise: 1\n"
    with pytest.raises(RunfileError, match="surprise"):
        runfile.parse_run_output(text)


def test_numeric_short_commit_loads_as_string():
    text = runfile.write_run_output(valid_record()).replace("fef6c5ca", "12345678")
    text = text.replace("'12345678'", "12345678")
    assert runfile.parse_run_output(text).info.commit == "12345678"


def test_unquoted_timestamp_accepted():
    text = runfile.write_run_output(valid_record())
    text = text.replace("'2018-09-14T12:21:55.497368'", "2018-09-14 12:21:55.497368")
    r = runfile.parse_run_output(text)
    assert r.info.date.startswith("2018-09-14")


def test_write_does_not_mutate():
    r = valid_record()
    before = replace(r, parameters=dict(r.parameters))
    runfile.write_run_output(r)
    assert r == before


def _git(cwd, *args):
    subprocess.run(["git", *args], cwd=cwd, check=True, capture_output=True)


@pytest.fixture
def repo(tmp_path):
    _git(tmp_path, "init", "-q")
    _git(tmp_path, "config", "user.email", "t@example.org")
    _git(tmp_path, "config", "user.name", "t")
    (tmp_path / "f.txt").write_text("a\n")
    _git(tmp_path, "add", "f.txt")
    _git(tmp_path, "commit", "-qm", "init")
    return tmp_path


def test_metadata_clean_checkout(repo):
    info = runfile.capture_metadata(repo)
    assert len(info.commit) == 40 and int(info.commit, 16) >= 0
    assert info.host


def test_metadata_dirty_tree(repo):
    (repo / "f.txt").write_text("b\n")
    assert runfile.capture_metadata(repo).commit.startswith("dirty+")


def test_metadata_without_repository(tmp_path):
    with pytest.warns(UserWarning, match="unknown"):
        info = runfile.capture_metadata(tmp_path)
    assert info.commit == "unknown"
    runfile.write_run_output(valid_record(info=info))
