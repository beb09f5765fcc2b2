"""Per-run output records.

One YAML document per run, laid out as::

    algorithm: kadabra
    info:
      commit: fef6c5ca
      date: '2018-09-14T12:21:55.497368'
      host: erle
    instance: advogato
    iterations: 12598
    parameters:
      c: 10
      delta: 0.1
      epsilon: 0.015
      seed: 0
    run_time: 1.6034371852874756
    topk_nodes:
    - 156
    topk_scores:
    - 0.0651690744562629

Keys are sorted, floats use ``repr`` so they survive a round trip bit for
bit. ``run_time`` is CPU seconds of the algorithm alone; ``wall_time`` is
present only for multi-threaded configurations.
"""

from __future__ import annotations

import datetime as _dt
import math
import re
import socket
import subprocess
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

__all__ = [
    "RunInfo",
    "RunOutput",
    "RunfileError",
    "write_run_output",
    "parse_run_output",
    "capture_metadata",
    "SAMPLING_ALGORITHMS",
    "DEFAULT_TOPK",
]

DEFAULT_TOPK = 25
SAMPLING_ALGORITHMS = frozenset({"kadabra", "rk"})
_COMMIT_RE = re.compile(r"^(dirty\+)?[0-9a-f]{4,40}$|^unknown$")
_REQUIRED = ("info", "iterations", "parameters", "run_time", "topk_nodes", "topk_scores")
# the instance is implied by the file path, so records may omit it
_OPTIONAL = ("algorithm", "instance", "wall_time")
_REQUIRED_PARAMS = {"delta": float, "epsilon": float, "seed": int}


class RunfileError(ValueError):
    """A run record was rejected.

    ``kind`` is one of ``"syntax"``, ``"missing"``, ``"type"``,
    ``"invariant"``; ``key`` names the offending field when there is one.
    """

    def __init__(self, kind: str, key: str | None, message: str):
        self.kind = kind
        self.key = key
        super().__init__(f"{kind} error" + (f" at {key!r}" if key else "") + f": {message}")


@dataclass(frozen=True)
class RunInfo:
    commit: str
    date: str
    host: str


@dataclass
class RunOutput:
    info: RunInfo
    parameters: dict
    iterations: int
    run_time: float
    topk_nodes: list = field(default_factory=list)
    topk_scores: list = field(default_factory=list)
    algorithm: str | None = None
    instance: str | None = None
    wall_time: float | None = None

    def validate(self) -> None:
        _validate(self)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)
            and math.isfinite(x))


def _validate(r: RunOutput) -> None:
    for key in ("algorithm", "instance"):
        value = getattr(r, key)
        if value is not None and (not isinstance(value, str) or not value):
            raise RunfileError("type", key, "expected a non-empty string")
    for key in ("commit", "date", "host"):
        if not isinstance(getattr(r.info, key), str):
            raise RunfileError("type", f"info.{key}", "expected a string")
    if not _COMMIT_RE.match(r.info.commit):
        raise RunfileError("invariant", "info.commit",
                           f"not a hex commit, dirty+<hex> or 'unknown': {r.info.commit!r}")
    try:
        _dt.datetime.fromisoformat(r.info.date)
    except ValueError:
        raise RunfileError("invariant", "info.date",
                           f"not an ISO-8601 timestamp: {r.info.date!r}") from None
    if not isinstance(r.parameters, dict):
        raise RunfileError("type", "parameters", "expected a mapping")
    for key, kind in _REQUIRED_PARAMS.items():
        if key not in r.parameters:
            raise RunfileError("missing", f"parameters.{key}", "required parameter")
        value = r.parameters[key]
        ok = _is_int(value) if kind is int else _is_real(value)
        if not ok:
            raise RunfileError("type", f"parameters.{key}", f"expected {kind.__name__}")
    if not _is_int(r.iterations):
        raise RunfileError("type", "iterations", "expected an integer")
    if r.iterations < 0 or (r.algorithm in SAMPLING_ALGORITHMS and r.iterations < 1):
        raise RunfileError("invariant", "iterations",
                           f"{r.iterations} samples is impossible for {r.algorithm}")
    for key in ("run_time", "wall_time"):
        value = getattr(r, key)
        if value is None and key == "wall_time":
            continue
        if not _is_real(value) or isinstance(value, int):
            raise RunfileError("type", key, "expected a finite float")
        if value < 0:
            raise RunfileError("invariant", key, "negative time")
    if not isinstance(r.topk_nodes, list) or not all(_is_int(v) for v in r.topk_nodes):
        raise RunfileError("type", "topk_nodes", "expected a list of integers")
    if not isinstance(r.topk_scores, list) or not all(_is_real(v) for v in r.topk_scores):
        raise RunfileError("type", "topk_scores", "expected a list of reals")
    if len(r.topk_nodes) != len(r.topk_scores):
        raise RunfileError("invariant", "topk_scores",
                           "topk_nodes and topk_scores differ in length")
    if any(a < b for a, b in zip(r.topk_scores, r.topk_scores[1:])):
        raise RunfileError("invariant", "topk_scores", "scores are not non-increasing")


def _as_dict(r: RunOutput) -> dict:
    doc = {
        "info": {"commit": r.info.commit, "date": r.info.date, "host": r.info.host},
        "iterations": r.iterations,
        "parameters": dict(r.parameters),
        "run_time": r.run_time,
        "topk_nodes": list(r.topk_nodes),
        "topk_scores": list(r.topk_scores),
    }
    for key in _OPTIONAL:
        if getattr(r, key) is not None:
            doc[key] = getattr(r, key)
    return doc


def write_run_output(r: RunOutput) -> str:
    """Serialize a validated record; raises :class:`RunfileError` on invalid input."""
    _validate(r)
    return yaml.safe_dump(_as_dict(r), sort_keys=True, default_flow_style=False)


def parse_run_output(text: str) -> RunOutput:
    """Parse and validate a record; raises :class:`RunfileError` on any defect."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise RunfileError("syntax", None, str(exc).splitlines()[0]) from None
    if not isinstance(doc, dict):
        raise RunfileError("syntax", None, "top level is not a mapping")
    for key in _REQUIRED:
        if key not in doc:
            raise RunfileError("missing", key, "required key")
    unknown = set(doc) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise RunfileError("invariant", sorted(unknown)[0],
                           f"unknown keys {sorted(unknown)}")
    info = doc["info"]
    if not isinstance(info, dict):
        raise RunfileError("type", "info", "expected a mapping")
    for key in ("commit", "date", "host"):
        if key not in info:
            raise RunfileError("missing", f"info.{key}", "required key")
    date = info["date"]
    if isinstance(date, (_dt.datetime, _dt.date)):
        date = date.isoformat()
    commit = info["commit"]
    if _is_int(commit):
        # an all-digit short hash loads as an int
        commit = str(commit)
    instance = doc.get("instance")
    if _is_int(instance):
        instance = str(instance)
    record = RunOutput(
        algorithm=doc.get("algorithm"),
        instance=instance,
        info=RunInfo(commit=commit, date=date, host=info["host"]),
        parameters=doc["parameters"],
        iterations=doc["iterations"],
        run_time=doc["run_time"],
        topk_nodes=doc["topk_nodes"] if doc["topk_nodes"] is not None else [],
        topk_scores=doc["topk_scores"] if doc["topk_scores"] is not None else [],
        wall_time=doc.get("wall_time"),
    )
    _validate(record)
    return record


def _git(args: list[str], cwd: Path) -> str:
    out = subprocess.run(["git", *args], cwd=cwd, capture_output=True, text=True,
                         timeout=30)
    if out.returncode != 0:
        raise RuntimeError(out.stderr.strip())
    return out.stdout.strip()


def capture_metadata(repo_dir: str | Path | None = None) -> RunInfo:
    """Commit of the working tree at ``repo_dir``, host name and current time.

    Uncommitted changes yield ``dirty+<hash>``; outside a repository the
    commit is ``"unknown"`` and a warning is issued.
    """
    repo_dir = Path(repo_dir) if repo_dir is not None else Path(__file__).resolve().parent
    try:
        commit = _git(["rev-parse", "HEAD"], repo_dir)
        if _git(["status", "--porcelain", "--untracked-files=no"], repo_dir):
            commit = "dirty+" + commit
    except (RuntimeError, OSError, subprocess.TimeoutExpired):
        warnings.warn(f"no version control information for {repo_dir}; commit recorded "
                      "as 'unknown'", stacklevel=2)
        commit = "unknown"
    return RunInfo(commit=commit, date=_dt.datetime.now().isoformat(),
                   host=socket.gethostname())
