"""Result gathering, aggregation and instance-set planning.

Running times are aggregated in two levels: the arithmetic mean over the
repetitions of one instance, then the geometric mean of per-instance ratios
across instances. The geometric mean is the only mean for which the mean of
ratios equals the ratio of means, so a summary speedup does not depend on
which algorithm is used as the reference.

The CSV export has one row per successful run with the columns in
:data:`COLUMNS`; ``topk_nodes`` and ``topk_scores`` are space-separated and
scores use ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats as _sps

from . import graph as _graph
from .runfile import RunfileError, parse_run_output

__all__ = [
    "COLUMNS",
    "CollectReport",
    "SplitPlan",
    "SpeedupTable",
    "TuningResult",
    "collect_successful",
    "instance_attributes",
    "write_results_csv",
    "read_results_csv",
    "geometric_mean",
    "speedup_table",
    "standard_error",
    "required_repetitions",
    "stratified_split",
    "tune_parameter",
]

COLUMNS = (
    "configuration", "algorithm", "instance", "class", "repetition", "seed",
    "epsilon", "delta", "c", "iterations", "run_time", "wall_time",
    "commit", "host", "date", "topk_nodes", "topk_scores",
)
ATTRIBUTE_COLUMNS = ("nodes", "edges", "diameter")
SKEW_WARNING = 2.0

_REP_RE = re.compile(r"^rep(\d+)\.yml$")
_MARKER_RE = re.compile(r"^rep\d+\.yml\.(failed|running|tmp\d*)$")


@dataclass
class CollectReport:
    """Successful runs plus every file that did not become a row.

    ``failed`` holds runs with a failure marker, ``rejected`` corrupt or
    unexpected files with the reason, ``in_progress`` running markers and
    temporary files. ``missing`` lists configured runs without any file
    (only known when a configuration is given).
    """

    frame: pd.DataFrame
    failed: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    in_progress: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    files_seen: int = 0


@dataclass(frozen=True)
class SplitPlan:
    tuning: frozenset
    evaluation: frozenset

    def __post_init__(self):
        if self.tuning & self.evaluation:
            raise ValueError(f"tuning and evaluation overlap: {sorted(self.tuning & self.evaluation)}")


@dataclass
class SpeedupTable:
    """Per-instance ratios ``mean(b)/mean(a)`` and their geometric mean."""

    ratios: pd.Series
    geometric_mean: float
    missing: list
    algo_a: str
    algo_b: str

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"instance": self.ratios.index, "speedup": self.ratios.values})


@dataclass
class TuningResult:
    best: object
    mean_times: dict


def _fmt_list(values, fmt=repr) -> str:
    return " ".join(fmt(v) for v in values)


def _run_row(path: Path, record, configuration: str, instance: str, repetition: int,
             class_label: str) -> dict:
    params = dict(record.parameters)
    row = {
        "configuration": configuration,
        "algorithm": record.algorithm or configuration,
        "instance": record.instance or instance,
        "class": class_label,
        "repetition": repetition,
        "seed": params.pop("seed"),
        "epsilon": params.pop("epsilon"),
        "delta": params.pop("delta"),
        "c": params.pop("c", np.nan),
        "iterations": record.iterations,
        "run_time": record.run_time,
        "wall_time": record.wall_time if record.wall_time is not None else np.nan,
        "commit": record.info.commit,
        "host": record.info.host,
        "date": record.info.date,
        "topk_nodes": _fmt_list(record.topk_nodes, str),
        "topk_scores": _fmt_list(record.topk_scores),
    }
    for key, value in params.items():
        if key not in row:
            row[key] = value
    return row


def collect_successful(output_dir: str | Path, config=None,
                       attributes: pd.DataFrame | None = None) -> CollectReport:
    """Parse every run file under ``output_dir`` into one row per successful run.

    The expected layout is ``<configuration>/<instance>/rep<k>.yml``. Every
    file below ``output_dir`` ends up in exactly one of the frame,
    ``failed``, ``rejected`` or ``in_progress``. With an experiment
    ``config``, class labels are taken from it and runs without any file are
    listed in ``missing``. ``attributes`` (see :func:`instance_attributes`) is
    joined on the instance name.

    Raises ``ValueError`` when no run succeeded.
    """
    root = Path(output_dir)
    classes = {i.name: i.class_label for i in config.instances} if config else {}
    report = CollectReport(frame=pd.DataFrame())
    rows = []
    present = set()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        report.files_seen += 1
        rel = path.relative_to(root)
        m = _REP_RE.match(path.name)
        marker = _MARKER_RE.match(path.name)
        if len(rel.parts) != 3 or not (m or marker):
            report.rejected.append((str(rel), "unexpected file"))
            continue
        configuration, instance = rel.parts[0], rel.parts[1]
        if marker:
            if marker.group(1) == "failed":
                report.failed.append(str(rel))
                present.add(str(rel)[: -len(".failed")])
            else:
                report.in_progress.append(str(rel))
            continue
        present.add(str(rel))
        try:
            record = parse_run_output(path.read_text())
        except (RunfileError, UnicodeDecodeError) as exc:
            report.rejected.append((str(rel), str(exc)))
            continue
        rows.append(_run_row(path, record, configuration, instance, int(m.group(1)),
                             classes.get(instance, "unclassified")))
    if config is not None:
        from .orchestrator import run_descriptors

        for run in run_descriptors(config):
            rel = str(run.output_path.relative_to(config.output_dir))
            if rel not in present:
                report.missing.append(rel)
    if not rows:
        raise ValueError(f"no successful runs under {root} "
                         f"({len(report.failed)} failed, {len(report.rejected)} rejected)")
    frame = pd.DataFrame(rows)
    extra = [c for c in frame.columns if c not in COLUMNS]
    frame = frame[list(COLUMNS) + extra]
    if attributes is not None:
        frame = frame.merge(attributes, on="instance", how="left")
    report.frame = frame.sort_values(["configuration", "instance", "repetition"],
                                     ignore_index=True)
    return report


def instance_attributes(config) -> pd.DataFrame:
    """Node count, edge count and diameter of each instance's largest component.

    The diameter is the upper end of :func:`netbench.graph.estimate_diameter`
    (exact for small graphs). Instances whose file is absent are skipped.
    """
    from .orchestrator import instance_path

    rows = []
    for inst in config.instances:
        path = instance_path(config, inst)
        if not path.exists():
            continue
        with open(path) as fh:
            g, _ = _graph.largest_component(_graph.read_edge_list(fh))
        d = _graph.estimate_diameter(g)
        rows.append({"instance": inst.name, "nodes": g.node_count, "edges": g.edge_count,
                     "diameter": d.upper})
    return pd.DataFrame(rows, columns=["instance", *ATTRIBUTE_COLUMNS])


def write_results_csv(frame: pd.DataFrame, path: str | Path) -> None:
    frame.to_csv(path, index=False, float_format=lambda v: repr(float(v)))


def read_results_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"topk_nodes": str, "topk_scores": str, "commit": str,
                                    "instance": str}, float_precision="round_trip")


# -- aggregation --------------------------------------------------------------

def geometric_mean(values) -> float:
    """``(prod values)^(1/k)``.

    Binary exponents are averaged exactly and only the remainder goes through
    ``exp``, which keeps the result within a few ulps even for ratios spanning
    many orders of magnitude.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("geometric mean of an empty sequence")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        bad = arr[~(np.isfinite(arr) & (arr > 0))][0]
        raise ValueError(f"geometric mean needs finite positive values, got {bad}")
    mantissa, exponent = np.frexp(arr)
    whole, rest = divmod(int(exponent.sum()), arr.size)
    log_rest = (math.fsum(np.log(mantissa)) + rest * math.log(2)) / arr.size
    return math.ldexp(math.exp(log_rest), whole)


def speedup_table(frame: pd.DataFrame, algo_a: str, algo_b: str, *,
                  by: str = "configuration", metric: str = "run_time") -> SpeedupTable:
    """Speedup of ``algo_a`` over ``algo_b``: ``mean(b)/mean(a)`` per instance.

    Instances with runs for only one side are listed in ``missing``, never
    imputed. If ``nodes`` is a column, instances are ordered by node count,
    otherwise by name. Warns when an instance's running times are highly
    skewed (sample skewness above 2), since means then mislead.
    """
    groups = {}
    for algo in (algo_a, algo_b):
        sub = frame[frame[by] == algo]
        groups[algo] = sub.groupby("instance")[metric]
    inst_a = set(groups[algo_a].groups) if len(frame[frame[by] == algo_a]) else set()
    inst_b = set(groups[algo_b].groups) if len(frame[frame[by] == algo_b]) else set()
    shared = inst_a & inst_b
    if not shared:
        raise ValueError(f"no instance has runs of both {algo_a!r} and {algo_b!r}")
    missing = sorted((inst_a | inst_b) - shared)

    for algo in (algo_a, algo_b):
        for inst, times in groups[algo]:
            if inst in shared and len(times) >= 3 and np.ptp(times.values) > 0:
                skew = float(_sps.skew(times.values))
                if skew > SKEW_WARNING:
                    warnings.warn(f"{algo} on {inst}: running times are highly skewed "
                                  f"(skewness {skew:.2f}); the mean may be misleading",
                                  stacklevel=2)

    mean_a = groups[algo_a].mean()
    mean_b = groups[algo_b].mean()
    if "nodes" in frame.columns:
        sizes = frame.groupby("instance")["nodes"].first()
        order = sorted(shared, key=lambda i: (sizes.get(i, np.inf), i))
    else:
        order = sorted(shared)
    ratios = pd.Series([mean_b[i] / mean_a[i] for i in order], index=order, name="speedup")
    return SpeedupTable(ratios, geometric_mean(ratios.values), missing, algo_a, algo_b)


def standard_error(values) -> float:
    """``s / sqrt(k)`` with the sample standard deviation ``s``."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("standard error needs at least two values")
    return float(np.std(arr, ddof=1) / math.sqrt(arr.size))


def required_repetitions(variance_estimate: float, target_se: float) -> int:
    """Smallest ``k`` with ``sqrt(variance_estimate / k) <= target_se``."""
    if variance_estimate <= 0 or target_se <= 0:
        raise ValueError("variance and target standard error must be positive")
    k = math.ceil(variance_estimate / target_se ** 2)
    # guard against the quotient landing a hair above an integer
    while k > 1 and math.sqrt(variance_estimate / (k - 1)) <= target_se:
        k -= 1
    return max(k, 1)


# -- instance sets ------------------------------------------------------------

def stratified_split(classes: dict, per_class: int = 1, seed: int = 0, *,
                     min_class_size: int = 1) -> SplitPlan:
    """Sample ``per_class`` tuning instances uniformly from every class.

    ``classes`` maps instance name to class label. Classes with fewer than
    ``min_class_size`` instances contribute nothing to the tuning set, which
    keeps a lone representative of a class available for evaluation.
    """
    if not classes:
        raise ValueError("no instances to split")
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    rng = np.random.default_rng(seed)
    by_class: dict[str, list] = {}
    for name, label in classes.items():
        by_class.setdefault(label, []).append(name)
    tuning = set()
    for label in sorted(by_class):
        members = sorted(by_class[label])
        if len(members) < min_class_size:
            continue
        k = min(per_class, len(members))
        tuning.update(members[i] for i in rng.choice(len(members), size=k, replace=False))
    return SplitPlan(frozenset(tuning), frozenset(set(classes) - tuning))


def tune_parameter(candidates, frame: pd.DataFrame, parameter: str = "c", *,
                   instances=None, metric: str = "run_time") -> TuningResult:
    """Candidate with the lowest mean running time over all tuning runs.

    Every candidate must have runs on every tuning instance (``instances``,
    default: all instances in ``frame``). Ties go to the smaller value.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate values")
    if parameter not in frame.columns:
        raise ValueError(f"frame has no column {parameter!r}")
    instances = sorted(set(frame["instance"]) if instances is None else set(instances))
    gaps = []
    means = {}
    for value in candidates:
        sub = frame[(frame[parameter] == value) & frame["instance"].isin(instances)]
        have = set(sub["instance"])
        gaps.extend(f"{parameter}={value} on {i}" for i in instances if i not in have)
        if len(sub):
            means[value] = float(sub[metric].mean())
    if gaps:
        raise ValueError("missing tuning runs: " + ", ".join(gaps))
    best = min(candidates, key=lambda v: (means[v], v))
    return TuningResult(best, means)
