"""Experiment configuration and local run management.

A configuration file names instances, configurations (command templates)
and a repetition count. Every ``(configuration, instance, repetition)``
triple is one run with a fixed output path::

    <output_dir>/<configuration>/<instance>/rep<k>.yml

A run is *finished* when that file exists. Output is written to a
temporary file and renamed only when the child exits with status 0; a
failing run leaves ``rep<k>.yml.failed`` instead, and a run in progress
is marked by ``rep<k>.yml.running``. Launching never touches finished
runs, so relaunching after a crash re-executes exactly the runs without
output. Finished runs are only removed by :func:`experiments_purge`.
"""

from __future__ import annotations

import fnmatch
import json
import logging
import os
import re
import shutil
import subprocess
import tarfile
import tempfile
import threading
import time
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import yaml

from . import graph as _graph

__all__ = [
    "ConfigError",
    "InstanceSpec",
    "ConfigSpec",
    "ExperimentConfig",
    "RunDescriptor",
    "Report",
    "INSTANCE_PLACEHOLDER",
    "parse_config",
    "load_config",
    "instance_path",
    "output_path",
    "run_descriptors",
    "instances_download",
    "experiments_launch",
    "experiments_list",
    "experiments_purge",
    "subprocess_runner",
]

log = logging.getLogger(__name__)

INSTANCE_PLACEHOLDER = "@INSTANCE@"
KONECT_URL = "http://konect.cc/files/download.tsv.{name}.tar.bz2"
DEFAULT_REPETITIONS = 5
DEFAULT_TIMEOUT_HOURS = 7.0

_NAME_RE = re.compile(r"^[A-Za-z0-9_+-][A-Za-z0-9_.+-]*$")
_TOP_KEYS = {"instances", "configurations", "repetitions", "max_parallel", "base_seed",
             "timeout_hours", "instance_dir", "output_dir"}
_INSTANCE_KEYS = {"name", "url", "size", "path", "generator", "params", "seed", "class"}
_CONFIG_KEYS = {"name", "args", "output"}

GENERATORS = {
    "gnm": lambda p, seed: _graph.generate_gnm(int(p["n"]), int(p["m"]), seed),
    "grid": lambda p, seed: _graph.grid_graph(int(p["rows"]), int(p["cols"])),
    "path": lambda p, seed: _graph.path_graph(int(p["n"])),
    "star": lambda p, seed: _graph.star_graph(int(p["n"])),
}


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    url: str | None = None
    size: int | None = None
    path: str | None = None
    generator: str | None = None
    params: dict = field(default_factory=dict, hash=False)
    seed: int = 0
    class_label: str = "unclassified"

    @property
    def source(self) -> str:
        if self.url:
            return "url"
        if self.generator:
            return "generator"
        return "path"


@dataclass(frozen=True)
class ConfigSpec:
    name: str
    args: tuple
    output: str = "stdout"


@dataclass
class ExperimentConfig:
    instances: list
    configurations: list
    repetitions: int = DEFAULT_REPETITIONS
    max_parallel: int = 1
    base_seed: int = 0
    timeout_hours: float = DEFAULT_TIMEOUT_HOURS
    instance_dir: Path = Path("instances")
    output_dir: Path = Path("output")

    def instance(self, name: str) -> InstanceSpec:
        for inst in self.instances:
            if inst.name == name:
                return inst
        raise KeyError(name)

    def configuration(self, name: str) -> ConfigSpec:
        for conf in self.configurations:
            if conf.name == name:
                return conf
        raise KeyError(name)


@dataclass
class RunDescriptor:
    configuration: str
    instance: str
    repetition: int
    seed: int
    output_path: Path
    status: str = "pending"
    elapsed: float | None = None

    @property
    def name(self) -> str:
        return f"{self.configuration}/{self.instance}/rep{self.repetition}"


@dataclass
class Report:
    """Outcome lists of a bulk operation, keyed by run or instance name."""

    done: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    failed: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


# -- configuration ------------------------------------------------------------

def _check_name(kind: str, name) -> str:
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise ConfigError(f"invalid {kind} name {name!r} (letters, digits, '._+-' only)")
    return name


def _reject_unknown(where: str, entry: dict, allowed: set) -> None:
    unknown = sorted(set(entry) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _parse_instance(group: str | None, entry) -> InstanceSpec:
    if isinstance(entry, str):
        name = _check_name("instance", entry)
        if group == "konect":
            return InstanceSpec(name=name, url=KONECT_URL.format(name=name))
        return InstanceSpec(name=name)
    if not isinstance(entry, dict):
        raise ConfigError(f"instance entries must be names or mappings, got {entry!r}")
    _reject_unknown(f"instance {entry.get('name')!r}", entry, _INSTANCE_KEYS)
    if "name" not in entry:
        raise ConfigError(f"instance entry without a name: {entry!r}")
    name = _check_name("instance", entry["name"])
    kinds = [k for k in ("url", "path", "generator") if entry.get(k) is not None]
    if len(kinds) > 1:
        raise ConfigError(f"instance {name!r} sets several sources: {', '.join(kinds)}")
    url = entry.get("url")
    if not kinds and group == "konect":
        url = KONECT_URL.format(name=name)
    generator = entry.get("generator")
    if generator is not None and generator not in GENERATORS:
        raise ConfigError(f"instance {name!r}: unknown generator {generator!r}; "
                          f"choose from {sorted(GENERATORS)}")
    params = entry.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError(f"instance {name!r}: params must be a mapping")
    size = entry.get("size")
    if size is not None and (not isinstance(size, int) or size < 0):
        raise ConfigError(f"instance {name!r}: size must be a byte count")
    return InstanceSpec(
        name=name, url=url, size=size, path=entry.get("path"), generator=generator,
        params=dict(params), seed=int(entry.get("seed", 0)),
        class_label=str(entry.get("class", "unclassified")),
    )


def _check_no_anchors(text: str) -> None:
    try:
        for event in yaml.parse(text, Loader=yaml.SafeLoader):
            if isinstance(event, yaml.AliasEvent) or getattr(event, "anchor", None):
                raise ConfigError("YAML anchors and aliases are not supported")
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None


def _positive_int(doc: dict, key: str, default: int) -> int:
    value = doc.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{key} must be a positive integer, got {value!r}")
    return value


def parse_config(text: str, base_dir: str | Path = ".") -> ExperimentConfig:
    """Parse and validate ``experiments.yml`` content.

    Relative ``instance_dir``/``output_dir``/instance paths are resolved
    against ``base_dir``.
    """
    _check_no_anchors(text)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    _reject_unknown("configuration file", doc, _TOP_KEYS)
    for key in ("instances", "configurations"):
        if key not in doc:
            raise ConfigError(f"missing required key {key!r}")

    raw = doc["instances"]
    instances = []
    if isinstance(raw, dict):
        for group, entries in raw.items():
            for entry in entries or []:
                instances.append(_parse_instance(group, entry))
    elif isinstance(raw, list):
        instances = [_parse_instance(None, e) for e in raw]
    elif raw is not None:
        raise ConfigError("instances must be a list or a mapping of lists")
    if not instances:
        raise ConfigError("no instances configured")

    configurations = []
    for entry in doc["configurations"] or []:
        if not isinstance(entry, dict):
            raise ConfigError(f"configuration entries must be mappings, got {entry!r}")
        _reject_unknown(f"configuration {entry.get('name')!r}", entry, _CONFIG_KEYS)
        name = _check_name("configuration", entry.get("name"))
        args = entry.get("args")
        if not isinstance(args, list) or not args:
            raise ConfigError(f"configuration {name!r}: args must be a non-empty list")
        args = tuple(str(a) for a in args)
        if not any(INSTANCE_PLACEHOLDER in a for a in args):
            raise ConfigError(f"configuration {name!r}: args lack {INSTANCE_PLACEHOLDER}")
        output = entry.get("output", "stdout")
        if output != "stdout":
            raise ConfigError(f"configuration {name!r}: only 'output: stdout' is supported")
        configurations.append(ConfigSpec(name, args, output))
    if not configurations:
        raise ConfigError("no configurations")

    for kind, items in (("instance", instances), ("configuration", configurations)):
        seen = set()
        for item in items:
            if item.name in seen:
                raise ConfigError(f"duplicate {kind} name {item.name!r}")
            seen.add(item.name)

    base = Path(base_dir)
    timeout = doc.get("timeout_hours", DEFAULT_TIMEOUT_HOURS)
    if not isinstance(timeout, (int, float)) or timeout <= 0:
        raise ConfigError("timeout_hours must be positive")
    base_seed = doc.get("base_seed", 0)
    if not isinstance(base_seed, int) or isinstance(base_seed, bool):
        raise ConfigError("base_seed must be an integer")
    return ExperimentConfig(
        instances=instances,
        configurations=configurations,
        repetitions=_positive_int(doc, "repetitions", DEFAULT_REPETITIONS),
        max_parallel=_positive_int(doc, "max_parallel", 1),
        base_seed=base_seed,
        timeout_hours=float(timeout),
        instance_dir=base / doc.get("instance_dir", "instances"),
        output_dir=base / doc.get("output_dir", "output"),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


# -- layout -------------------------------------------------------------------

def instance_path(cfg: ExperimentConfig, inst: InstanceSpec | str) -> Path:
    if isinstance(inst, str):
        inst = cfg.instance(inst)
    if inst.path:
        p = Path(inst.path)
        return p if p.is_absolute() else cfg.instance_dir.parent / p
    return cfg.instance_dir / inst.name


def output_path(cfg: ExperimentConfig, configuration: str, instance: str,
                repetition: int) -> Path:
    return cfg.output_dir / configuration / instance / f"rep{repetition}.yml"


def _marker(path: Path, kind: str) -> Path:
    return path.with_name(path.name + "." + kind)


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


def _status(path: Path) -> tuple[str, float | None]:
    if path.exists():
        return "finished", None
    running = _marker(path, "running")
    if running.exists():
        try:
            info = json.loads(running.read_text())
            if _pid_alive(int(info["pid"])):
                return "running", time.time() - float(info["start"])
        except (ValueError, KeyError, OSError):
            pass
    if _marker(path, "failed").exists():
        return "failed", None
    return "pending", None


def run_descriptors(cfg: ExperimentConfig) -> list[RunDescriptor]:
    """All runs of the configuration with their current status."""
    runs = []
    for conf in cfg.configurations:
        for inst in cfg.instances:
            for rep in range(cfg.repetitions):
                path = output_path(cfg, conf.name, inst.name, rep)
                status, elapsed = _status(path)
                runs.append(RunDescriptor(conf.name, inst.name, rep, cfg.base_seed + rep,
                                          path, status, elapsed))
    return runs


# -- instances ----------------------------------------------------------------

def _download(url: str, dest: Path, expected_size: int | None) -> None:
    with tempfile.TemporaryDirectory(dir=dest.parent) as tmp:
        raw = Path(tmp) / "download"
        with urllib.request.urlopen(url, timeout=120) as response, open(raw, "wb") as fh:
            shutil.copyfileobj(response, fh)
        size = raw.stat().st_size
        if expected_size is not None and size != expected_size:
            raise OSError(f"size mismatch: expected {expected_size} bytes, got {size}")
        if re.search(r"\.(tar(\.(bz2|gz|xz))?|tgz)$", url):
            with tarfile.open(raw) as tar:
                members = [m for m in tar.getmembers() if m.isfile()]
                if not members:
                    raise OSError("archive contains no files")
                konect = [m for m in members if Path(m.name).name.startswith("out.")]
                member = konect[0] if konect else max(members, key=lambda m: m.size)
                src = tar.extractfile(member)
                with open(Path(tmp) / "extracted", "wb") as fh:
                    shutil.copyfileobj(src, fh)
            raw = Path(tmp) / "extracted"
        os.replace(raw, dest)


def instances_download(cfg: ExperimentConfig) -> Report:
    """Fetch or generate every missing instance file; existing files are kept."""
    report = Report()
    cfg.instance_dir.mkdir(parents=True, exist_ok=True)
    for inst in cfg.instances:
        dest = instance_path(cfg, inst)
        if dest.exists():
            report.skipped.append(inst.name)
            continue
        try:
            if inst.url:
                _download(inst.url, dest, inst.size)
            elif inst.generator:
                g = GENERATORS[inst.generator](inst.params, inst.seed)
                tmp = _marker(dest, "tmp")
                tmp.write_text(_graph.to_edge_list(g))
                os.replace(tmp, dest)
            else:
                raise FileNotFoundError(f"local instance file {dest} does not exist")
        except (OSError, ValueError, KeyError, tarfile.TarError) as exc:
            log.warning("instance %s failed: %s", inst.name, exc)
            report.failed.append((inst.name, str(exc)))
            continue
        report.done.append(inst.name)
    return report


# -- runs ---------------------------------------------------------------------

Runner = Callable[[list, float], tuple]


def subprocess_runner(args: list, timeout: float) -> tuple[int, bytes, bytes]:
    """Run a command locally; returns ``(exit code, stdout, stderr)``.

    A timeout is reported as exit code ``-1``.
    """
    try:
        proc = subprocess.run(args, capture_output=True, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        return -1, b"", f"timeout after {timeout:.0f} s\n".encode() + (exc.stderr or b"")
    return proc.returncode, proc.stdout, proc.stderr


def command_line(cfg: ExperimentConfig, run: RunDescriptor) -> list[str]:
    conf = cfg.configuration(run.configuration)
    inst = str(instance_path(cfg, run.instance))
    args = [a.replace(INSTANCE_PLACEHOLDER, inst) for a in conf.args]
    return args + [f"--seed={run.seed}"]


def _execute(cfg: ExperimentConfig, run: RunDescriptor, runner: Runner,
             lock: threading.Lock) -> tuple[bool, str]:
    path = run.output_path
    path.parent.mkdir(parents=True, exist_ok=True)
    running = _marker(path, "running")
    failed = _marker(path, "failed")
    tmp = _marker(path, f"tmp{os.getpid()}")
    running.write_text(json.dumps({"pid": os.getpid(), "start": time.time()}))
    try:
        if not instance_path(cfg, run.instance).exists():
            code, out, err = 127, b"", b"instance file missing; run 'instances download'\n"
        else:
            try:
                code, out, err = runner(command_line(cfg, run), cfg.timeout_hours * 3600)
            except OSError as exc:
                code, out, err = 126, b"", f"cannot start process: {exc}\n".encode()
        with lock:
            if code == 0:
                tmp.write_bytes(out)
                if path.exists():
                    # never overwrite an existing result
                    tmp.unlink()
                    return False, "output appeared concurrently"
                os.replace(tmp, path)
                failed.unlink(missing_ok=True)
                return True, ""
            failed.write_text(json.dumps({
                "exit_code": code,
                "stderr": err.decode(errors="replace")[-4000:],
                "time": time.time(),
            }))
            return False, f"exit code {code}"
    finally:
        tmp.unlink(missing_ok=True)
        running.unlink(missing_ok=True)


def experiments_launch(cfg: ExperimentConfig, runner: Runner | None = None,
                       max_parallel: int | None = None) -> Report:
    """Execute every run that has no output file yet.

    ``runner`` is the process adapter (default: local subprocess). The
    returned report lists launched runs in ``done``/``failed`` and finished
    runs in ``skipped``.
    """
    runner = runner or subprocess_runner
    report = Report()
    todo = []
    for run in run_descriptors(cfg):
        if run.status in ("finished", "running"):
            report.skipped.append(run.name)
        else:
            todo.append(run)
    lock = threading.Lock()
    workers = max(1, max_parallel or cfg.max_parallel)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(run, pool.submit(_execute, cfg, run, runner, lock)) for run in todo]
        for run, fut in futures:
            ok, why = fut.result()
            if ok:
                report.done.append(run.name)
            else:
                report.failed.append((run.name, why))
    return report


def experiments_list(cfg: ExperimentConfig) -> list[RunDescriptor]:
    return run_descriptors(cfg)


def _matches(run: RunDescriptor, names: Iterable[str] | None, configurations, instances,
             repetitions, status) -> bool:
    if configurations is not None and run.configuration not in configurations:
        return False
    if instances is not None and run.instance not in instances:
        return False
    if repetitions is not None and run.repetition not in repetitions:
        return False
    if status is not None and run.status not in status:
        return False
    if names is not None:
        keys = (run.configuration, run.instance, f"{run.configuration}/{run.instance}",
                run.name)
        if not any(fnmatch.fnmatchcase(k, pat) for pat in names for k in keys):
            return False
    return True


def experiments_purge(cfg: ExperimentConfig, *, names=None, configurations=None,
                      instances=None, repetitions=None, status=None,
                      all_runs: bool = False) -> Report:
    """Delete outputs and failure markers of the selected runs.

    Selection filters combine with AND; ``names`` are glob patterns matched
    against the configuration, the instance or ``configuration/instance``.
    Without any filter nothing happens unless ``all_runs`` is set.
    """
    filters = (names, configurations, instances, repetitions, status)
    if all(f is None for f in filters) and not all_runs:
        raise ValueError("refusing to purge without a filter; pass all_runs=True to purge everything")
    as_set = lambda f: None if f is None else set([f] if isinstance(f, (str, int)) else f)  # noqa: E731
    names, configurations, instances, repetitions, status = map(as_set, filters)
    report = Report()
    for run in run_descriptors(cfg):
        if run.status == "running":
            continue
        if not _matches(run, names, configurations, instances, repetitions, status):
            continue
        removed = False
        for p in (run.output_path, _marker(run.output_path, "failed")):
            if p.exists():
                p.unlink()
                removed = True
        (report.done if removed else report.skipped).append(run.name)
    return report
