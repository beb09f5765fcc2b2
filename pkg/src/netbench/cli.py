"""Command-line entry point.

``netbench run`` is the workload: it loads one instance, runs one
algorithm on its largest component and prints a run record to stdout. The
remaining subcommands drive an experiment described by ``experiments.yml``::

    netbench instances download
    netbench experiments launch | list | purge
    netbench collect
    netbench analyze --model relative_time --a kadabra --b rk
    netbench plot scatter|speedup|box

Exit codes: 0 success, 1 partial failure (some runs or instances failed, or
the algorithm failed), 2 usage error or unreadable input.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"netbench: {msg}", file=sys.stderr)


# -- run ----------------------------------------------------------------------

def cmd_run(args) -> int:
    import numpy as np

    from . import centrality, graph, runfile

    try:
        with open(args.instance) as fh:
            g = graph.read_edge_list(fh, directed=args.directed)
    except (OSError, UnicodeDecodeError, graph.GraphFormatError) as exc:
        _err(f"cannot read instance {args.instance}: {exc}")
        return EXIT_USAGE
    g, mapping = graph.largest_component(g)
    if args.threads > 1:
        _err(f"--threads={args.threads} requested; this implementation runs single-threaded")

    wall0, cpu0 = time.perf_counter(), time.process_time()
    try:
        if args.algorithm == "brandes":
            est = centrality.brandes_exact(g)
            iterations = g.node_count
        elif args.algorithm == "kadabra":
            est = centrality.kadabra(g, centrality.KadabraParams(
                epsilon=args.epsilon, delta=args.delta, c=args.c, seed=args.seed))
            iterations = est.samples_used
        else:
            est = centrality.rk(g, args.epsilon, args.delta, args.seed)
            iterations = est.samples_used
    except (ValueError, MemoryError) as exc:
        _err(f"{args.algorithm} failed: {exc}")
        return EXIT_PARTIAL
    cpu = time.process_time() - cpu0
    wall = time.perf_counter() - wall0

    nodes, scores = centrality.top_k(est.scores, args.topk)
    params = {"epsilon": float(args.epsilon), "delta": float(args.delta), "seed": args.seed}
    if args.algorithm == "kadabra":
        params["c"] = args.c
    if args.algorithm == "brandes":
        params.update(epsilon=0.0, delta=0.0)
    with np.errstate(all="ignore"), _quiet_warnings():
        info = runfile.capture_metadata()
    record = runfile.RunOutput(
        info=info,
        parameters=params,
        iterations=int(iterations),
        run_time=float(cpu),
        topk_nodes=[int(mapping[v]) for v in nodes],
        topk_scores=[float(s) for s in scores],
        algorithm=args.algorithm,
        instance=Path(args.instance).name,
        wall_time=float(wall) if args.threads > 1 else None,
    )
    sys.stdout.write(runfile.write_run_output(record))
    return EXIT_OK


class _quiet_warnings:
    def __enter__(self):
        import warnings

        self._ctx = warnings.catch_warnings()
        self._ctx.__enter__()
        warnings.simplefilter("ignore")

    def __exit__(self, *exc):
        return self._ctx.__exit__(*exc)


# -- pipeline -----------------------------------------------------------------

def _config(args):
    from .orchestrator import ConfigError, load_config

    path = Path(args.config)
    try:
        return load_config(path)
    except OSError as exc:
        raise _UsageError(f"cannot read configuration {path}: {exc}") from None
    except ConfigError as exc:
        raise _UsageError(f"{path}: {exc}") from None


def _results_dir(args, cfg) -> Path:
    out = Path(args.results_dir) if args.results_dir else cfg.output_dir.parent / "results"
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_instances_download(args) -> int:
    from .orchestrator import instances_download

    rep = instances_download(_config(args))
    print(f"{len(rep.done)} fetched, {len(rep.skipped)} skipped, {len(rep.failed)} failed")
    for name, why in rep.failed:
        print(f"  failed {name}: {why}")
    return rep.exit_code


def cmd_experiments_launch(args) -> int:
    from .orchestrator import experiments_launch

    rep = experiments_launch(_config(args), max_parallel=args.max_parallel)
    print(f"{len(rep.done) + len(rep.failed)} launched, {len(rep.done)} succeeded, "
          f"{len(rep.failed)} failed, {len(rep.skipped)} skipped")
    for name, why in rep.failed:
        print(f"  failed {name}: {why}")
    return rep.exit_code


def cmd_experiments_list(args) -> int:
    from .orchestrator import experiments_list

    runs = experiments_list(_config(args))
    width = max(len(r.name) for r in runs)
    counts: dict[str, int] = {}
    for r in runs:
        counts[r.status] = counts.get(r.status, 0) + 1
        if args.status and r.status not in args.status:
            continue
        extra = f"  {r.elapsed:.0f}s" if r.elapsed is not None else ""
        print(f"{r.name:<{width}}  {r.status}{extra}")
    print(", ".join(f"{counts.get(s, 0)} {s}"
                    for s in ("pending", "running", "finished", "failed")))
    return EXIT_OK


def cmd_experiments_purge(args) -> int:
    from .orchestrator import experiments_purge

    cfg = _config(args)
    try:
        rep = experiments_purge(cfg, names=args.name or None, status=args.status or None,
                                all_runs=args.all)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    print(f"{len(rep.done)} removed")
    return EXIT_OK


def cmd_collect(args) -> int:
    from .collect import collect_successful, instance_attributes, write_results_csv

    cfg = _config(args)
    try:
        attrs = instance_attributes(cfg)
        report = collect_successful(cfg.output_dir, cfg, attributes=attrs)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_PARTIAL
    out = _results_dir(args, cfg) / "runs.csv"
    write_results_csv(report.frame, out)
    print(f"{len(report.frame)} successful runs written to {out}")
    for rel in report.failed:
        print(f"  failed {rel}")
    for rel, why in report.rejected:
        print(f"  rejected {rel}: {why}")
    if report.missing:
        print(f"  {len(report.missing)} runs missing")
    return EXIT_PARTIAL if report.failed or report.rejected else EXIT_OK


def _load_runs(args, cfg):
    from .collect import read_results_csv

    path = Path(args.input) if args.input else _results_dir(args, cfg) / "runs.csv"
    if not path.exists():
        raise _UsageError(f"{path} not found; run 'netbench collect' first")
    return read_results_csv(path)


def _pick_pair(frame, args) -> tuple[str, str]:
    names = sorted(frame["configuration"].unique())
    a = args.a or (names[0] if names else None)
    b = args.b or next((n for n in names if n != a), None)
    for n in (a, b):
        if n not in names:
            raise _UsageError(f"configuration {n!r} not in results (have {names})")
    if a == b:
        raise _UsageError("--a and --b must name different configurations")
    return a, b


def cmd_analyze(args) -> int:
    import numpy as np
    import pandas as pd

    from . import stats

    cfg = _config(args)
    frame = _load_runs(args, cfg)
    if args.model == "size_scaling":
        a, b = args.a or sorted(frame["configuration"].unique())[0], None
        if a not in set(frame["configuration"]):
            raise _UsageError(f"configuration {a!r} not in results")
    else:
        a, b = _pick_pair(frame, args)
    means = frame.groupby(["configuration", "instance"])["run_time"].mean()
    per_inst = frame.groupby("instance").first()
    inst_a = set(means.loc[a].index)
    shared = sorted(inst_a & set(means.loc[b].index)) if b else sorted(inst_a)
    if len(shared) < 3:
        _err(f"need at least 3 instances with results, have {len(shared)}")
        return EXIT_PARTIAL
    y = np.log([means.loc[(a, i)] for i in shared])
    z = None
    if args.model == "size_scaling":
        if "nodes" not in per_inst.columns:
            raise _UsageError("size_scaling needs node counts; re-run 'netbench collect'")
        x = np.log(per_inst.loc[shared, "nodes"].to_numpy(dtype=float))
    else:
        x = np.log([means.loc[(b, i)] for i in shared])
    if args.model == "relative_time_with_diameter":
        if "diameter" not in per_inst.columns:
            raise _UsageError("diameter model needs diameters; re-run 'netbench collect'")
        z = np.log(per_inst.loc[shared, "diameter"].to_numpy(dtype=float))

    trace = stats.mcmc_sample(stats.ModelSpec(args.model), y, x, z, draws=args.draws,
                              warmup=args.warmup, seed=args.seed)
    summ = trace.summary()
    rows = [{"parameter": k, "hpd_2.5": v.hpd_low, "mean": v.mean, "hpd_97.5": v.hpd_high,
             "rhat": v.rhat} for k, v in summ.items() if k != "selected_model"]
    table = pd.DataFrame(rows)
    lines = [f"model {args.model}: y = {a}" + (f", x = {b}" if b else ", x = log nodes"),
             f"{len(shared)} instances, {trace.chains} chains x {args.draws} draws", "",
             f"{'parameter':<10} {'HPD 2.5':>10} {'Mean':>10} {'HPD 97.5':>10} {'R-hat':>7}"]
    for r in rows:
        lines.append(f"{r['parameter']:<10} {r['hpd_2.5']:>10.4f} {r['mean']:>10.4f} "
                     f"{r['hpd_97.5']:>10.4f} {r['rhat']:>7.3f}")
    if "selected_model" in trace.samples:
        bf = stats.bayes_factor_indicator(trace["selected_model"])
        bound = {"lower": " (lower bound)", "upper": " (upper bound)"}.get(bf.bound or "", "")
        lines += ["", f"inclusion probability {bf.inclusion_probability:.3f}, "
                      f"Bayes factor {bf.bayes_factor:.3g}{bound}"]
    if args.model == "relative_time":
        w = stats.wilcoxon_signed_rank(y, x)
        lines += ["", f"Wilcoxon signed-rank on log times: W = {w.statistic:g}, "
                      f"p = {w.pvalue:.3g} ({w.method})"]
    lines += [f"warning: {m}" for m in trace.warnings]
    text = "\n".join(lines) + "\n"
    out = _results_dir(args, cfg)
    (out / f"analysis_{args.model}.txt").write_text(text)
    table.to_csv(out / f"analysis_{args.model}.csv", index=False)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import collect, plots

    cfg = _config(args)
    frame = _load_runs(args, cfg)
    experiment = Path(args.config).stem
    out = _results_dir(args, cfg)
    names = sorted(frame["configuration"].unique())
    if args.kind == "scatter":
        if "nodes" not in frame.columns:
            raise _UsageError("scatter plot needs node counts; re-run 'netbench collect'")
        series = []
        chosen = [n for n in (args.a, args.b) if n] or names[:2]
        for k, name in enumerate(chosen):
            sub = frame[frame["configuration"] == name].groupby("instance")
            pts = list(zip(sub["nodes"].first(), sub["run_time"].mean()))
            series.append(plots.PlotSeries(name, pts, plots.MARKS[k % 2]))
        svg = plots.scatter_svg(series, "number of nodes", "running time [s]")
    elif args.kind == "speedup":
        a, b = _pick_pair(frame, args)
        table = collect.speedup_table(frame, a, b)
        svg = plots.speedup_bars_svg(list(table.ratios.index), table.ratios.values,
                                     f"speedup of {a} over {b}")
        if table.missing:
            print(f"  no ratio for: {', '.join(table.missing)}")
    else:
        name = args.a or names[0]
        sub = frame[frame["configuration"] == name]
        groups = [(inst, plots.relative_deviation(g["run_time"].to_numpy()))
                  for inst, g in sub.groupby("instance") if len(g) >= 2]
        if not groups:
            _err("box plot needs instances with at least two repetitions")
            return EXIT_PARTIAL
        svg = plots.box_plot_svg(groups)
    path = out / plots.figure_filename(args.kind, experiment)
    path.write_text(svg)
    print(f"wrote {path}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_config(p: argparse.ArgumentParser, results: bool = False) -> None:
    p.add_argument("--config", default="experiments.yml",
                   help="experiment configuration (default: %(default)s)")
    if results:
        p.add_argument("--results-dir", "--output-dir", dest="results_dir", default=None,
                       help="where CSV, reports and figures go (default: results/ next to "
                            "the output directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netbench", description="Betweenness benchmarks and experiment "
                     "management.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one algorithm on one instance, print a YAML record",
                       description="Load an edge list, keep its largest component, run the "
                       "algorithm and print one run record. run_time is the CPU time of "
                       "the algorithm alone; graph loading is excluded.")
    p.add_argument("algorithm", choices=("brandes", "kadabra", "rk"))
    p.add_argument("instance", help="edge-list file")
    p.add_argument("--epsilon", type=float, default=0.015, help="absolute error bound")
    p.add_argument("--delta", type=float, default=0.1, help="failure probability")
    p.add_argument("--c", type=int, default=10, help="KADABRA samples between stop checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--topk", type=int, default=25, help="number of top nodes to report")
    p.add_argument("--threads", type=int, default=1,
                   help="accepted for configuration compatibility; runs single-threaded")
    p.add_argument("--directed", action="store_true", help="treat edges as directed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("instances", help="manage instance files")
    isub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    q = isub.add_parser("download", help="fetch or generate missing instances")
    _add_config(q)
    q.set_defaults(func=cmd_instances_download)

    p = sub.add_parser("experiments", help="launch, monitor and purge runs")
    esub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    q = esub.add_parser("launch", help="execute every run without output")
    _add_config(q)
    q.add_argument("--max-parallel", type=int, default=None,
                   help="override max_parallel from the configuration")
    q.set_defaults(func=cmd_experiments_launch)
    q = esub.add_parser("list", help="show the status of every run")
    _add_config(q)
    q.add_argument("--status", action="append",
                   choices=("pending", "running", "finished", "failed"),
                   help="only show runs with this status (repeatable)")
    q.set_defaults(func=cmd_experiments_list)
    q = esub.add_parser("purge", help="delete outputs and failure markers of selected runs")
    _add_config(q)
    q.add_argument("--status", action="append", choices=("finished", "failed"),
                   help="select runs by status (repeatable)")
    q.add_argument("--name", action="append",
                   help="glob on configuration, instance or configuration/instance "
                        "(repeatable)")
    q.add_argument("--all", action="store_true", help="purge every run")
    q.set_defaults(func=cmd_experiments_purge)

    p = sub.add_parser("collect", help="gather successful runs into runs.csv")
    _add_config(p, results=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("analyze", help="Bayesian regression over collected running times")
    _add_config(p, results=True)
    p.add_argument("--model", default="relative_time",
                   choices=("size_scaling", "relative_time", "relative_time_with_diameter"))
    p.add_argument("--a", help="configuration under study (default: first by name)")
    p.add_argument("--b", help="reference configuration (default: second by name)")
    p.add_argument("--input", help="runs CSV (default: <results-dir>/runs.csv)")
    p.add_argument("--draws", type=int, default=10000, help="draws per chain")
    p.add_argument("--warmup", type=int, default=1000, help="warmup sweeps per chain")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="write an SVG figure from collected runs")
    _add_config(p, results=True)
    p.add_argument("kind", choices=("scatter", "speedup", "box"))
    p.add_argument("--a", help="first configuration (default: first by name)")
    p.add_argument("--b", help="second configuration (default: second by name)")
    p.add_argument("--input", help="runs CSV (default: <results-dir>/runs.csv)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
