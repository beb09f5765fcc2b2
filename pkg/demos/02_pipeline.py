"""
A small benchmark from configuration to figures
===============================================

Generated instances keep the demo offline. Outputs go to a temporary directory.
"""

import sys
import tempfile
from pathlib import Path

from netbench import collect, plots
from netbench import orchestrator as O

work = Path(tempfile.mkdtemp(prefix="netbench-demo-"))

config = f"""
instances:
  - {{name: gnm-small, generator: gnm, params: {{n: 300, m: 900}}, seed: 1, class: random}}
  - {{name: gnm-large, generator: gnm, params: {{n: 900, m: 2700}}, seed: 2, class: random}}
  - {{name: grid, generator: grid, params: {{rows: 20, cols: 30}}, class: mesh}}
configurations:
  - name: kadabra
    args: [{sys.executable}, -m, netbench, run, kadabra, '@INSTANCE@', --epsilon=0.05]
  - name: rk
    args: [{sys.executable}, -m, netbench, run, rk, '@INSTANCE@', --epsilon=0.05]
repetitions: 2
max_parallel: 4
"""
cfg = O.parse_config(config, base_dir=work)

O.instances_download(cfg)
report = O.experiments_launch(cfg)
print(len(report.done), "runs finished,", len(report.failed), "failed")

# launching again does nothing: every output already exists
print(len(O.experiments_launch(cfg).done), "runs on relaunch")

found = collect.collect_successful(cfg.output_dir, cfg)
frame = found.frame
collect.write_results_csv(frame, work / "runs.csv")
print(frame[["configuration", "instance", "repetition", "iterations", "run_time"]])

table = collect.speedup_table(frame, "kadabra", "rk")
print(table.ratios)
print("geometric mean speedup:", round(table.geometric_mean, 2))

svg = plots.speedup_bars_svg(list(table.ratios.index), list(table.ratios.values),
                             "speedup of kadabra over rk")
(work / "speedup.svg").write_text(svg)
print("figure written to", work / "speedup.svg")
