"""
A reproducible run through the command line
============================================

The ``ngcn`` command wires the library into runs that leave every artifact,
and a manifest written last, in one output directory. Here the commands are
driven from Python; from a shell the same thing is::

    ngcn train --set dataset=toy.mtx --set f=8 --set d=8 --out runs/toy
"""
import json
import tempfile
from pathlib import Path

from ngcn import checkpoint
from ngcn.cli import main
from ngcn.graph import format_matrix_market
from ngcn.synthetic import knn_low_rank_graph

work = Path(tempfile.mkdtemp())
data = work / "toy.mtx"
data.write_text(format_matrix_market(knn_low_rank_graph(60, 6, 3, seed=0, normalize=False)))

cfg = work / "toy.cfg"
cfg.write_text(f"""# flat key = value config; --set overrides win
dataset = {data}
f = 8
d = 8
batch_size = 64
max_epochs = 100
""")

code = main(["train", "--config", str(cfg), "--seed", "1", "--out", str(work / "run")])
print("exit code", code)
print(sorted(p.name for p in (work / "run").iterdir()))
print((work / "run" / "metrics.csv").read_text())

params = checkpoint.load(work / "run" / "checkpoint.ngcn")
print(type(params).__name__, params.X.shape, "omega", round(params.omega, 4))

manifest = json.loads((work / "run" / "manifest.json").read_text())
print({k: manifest[k] for k in ("command", "tool_version", "artifacts")})

# Compare all three models, then run the significance tests on the result.
main(["compare", "--config", str(cfg), "--set", "n_reps=3", "--out", str(work / "cmp")])
print((work / "cmp" / "comparison.txt").read_text())
main(["stats", "--results", str(work / "cmp" / "comparison.csv"), "--reference", "ngcn", "--out", str(work / "st")])
print((work / "st" / "stats.txt").read_text())
