"""Command-line entry point: ``ngcn {fetch,split,train,evaluate,gridsearch,compare,stats}``.

Runs are configured by a flat ``key = value`` file (``--config``) with
``--set key=value`` overrides on top. Every command writes its artifacts into
``--out`` and finishes by writing ``manifest.json``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import shutil
import sys
import tarfile
import tempfile
import time
import urllib.error
import urllib.request
from pathlib import Path

from . import __version__, checkpoint
from .evaluation import ComparisonTable, cross_validate
from .graph import (
    MatrixMarketError,
    normalize_weights,
    read_graph,
    read_matrix_market,
    split_edges,
    split_from_manifest,
    write_split,
)
from .metrics import rmse_mae
from .stats import friedman_mean_ranks, wilcoxon_signed_rank
from .trainer import ETA_GRID, LAMBDA_GRID, MODEL_KINDS, TrainConfig, TrainingError, grid_search, predict, train

log = logging.getLogger("ngcn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 1, 2, 3
COLLECTION_URL = "https://sparse.tamu.edu/MM"

DEFAULTS = {
    "dataset": None,
    "model": "ngcn",
    "f": 128,
    "d": 128,
    "layers": 2,
    "eta": 0.001,
    "lambda": 0.0001,
    "batch_size": 2048,
    "max_epochs": 1000,
    "patience": 30,
    "seed": 0,
    "normalize": True,
    "out_dir": "runs",
    "eta_grid": ",".join(map(str, ETA_GRID)),
    "lambda_grid": ",".join(map(str, LAMBDA_GRID)),
    "models": ",".join(MODEL_KINDS),
    "n_reps": 5,
    "n_jobs": 1,
}
_INT_KEYS = {"f", "d", "layers", "batch_size", "max_epochs", "patience", "seed", "n_reps", "n_jobs"}
_FLOAT_KEYS = {"eta", "lambda"}


class UsageError(Exception):
    pass


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        k, v = s.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve_config(config_path: str | None, overrides: list[str], seed: int | None,
                   out: str | None) -> dict:
    raw: dict[str, str] = {}
    if config_path:
        try:
            raw.update(parse_config_text(Path(config_path).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    if seed is not None:
        raw["seed"] = str(seed)
    if out is not None:
        raw["out_dir"] = out

    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    cfg = dict(DEFAULTS)
    bad = []
    for k, v in raw.items():
        try:
            if k in _INT_KEYS:
                cfg[k] = int(v)
            elif k in _FLOAT_KEYS:
                cfg[k] = float(v)
            elif k == "normalize":
                cfg[k] = _parse_bool(v)
            else:
                cfg[k] = v
        except ValueError:
            bad.append(k)
    if cfg["model"] not in MODEL_KINDS:
        bad.append("model")
    if bad:
        raise UsageError(f"invalid values for config keys: {', '.join(sorted(set(bad)))}")
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    try:
        return TrainConfig(eta=cfg["eta"], lam=cfg["lambda"], batch_size=cfg["batch_size"],
                           max_epochs=cfg["max_epochs"], patience=cfg["patience"], seed=cfg["seed"],
                           model_kind=cfg["model"], f=cfg["f"], d=cfg["d"], L=cfg["layers"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _float_list(cfg: dict, key: str) -> list[float]:
    try:
        return [float(x) for x in str(cfg[key]).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"invalid values for config keys: {key}") from None


def load_dataset(cfg: dict):
    if not cfg["dataset"]:
        raise UsageError("missing config key: dataset")
    g = read_graph(cfg["dataset"])
    return normalize_weights(g) if cfg["normalize"] else g


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_metrics(path: Path, rows: list[tuple]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["partition", "rmse", "mae", "n"])
    for name, m in rows:
        w.writerow([name, repr(m.rmse), repr(m.mae), m.n])
    path.write_text(buf.getvalue())


def _write_manifest(out: Path, command: str, args: argparse.Namespace, cfg: dict, started: float,
                    artifacts: list[str], argv: list[str]) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config_path": args.config,
        "config": cfg,
        "dataset": cfg.get("dataset"),
        "output_dir": str(out),
        "artifacts": sorted(artifacts),
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
        "argv": argv,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


# -- commands -----------------------------------------------------------------

def cmd_fetch(args, cfg) -> list[str]:
    group, _, name = args.matrix.partition("/")
    if not group or not name:
        raise UsageError("fetch expects GROUP/NAME, e.g. ML_Graph/plantsmargin_12NN")
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    target = dest / f"{name}.mtx"
    if target.exists():
        try:
            read_matrix_market(target)
            log.info("%s already present, skipping download", target)
            return [target.name]
        except MatrixMarketError:
            log.warning("existing %s does not parse, downloading again", target)
    url = f"{args.url_base.rstrip('/')}/{group}/{name}.tar.gz"
    log.info("downloading %s", url)
    try:
        with urllib.request.urlopen(url, timeout=60) as resp, tempfile.TemporaryDirectory() as tmp:
            archive = Path(tmp) / "matrix.tar.gz"
            with open(archive, "wb") as fh:
                shutil.copyfileobj(resp, fh)
            with tarfile.open(archive) as tar:
                member = next((m for m in tar.getmembers() if m.name.endswith(f"{name}/{name}.mtx")), None)
                if member is None:
                    raise MatrixMarketError(f"archive for {group}/{name} has no {name}.mtx")
                with tar.extractfile(member) as src, open(target, "wb") as dst:
                    shutil.copyfileobj(src, dst)
    except urllib.error.HTTPError as exc:
        raise FileNotFoundError(f"unknown dataset {group}/{name} ({exc.code} from {url})") from None
    except (urllib.error.URLError, tarfile.TarError, OSError) as exc:
        raise FileNotFoundError(f"cannot download dataset {group}/{name}: {exc}") from None
    try:
        g = read_matrix_market(target)
    except MatrixMarketError:
        target.unlink()
        raise
    log.info("%s: %d nodes, %d edges", target, g.n_nodes, g.n_edges)
    return [target.name]


def cmd_split(args, cfg) -> list[str]:
    g = load_dataset(cfg)
    out = _out_dir(cfg)
    write_split(split_edges(g, cfg["seed"]), g.n_nodes, out)
    return ["train.txt", "validation.txt", "test.txt", "split.json"]


def _load_split(g, cfg, args):
    if getattr(args, "split", None):
        manifest = json.loads(Path(args.split).read_text())
        return split_from_manifest(g, manifest)
    return split_edges(g, cfg["seed"])


def cmd_train(args, cfg) -> list[str]:
    g = load_dataset(cfg)
    split = _load_split(g, cfg, args)
    out = _out_dir(cfg)
    tc = train_config(cfg)
    try:
        params, report = train(g, split, tc)
    except TrainingError as exc:
        if exc.report is not None:
            (out / "report.json").write_text(exc.report.to_json())
        raise
    write_split(split, g.n_nodes, out)
    checkpoint.save(params, out / "checkpoint.ngcn")
    (out / "report.json").write_text(report.to_json())
    (out / "curves.csv").write_text(report.curves_csv())
    rows = []
    for name in ("validation", "test"):
        edges = getattr(split, name)
        if len(edges):
            rows.append((name, rmse_mae(edges.weight, predict(params, g, split.train, edges))))
    _write_metrics(out / "metrics.csv", rows)
    return ["train.txt", "validation.txt", "test.txt", "split.json", "checkpoint.ngcn",
            "report.json", "curves.csv", "metrics.csv"]


def cmd_evaluate(args, cfg) -> list[str]:
    g = load_dataset(cfg)
    split = _load_split(g, cfg, args)
    params = checkpoint.load(args.checkpoint)
    if params.n_nodes != g.n_nodes:
        raise ValueError(f"checkpoint has {params.n_nodes} nodes, dataset has {g.n_nodes}")
    out = _out_dir(cfg)
    m = rmse_mae(split.test.weight, predict(params, g, split.train, split.test))
    _write_metrics(out / "metrics.csv", [("test", m)])
    return ["metrics.csv"]


def cmd_gridsearch(args, cfg) -> list[str]:
    g = load_dataset(cfg)
    split = _load_split(g, cfg, args)
    out = _out_dir(cfg)
    best, reports = grid_search(g, split, train_config(cfg), etas=_float_list(cfg, "eta_grid"),
                                lambdas=_float_list(cfg, "lambda_grid"), n_jobs=cfg["n_jobs"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eta", "lambda", "best_epoch", "val_rmse", "test_rmse", "test_mae", "error"])
    for r in reports:
        w.writerow([r.config["eta"], r.config["lam"], r.best_epoch, repr(r.best_val_rmse),
                    repr(r.test_rmse), repr(r.test_mae), r.error or ""])
    (out / "grid.csv").write_text(buf.getvalue())
    (out / "best.cfg").write_text(f"eta = {best.eta!r}\nlambda = {best.lam!r}\n")
    (out / "reports.json").write_text(json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    return ["grid.csv", "best.cfg", "reports.json"]


def cmd_compare(args, cfg) -> list[str]:
    g = load_dataset(cfg)
    out = _out_dir(cfg)
    models = [m.strip() for m in str(cfg["models"]).split(",") if m.strip()]
    bad = [m for m in models if m not in MODEL_KINDS]
    if bad or not models:
        raise UsageError(f"invalid values for config keys: models ({', '.join(bad)})")
    tc = train_config(cfg)
    results = {m: cross_validate(g, m, tc, n_reps=cfg["n_reps"], n_jobs=cfg["n_jobs"]) for m in models}
    name = Path(cfg["dataset"]).stem
    table = ComparisonTable.from_results(name, results)
    (out / "comparison.csv").write_text(table.to_csv())
    ref = "ngcn" if "ngcn" in models else None
    (out / "comparison.txt").write_text(table.render(ref))
    (out / "reports.json").write_text(json.dumps(
        {m: [r.to_dict() for r in res.reports] for m, res in results.items()}, indent=2) + "\n")
    return ["comparison.csv", "comparison.txt", "reports.json"]


def stats_report(table: ComparisonTable, reference: str | None = None) -> dict:
    reference = reference or table.models[-1]
    if reference not in table.models:
        raise UsageError(f"reference model {reference!r} not in table")
    fr = friedman_mean_ranks(table)
    ref = table.column(reference)
    wil = {}
    for m in table.models:
        if m == reference:
            continue
        try:
            r = wilcoxon_signed_rank(table.column(m) - ref)
            wil[m] = {"r_plus": r.r_plus, "r_minus": r.r_minus, "p_value": r.p_value, "n": r.n}
        except ValueError as exc:
            wil[m] = {"error": str(exc)}
    return {"reference": reference, "friedman": fr.as_dict(), "wilcoxon": wil}


def format_stats(report: dict) -> str:
    lines = ["Friedman mean ranks (lower is better)"]
    for m, r in report["friedman"]["mean_ranks"].items():
        lines.append(f"  {m:<12} {r:.3f}")
    lines.append(f"  chi-square = {report['friedman']['chi_square']:.4f}, p = {report['friedman']['p_value']:.6g}")
    lines.append("")
    lines.append("Wilcoxon signed-rank (one-sided, positive = reference better)")
    for m, r in report["wilcoxon"].items():
        label = f"{report['reference']} vs {m}"
        if "error" in r:
            lines.append(f"  {label:<16} {r['error']}")
        else:
            lines.append(f"  {label:<16} R+={r['r_plus']:g}  R-={r['r_minus']:g}  p={r['p_value']:.6f}")
    return "\n".join(lines) + "\n"


def cmd_stats(args, cfg) -> list[str]:
    table = ComparisonTable.from_csv(Path(args.results).read_text())
    out = _out_dir(cfg)
    report = stats_report(table, args.reference)
    (out / "stats.json").write_text(json.dumps(report, indent=2) + "\n")
    (out / "stats.txt").write_text(format_stats(report))
    return ["stats.json", "stats.txt"]


COMMANDS = {
    "fetch": cmd_fetch,
    "split": cmd_split,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "gridsearch": cmd_gridsearch,
    "compare": cmd_compare,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ngcn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", parents=[common], help="download a matrix from the SuiteSparse collection")
    p.add_argument("matrix", help="GROUP/NAME, e.g. ML_Graph/plantsmargin_12NN")
    p.add_argument("--dest", default="data")
    p.add_argument("--url-base", default=COLLECTION_URL)

    sub.add_parser("split", parents=[common], help="write a seeded 70/10/20 edge split")
    p = sub.add_parser("train", parents=[common], help="train one model")
    p.add_argument("--split", help="split.json from a previous split command")
    p = sub.add_parser("evaluate", parents=[common], help="score a checkpoint on the test edges")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", help="split.json from a previous split command")
    p = sub.add_parser("gridsearch", parents=[common], help="search eta x lambda on the validation edges")
    p.add_argument("--split", help="split.json from a previous split command")
    sub.add_parser("compare", parents=[common], help="cross-validate several models into a comparison table")
    p = sub.add_parser("stats", parents=[common], help="Friedman and Wilcoxon tests over a results CSV")
    p.add_argument("--results", required=True, help="CSV with columns dataset,metric,model,mean[,std]")
    p.add_argument("--reference", help="model compared against all others (default: last column)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        cfg = resolve_config(args.config, args.set, args.seed, args.out)
        artifacts = COMMANDS[args.command](args, cfg)
        if args.command != "fetch":
            _write_manifest(_out_dir(cfg), args.command, args, cfg, started, artifacts, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (MatrixMarketError, checkpoint.CheckpointError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
