"""Command-line entry point: ``kgmi <verb> --seed N --out-dir DIR [options]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .decoder import combined_heatmap, heatmap_csv, heatmap_svg
from .errors import ConfigError, KgmiError
from .experiments import (ExperimentConfig, build_instance, collapse_demo, compare_f, invariant_checks,
                          run_experiment, sweep_delta, sweep_T)
from .estimator import estimate_table
from .graph import adjacency_to_csv
from .sampler import sample_dataset

log = logging.getLogger("kgmi")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3

VERBS = ("run", "sweep-t", "sweep-delta", "compare-f", "collapse-demo", "estimate-table", "check-invariants")

# flag name -> config field
OVERRIDES = {
    "graph": "graph", "copies": "copies", "f": "f", "mode": "mode", "eta": "eta", "tau": "tau",
    "eps_attn": "eps_attn", "threshold": "threshold", "N": "N", "kappa": "kappa", "n_boot": "n_boot",
    "log_every": "log_every", "repeats": "repeats", "f_list": "f_list", "gap_threshold": "gap_threshold",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgmi", description=__doc__)
    ap.add_argument("verb", choices=VERBS)
    ap.add_argument("--config", type=Path, help="JSON experiment config")
    ap.add_argument("--seed", type=int, help="master seed (required except for check-invariants)")
    ap.add_argument("--out-dir", type=Path, help="output directory (required except for check-invariants)")
    ap.add_argument("--graph", help="five | ten | nonuniform_ten")
    ap.add_argument("--copies", type=int)
    ap.add_argument("--p", type=float, nargs=9, metavar="P", help="benchmark kernel offsets p0..p8")
    ap.add_argument("--f", help="KL | PearsonChi2 | NeymanChi2 | SquaredHellinger")
    ap.add_argument("--mode", choices=("population", "estimated", "naive"))
    ap.add_argument("--eta", type=float)
    ap.add_argument("--tau", type=int)
    ap.add_argument("--eps-attn", dest="eps_attn", type=float)
    ap.add_argument("--threshold", type=float)
    ap.add_argument("--N", type=int)
    ap.add_argument("--kappa", type=float)
    ap.add_argument("--n-boot", dest="n_boot", type=int)
    ap.add_argument("--log-every", dest="log_every", type=int)
    ap.add_argument("--repeats", type=int, nargs="+")
    ap.add_argument("--f-list", dest="f_list", nargs="+")
    ap.add_argument("--gap-threshold", dest="gap_threshold", type=float)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    for flag, key in OVERRIDES.items():
        val = getattr(args, flag)
        if val is not None:
            raw[key] = val
    if args.p is not None:
        raw["kernel"] = {"paper_kernel": {"p": list(args.p)}}
    if args.verb == "sweep-delta" and "eps_attn" not in raw:
        raw["eps_attn"] = 0.001
    if args.verb == "estimate-table":
        raw.setdefault("mode", "estimated")
        raw.setdefault("f", "PearsonChi2")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out_dir is not None:
        raw["out_dir"] = str(args.out_dir)
    try:
        return ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text)


def _rows_csv(rows: list[dict], fields: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _dump(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.integer, np.floating)):
            return o.item()
        raise TypeError(type(o))
    return json.dumps(obj, indent=2, default=default) + "\n"


def cmd_run(cfg: ExperimentConfig, out: Path) -> int:
    res = run_experiment(cfg)
    _write(out, "trajectory.csv", res.trajectory.to_csv())
    _write(out, "attention.json", res.trajectory.final.to_json())
    heat = combined_heatmap(res.trajectory.final.attn)
    _write(out, "heatmap.csv", heatmap_csv(heat))
    _write(out, "heatmap.svg", heatmap_svg(heat))
    _write(out, "adjacency.csv", adjacency_to_csv(res.decoded.A_hat))
    _write(out, "table.json", res.table.to_json())
    if res.se is not None:
        _write(out, "table_se.json", _dump({"se": res.se}))
    report = res.report()
    _write(out, "report.json", _dump(report))
    print(f"F1={res.score.f1:.3f} SHD={res.score.shd} stop_epoch={res.trajectory.stop_epoch} "
          f"runtime={res.score.runtime:.3f}s")
    return EXIT_OK


def cmd_sweep_t(cfg: ExperimentConfig, out: Path) -> int:
    res = sweep_T(cfg)
    _write(out, "sweep_t.csv", _rows_csv(res["rows"], ["copies", "T", "delta", "stop_epoch"]))
    _write(out, "sweep_t.json", _dump({"config": cfg.to_dict(), **res}))
    for row in res["rows"]:
        print(f"T={row['T']} stop_epoch={row['stop_epoch']}")
    if res["fit"]:
        print(f"fit vs T^2 log T: R^2={res['fit']['r2']:.4f}")
    return EXIT_OK


def cmd_sweep_delta(cfg: ExperimentConfig, out: Path) -> int:
    res = sweep_delta(cfg)
    rows = [{**r, "p": " ".join(map(str, r["p"]))} for r in res["rows"]]
    _write(out, "sweep_delta.csv", _rows_csv(rows, ["p", "delta", "stop_epoch"]))
    _write(out, "sweep_delta.json", _dump({"config": cfg.to_dict(), **res}))
    for row in res["rows"]:
        print(f"delta={row['delta']:.6g} stop_epoch={row['stop_epoch']}")
    if res["fit"]:
        print(f"fit vs 1/delta: R^2={res['fit']['r2']:.4f}")
    return EXIT_OK


def cmd_compare_f(cfg: ExperimentConfig, out: Path) -> int:
    res = compare_f(cfg)
    _write(out, "compare_f.csv", _rows_csv(res["rows"], ["f", "delta", "I_max", "epoch_to_gap", "stop_epoch"]))
    curves = res.pop("curves")
    length = max(len(c) for c in curves.values())
    cols = {f: np.pad(c, (0, length - len(c)), constant_values=np.nan) for f, c in curves.items()}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *cols])
    step = max(1, cfg.log_every)
    for t in range(0, length, step):
        w.writerow([t, *(f"{cols[f][t]:.10g}" for f in cols)])
    _write(out, "gap_curves.csv", buf.getvalue())
    _write(out, "compare_f.json", _dump({"config": cfg.to_dict(), **res}))
    print("delta ranking:", " > ".join(res["delta_ranking"]))
    print("speed ranking:", " < ".join(res["speed_ranking"]))
    return EXIT_OK


def cmd_collapse_demo(cfg: ExperimentConfig, out: Path) -> int:
    res = collapse_demo(cfg)
    _write(out, "collapse_demo.json", _dump(res))
    for f, entry in res.items():
        for mode, r in entry.items():
            print(f"{f} {mode}: collapsed nodes {r['collapsed_nodes']} F1={r['score']['F1']:.3f}")
    return EXIT_OK


def cmd_estimate_table(cfg: ExperimentConfig, out: Path) -> int:
    inst = build_instance(cfg)
    ds = sample_dataset(inst.dag, inst.kernel, inst.stats, cfg.N, cfg.seed, extended=True)
    table, se = estimate_table(ds, inst.dag, cfg.kappa, cfg.n_boot, cfg.seed)
    _write(out, "dataset.csv", ds.to_text())
    _write(out, "table.json", table.to_json())
    _write(out, "table_se.json", _dump({"se": se}))
    print(f"N={ds.N} delta={table.delta:.6g} max_se={se.max():.4g}")
    return EXIT_OK


def cmd_check(cfg: ExperimentConfig, out: Path | None) -> int:
    res = invariant_checks(cfg)
    if out is not None:
        _write(out, "invariants.json", _dump(res))
    for name, r in res["asserted"].items():
        print(f"{'ok  ' if r['ok'] else 'FAIL'} {name}: {r['value']:.3g} (limit {r['limit']:.3g})")
    for name, v in res["reported"].items():
        print(f"info {name}: {v:.6g}")
    return EXIT_OK if res["ok"] else EXIT_CHECK


COMMANDS = {
    "run": cmd_run, "sweep-t": cmd_sweep_t, "sweep-delta": cmd_sweep_delta, "compare-f": cmd_compare_f,
    "collapse-demo": cmd_collapse_demo, "estimate-table": cmd_estimate_table,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.verb != "check-invariants" and (args.seed is None or args.out_dir is None):
            raise ConfigError("--seed and --out-dir are required")
        cfg = resolve_config(args)
        out = Path(cfg.out_dir) if cfg.out_dir else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        if args.verb == "check-invariants":
            return cmd_check(cfg, out)
        return COMMANDS[args.verb](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KgmiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
