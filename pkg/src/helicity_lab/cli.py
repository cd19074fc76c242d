"""Command-line driver: ``helicity-lab run <experiment>`` and ``helicity-lab list``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from .experiments import REGISTRY, ExperimentConfig, list_experiments, run_experiment


def load_config(path: str | None) -> dict:
    """Read a YAML (or JSON) config file; an empty or missing path gives {}."""
    if not path:
        return {}
    data = yaml.safe_load(Path(path).read_text())
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must be a mapping")
    return data


def build_config(name: str, file_cfg: dict, args) -> ExperimentConfig:
    data = dict(file_cfg)
    # a shared config may hold per-experiment sections
    per = data.pop("experiments", {}) or {}
    data = {**data, **(per.get(name) or {})}
    if "experiment" in data and data["experiment"] != name:
        data.pop("experiment")
    for key in ("n", "L", "seed", "out"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    return ExperimentConfig.from_dict(data, name=name)


def _run_one(cfg: ExperimentConfig):
    rec = run_experiment(cfg)
    return rec.experiment, rec.config_hash, rec.passed, rec.checks, rec.error, rec.wall_time


def _report(name, h, passed, checks, error, wall, out) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] {name} ({h}, {wall:.1f} s) -> {Path(out) / name / h}")
    for key, c in checks.items():
        mark = "ok " if c["passed"] else "BAD"
        print(f"    {mark} [{c['criterion']:>2}] {key}: {c['detail']}")
    if error:
        print(f"    error: {error}")


def cmd_run(args) -> int:
    names = list(REGISTRY) if args.experiment == ["all"] else args.experiment
    unknown = [n for n in names if n not in REGISTRY]
    if unknown:
        print(f"unknown experiment(s): {', '.join(unknown)}; try 'helicity-lab list'", file=sys.stderr)
        return 2
    file_cfg = load_config(args.config)
    cfgs = [build_config(n, file_cfg, args) for n in names]
    ok = True
    if args.jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, cfgs))
    else:
        results = [_run_one(c) for c in cfgs]
    for cfg, res in zip(cfgs, results):
        _report(*res, cfg.resolved().out)
        ok &= res[2]
    return 0 if ok else 1


def cmd_list(args) -> int:
    cat = list_experiments()
    if args.json:
        print(json.dumps(cat, indent=2))
        return 0
    width = max(len(e["name"]) for e in cat)
    for e in cat:
        crit = ",".join(str(c) for c in e["criteria"])
        print(f"{e['name']:<{width}}  {'[' + crit + ']':<8} {e['citation']}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="helicity-lab", description="Helicity and Poisson-action verification experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one or more experiments ('all' for the registry)")
    r.add_argument("experiment", nargs="+")
    r.add_argument("--config", help="YAML or JSON config file")
    r.add_argument("--n", type=int)
    r.add_argument("--L", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1, help="experiments run in parallel processes")
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list registered experiments")
    ls.add_argument("--json", action="store_true")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
