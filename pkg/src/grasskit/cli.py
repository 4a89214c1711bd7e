"""Experiment orchestration.

Four config-driven experiment kinds:

* ``geometry-selftest``  - the seeded invariant suites;
* ``sharp-dimension``    - box-count slope of the union of a sharp-example
                           family across a dyadic scale sweep;
* ``kakeya-sweep``       - counting-inequality ratios across scales and
                           exponents;
* ``bl-audit``           - certified transverse tuples checked against the
                           closed-form functional ceiling.

Runs are deterministic given (config, seed): all randomness is Philox
keyed by the seed, reports are written atomically, and worker count never
changes numerical output (units are merged in sorted key order).

Exit codes: 0 run completed and all flags passed, 1 completed with failed
flags, 2 config error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import __version__, kakeya, selftest
from .discretize import box_count, box_dimension_fit
from .errors import ResourceCapError
from .kakeya import FamilyParams, admissible_p_max
from .sampling import rng_for

EXPERIMENTS = ("geometry-selftest", "sharp-dimension", "kakeya-sweep", "bl-audit")

DEFAULT_CONSTANTS = {
    "eps": 0.1,
    "K": None,            # broad-narrow scale; None = feasible default
    "C1": None,           # narrow-witness radius constant
    "c_tilde": None,      # greedy step constant
    "c_prime": None,      # certificate volume constant
    "rangeofp_k": "m",    # symbol reading in the exponent-range formula
    "ratio_bound": 10.0,
    "growth_bound": 2.0,
    "tuples": 100,
    "slope_tol": 0.15,
    "suite_scale": 1.0,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    params: FamilyParams | None
    deltas: list[float]
    p_values: list[float]
    seed: int
    constants: dict
    workers: int
    out: str | None
    csv: str | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "experiment": self.experiment,
            "params": self.params.to_dict() if self.params else None,
            "deltas": self.deltas,
            "p_values": self.p_values,
            "seed": self.seed,
            "constants": self.constants,
            "workers": self.workers,
            "out": self.out,
            "csv": self.csv,
        }


def _is_dyadic(x: float) -> bool:
    if x <= 0:
        return False
    k = math.log2(1.0 / x)
    return abs(k - round(k)) <= 1e-9


def parse_config(data: dict, overrides: dict | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    overrides = overrides or {}
    kind = data.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {kind!r}")

    params = None
    if data.get("params") is not None:
        raw = data["params"]
        try:
            params = FamilyParams.from_dict(raw)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"params is missing a field: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if kind != "geometry-selftest" and params is None:
        raise ConfigError(f"experiment {kind} requires params")

    deltas = [float(d) for d in data.get("deltas", [])]
    if kind in ("sharp-dimension", "kakeya-sweep"):
        if len(deltas) < 2:
            raise ConfigError("need at least two scales in deltas")
        if any(not _is_dyadic(d) for d in deltas):
            raise ConfigError("deltas must be dyadic (powers of 1/2)")
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError("deltas must be strictly decreasing")

    p_values = [float(p) for p in data.get("p_values", [])]
    constants = dict(DEFAULT_CONSTANTS)
    extra = data.get("constants", {}) or {}
    unknown = set(extra) - set(constants)
    if unknown:
        raise ConfigError(f"unknown constants: {sorted(unknown)}")
    constants.update(extra)
    if constants["rangeofp_k"] not in ("m", "l"):
        raise ConfigError("rangeofp_k must be 'm' or 'l'")

    seed = int(overrides.get("seed", data.get("seed", 0)))
    workers = int(overrides.get("workers",
                                data.get("workers",
                                         os.environ.get("GRASSKIT_WORKERS", 1))))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    out = overrides.get("out", data.get("out"))
    return ExperimentConfig(kind, params, deltas, p_values, seed, constants,
                            workers, out, data.get("csv"))


def load_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(data, overrides)


def _p_list(cfg: ExperimentConfig) -> list[float]:
    if cfg.p_values:
        return cfg.p_values
    par = cfg.params
    k_value = par.m if cfg.constants["rangeofp_k"] == "m" else par.l
    p_max = admissible_p_max(par.l, par.m, par.d, par.beta, k_value)
    if cfg.experiment == "bl-audit":
        return [1.0, p_max]
    return [1.0, p_max / 2.0 + 0.5, p_max]


# ------------------------------------------------------------- work units

def _sharp_unit(arg: tuple) -> dict:
    params_dict, delta = arg
    params = FamilyParams.from_dict(params_dict)
    family = kakeya.generate_sharp_example(params, delta)
    points = kakeya.union_sample_points(family)
    count = box_count(points, delta)
    return {"delta": delta, "members": len(family), "box_count": count}


def _kakeya_unit(arg: tuple) -> dict:
    params_dict, delta, p_values, eps = arg
    params = FamilyParams.from_dict(params_dict)
    family = kakeya.generate_sharp_example(params, delta)
    counter = kakeya.overlap_counter(family)
    total = family.total_slab_measure()
    rows = []
    for p in p_values:
        lhs = kakeya.lp_counting_norm(family, p, counter=counter)
        exponent = ((params.m - params.l) * (params.d - params.m)
                    * (1.0 - 1.0 / p) + eps)
        rhs = delta ** (-exponent) * total ** (1.0 / p)
        rows.append({"delta": delta, "p": p, "members": len(family),
                     "lhs": lhs, "rhs": rhs,
                     "ratio": lhs / rhs if rhs > 0 else math.inf})
    return {"delta": delta, "rows": rows}


def _bl_unit(arg: tuple) -> dict:
    params_dict, index, seed, p_values, K = arg
    params = FamilyParams.from_dict(params_dict)
    tup = kakeya.random_transverse_tuple(params, rng_for(seed, 90, index), K=K)
    rows = []
    for p in p_values:
        rep = kakeya.verify_bl_bound(tup, params, p, rng_for(seed, 91, index))
        rows.append({"tuple": index, "p": p, "lower": rep.instance.best_value,
                     "rhs": rep.rhs, "ok": rep.ok, "volume": tup.volume,
                     "threshold": tup.threshold})
    return {"tuple": index, "rows": rows}


def _run_units(fn, units: list, workers: int) -> list:
    if workers <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, units))


# ------------------------------------------------------------ experiments

def run_experiment(cfg: ExperimentConfig) -> dict:
    started = time.perf_counter()
    if cfg.experiment == "geometry-selftest":
        suites = selftest.run_all(cfg.seed, cfg.constants["suite_scale"])
        records = [{"suite": name, **res} for name, res in suites.items()]
        for rec in records:
            rec.pop("runtime", None)
        passed = all(res["passed"] for res in suites.values())
        summary = {"suites_passed": passed}
    elif cfg.experiment == "sharp-dimension":
        units = [(cfg.params.to_dict(), d) for d in cfg.deltas]
        records = _run_units(_sharp_unit, units, cfg.workers)
        records.sort(key=lambda r: -r["delta"])
        fit = box_dimension_fit([r["delta"] for r in records],
                                [r["box_count"] for r in records])
        target = cfg.params.union_dimension_target
        passed = abs(fit.slope - target) <= cfg.constants["slope_tol"]
        summary = {"slope": fit.slope, "intercept": fit.intercept,
                   "residual": fit.residual, "target": target,
                   "tolerance": cfg.constants["slope_tol"]}
    elif cfg.experiment == "kakeya-sweep":
        p_values = _p_list(cfg)
        eps = cfg.constants["eps"]
        units = [(cfg.params.to_dict(), d, p_values, eps) for d in cfg.deltas]
        blocks = _run_units(_kakeya_unit, units, cfg.workers)
        blocks.sort(key=lambda b: -b["delta"])
        records = [row for b in blocks for row in b["rows"]]
        ratio_bound = cfg.constants["ratio_bound"]
        growth_bound = cfg.constants["growth_bound"]
        flags = {}
        for p in p_values:
            seq = [r["ratio"] for r in records if r["p"] == p]
            growth = max((b / a for a, b in zip(seq, seq[1:]) if a > 0),
                         default=1.0)
            flags[f"p={p:.6g}"] = {
                "bounded": all(r <= ratio_bound for r in seq),
                "max_ratio": max(seq), "max_growth": growth,
                "growth_ok": growth <= growth_bound + 1e-9,
            }
        passed = all(f["bounded"] and f["growth_ok"] for f in flags.values())
        summary = {"p_values": p_values, "eps": eps, "flags": flags}
    else:  # bl-audit
        p_values = _p_list(cfg)
        n_tuples = int(cfg.constants["tuples"])
        units = [(cfg.params.to_dict(), i, cfg.seed, p_values,
                  cfg.constants["K"]) for i in range(n_tuples)]
        blocks = _run_units(_bl_unit, units, cfg.workers)
        blocks.sort(key=lambda b: b["tuple"])
        records = [row for b in blocks for row in b["rows"]]
        violations = [r for r in records if not r["ok"]]
        passed = not violations
        summary = {"tuples": n_tuples, "p_values": p_values,
                   "violations": len(violations)}

    return {
        "schema_version": 1,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "records": records,
        "summary": summary,
        "passed": passed,
        "timing": {"total_seconds": time.perf_counter() - started},
    }


# ----------------------------------------------------------------- output

def write_report(report: dict, path: str) -> None:
    """Atomic write: temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(report: dict, path: str) -> None:
    records = report.get("records", [])
    if not records:
        return
    keys = sorted({k for r in records for k in r if not isinstance(r[k], (dict, list))})
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in records:
            fh.write(",".join(str(r.get(k, "")) for k in keys) + "\n")


# -------------------------------------------------------------------- cli

def _error_record(kind: str, message: str) -> str:
    return json.dumps({"error": kind, "message": message})


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="grasskit",
        description="Grassmannian-chart counting experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--workers", type=int, default=None)
    run_p.add_argument("--out", default=None)

    val_p = sub.add_parser("validate", help="parse and constraint-check a config")
    val_p.add_argument("--config", required=True)

    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as exc:
            print(_error_record("config", str(exc)))
            return 2
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out"] = args.out
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(_error_record("config", str(exc)))
        return 2
    try:
        report = run_experiment(cfg)
    except ResourceCapError as exc:
        print(_error_record("resource-cap", str(exc)))
        return 3
    if cfg.out:
        write_report(report, cfg.out)
        if cfg.csv:
            write_csv(report, cfg.csv)
        print(json.dumps({"out": cfg.out, "passed": report["passed"]}))
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
