"""Command-line front end: load or generate a matrix, run one algorithm,
write a JSON report (and optionally the factors)."""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .core import (BudgetExceededError, InvalidInputError, NumericalError,
                   SeededRng, check_p, entrywise_norm, numerical_rank)
from .css import CssConfig, css_factor_pair
from .fpt import FptBudget, rounding_guessing_eps_approximation
from .io import read_matrix, write_matrix
from .oracle import (brute_force_opt, hard_instance, hardness_scan,
                     planted_instance, svd_baseline)
from .rankreduce import BlockEnumConfig, poly_k_error_and_rank, poly_k_not_bicriteria
from .sketch import sketch_property_suite
from .solvers import multi_response_regression

SCHEMA_VERSION = 1
ALGORITHMS = ("css", "polyk", "polyk-exact", "fpt", "sketch-check", "hardness-scan", "oracle")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4


@dataclass
class RunConfig:
    algorithm: str = "css"
    input: Optional[str] = None
    gen: Optional[str] = None
    k: int = 1
    p: float = 1.0
    eps: float = 0.25
    seed: int = 0
    oracle_restarts: int = 0
    f: float = 8.0
    css: dict = field(default_factory=dict)
    block: dict = field(default_factory=dict)
    fpt: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)
    factors_out: Optional[str] = None

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise InvalidInputError(f"unknown algorithm {self.algorithm!r}")
        check_p(self.p)
        if self.k < 1:
            raise InvalidInputError("k must be at least 1")
        if self.algorithm == "fpt" and not (0.0 < self.eps < 1.0):
            raise InvalidInputError("eps must lie in (0, 1)")
        needs_matrix = self.algorithm not in ("sketch-check", "hardness-scan")
        if needs_matrix and not (self.input or self.gen):
            raise InvalidInputError("one of --input or --gen is required")


def parse_gen(text: str) -> tuple[str, dict[str, float]]:
    """'planted:n=40,d=40,k=2,noise=0.1' -> ('planted', {...})."""
    kind, _, rest = text.partition(":")
    params: dict[str, Any] = {}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise InvalidInputError(f"bad generator parameter {item!r}")
        try:
            params[key.strip()] = float(val) if any(c in val for c in ".e") else int(val)
        except ValueError:
            params[key.strip()] = val.strip()
    return kind.strip(), params


def load_matrix(cfg: RunConfig) -> tuple[np.ndarray, dict]:
    if cfg.input:
        try:
            return read_matrix(cfg.input), {"source": cfg.input}
        except (OSError, ValueError) as exc:
            raise InvalidInputError(f"cannot read {cfg.input}: {exc}") from exc
    kind, prm = parse_gen(cfg.gen)
    if kind == "planted":
        inst = planted_instance(int(prm.get("n", 40)), int(prm.get("d", 40)),
                                int(prm.get("k", cfg.k)), float(prm.get("noise", 0.1)),
                                cfg.p, cfg.seed, noise=str(prm.get("model", "gaussian")))
        return inst.A, {"source": cfg.gen, "noise_norm_p": inst.noise_norm_p}
    if kind == "hard":
        inst = hard_instance(int(prm.get("k", cfg.k)), int(prm.get("n", 2 * cfg.k)), cfg.seed)
        return inst.M, {"source": cfg.gen}
    if kind == "gaussian":
        gen = SeededRng(cfg.seed).stream("gaussian").generator
        return gen.standard_normal((int(prm.get("n", 20)), int(prm.get("d", 20)))), \
            {"source": cfg.gen}
    raise InvalidInputError(f"unknown generator {kind!r}")


def _ratio(num: float, den: float, floor: float) -> float:
    return (num + floor) / (den + floor)


def run(cfg: RunConfig) -> dict:
    """Execute one configured run and return the report dictionary."""
    cfg.validate()
    t0 = time.perf_counter()
    report: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "algorithm": cfg.algorithm,
                              "seed": cfg.seed, "config": asdict(cfg)}
    if cfg.algorithm == "sketch-check":
        suite = sketch_property_suite(cfg.seed, cfg.p, int(cfg.scan.get("draws", 10)))
        report["checks"] = suite
        report["passed"] = sum(v["passed"] for v in suite.values())
        report["failed"] = len(suite) - report["passed"]
        report["wall_time"] = time.perf_counter() - t0
        return report
    if cfg.algorithm == "hardness-scan":
        ks = cfg.scan.get("ks", [cfg.k])
        stats = hardness_scan(ks, int(cfg.scan.get("subsets", 200)),
                              range(int(cfg.scan.get("seeds", 10))), cfg.p,
                              int(cfg.scan.get("n_factor", 2)))
        report["median_statistic"] = {str(k): v for k, v in stats.items()}
        report["wall_time"] = time.perf_counter() - t0
        return report

    A, source = load_matrix(cfg)
    report["input"] = source
    report["shape"] = list(A.shape)
    p, k = cfg.p, cfg.k
    css_cfg = CssConfig.from_dict(cfg.css)
    block_cfg = BlockEnumConfig.from_dict(cfg.block) if cfg.block else BlockEnumConfig()
    left = right = None
    achieved = None
    if cfg.algorithm == "css":
        fp, res = css_factor_pair(A, k, p, cfg.seed, css_cfg)
        left, right, achieved = fp.left, fp.right, fp.achieved_error_p
        report["columns_selected"] = res.selected.tolist()
        report["rounds"] = res.rounds
    elif cfg.algorithm == "polyk":
        pk = poly_k_error_and_rank(A, k, p, cfg.seed, block_cfg, css_cfg)
        X, _ = multi_response_regression(pk.U, A, p)
        left, right = pk.U, X
        achieved = entrywise_norm(left @ right - A, p)
        report["columns_selected"] = pk.columns.tolist()
        report["branch"] = pk.branch
    elif cfg.algorithm == "polyk-exact":
        fp = poly_k_not_bicriteria(A, k, p, cfg.seed, block_cfg, css_cfg)
        left, right, achieved = fp.left, fp.right, fp.achieved_error_p
    elif cfg.algorithm == "fpt":
        budget = FptBudget.from_dict(cfg.fpt)
        fp = rounding_guessing_eps_approximation(A, k, cfg.eps, p, budget, cfg.seed, cfg.f,
                                                 block_cfg=block_cfg, css_cfg=css_cfg)
        left, right, achieved = fp.left, fp.right, fp.achieved_error_p
        report["best_t"] = fp.info.get("best_t")
    elif cfg.algorithm == "oracle":
        achieved = brute_force_opt(A, k, p, max(cfg.oracle_restarts, 1), cfg.seed)

    norm_A = entrywise_norm(A, p)
    floor = 1e-12 * max(norm_A, 1e-300)
    svd = svd_baseline(A, k, p)
    report["achieved_error_p"] = achieved
    report["baseline_svd_error"] = svd
    report["ratio_floor"] = floor
    report["ratio_vs_svd"] = _ratio(achieved, svd, floor)
    oracle = None
    if cfg.oracle_restarts > 0 and cfg.algorithm != "oracle":
        oracle = brute_force_opt(A, k, p, cfg.oracle_restarts, cfg.seed)
    elif cfg.algorithm == "oracle":
        oracle = achieved
    report["oracle_opt"] = oracle
    report["ratio_vs_oracle"] = None if oracle is None else _ratio(achieved, oracle, floor)
    report["rank_of_output"] = None if left is None else numerical_rank(left @ right)
    if cfg.factors_out and left is not None:
        stem = Path(cfg.factors_out)
        write_matrix(stem.with_name(stem.name + "_left.mtx"), left)
        write_matrix(stem.with_name(stem.name + "_right.mtx"), right)
    report["wall_time"] = time.perf_counter() - t0
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lplra", description="Entrywise l_p low-rank approximation")
    ap.add_argument("--config", help="JSON config file; flags override its values")
    ap.add_argument("--algo", choices=ALGORITHMS)
    ap.add_argument("--input", help="matrix file (.mtx or .csv)")
    ap.add_argument("--gen", help="generator, e.g. planted:n=40,d=40,k=2,noise=0.1")
    ap.add_argument("--k", type=int)
    ap.add_argument("--p", type=float)
    ap.add_argument("--eps", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--f", type=float)
    ap.add_argument("--oracle-restarts", type=int)
    ap.add_argument("--out", help="report path (default: stdout)")
    ap.add_argument("--factors-out", help="path stem for left/right factor .mtx files")
    ap.add_argument("--budget-sketch-rows", type=int)
    ap.add_argument("--budget-grid-values", type=int)
    ap.add_argument("--budget-max-guesses", type=int)
    ap.add_argument("--budget-mode", choices=("oracle_guided", "full_enumeration"))
    ap.add_argument("--budget-subset-cap", type=int)
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot load config {args.config}: {exc}") from exc
        if "algo" in data:
            data["algorithm"] = data.pop("algo")
        unknown = set(data) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**data)
    for flag, attr in (("algo", "algorithm"), ("input", "input"), ("gen", "gen"),
                       ("k", "k"), ("p", "p"), ("eps", "eps"), ("seed", "seed"),
                       ("f", "f"), ("oracle_restarts", "oracle_restarts"),
                       ("factors_out", "factors_out")):
        val = getattr(args, flag)
        if val is not None:
            setattr(cfg, attr, val)
    budget = dict(cfg.fpt)
    for flag, key in (("budget_sketch_rows", "sketch_rows"),
                      ("budget_grid_values", "grid_values_per_entry"),
                      ("budget_max_guesses", "max_guesses"), ("budget_mode", "mode"),
                      ("budget_subset_cap", "subset_cap")):
        val = getattr(args, flag)
        if val is not None:
            budget[key] = val
    cfg.fpt = budget
    return cfg


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run(cfg)
    except (InvalidInputError, TypeError, ValueError) as exc:
        code, error = EXIT_CONFIG, _error("config", exc)
    except BudgetExceededError as exc:
        code, error = EXIT_BUDGET, _error("budget", exc)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        code, error = EXIT_NUMERIC, _error("numeric", exc)
    else:
        _emit(report, args.out)
        return EXIT_OK
    _emit({"schema_version": SCHEMA_VERSION, "error": error}, args.out)
    return code


def _error(kind: str, exc: BaseException) -> dict:
    return {"type": kind, "exception": type(exc).__name__, "message": str(exc)}


if __name__ == "__main__":
    sys.exit(main())
