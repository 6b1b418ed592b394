"""Command-line front end: run or compare solvers on the benchmark problems.

Configs are flat key-value text, one dotted key per line::

    problem.kind = mlr
    problem.n_classes = 5
    solver.method = pnkhb
    solver.max_rank = 20
    seed = 0

Subcommands: ``run`` (one solver, one CSV), ``compare`` (solver1.*,
solver2.*, ... blocks on one problem, one CSV each plus a summary), and
``check`` (validate the config and run gradient checks only).  Exit codes:
0 success (including non-converged solver statuses), 2 config error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
import time
from pathlib import Path

import numpy as np

from .operators import BoxBounds, check_gradient
from .problems import (
    QuadraticBoxProblem,
    make_fig1_problem,
    make_synthetic_mlr,
    make_toy_ct,
)
from .projection import IpmConfig
from .solver import (
    SolverConfig,
    solve_pncg_two_metric,
    solve_pnkhb,
    solve_projected_gradient,
)

CSV_COLUMNS = [
    "iter",
    "f",
    "rel_f_reduction",
    "proj_grad_norm",
    "step_size",
    "ls_trials",
    "n_projections",
    "ipm_iters_total",
    "active_fraction",
    "operator_applies",
    "elapsed_seconds",
]

METHODS = {
    "pnkhb": solve_pnkhb,
    "projected_gradient": solve_projected_gradient,
    "pncg": solve_pncg_two_metric,
}

PROBLEM_KINDS = ("fig1", "quadratic", "mlr", "ct")


class ConfigError(Exception):
    """Invalid configuration; message is line-anchored where possible."""


class DataIoError(Exception):
    """Missing or unreadable input/output files."""


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a dense matrix from whitespace text with a 'rows cols' header."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataIoError(f"cannot read matrix file {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise ConfigError(f"{path}:1: empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise ConfigError(f"{path}:1: header must be 'rows cols'")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError:
        raise ConfigError(f"{path}:1: header must be two integers") from None
    try:
        data = np.loadtxt(lines[1:], ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed matrix body: {exc}") from None
    if rows == 0 or cols == 0:
        data = np.zeros((rows, cols))
    if data.shape != (rows, cols):
        raise ConfigError(
            f"{path}: header promises {rows}x{cols}, body is "
            f"{data.shape[0]}x{data.shape[1]}"
        )
    return data


def write_matrix(path: str | Path, arr: np.ndarray) -> None:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


class _Config:
    """Parsed key-value config with consumption tracking for typo detection."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise DataIoError(f"cannot read config {self.path}: {exc}") from exc
        self.pairs: dict[str, tuple[str, int]] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(
                    f"{self.path}:{lineno}: expected 'key = value', got {raw!r}"
                )
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{self.path}:{lineno}: empty key")
            if key in self.pairs:
                raise ConfigError(
                    f"{self.path}:{lineno}: duplicate key '{key}' "
                    f"(first set on line {self.pairs[key][1]})"
                )
            self.pairs[key] = (value, lineno)
        self._consumed: set[str] = set()

    def _raw(self, key: str):
        if key not in self.pairs:
            return None
        self._consumed.add(key)
        return self.pairs[key]

    def _error(self, key: str, lineno: int, msg: str) -> ConfigError:
        return ConfigError(f"{self.path}:{lineno}: key '{key}': {msg}")

    def get_str(self, key: str, default=None, choices=None) -> str | None:
        raw = self._raw(key)
        if raw is None:
            return default
        value, lineno = raw
        if choices is not None and value not in choices:
            raise self._error(
                key, lineno, f"must be one of {', '.join(choices)}; got {value!r}"
            )
        return value

    def get_float(self, key: str, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        value, lineno = raw
        try:
            return float(value)
        except ValueError:
            raise self._error(key, lineno, f"expected a number, got {value!r}")

    def get_int(self, key: str, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        value, lineno = raw
        try:
            return int(value)
        except ValueError:
            raise self._error(key, lineno, f"expected an integer, got {value!r}")

    def get_bool(self, key: str, default=None):
        raw = self._raw(key)
        if raw is None:
            return default
        value, lineno = raw
        lowered = value.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise self._error(key, lineno, f"expected true/false, got {value!r}")

    def require(self, key: str, getter="get_str", **kwargs):
        value = getattr(self, getter)(key, default=None, **kwargs)
        if value is None:
            raise ConfigError(f"{self.path}: missing required key '{key}'")
        return value

    def check_consumed(self) -> None:
        for key, (_, lineno) in sorted(self.pairs.items()):
            if key not in self._consumed:
                raise ConfigError(f"{self.path}:{lineno}: unknown key '{key}'")


def _build_problem(cfg: _Config, seed: int):
    kind = cfg.require("problem.kind", choices=PROBLEM_KINDS)
    if kind == "fig1":
        return make_fig1_problem()
    if kind == "quadratic":
        H = read_matrix(cfg.require("problem.h_file"))
        b = read_matrix(cfg.require("problem.b_file")).ravel()
        n = b.size
        lower_file = cfg.get_str("problem.lower_file")
        upper_file = cfg.get_str("problem.upper_file")
        lower = (
            read_matrix(lower_file).ravel()
            if lower_file
            else np.full(n, cfg.get_float("problem.lower", -np.inf))
        )
        upper = (
            read_matrix(upper_file).ravel()
            if upper_file
            else np.full(n, cfg.get_float("problem.upper", np.inf))
        )
        try:
            bounds = BoxBounds(lower, upper)
        except ValueError as exc:
            raise ConfigError(f"{cfg.path}: invalid bounds: {exc}") from None
        x0_file = cfg.get_str("problem.x0_file")
        x0 = read_matrix(x0_file).ravel() if x0_file else bounds.clamp(np.zeros(n))
        try:
            return QuadraticBoxProblem(H=H, b=b, bounds=bounds, x0=x0)
        except ValueError as exc:
            raise ConfigError(f"{cfg.path}: invalid quadratic problem: {exc}") from None
    if kind == "mlr":
        try:
            return make_synthetic_mlr(
                n_classes=cfg.get_int("problem.n_classes", 5),
                n_f=cfg.get_int("problem.n_f", 20),
                m_f=cfg.get_int("problem.m_f", 100),
                N=cfg.get_int("problem.n_samples", 2000),
                seed=seed,
                bound_magnitude=cfg.get_float("problem.bound_magnitude", 0.05),
            )
        except ValueError as exc:
            raise ConfigError(f"{cfg.path}: invalid mlr problem: {exc}") from None
    try:
        return make_toy_ct(
            image_side=cfg.get_int("problem.image_side", 8),
            n_materials=cfg.get_int("problem.n_materials", 2),
            n_energies=cfg.get_int("problem.n_energies", 8),
            n_windows=cfg.get_int("problem.n_windows", 4),
            n_angles=cfg.get_int("problem.n_angles", 12),
            seed=seed,
            upper_bound=cfg.get_float("problem.upper_bound", 1.5),
            gamma1=cfg.get_float("problem.gamma1", 0.05),
            gamma2=cfg.get_float("problem.gamma2", 0.005),
            noise_level=cfg.get_float("problem.noise_level", 1e-3),
        )
    except ValueError as exc:
        raise ConfigError(f"{cfg.path}: invalid ct problem: {exc}") from None


def _build_solver(cfg: _Config, prefix: str):
    """Read '<prefix>.*' keys into a (method, label, SolverConfig) triple."""
    method = cfg.get_str(f"{prefix}.method", "pnkhb", choices=tuple(METHODS))
    label = cfg.get_str(f"{prefix}.label")
    defaults = SolverConfig()
    ipm_defaults = IpmConfig()
    try:
        config = SolverConfig(
            max_outer=cfg.get_int(f"{prefix}.max_outer", defaults.max_outer),
            max_linesearch=cfg.get_int(
                f"{prefix}.max_linesearch", defaults.max_linesearch
            ),
            alpha=cfg.get_float(f"{prefix}.alpha", defaults.alpha),
            xtol=cfg.get_float(f"{prefix}.xtol", defaults.xtol),
            gtol=cfg.get_float(f"{prefix}.gtol", defaults.gtol),
            max_rank=cfg.get_int(f"{prefix}.max_rank", defaults.max_rank),
            shift=cfg.get_float(f"{prefix}.shift", defaults.shift),
            active_set_mode=cfg.get_str(
                f"{prefix}.active_set_mode",
                defaults.active_set_mode,
                choices=("none", "boundary", "augmented"),
            ),
            epsilon=cfg.get_float(f"{prefix}.epsilon", defaults.epsilon),
            warm_start=cfg.get_bool(f"{prefix}.warm_start", defaults.warm_start),
            mu_reset=cfg.get_bool(f"{prefix}.mu_reset", defaults.mu_reset),
            breakdown_tol=cfg.get_float(
                f"{prefix}.breakdown_tol", defaults.breakdown_tol
            ),
            ipm=IpmConfig(
                sigma=cfg.get_float(f"{prefix}.ipm_sigma", ipm_defaults.sigma),
                tau=cfg.get_float(f"{prefix}.ipm_tau", ipm_defaults.tau),
                tol=cfg.get_float(f"{prefix}.ipm_tol", ipm_defaults.tol),
                max_iter=cfg.get_int(f"{prefix}.ipm_max_iter", ipm_defaults.max_iter),
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"{cfg.path}: invalid {prefix} settings: {exc}") from None
    return method, label, config


def _write_history_csv(path: Path, history) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in history:
                writer.writerow(
                    [
                        rec.k,
                        repr(rec.f),
                        repr(rec.rel_f_reduction),
                        repr(rec.proj_grad_norm),
                        repr(rec.step_size),
                        rec.ls_trials,
                        rec.n_projections,
                        rec.ipm_iters_total,
                        repr(rec.active_fraction),
                        rec.operator_applies,
                        repr(rec.elapsed_seconds),
                    ]
                )
    except OSError as exc:
        raise DataIoError(f"cannot write history CSV {path}: {exc}") from exc


def _summary_fields(label, result, elapsed):
    final = result.history.final
    return {
        "label": label,
        "status": result.status.value,
        "iterations": result.iterations,
        "f": repr(result.f),
        "proj_grad_norm": repr(result.proj_grad_norm),
        "n_projections": sum(r.n_projections for r in result.history),
        "ipm_iters_total": sum(r.ipm_iters_total for r in result.history),
        "operator_applies": final.operator_applies if final else 0,
        "elapsed_seconds": repr(elapsed),
    }


def _print_summary(fields, quiet):
    if quiet:
        return
    print(
        "[{label}] status={status} iterations={iterations} f={f} "
        "proj_grad_norm={proj_grad_norm} projections={n_projections} "
        "ipm_iters={ipm_iters_total} operator_applies={operator_applies} "
        "elapsed={elapsed_seconds}s".format(**fields)
    )


def _resolve_out(out_dir: str, name: str) -> Path:
    p = Path(name)
    if not p.is_absolute():
        p = Path(out_dir) / p
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIoError(f"cannot create output directory {p.parent}: {exc}") from exc
    return p


def _cmd_run(cfg: _Config, args) -> int:
    seed = cfg.get_int("seed", 0)
    if args.seed is not None:
        seed = args.seed
    problem = _build_problem(cfg, seed)
    method, label, solver_cfg = _build_solver(cfg, "solver")
    out_name = cfg.get_str("output.path", "history.csv")
    cfg.check_consumed()

    t0 = time.perf_counter()
    result = METHODS[method](problem.objective(), config=solver_cfg)
    elapsed = time.perf_counter() - t0

    out_path = _resolve_out(args.out_dir, out_name)
    _write_history_csv(out_path, result.history)
    fields = _summary_fields(label or method, result, elapsed)
    _print_summary(fields, args.quiet)
    if not args.quiet:
        print(f"history written to {out_path}")
    return 0


def _sanitize(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def _cmd_compare(cfg: _Config, args) -> int:
    seed = cfg.get_int("seed", 0)
    if args.seed is not None:
        seed = args.seed
    problem = _build_problem(cfg, seed)

    block_ids = sorted(
        {
            int(m.group(1))
            for key in cfg.pairs
            for m in [re.match(r"solver(\d+)\.", key)]
            if m
        }
    )
    if len(block_ids) < 2:
        raise ConfigError(
            f"{cfg.path}: compare mode needs at least two solver blocks "
            "(solver1.*, solver2.*, ...)"
        )
    solvers = []
    for i in block_ids:
        method, label, solver_cfg = _build_solver(cfg, f"solver{i}")
        solvers.append((label or f"solver{i}_{method}", method, solver_cfg))
    labels = [s[0] for s in solvers]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{cfg.path}: duplicate solver labels: {labels}")
    cfg.check_consumed()

    objective = problem.objective()
    summaries = []
    for label, method, solver_cfg in solvers:
        t0 = time.perf_counter()
        result = METHODS[method](objective, config=solver_cfg)
        elapsed = time.perf_counter() - t0
        out_path = _resolve_out(args.out_dir, f"{_sanitize(label)}.csv")
        _write_history_csv(out_path, result.history)
        fields = _summary_fields(label, result, elapsed)
        summaries.append(fields)
        _print_summary(fields, args.quiet)

    summary_path = _resolve_out(args.out_dir, "summary.csv")
    try:
        with open(summary_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(summaries[0]))
            writer.writeheader()
            writer.writerows(summaries)
    except OSError as exc:
        raise DataIoError(f"cannot write summary CSV {summary_path}: {exc}") from exc
    if not args.quiet:
        print(f"summaries written to {summary_path}")
    return 0


def _cmd_check(cfg: _Config, args) -> int:
    seed = cfg.get_int("seed", 0)
    if args.seed is not None:
        seed = args.seed
    problem = _build_problem(cfg, seed)
    # consume solver keys so both run-style and compare-style configs
    # validate cleanly under check
    _build_solver(cfg, "solver")
    blocks = {m.group(1) for key in cfg.pairs for m in [re.match(r"(solver\d+)\.", key)] if m}
    for prefix in sorted(blocks):
        _build_solver(cfg, prefix)
    cfg.get_str("output.path")
    cfg.check_consumed()

    objective = problem.objective()
    bounds = objective.bounds
    rng = np.random.default_rng(seed)
    points = []
    if objective.x0 is not None:
        points.append(objective.x0)
    lo = np.where(np.isfinite(bounds.lower), bounds.lower, -1.0)
    hi = np.where(np.isfinite(bounds.upper), bounds.upper, 1.0)
    for _ in range(5):
        points.append(lo + (hi - lo) * rng.random(objective.n))

    worst = 0.0
    for i, x in enumerate(points):
        err = check_gradient(objective, x, seed=seed + i)
        worst = max(worst, err)
        if not args.quiet:
            print(f"gradient check at point {i}: max relative error {err:.3e}")
    passed = worst <= 1e-5
    if not args.quiet:
        print(
            f"gradient check {'PASS' if passed else 'FAIL'}: "
            f"worst {worst:.3e} (tolerance 1e-5)"
        )
    return 0 if passed else 1


def run_cli(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pnkhb",
        description="Run bound-constrained solvers on benchmark problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run one solver, write a per-iteration CSV"),
        ("compare", "run several solver blocks on one problem"),
        ("check", "validate the config and run gradient checks"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the key-value config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--quiet", action="store_true", help="suppress stdout")

    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "compare": _cmd_compare, "check": _cmd_check}
    try:
        cfg = _Config(args.config)
        return handlers[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataIoError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
