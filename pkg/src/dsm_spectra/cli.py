"""Command-line front end.

Subcommands: generate, spectrum, depth, sweep-temp, collapse, ablation,
verify-bounds, residual. Machine-readable output goes to files or
standard output only; progress and summaries go to standard error.

Exit codes: 0 success, 2 invariant or bound violation, 3 I/O error,
4 configuration error (including unknown flags).
"""

from __future__ import annotations

import argparse
import csv
import sys

from . import __version__
from .dsm import (EXPERIMENT_TOL, SinkhornConfig, StochasticMatrix,
                  is_doubly_stochastic, matrix_from_csv, matrix_to_csv,
                  sinkhorn_generate)
from .errors import ConfigError, DsmSpectraError, InvariantViolation, IoError
from .harness import (DEFAULT_ABLATION_GAMMAS, DEFAULT_GAMMA_TARGET,
                      DEFAULT_HIST_BINS, DEFAULT_INITIAL_COSINE,
                      ExperimentConfig, format_cell, run_affine_ablation,
                      run_collapse_hist, run_residual_depth, run_sweep_temp,
                      run_verify_bounds, write_text)
from .spectral import (DEFAULT_DEPTH_EPS, DEFAULT_MAX_DEPTH,
                       DEFAULT_TEMPERATURE_GRID, REPORT_COLUMNS,
                       effective_depth, report_csv_row, spectral_report)

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_IO = 3
EXIT_CONFIG = 4


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors with exit code 4."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seed_list(text: str) -> tuple:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if "-" in token[1:]:
            start_text, end_text = token.split("-", 1)
            start, end = int(start_text), int(end_text)
            if end < start:
                raise ValueError(f"bad seed range {token!r}")
            out.extend(range(start, end + 1))
        else:
            out.append(int(token))
    if not out:
        raise ValueError("empty seed list")
    return tuple(out)


def _float_list(text: str) -> tuple:
    out = tuple(float(token) for token in text.split(",") if token.strip())
    if not out:
        raise ValueError("empty list")
    return out


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(out: str | None, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)


def _add_common(parser: _Parser, out_default: str, reps_default: int) -> None:
    parser.add_argument("--n", type=int, default=64,
                        help="feature dimension (default 64)")
    parser.add_argument("--seeds", type=_seed_list, default=tuple(range(10)),
                        help="base seeds, e.g. 0-9 or 0,3,7 (default 0-9)")
    parser.add_argument("--reps", type=int, default=reps_default,
                        help=f"repetitions per seed (default {reps_default})")
    parser.add_argument("--iters", type=int, default=200,
                        help="Sinkhorn balancing passes K (default 200)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: DSM_SPECTRA_THREADS "
                             "or hardware concurrency)")
    parser.add_argument("--out", default=out_default,
                        help=f"output CSV path, - for stdout "
                             f"(default {out_default})")
    parser.add_argument("--config", default=None,
                        help="flat key=value config file; flags override it")


def _build_generate() -> _Parser:
    p = _Parser(prog="dsm-spectra generate",
                description="Generate one doubly stochastic matrix and "
                            "write it as a matrix CSV.")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--temp", type=float, default=1.0,
                   help="Sinkhorn temperature T (default 1.0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--rep", type=int, default=0,
                   help="repetition index within the seed (default 0)")
    p.add_argument("--out", default="-")
    p.add_argument("--config", default=None)
    return p


def _cmd_generate(args) -> int:
    m = sinkhorn_generate(
        SinkhornConfig(n=args.n, temperature=args.temp,
                       iterations=args.iters, seed=args.seed), args.rep)
    text = matrix_to_csv(m.matrix)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        write_text(args.out, text)
    return EXIT_OK


def _build_spectrum() -> _Parser:
    p = _Parser(prog="dsm-spectra spectrum",
                description="Print the spectral report of a matrix CSV "
                            "(one header row plus one data row).")
    p.add_argument("matrix", help="matrix CSV path, - for stdin")
    p.add_argument("--eps", type=float, default=DEFAULT_DEPTH_EPS,
                   help="effective-depth decay fraction (default 0.01)")
    p.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH,
                   help="transient profile length (default 50)")
    p.add_argument("--temp", type=float, default=None,
                   help="temperature annotation for the report row")
    p.add_argument("--config", default=None)
    return p


def _cmd_spectrum(args) -> int:
    if args.matrix == "-":
        text = sys.stdin.read()
    else:
        try:
            with open(args.matrix, encoding="utf-8") as handle:
                text = handle.read()
        except OSError as exc:
            raise IoError(f"cannot read {args.matrix}: {exc}") from exc
    dm = matrix_from_csv(text)
    ok, deviation = is_doubly_stochastic(dm, EXPERIMENT_TOL)
    if not ok:
        raise InvariantViolation(
            f"input deviates {deviation:.3g} from doubly stochastic "
            f"(tolerance {EXPERIMENT_TOL}); the report is only defined "
            "for doubly stochastic operators")
    report = spectral_report(StochasticMatrix(dm, deviation), eps=args.eps,
                             max_depth=args.max_depth, temperature=args.temp)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    writer.writerow([format_cell(c) for c in report_csv_row(report)])
    return EXIT_OK


def _build_depth() -> _Parser:
    p = _Parser(prog="dsm-spectra depth",
                description="Print the effective mixing depth "
                            "log(1/eps) / (-log sigma2).")
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--eps", type=float, default=DEFAULT_DEPTH_EPS)
    p.add_argument("--config", default=None)
    return p


def _cmd_depth(args) -> int:
    print(format_cell(effective_depth(args.sigma2, args.eps)))
    return EXIT_OK


def _build_sweep() -> _Parser:
    p = _Parser(prog="dsm-spectra sweep-temp",
                description="Spectral reports across the temperature grid "
                            "with per-temperature aggregates.")
    _add_common(p, "sigma2_vs_temp.csv", 100)
    p.add_argument("--temps", type=_float_list,
                   default=DEFAULT_TEMPERATURE_GRID,
                   help="comma-separated temperature grid")
    p.add_argument("--eps", type=float, default=DEFAULT_DEPTH_EPS)
    p.add_argument("--transient-depth", type=int, default=DEFAULT_MAX_DEPTH)
    return p


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig(
        experiment="sweep_temp", n=args.n, seeds=args.seeds,
        reps_per_seed=args.reps, iterations=args.iters,
        temperatures=args.temps, eps=args.eps,
        transient_depth=args.transient_depth, threads=args.threads,
        output_path=args.out)
    result = run_sweep_temp(cfg)
    _emit(args.out, result.csv_text)
    _log(f"sweep_temp: {len(result.trial_rows)} trials over "
         f"{len(result.temperatures)} temperatures, "
         f"spearman(entropy, sigma2) = {format_cell(result.spearman)}")
    return EXIT_OK


def _build_collapse() -> _Parser:
    p = _Parser(prog="dsm-spectra collapse",
                description="Final-cosine histogram for highly similar "
                            "input pairs after one normalized mixing layer.")
    _add_common(p, "collapse_hist.csv", 100)
    p.add_argument("--nu", type=float, default=0.1,
                   help="noise scale (default 0.1)")
    p.add_argument("--temps", type=_float_list,
                   default=DEFAULT_TEMPERATURE_GRID,
                   help="pilot temperature grid")
    p.add_argument("--initial-cosine", type=float,
                   default=DEFAULT_INITIAL_COSINE)
    p.add_argument("--gamma-target", type=float, default=DEFAULT_GAMMA_TARGET,
                   help="SNR ceiling for the pilot selection (default 0.1)")
    p.add_argument("--bins", type=int, default=DEFAULT_HIST_BINS)
    p.add_argument("--control", action="store_true",
                   help="select a high-SNR temperature instead (the "
                        "collapse statistics are expected to fail)")
    return p


def _cmd_collapse(args) -> int:
    cfg = ExperimentConfig(
        experiment="collapse_hist", n=args.n, nu=args.nu, seeds=args.seeds,
        reps_per_seed=args.reps, iterations=args.iters,
        temperatures=args.temps, initial_cosine=args.initial_cosine,
        gamma_target=args.gamma_target, control=args.control, bins=args.bins,
        threads=args.threads, output_path=args.out)
    result = run_collapse_hist(cfg)
    _emit(args.out, result.csv_text)
    _log(f"collapse_hist: T={format_cell(result.chosen_temperature)}, "
         f"mean={format_cell(result.mean)}, "
         f"std={format_cell(result.std_sample)}, "
         f"JB p={format_cell(result.jarque_bera_p)}")
    if not cfg.control and not (result.zero_mean_pass and result.normality_pass):
        _log("collapse_hist: zero-mean or normality statistic failed in "
             "the low-SNR regime")
        return EXIT_VIOLATION
    return EXIT_OK


def _build_ablation() -> _Parser:
    p = _Parser(prog="dsm-spectra ablation",
                description="Plain versus affine LayerNorm on one mixing "
                            "layer: norm ratios and direction agreement.")
    _add_common(p, "affine_ablation.csv", 100)
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--temp", type=float, default=None,
                   help="mixing temperature (default 1.0)")
    p.add_argument("--gammas", type=_float_list,
                   default=DEFAULT_ABLATION_GAMMAS,
                   help="fixed LayerNorm gains (default 0.5,1,2)")
    p.add_argument("--beta", type=float, default=0.0,
                   help="scalar affine shift (default 0)")
    return p


def _cmd_ablation(args) -> int:
    cfg = ExperimentConfig(
        experiment="affine_ablation", n=args.n, nu=args.nu, seeds=args.seeds,
        reps_per_seed=args.reps, iterations=args.iters,
        temperature=args.temp, gammas=args.gammas, beta=args.beta,
        threads=args.threads, output_path=args.out)
    result = run_affine_ablation(cfg)
    _emit(args.out, result.csv_text)
    for g, stat in result.gamma_stats.items():
        _log(f"affine_ablation: gamma_ln={format_cell(g)} "
             f"max_norm_ratio_dev={format_cell(stat['max_norm_ratio_dev'])} "
             f"ks_p={format_cell(stat['ks_p'])}")
    return EXIT_OK


def _build_verify_bounds() -> _Parser:
    p = _Parser(prog="dsm-spectra verify-bounds",
                description="Audit every closed-form bound with Monte "
                            "Carlo verifiers; exits 2 on any violation.")
    _add_common(p, "bounds_audit.csv", 100)
    p.add_argument("--trials", type=int, default=10000,
                   help="Monte Carlo trials per check (default 10000)")
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--temp", type=float, default=None,
                   help="temperature of the audited operator (default 1.0)")
    return p


def _cmd_verify_bounds(args) -> int:
    cfg = ExperimentConfig(
        experiment="verify_bounds", n=args.n, nu=args.nu, seeds=args.seeds,
        reps_per_seed=args.reps, iterations=args.iters, trials=args.trials,
        temperature=args.temp, threads=args.threads, output_path=args.out)
    result = run_verify_bounds(cfg)
    _emit(args.out, result.csv_text)
    _log(f"verify_bounds: {len(result.violations)} violated checks of "
         f"{len(result.results)}")
    for violation in result.violations:
        _log(f"verify_bounds: VIOLATED {violation.check_name} "
             f"empirical={format_cell(violation.empirical_frequency)} "
             f"theoretical={format_cell(violation.theoretical_bound)}")
    return EXIT_VIOLATION if result.violations else EXIT_OK


def _build_residual() -> _Parser:
    p = _Parser(prog="dsm-spectra residual",
                description="Residual-block trajectories from unit detail "
                            "starts; records per-layer updates and total "
                            "angular drift.")
    _add_common(p, "residual_depth.csv", 10)
    p.add_argument("--depth", type=int, default=100,
                   help="number of residual layers L (default 100)")
    p.add_argument("--activation", choices=("identity", "relu"),
                   default="relu")
    p.add_argument("--nu", type=float, default=0.0,
                   help="noise scale (default 0: the stagnation regime)")
    p.add_argument("--temp", type=float, default=None,
                   help="mixing temperature (default: stagnation-regime "
                        "temperature, or the control one with --control)")
    p.add_argument("--control", action="store_true",
                   help="use the high-sigma2 control temperature")
    return p


def _cmd_residual(args) -> int:
    cfg = ExperimentConfig(
        experiment="residual_depth", n=args.n, nu=args.nu, seeds=args.seeds,
        reps_per_seed=args.reps, iterations=args.iters, depth=args.depth,
        activation=args.activation, temperature=args.temp,
        control=args.control, threads=args.threads, output_path=args.out)
    result = run_residual_depth(cfg)
    _emit(args.out, result.csv_text)
    _log(f"residual_depth: T={format_cell(result.temperature)}, "
         f"sigma2 max={format_cell(max(result.sigma2s))}, "
         f"drift max={format_cell(max(result.drifts))}, "
         f"drift min={format_cell(min(result.drifts))}")
    return EXIT_OK


COMMANDS = {
    "generate": (_build_generate, _cmd_generate),
    "spectrum": (_build_spectrum, _cmd_spectrum),
    "depth": (_build_depth, _cmd_depth),
    "sweep-temp": (_build_sweep, _cmd_sweep),
    "collapse": (_build_collapse, _cmd_collapse),
    "ablation": (_build_ablation, _cmd_ablation),
    "verify-bounds": (_build_verify_bounds, _cmd_verify_bounds),
    "residual": (_build_residual, _cmd_residual),
}

_USAGE = """usage: dsm-spectra <command> [flags]

commands:
  generate       write one doubly stochastic matrix as CSV
  spectrum       spectral report of a matrix CSV (- for stdin)
  depth          effective mixing depth from sigma2 and eps
  sweep-temp     sigma2/entropy sweep across the temperature grid
  collapse       paired-cosine collapse histogram
  ablation       plain vs affine LayerNorm comparison
  verify-bounds  Monte Carlo audit of every closed-form bound
  residual       residual-block stagnation trajectories

common flags: --config FILE (flat key=value, flags override), --out -
run 'dsm-spectra <command> --help' for the full flag list
"""


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    mapping = {}
    for number, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{number}: expected key=value")
        key, value = stripped.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key:
            raise ConfigError(f"{path}:{number}: empty key")
        mapping[key] = value.strip()
    return mapping


def _convert_config_value(action, raw: str, key: str):
    if isinstance(action, argparse._StoreTrueAction):
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {key!r} expects a boolean, got {raw!r}")
    if action.type is not None:
        try:
            return action.type(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return raw


def _parse_with_config(parser: _Parser, argv: list):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        mapping = _load_config_file(args.config)
        actions = {a.dest: a for a in parser._actions
                   if a.dest not in ("help",)}
        seeded = {}
        for key, raw in mapping.items():
            if key == "config" or key not in actions:
                raise ConfigError(f"unknown config key {key!r}")
            seeded[key] = _convert_config_value(actions[key], raw, key)
        args = parser.parse_args(argv, namespace=argparse.Namespace(**seeded))
    return args


def _dispatch(argv: list) -> int:
    if not argv or argv[0] in ("-h", "--help"):
        sys.stdout.write(_USAGE)
        return EXIT_OK
    if argv[0] == "--version":
        print(__version__)
        return EXIT_OK
    name = argv[0]
    if name not in COMMANDS:
        _log(f"dsm-spectra: unknown command {name!r}")
        _log(_USAGE.rstrip())
        return EXIT_CONFIG
    builder, runner = COMMANDS[name]
    args = _parse_with_config(builder(), argv[1:])
    return runner(args)


def main(argv=None) -> int:
    arg_list = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        return _dispatch(arg_list)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except ConfigError as exc:
        _log(f"dsm-spectra: config error: {exc}")
        return EXIT_CONFIG
    except IoError as exc:
        _log(f"dsm-spectra: I/O error: {exc}")
        return EXIT_IO
    except OSError as exc:
        _log(f"dsm-spectra: I/O error: {exc}")
        return EXIT_IO
    except DsmSpectraError as exc:
        _log(f"dsm-spectra: {type(exc).__name__}: {exc}")
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
