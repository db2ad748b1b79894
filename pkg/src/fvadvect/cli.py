"""``advect-cli``: run experiments and convergence studies from configuration files.

Exit status: 0 success, 2 invalid configuration, 3 numerical invariant
violated (CFL refusal, energy identity breach), 4 fitted order outside the
study window.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ._validation import CFLViolationError
from .config import OUTPUT_ROOT_ENV, ConfigError, load_config
from .experiment import InvariantViolation, LevelError, converge_study, run_experiment

EXIT_OK, EXIT_INVALID, EXIT_INVARIANT, EXIT_ORDER = 0, 2, 3, 4

log = logging.getLogger("advect-cli")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="advect-cli",
        description="Upwind finite-volume advection experiments.",
        epilog=f"Relative output directories are resolved against ${OUTPUT_ROOT_ENV} when it is set. "
               "Exit codes: 0 ok, 2 invalid config, 3 invariant violation, 4 order outside window.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write report/energy/error CSVs")
    run.add_argument("config", help="TOML experiment configuration")
    run.add_argument("-o", "--output", help="output directory (overrides output_dir)")

    conv = sub.add_parser("converge", help="run a refinement study and fit the convergence order")
    conv.add_argument("study", help="TOML configuration with a [study] table")
    conv.add_argument("-o", "--output", help="output directory (overrides output_dir)")
    conv.add_argument("-j", "--jobs", type=int, default=1, help="levels run in parallel (default 1)")

    val = sub.add_parser("validate", help="check a configuration against the schema and exit")
    val.add_argument("config", help="TOML configuration")
    return p


def _classify(exc: BaseException) -> int:
    if isinstance(exc, LevelError):
        return _classify(exc.cause)
    if isinstance(exc, (CFLViolationError, InvariantViolation)):
        return EXIT_INVARIANT
    if isinstance(exc, ValueError):
        return EXIT_INVALID
    raise exc


def _run(args) -> int:
    config = load_config(args.config)
    out = config.output_path(args.output)
    result = run_experiment(config, out)
    print(f"wrote {out}: l1_error={result.error.l1_at_t:.6g} "
          f"identity_residual={result.energy.identity_residual:.3g} steps={result.steps.n_steps}")
    return EXIT_OK


def _converge(args) -> int:
    config = load_config(args.study)
    if config.study is None:
        raise ConfigError(f"{args.study}: missing [study] table")
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = config.output_path(args.output)
    res = converge_study(config, out, jobs=args.jobs)
    for row in res.table.rows:
        print(f"h={row[0]:.6g} l1_error={row[4]:.6g}")
    lo, hi = res.window
    verdict = "inside" if res.in_window else "outside"
    print(f"EOC {res.order:.4f} {verdict} window [{lo:g}, {hi:g}]; wrote {out}")
    return EXIT_OK if res.in_window else EXIT_ORDER


def _validate(args) -> int:
    config = load_config(args.config)
    study = "" if config.study is None else f", study levels {list(config.study.levels)}"
    print(f"{args.config}: valid ({config.mesh.kind} n={config.mesh.n}, {config.field.stream} field{study})")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _run, "converge": _converge, "validate": _validate}[args.command]
    try:
        return handler(args)
    except Exception as exc:
        code = _classify(exc)
        kind = "invalid configuration" if code == EXIT_INVALID else "invariant violated"
        print(f"advect-cli: {kind}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
