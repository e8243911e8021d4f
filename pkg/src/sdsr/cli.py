"""``sdsr`` command-line entry point.

Exit status: 0 on success, 1 for invalid arguments or configuration,
2 when a command fails at run time.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .harness import ConfigError
from .solver import default_rho

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# flag name -> config key; values are passed through as override strings
_EXPERIMENT_FLAGS = {
    "image": "images", "scenario": "scenarios", "levels": "levels", "seed": "seed",
    "out": "output_dir", "rho": "rho", "rho_grid": "rho_grid", "lam": "lam", "stages": "stages",
    "regularizer": "regularizer", "reference": "reference", "reference_path": "reference_path",
    "reference_levels": "reference_levels", "max_iters": "max_inner_iters", "tol": "tol",
    "trace": "trace_every",
}


def _experiment_args(p: argparse.ArgumentParser, solver: bool) -> None:
    p.add_argument("--config", type=Path, help="INI file with an [experiment] section")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--image", nargs="+", help="image files, or 'cameraman' for the bundled image")
    p.add_argument("--scenario", nargs="+", help="scenario ids 1..8")
    p.add_argument("--seed", help="noise seed")
    p.add_argument("--out", help="output directory")
    if solver:
        p.add_argument("--levels", nargs="+", help="framelet decomposition levels")
        p.add_argument("--rho", help="support threshold ratio (default: 200 for L=1, else 250)")
        p.add_argument("--lam", help="fixed regularization weight; omit for the grid search")
        p.add_argument("--stages", help="number of support-detection stages")
        p.add_argument("--regularizer", help="trunc_l0, plain_l0 or l1")
        p.add_argument("--reference", help="initial reference: internal-l0, oracle or file")
        p.add_argument("--reference-path", help="reference image when --reference file")
        p.add_argument("--reference-levels", help="levels of the internal plain l0 reference")
        p.add_argument("--max-iters", help="inner iteration cap")
        p.add_argument("--tol", help="stopping tolerance")
        p.add_argument("--trace", help="dump the running mean every N iterations (0 = off)")


def _config_from(args) -> harness.ExperimentConfig:
    overrides = {}
    for flag, key in _EXPERIMENT_FLAGS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        overrides[key] = " ".join(value) if isinstance(value, list) else str(value)
    overrides.update(harness.parse_overrides(args.overrides))
    return harness.load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sdsr", description="Framelet-based non-blind deblurring experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("degrade", help="simulate blurred, noisy observations")
    _experiment_args(p, solver=False)

    p = sub.add_parser("deblur", help="restore degraded images and append to results.csv")
    _experiment_args(p, solver=True)

    p = sub.add_parser("sweep-rho", help="PSNR/SSIM as a function of rho")
    _experiment_args(p, solver=True)
    p.add_argument("--rho-grid", nargs="+", help="rho values to try")

    p = sub.add_parser("report", help="summarize a results directory as markdown")
    p.add_argument("results_dir", type=Path)

    p = sub.add_parser("psf-dump", help="print a PSF as a text grid")
    p.add_argument("psf", help="scenario id or PSF kind")
    p.add_argument("--out", type=Path, help="write to this file instead of stdout")

    p = sub.add_parser("support-map", help="detect and export the support of an image")
    p.add_argument("--image", default="cameraman")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--highpass-only", action="store_true",
                   help="scale the threshold by the high-pass maximum only")
    p.add_argument("--out", type=Path, default=Path("support"))
    return parser


def _run(args) -> None:
    cmd = args.command
    if cmd == "degrade":
        for path in harness.cmd_degrade(_config_from(args)):
            print(path)
    elif cmd == "deblur":
        for row in harness.cmd_deblur(_config_from(args)):
            print(f"{row['image']} s{row['scenario']} {row['method']} L{row['levels']} "
                  f"stage {row['stage']}: psnr={row.get('psnr')} ssim={row.get('ssim')} {row['status']}")
    elif cmd == "sweep-rho":
        for row in harness.cmd_sweep_rho(_config_from(args)):
            print(f"rho={row['rho']:g} psnr={row['psnr']:.3f} ssim={row['ssim']:.4f} lam={row['lam']:.4g}")
    elif cmd == "report":
        print(harness.cmd_report(args.results_dir))
    elif cmd == "psf-dump":
        text = harness.psf_text(args.psf)
        if args.out is None:
            sys.stdout.write(text)
        else:
            args.out.write_text(text, encoding="utf-8")
    elif cmd == "support-map":
        rho = args.rho if args.rho is not None else default_rho(args.levels)
        mask = harness.cmd_support_map(args.image, args.levels, rho, args.out,
                                       lowpass_in_threshold=not args.highpass_only)
        print(f"|I| = {mask.support_size} of {mask.highpass.size} high-pass coefficients")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _run(args)
    except ConfigError as exc:
        print(f"sdsr: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - every run-time failure maps to one exit status
        logging.getLogger("sdsr").debug("failure", exc_info=True)
        print(f"sdsr: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
