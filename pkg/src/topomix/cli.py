"""Command-line entry point: ``topomix <stage> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from .config import load_config, parse_synth
from .errors import ConfigError
from .pipeline import PIPELINE, STAGES, exit_code_for, run_pipeline, run_stage

log = logging.getLogger("topomix")


def _add_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("input")
    g.add_argument("--config", help="INI file with [io], [decompose], ... sections")
    g.add_argument("--input", help="CSV: time column then one column per channel")
    g.add_argument("--output", "-o", help="artifact directory (default: out)")
    g.add_argument("--no-header", dest="header", action="store_const", const=False,
                   help="first CSV row is data (default: detect)")
    g.add_argument("--delimiter")
    g.add_argument("--no-detrend", dest="detrend", action="store_const", const=False)
    g.add_argument("--synth-fig2", dest="synth", metavar="N,TMAX,STD[,SEED]", type=_synth_arg)
    g.add_argument("--seed", type=int, help="root seed for all random streams")

    g = p.add_argument_group("decomposition")
    g.add_argument("--tau-threshold", type=float)
    g.add_argument("--standardize", action="store_const", const=True)
    g.add_argument("--pca-keep", help="'all', a count, or a variance fraction in (0, 1)")

    g = p.add_argument_group("persistence")
    g.add_argument("--delay-r", type=int)
    g.add_argument("--delay-eps", type=int)
    g.add_argument("--field-prime", type=int)
    g.add_argument("--persistence-rho", dest="rho", type=float)
    g.add_argument("--persistence-alpha", dest="alpha", type=float)
    g.add_argument("--landmarks", type=int)

    g = p.add_argument_group("metric and clustering")
    g.add_argument("--w-lin", type=float)
    g.add_argument("--w-circ", type=float)
    g.add_argument("--missing-penalty", type=float)
    g.add_argument("--metric-grid", type=int)
    g.add_argument("--clusters", type=int)

    g = p.add_argument_group("gaussian process")
    g.add_argument("--lambda1", type=float)
    g.add_argument("--lambda2", type=float)
    g.add_argument("--grid-file", help="CSV: variance,length_scale,noise_variance")
    g.add_argument("--no-gp-detrend", dest="gp_detrend", action="store_const", const=False,
                   help="zero prior mean instead of per-curve OLS lines")
    g.add_argument("--times", help="prediction times: a,b,c or start:stop:count")
    g.add_argument("--task", help="curve index or name to predict")
    p.add_argument("-v", "--verbose", action="store_true")


def _synth_arg(text):
    try:
        return parse_synth(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topomix", description="Mixed linear/circular coordinates for "
                     "multichannel time series, curve clustering and multi-output GP fitting.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in (*STAGES, "run"):
        _add_options(sub.add_parser(name, help=f"run the {name} stage" if name != "run"
                                    else "run every stage in order"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    keys = ("input", "output", "header", "delimiter", "detrend", "synth", "seed", "tau_threshold",
            "standardize", "pca_keep", "delay_r", "delay_eps", "field_prime", "rho", "alpha",
            "landmarks", "w_lin", "w_circ", "missing_penalty", "metric_grid", "clusters",
            "lambda1", "lambda2", "grid_file", "gp_detrend", "times", "task")
    try:
        cfg = load_config(args.config, **{k: getattr(args, k) for k in keys})
    except ConfigError as exc:
        print(f"topomix: config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "run":
        rep = run_pipeline(cfg)
        if rep.exit_code:
            print(f"topomix: stage {rep.failed_stage} failed: {rep.error}", file=sys.stderr)
        else:
            c = rep.counts
            log.info("linear=%s circular=%s noise=%s", c.get("n_linear"), c.get("n_circular"),
                     c.get("n_noise"))
        return rep.exit_code
    try:
        run_stage(args.command, cfg)
    except Exception as exc:  # noqa: BLE001
        print(f"topomix: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return 0


__all__ = ["main", "build_parser", "PIPELINE"]

if __name__ == "__main__":
    sys.exit(main())
