"""Command line entry point: ``solarhybrid <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import pipeline, synth
from .config import PipelineConfig, write_kv

log = logging.getLogger("solarhybrid")


def _seed_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a seed list: {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    seed = p.add_mutually_exclusive_group()
    seed.add_argument("--seed", type=int, help="single RNG seed")
    seed.add_argument("--seeds", type=_seed_list, help="comma separated seeds")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solarhybrid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic station with known ground truth")
    _common(p)
    p.add_argument("--scenario", help="key = value scenario file")
    p.add_argument("--years", type=int)
    p.add_argument("--start-year", type=int)
    p.add_argument("--geometry-only", action="store_true",
                   help="leave the Solis parameters out of station.txt so fit estimates them")

    for name, text in (("fit", "fit every predictor on the train/validation block"),
                       ("forecast", "forecast the test block with fitted models"),
                       ("evaluate", "score forecasts and write the report tables"),
                       ("sweep", "validation nRMSE over hidden-layer sizes and seeds")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--method", help="stationarization: none, CI, CSI or CSI_PC")

    p = sub.add_parser("rank", help="seasonal point ranking across stations")
    _common(p)
    p.add_argument("inputs", nargs="+", help="ranking_input.csv files (one or more stations)")

    p = sub.add_parser("run", help="fit, forecast and evaluate in one go")
    _common(p)
    p.add_argument("--method", help="stationarization: none, CI, CSI or CSI_PC")
    return parser


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seeds=[args.seed])
    elif args.seeds:
        cfg = replace(cfg, seeds=args.seeds)
    if getattr(args, "method", None):
        cfg = replace(cfg, method=args.method)
    return cfg


def _synth(args) -> None:
    sc = synth.Scenario.from_file(args.scenario) if args.scenario else synth.Scenario()
    if args.years is not None:
        sc = replace(sc, years=args.years)
    if args.start_year is not None:
        sc = replace(sc, start_year=args.start_year)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    out = Path(args.out or "synthetic")
    paths = synth.write(synth.generate(sc), sc, out, geometry_only=args.geometry_only)
    write_kv({"station_file": "station.txt", "data_file": "data.csv", "out_dir": "out"}, out / "config.txt")
    print(f"wrote {paths['data']}, {paths['station']}, {paths['truth']} and {out / 'config.txt'}")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        _synth(args)
        return 0
    cfg = _config(args)
    if args.command == "rank":
        table = pipeline.rank(args.inputs, Path(cfg.out_dir) / "reports")
        print((Path(cfg.out_dir) / "reports" / "ranking.txt").read_text(), end="")
        return 0 if len(table) else 1
    if args.command in ("fit", "run"):
        record = pipeline.fit(cfg)
        print(f"fitted ARMA({record['arma_order']}), ANN exo {record['ann_exo']}, "
              f"ANN endo {record['ann_endo']}")
    if args.command in ("forecast", "run"):
        out = pipeline.forecast(cfg)
        print(f"forecast {len(out)} test hours -> {Path(cfg.out_dir) / 'predictions.csv'}")
    if args.command in ("evaluate", "run"):
        pipeline.evaluate(cfg)
        print((pipeline.reports_dir(cfg) / "nrmse.txt").read_text(), end="")
    if args.command == "sweep":
        pipeline.sweep(cfg)
        print((pipeline.reports_dir(cfg) / "sweep.txt").read_text(), end="")
    return 0


def main(argv=None) -> int:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return run(argv)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        message = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
