"""Command-line entry point: ``bdloss <command> [options]``.

Every command prints a JSON summary (``command``, ``seed``, ``trials``,
``verdict``, ``metrics``) on stdout. With ``--out DIR`` the summary and any
CSV tables are also written to ``DIR``. The exit status is 1 when the
verdict is ``fail``.
"""
import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .divergences import DivergenceConfig
from .gaussian import SquareLikePolicy
from .geometry import ObbBox
from .exceptions import BDLossError
from . import experiments
from .sampling import ExperimentConfig

log = logging.getLogger("bdloss")

DEFAULT_TRIALS = {"verify-properties": 10**6, "compare-losses": 1000, "grad-check": 1000}


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def emit(summary, out=None, stream=None):
    """Print the summary and write tables; returns the exit status."""
    stream = stream or sys.stdout
    tables = summary.pop("tables", {})
    text = json.dumps(summary, indent=2)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for name, (header, rows) in tables.items():
            write_csv(out / f"{name}.csv", header, rows)
        (out / "summary.json").write_text(text + "\n", encoding="utf-8")
    print(text, file=stream)
    return 0 if summary["verdict"] == "pass" else 1


def parse_box(text):
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",")]
        if len(vals) != 5:
            raise ValueError
        return ObbBox(*vals)
    except (ValueError, BDLossError):
        raise argparse.ArgumentTypeError(
            f"expected a box as cx,cy,w,h,theta with w, h > 0; got {text!r}") from None


def _add_common(p, trials=True):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    if trials:
        p.add_argument("--trials", type=int, default=None, help="number of sampled trials")
    p.add_argument("--out", default=None, help="directory for summary.json and CSV output")
    p.add_argument("--tau", type=float, default=1.1, help="square-like aspect-ratio threshold")
    p.add_argument("--delta", type=float, default=5.0, help="anisotropic scaling divisor")
    p.add_argument("--alpha", type=float, default=3.0, help="Mahalanobis term multiplier")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0, help="regression loss weight")
    p.add_argument("--workers", type=int, default=1, help="worker threads for trial chunks")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bdloss", description="Gaussian box losses: property checks and studies")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("verify-properties",
                               help="metric properties of the BD, GWD and KLD losses"))
    _add_common(sub.add_parser("compare-losses",
                               help="alignment of Gaussian losses with CIoU on horizontal pairs"))
    _add_common(sub.add_parser("isotropic-demo",
                               help="square box vs its pi/4 rotation"), trials=False)
    _add_common(sub.add_parser("grad-check",
                               help="analytic vs finite-difference gradients"))

    p = sub.add_parser("analyze-dataset", help="squareness and aspect-ratio KDE of DOTA labels")
    p.add_argument("paths", nargs="*", help="label files or directories of *.txt files")
    p.add_argument("--out", default=".", help="directory for scatter.csv, kde.csv, summary.json")
    p.add_argument("--tau", type=float, default=1.1)
    p.add_argument("--bandwidth", type=float, default=None, help="KDE bandwidth (default Scott)")
    p.add_argument("--exclude-difficult", action="store_true")

    p = sub.add_parser("iou", help="all measures for one (pred, gt) pair")
    p.add_argument("box_a", type=parse_box, help="prediction as cx,cy,w,h,theta")
    p.add_argument("box_b", type=parse_box, help="ground truth as cx,cy,w,h,theta")
    _add_common(p, trials=False)
    return parser


def _config(args):
    trials = getattr(args, "trials", None) or DEFAULT_TRIALS.get(args.command, 1)
    return ExperimentConfig(seed=args.seed, trials=trials, out=args.out, tau=args.tau,
                            delta=args.delta, alpha=args.alpha, lam=args.lam,
                            workers=args.workers)


def run(args):
    if args.command == "analyze-dataset":
        summary = experiments.run_analyze_dataset(
            args.paths, args.tau, args.bandwidth, not args.exclude_difficult)
        for cat, frac in summary["metrics"]["square_fraction"].items():
            print(f"{cat:24s} {frac:.4f}", file=sys.stderr)
        return summary
    cfg = _config(args)
    policy = SquareLikePolicy(cfg.tau, cfg.delta)
    dcfg = DivergenceConfig(alpha=cfg.alpha)
    if args.command == "verify-properties":
        return experiments.run_verify_properties(cfg, dcfg=dcfg)
    if args.command == "compare-losses":
        return experiments.run_compare_losses(cfg, dcfg=dcfg)
    if args.command == "isotropic-demo":
        return experiments.run_isotropic_demo(policy, dcfg, seed=cfg.seed)
    if args.command == "grad-check":
        return experiments.run_grad_check(cfg, policy, dcfg)
    if args.command == "iou":
        return experiments.run_iou(args.box_a, args.box_b, policy, dcfg)
    raise AssertionError(args.command)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        summary = run(args)
    except (BDLossError, FileNotFoundError) as exc:
        parser.exit(2, f"bdloss: error: {exc}\n")
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
    return emit(summary, args.out)


if __name__ == "__main__":
    sys.exit(main())
