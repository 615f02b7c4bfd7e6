"""Experiment command line.

Subcommands mirror the experiment drivers: toy, bound, ising, rbm, deconv,
lp-export, plus rerun for reproducing a recorded manifest.  Every run is
fully determined by its flags (all randomness flows from --seed); pass
--out to write the manifest/metrics/CSV bundle.  Exit codes: 0 success,
2 capacity exceeded, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .graph import CapacityError, GraphError

# --paper-scale swaps the desk-scale defaults for the full-protocol sizes.
PAPER_SCALE = {
    "toy": {},
    "bound": {"rows": 10, "cols": 10, "draws": 1000},
    "ising": {"side": 28, "n_images": 1000, "iters": 1000, "lr": 0.001,
              "chains": 100, "sweeps": 50},
    "rbm": {"side": 28, "n_hidden": 500, "n_images": 2000, "iters": 1000,
            "chains": 100, "sweeps": 100},
    "deconv": {"n_images": 100, "n_feat_true": 4, "fh": 5, "fw": 5,
               "s_h": 9, "s_w": 9, "slots": 5, "infer_fh": 6, "infer_fw": 6},
    "lp-export": {},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _int_list(text: str):
    return [int(t) for t in text.split(",") if t]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="run output directory")
    p.add_argument("--budget-secs", type=float, default=None,
                   help="wall-time cap; partial results are reported")
    p.add_argument("--paper-scale", action="store_true",
                   help="use full-protocol sizes instead of desk defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pmp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", parents=[], help="4-spin tied-coupling study")
    _common(p)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--chains", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--data-theta", type=float, default=0.5)
    p.add_argument("--eval-samples", type=int, default=1_000_000)

    p = sub.add_parser("bound", help="log-partition upper-bound study")
    _common(p)
    p.add_argument("--kind", choices=("lattice", "random", "unary"),
                   default="lattice")
    p.add_argument("--rows", type=int, default=5)
    p.add_argument("--cols", type=int, default=5)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--draws", type=int, default=500)
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--damping", type=float, default=0.5)

    p = sub.add_parser("ising", help="Ising learning on contour images")
    _common(p)
    p.add_argument("--method", choices=("pmp", "gibbs", "gibbs-reset"),
                   default="pmp")
    p.add_argument("--n-images", type=int, default=200)
    p.add_argument("--side", type=int, default=12)
    p.add_argument("--iters", type=int, default=150)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--chains", type=int, default=50)
    p.add_argument("--sweeps", type=int, default=30)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--l1", type=float, default=0.0)
    p.add_argument("--eval-sweeps", type=_int_list, default=[1, 10, 50])
    p.add_argument("--eval-samples", type=int, default=200)

    p = sub.add_parser("rbm", help="RBM training on stripe patterns")
    _common(p)
    p.add_argument("--method", choices=("pmp", "gibbs-reset", "pcd"),
                   default="pmp")
    p.add_argument("--n-hidden", type=int, default=32)
    p.add_argument("--side", type=int, default=8)
    p.add_argument("--n-images", type=int, default=500)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="sgd")
    p.add_argument("--chains", type=int, default=50)
    p.add_argument("--sweeps", type=int, default=30)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--pcd-sweeps", type=int, default=1)
    p.add_argument("--eval-sweeps", type=_int_list, default=[10, 100])
    p.add_argument("--eval-samples", type=int, default=200)

    p = sub.add_parser("deconv", help="blind deconvolution posterior sampling")
    _common(p)
    p.add_argument("--n-images", type=int, default=20)
    p.add_argument("--n-feat-true", type=int, default=3)
    p.add_argument("--fh", type=int, default=3)
    p.add_argument("--fw", type=int, default=3)
    p.add_argument("--s-h", type=int, default=10)
    p.add_argument("--s-w", type=int, default=10)
    p.add_argument("--slots", type=int, default=4)
    p.add_argument("--infer-fh", type=int, default=None)
    p.add_argument("--infer-fw", type=int, default=None)
    p.add_argument("--feature-density", type=float, default=0.5)
    p.add_argument("--location-density", type=float, default=0.01)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--prior-w", type=float, default=-3.0)
    p.add_argument("--prior-s", type=float, default=-3.0)

    p = sub.add_parser("lp-export", help="write a reduced MAP LP file")
    _common(p)
    p.add_argument("--model", choices=("ising", "rbm"), default="ising")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--w-scale", type=float, default=1.0)

    p = sub.add_parser("rerun", help="re-execute a recorded run manifest")
    p.add_argument("manifest", help="path to manifest.json")
    p.add_argument("--out", default=None)
    return parser


def _dispatch(args: argparse.Namespace) -> dict:
    if args.command == "rerun":
        return experiments.rerun_manifest(args.manifest, out=args.out)
    kwargs = {k: v for k, v in vars(args).items()
              if k not in ("command", "paper_scale")}
    if args.paper_scale:
        kwargs.update(PAPER_SCALE[args.command])
    return experiments.COMMANDS[args.command](**kwargs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = _dispatch(args)
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 2
    except (GraphError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(result["metrics"], indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
