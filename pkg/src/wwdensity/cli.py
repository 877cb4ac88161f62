"""Command-line driver: ``wwdensity <command> ...``.

Commands: estimate, band, kernel-build, rate, tail, coverage, compare.
Every failure prints one line ``wwdensity: error: <message>`` to stderr and
exits with status 1; argparse usage errors exit with status 2.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bandwidth import BandwidthPlan
from .confidence import build_band
from .estimators import Grid, GridEstimate
from .gls import TailModel
from .io import (
    InputError,
    load_experiment_config,
    read_estimate,
    read_sample_csv,
    validate_config,
    write_band,
    write_estimate,
)
from .kernels import (
    HolderClass,
    KernelSpec,
    build_higher_order_kernel,
    epanechnikov,
    gaussian,
    kernel_moment,
    verify_holder,
)
from .simulation import run_experiment


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",")]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",")]


def _kernel(args) -> KernelSpec:
    if getattr(args, "kernel_file", None):
        return KernelSpec.from_json(Path(args.kernel_file).read_text())
    base = gaussian() if args.kernel == "gaussian" else epanechnikov()
    if args.higher_order:
        return build_higher_order_kernel(base, HolderClass(args.beta, args.L))
    return base


def cmd_estimate(args) -> int:
    plan = BandwidthPlan(args.beta, args.dim, args.c1)
    sample = read_sample_csv(args.csv, args.dim)
    kernel = _kernel(args)
    lo, hi = args.domain
    lower, upper = [lo] * plan.d, [hi] * plan.d
    if args.grid_step:
        grid = Grid.with_step(lower, upper, args.grid_step)
    else:
        grid = Grid.for_plan(lower, upper, plan, sample.shape[0])
    state = GridEstimate(grid, plan, kernel)
    for xi in sample:
        state.update(xi)
    paths = write_estimate(state, args.out)
    print(f"estimate: n={state.n} nodes={state.values.size} -> {paths[0]}")
    return 0


def cmd_band(args) -> int:
    state = read_estimate(args.estimate)
    model = TailModel.from_json(Path(args.tailmodel).read_text())
    band = build_band(state, model, args.alpha)
    paths = write_band(band, args.out)
    print(f"band: u_alpha={band.u_alpha:.6g} half_width={band.half_width:.6g} -> {paths[0]}")
    return 0


def cmd_kernel_build(args) -> int:
    args.higher_order = True
    kernel = _kernel(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "kernel.json").write_text(kernel.to_json() + "\n")
    r = HolderClass(args.beta).integer_part
    worst = max((abs(kernel_moment(kernel, [l])) for l in range(1, r + 1)), default=0.0)
    holder = verify_holder(kernel, 0.01)
    print(f"kernel-build: order={kernel.order} coeffs={list(kernel.poly_coeffs)} "
          f"max|moment|={worst:.2e} holder_pass={holder.passed}")
    return 0


def cmd_experiment(args) -> int:
    config = load_experiment_config(args.config) if args.config else {"experiment": args.command}
    config["experiment"] = args.command
    plan = dict(config.get("plan", {"beta": 2.0}))
    for key, attr in (("beta", "beta"), ("d", "dim"), ("c1", "c1")):
        if getattr(args, attr) is not None:
            plan[key] = getattr(args, attr)
    config["plan"] = plan
    for key, attr in (("alpha", "alpha"), ("n_list", "n_list"), ("replicates", "reps"),
                      ("seed", "seed"), ("grid_step", "grid_step"), ("L", "L"), ("n", "n")):
        if getattr(args, attr, None) is not None:
            config[key] = getattr(args, attr)
    if args.centered:
        config["centered"] = True
    if "density" in config and "d" in plan:
        config["density"] = dict(config["density"], d=plan["d"])
    validate_config(config)
    report = run_experiment(config)
    report.write(args.out)
    print(report.summary_line())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wwdensity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, experiment=False):
        # experiment overrides default to None so config values survive
        p.add_argument("--beta", type=float, default=None if experiment else 2.0)
        p.add_argument("--L", type=float, default=None if experiment else 1.0)
        p.add_argument("--dim", type=int, default=None if experiment else 1)
        p.add_argument("--c1", type=float, default=None if experiment else 1.0)
        p.add_argument("--grid-step", type=float, default=None)
        p.add_argument("--out", default=".")

    p = sub.add_parser("estimate", help="stream a CSV sample through the recursive estimator")
    p.add_argument("csv")
    common(p)
    p.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian")
    p.add_argument("--kernel-file")
    p.add_argument("--higher-order", action="store_true")
    p.add_argument("--domain", type=_floats, default=[-3.0, 3.0], help="lo,hi for every axis")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("band", help="confidence band from an estimate and a tail model")
    p.add_argument("estimate")
    p.add_argument("tailmodel")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_band)

    p = sub.add_parser("kernel-build", help="higher-order kernel for a smoothness beta")
    common(p)
    p.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian")
    p.set_defaults(func=cmd_kernel_build)

    for name in ("rate", "tail", "coverage", "compare"):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("config", nargs="?")
        common(p, experiment=True)
        p.add_argument("--alpha", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--n-list", type=_ints)
        p.add_argument("--reps", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--centered", action="store_true")
        p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, KeyError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"wwdensity: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
