"""Command line interface.

    gpssm systems gen --family sinusoidal --seed 3 --out data.csv
    gpssm fit --data data.csv --kernel '{"type": "squared_exponential"}' --out model.json
    gpssm predict --model model.json --x 0.1,0.2
    gpssm equilibria --model model.json --box -5,5 --out eq.json
    gpssm certify --model model.json --equilibria eq.json --out cert.json
    gpssm census --config cfg.json --out table.csv
    gpssm vdp --x0 -1.8,0 --steps 300 --out traj.csv

Exit status: 0 on success, 2 on usage errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from .dynamics import simulate
from .equilibria import (
    EquilibriumSet,
    classify_linear_equilibria,
    find_equilibria,
    linear_affine_form,
)
from .errors import NumericalError, UsageError
from .experiments import ExperimentConfig, VdpConfig, run_equilibrium_census, run_vdp_demo
from .gp import fit, fit_optimized, predict_mean, predict_variance
from .io import load_model, model_to_dict, read_json, read_training_csv, save_model, write_json, write_training_csv
from .kernels import Hyperparameters, Linear, SquaredExponential, kernel_from_dict
from .optim import OptimConfig
from .stability import CERT_VERSION, certify_bounded, classify_linear, classify_local, digest
from .systems import VAN_DER_POL, FAMILIES, VanDerPol, make_grid_training, sample_system, system_to_dict

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# options whose values are comma-separated numbers that may start with '-'
_VECTOR_OPTS = ("--x0", "--x", "--box", "--train-box")
_NUMBERISH = re.compile(r"^-[\d.]")


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _join_vector_args(argv):
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VECTOR_OPTS:
            nxt = next(it, None)
            if nxt is not None and _NUMBERISH.match(nxt):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def _kernel_arg(text: str):
    path = Path(text)
    if path.suffix == ".json" and path.exists():
        spec = read_json(path)
    else:
        try:
            spec = json.loads(text)
        except json.JSONDecodeError:
            spec = {"type": text}
    return kernel_from_dict(spec)


def _optim_args(p):
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)


def _dump(obj, out):
    if out:
        write_json(obj, out)
    else:
        print(json.dumps(obj, indent=2))


def cmd_systems_gen(args):
    if args.family == VAN_DER_POL:
        system = VanDerPol(args.epsilon, args.sample_time, 0.01 if args.noise_std is None else args.noise_std,
                           args.seed)
        box = args.train_box if args.train_box is not None else np.array([-4.0, 4.0])
    else:
        system = sample_system(args.family, args.seed, args.noise_std)
        box = args.train_box if args.train_box is not None else np.array([-1.0, 1.0])
    data = make_grid_training(system, box, args.points, np.random.default_rng([args.seed, 1]))
    write_training_csv(data, args.out)
    sidecar = Path(args.out).with_suffix(".system.json")
    write_json({**system_to_dict(system), "trainBox": list(map(float, box)), "pointsPerAxis": args.points}, sidecar)
    print(f"wrote {data.m} pairs to {args.out} (parameters in {sidecar})")


def cmd_fit(args):
    data = read_training_csv(args.data)
    hyper = Hyperparameters(_kernel_arg(args.kernel), args.noise_variance)
    if args.no_optimize:
        model = fit(data, hyper)
    else:
        model = fit_optimized(data, hyper, OptimConfig(max_iter=args.max_iter, restarts=args.restarts, seed=args.seed))
    save_model(model, args.out)
    for i, h in enumerate(model.hypers):
        print(f"dim {i + 1}: {json.dumps(h.to_dict())}")


def cmd_predict(args):
    model = load_model(args.model)
    if args.steps:
        traj = simulate(model, args.x, args.steps)
        if args.out:
            traj.to_csv(args.out)
        else:
            for k, s in enumerate(traj.states):
                print(k, *s)
        return
    mean = predict_mean(model, args.x)
    var = predict_variance(model, args.x)
    _dump({"x": args.x.tolist(), "mean": mean.tolist(), "variance": var.tolist()}, args.out)


def _equilibria_for(model, box, starts, seed):
    if all(isinstance(k, Linear) for k in model.kernels):
        return classify_linear_equilibria(linear_affine_form(model))
    from .equilibria import SolverConfig

    return find_equilibria(model, box, starts, SolverConfig(seed=seed))


def cmd_equilibria(args):
    model = load_model(args.model)
    box = None if args.box is None else args.box
    eq = _equilibria_for(model, box, args.starts, args.seed)
    _dump(eq.to_dict(), args.out)


def cmd_certify(args):
    model = load_model(args.model)
    model_dict = model_to_dict(model)
    prov = {"model": digest(model_dict)}
    reports = []
    if all(isinstance(k, Linear) for k in model.kernels):
        reports.append(classify_linear(linear_affine_form(model)))
    else:
        if args.equilibria:
            eq_dict = read_json(args.equilibria)
            prov["equilibria"] = digest(eq_dict)
            eq = EquilibriumSet.from_dict(eq_dict)
        else:
            eq = _equilibria_for(model, None, args.starts, args.seed)
        if all(isinstance(k, SquaredExponential) for k in model.kernels):
            reports.append(certify_bounded(model))
        reports.extend(classify_local(model, p.x) for p in eq.points)
    out = {"version": CERT_VERSION, "provenance": prov,
           "reports": [{**r.to_dict(), "provenance": prov} for r in reports]}
    _dump(out, args.out)


def cmd_census(args):
    cfg_dict = read_json(args.config) if args.config else {}
    if args.full_scale:
        cfg_dict["fullScale"] = True
    config = ExperimentConfig.from_dict(cfg_dict)
    if args.workers:
        from dataclasses import replace

        config = replace(config, workers=args.workers)
    table = run_equilibrium_census(config)
    table.to_csv(args.out)
    print(table.format())
    for line in table.diagnostics:
        print("failed:", line, file=sys.stderr)
    if args.artifacts:
        root = Path(args.artifacts)
        root.mkdir(parents=True, exist_ok=True)
        for rec in table.runs:
            slug = rec.label.replace(" ", "_").replace("=", "")
            write_json(rec.to_dict(), root / f"system{rec.system_index:03d}_{slug}.json")


def cmd_vdp(args):
    x0s = (tuple(args.x0),) if args.x0 is not None else VdpConfig.x0s
    cfg = VdpConfig(x0s=x0s, steps=args.steps, train_points_per_axis=args.points, seed=args.seed)
    result = run_vdp_demo(cfg)
    summary = {"ultimateBound": result.bound, "invariantBox": result.invariant_box.tolist(), "runs": []}
    for i, run in enumerate(result.runs):
        if args.out:
            out = Path(args.out)
            stem = out if len(result.runs) == 1 else out.with_name(f"{out.stem}_{i}{out.suffix}")
            run.model.to_csv(stem)
            run.true.to_csv(stem.with_name(f"{stem.stem}.true{stem.suffix}"))
        summary["runs"].append({
            "x0": run.x0.tolist(),
            "inBoundFrom": run.in_bound_from,
            "inInvariantBoxFrom": run.in_box_from,
            "rmseFirst100": run.rmse_100,
            "trueExitStep": run.true_exit_step,
        })
    print(json.dumps(summary, indent=2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpssm", description="Deterministic GP state space model toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("systems", help="reference system data")
    ssub = p.add_subparsers(dest="systems_command", required=True)
    g = ssub.add_parser("gen", help="write grid training data as CSV")
    g.add_argument("--family", choices=(*FAMILIES, VAN_DER_POL), default=FAMILIES[0])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points", type=int, default=10, help="grid points per axis")
    g.add_argument("--train-box", type=_vector, default=None)
    g.add_argument("--noise-std", type=float, default=None)
    g.add_argument("--epsilon", type=float, default=-0.8)
    g.add_argument("--sample-time", type=float, default=0.1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_systems_gen)

    p = sub.add_parser("fit", help="fit a model to training CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--kernel", default="squared_exponential",
                   help="kernel JSON, path to a .json file, or a bare type name")
    p.add_argument("--noise-variance", type=float, default=1e-2)
    p.add_argument("--no-optimize", action="store_true")
    _optim_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict or simulate from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--x", type=_vector, required=True)
    p.add_argument("--steps", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("equilibria", help="enumerate equilibrium points")
    p.add_argument("--model", required=True)
    p.add_argument("--box", type=_vector, default=None)
    p.add_argument("--starts", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("certify", help="stability certificates")
    p.add_argument("--model", required=True)
    p.add_argument("--equilibria")
    p.add_argument("--starts", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("census", help="equilibrium-count census over random systems")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--artifacts", help="directory for per-run JSON artifacts")
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--full-scale", action="store_true", help="100 systems, 10x10 grid, full optimizer budget")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("vdp", help="Van der Pol boundedness demonstration")
    p.add_argument("--x0", type=_vector, default=None)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_vdp)
    return parser


def main(argv=None) -> int:
    argv = _join_vector_args(sys.argv[1:] if argv is None else list(argv))
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (UsageError, FileNotFoundError) as exc:
        print(f"gpssm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"gpssm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
