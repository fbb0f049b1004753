"""Command-line interface for the inverse-problem laboratory.

Subcommands: forward, dataset, train, sweep, construct, robustness, bound,
compare.  The exit code is nonzero iff a requested check fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields, replace

import numpy as np

from invlab import construct as C
from invlab import sweep as S
from invlab.network import metrics, realize_batch, save_network, load_network
from invlab.reference import reference_table
from invlab.sampling import ftilde, problem_spec
from invlab.training import TrainConfig, evaluate, gen_dataset, train

PROBLEMS = ("transmissivity", "euler-bernoulli", "volterra", "gravimetric")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip() != "")


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip() != "")


_SWEEP_KEYS = {
    "problem": str,
    "d_values": _parse_ints,
    "D_values": _parse_ints,
    "delta_values": _parse_floats,
    "runs": int,
    "m_train": int,
    "m_test": int,
    "root_seed": int,
    "output_path": str,
    "workers": int,
    "epochs": int,
    "batch_size": int,
    "width": int,
    "hidden_layers": int,
    "learning_rate": float,
    "final_lr_fraction": float,
}

_TRAIN_KEYS = {"epochs", "batch_size", "width", "hidden_layers", "learning_rate",
               "final_lr_fraction"}


def parse_sweep_config(path) -> S.SweepSpec:
    """Flat key = value file mapping one-to-one onto the sweep fields.

    Unknown keys are errors.  Lines starting with '#' are comments.
    """
    raw: dict = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _SWEEP_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            raw[key] = _SWEEP_KEYS[key](value)
    train_kwargs = {k: raw.pop(k) for k in list(raw) if k in _TRAIN_KEYS}
    spec = S.desk_scale_spec(**raw)
    if train_kwargs:
        spec = replace(spec, train_config=replace(spec.train_config, **train_kwargs))
    return spec


def cmd_forward(args) -> int:
    spec = problem_spec(args.problem, d=args.d, D=args.D)
    alpha = np.array(_parse_floats(args.alpha))
    out = ftilde(spec, alpha)
    print(" ".join(f"{v:.17g}" for v in out))
    return 0


def cmd_dataset(args) -> int:
    spec = problem_spec(args.problem, d=args.d, D=args.D)
    ds = gen_dataset(spec, args.delta, args.m, args.seed)
    np.savez(args.out, inputs=ds.inputs, targets=ds.targets)
    meta = {"problem": args.problem, "d": args.d, "D": args.D,
            "delta": args.delta, "m": args.m, "seed": args.seed}
    with open(str(args.out) + ".json", "w") as fh:
        json.dump(meta, fh, indent=1)
    print(f"wrote {args.m} rows to {args.out} ({ds.inputs.shape[1]} measurement components)")
    return 0


def cmd_train(args) -> int:
    seeds = S.cell_seeds(args.seed, args.problem, args.d, args.D, args.delta, 0)
    spec = problem_spec(args.problem, d=args.d, D=args.D)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                         learning_rate=args.learning_rate, seed=seeds["model"])
    train_ds = gen_dataset(spec, args.delta, args.m_train, seeds["train_data"])
    test_ds = gen_dataset(spec, args.delta, args.m_test, seeds["test_data"])
    model = train(train_ds, config)
    mse = evaluate(model, test_ds)
    print(f"test_mse {mse:.6e}")
    if args.save_model:
        save_network(model.network, args.save_model)
        print(f"model saved to {args.save_model}")
    if args.history:
        with open(args.history, "w") as fh:
            fh.write("epoch,train_loss\n")
            for i, v in enumerate(model.history):
                fh.write(f"{i},{v:.17g}\n")
    return 0


def cmd_sweep(args) -> int:
    if args.config:
        spec = parse_sweep_config(args.config)
    else:
        spec = S.desk_scale_spec(args.problem)
    overrides = {}
    for name in ("runs", "m_train", "m_test", "workers"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.seed is not None:
        overrides["root_seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    if overrides:
        spec = replace(spec, **overrides)
    rows = S.run_sweep(spec, progress=lambda r: print(
        f"  {r.problem} d={r.d} D={r.D} delta={r.delta} run={r.run_id}: "
        f"{r.test_mse:.3e} ({r.train_seconds:.0f}s) [{r.status}]", flush=True))
    stats = S.aggregate(rows)
    for s in stats:
        print(f"{s.problem} d={s.d} D={s.D} delta={s.delta}: "
              f"mean {s.mean_mse:.3e} std {s.std_mse:.3e} n={s.count}")
    failed = [r for r in rows if r.status != "ok"]
    if failed:
        print(f"{len(failed)} cell runs failed", file=sys.stderr)
        return 1
    return 0


def cmd_construct(args) -> int:
    ok = True
    for eps in (1e-1, 1e-2, 1e-3):
        net = C.mult_net(eps, args.K)
        g = np.linspace(-args.K, args.K, 201)
        X, Y = np.meshgrid(g, g)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        err = np.abs(realize_batch(net, pts)[:, 0] - pts[:, 0] * pts[:, 1]).max()
        zero = abs(realize_batch(net, np.array([[0.0, 0.7 * args.K]]))[0, 0])
        passed = err <= eps and zero == 0.0
        ok &= passed
        print(f"mult eps={eps}: grid error {err:.3e}, zero-line {zero:.1e} "
              f"[{'PASS' if passed else 'FAIL'}]")
    atlas = C.circle_atlas_fixture(args.D, args.M)
    net = C.assemble_manifold_net(atlas, args.eps)
    pts = atlas.sample_fn(1000)
    err = float(np.linalg.norm(realize_batch(net, pts) - atlas.target_fn(pts), axis=1).max())
    passed = err <= args.eps
    ok &= passed
    print(f"circle atlas D={args.D} M={args.M} eps={args.eps}: on-manifold error "
          f"{err:.3e} [{'PASS' if passed else 'FAIL'}] "
          f"(W={metrics(net)['W']}, L={metrics(net)['L']})")
    if args.save_net:
        save_network(net, args.save_net)
    return 0 if ok else 1


def cmd_robustness(args) -> int:
    atlas = C.circle_atlas_fixture(args.D, args.M)
    if args.model:
        net = load_network(args.model)
    else:
        net = C.assemble_manifold_net(atlas, args.eps)
    samples = atlas.sample_fn(args.samples)
    report = C.robustness_statistic(net, samples, args.sigma, args.trials,
                                    atlas=atlas, eps_target=args.eps, seed=args.seed)
    for key, value in report.csv_row().items():
        print(f"{key} {value}")
    ok = report.robustness_lhs <= report.bound_rhs
    print(f"lhs <= rhs [{'PASS' if ok else 'FAIL'}]")
    return 0 if ok else 1


def cmd_bound(args) -> int:
    value = C.generalization_bound(args.W, args.q, args.L, args.B, args.m, args.eps, args.p)
    print(f"{value:.12g}")
    return 0


def cmd_compare(args) -> int:
    rows = S.read_rows(args.results)
    stats = S.aggregate(rows)
    entries = S.compare_reference(stats, factor=args.factor)
    if not entries:
        print("no overlapping cells with the reference tables", file=sys.stderr)
        return 1
    ok = True
    for e in entries:
        ok &= e.passed
        print(f"{e.problem} d={e.d} D={e.D} delta={e.delta}: measured {e.measured:.3e} "
              f"reference {e.reference:.3e} ratio {e.ratio:.2f} "
              f"[{'PASS' if e.passed else 'FAIL'}]")
    trend = S.check_trends(stats)
    for t in trend:
        ok &= t.passed
        print(f"trend {t.axis} {t.fixed}: {t.detail} [{'PASS' if t.passed else 'FAIL'}]")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invlab",
                                     description="inverse-problem laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="evaluate the discretized forward map")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--D", type=int, default=100)
    p.add_argument("--alpha", required=True, help="comma-separated coefficients")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("dataset", help="generate and save a noisy dataset")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--D", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train one cell and report the test error")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--D", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--m-train", type=int, default=20000)
    p.add_argument("--m-test", type=int, default=8000)
    p.add_argument("--epochs", type=int, default=TrainConfig().epochs)
    p.add_argument("--batch-size", type=int, default=TrainConfig().batch_size)
    p.add_argument("--learning-rate", type=float, default=TrainConfig().learning_rate)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-model")
    p.add_argument("--history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a full experiment grid")
    p.add_argument("--config", help="flat key=value sweep configuration file")
    p.add_argument("--problem", choices=PROBLEMS, default="transmissivity")
    p.add_argument("--runs", type=int)
    p.add_argument("--m-train", dest="m_train", type=int)
    p.add_argument("--m-test", dest="m_test", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("construct", help="build and verify constructive networks")
    p.add_argument("--D", type=int, default=10)
    p.add_argument("--M", type=int, default=8)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--save-net")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("robustness", help="Monte-Carlo noise statistic on a network")
    p.add_argument("--model", help="saved network file (default: construct the fixture)")
    p.add_argument("--D", type=int, default=40)
    p.add_argument("--M", type=int, default=8)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("bound", help="evaluate the generalization-bound formula")
    p.add_argument("--W", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("compare", help="compare sweep results against the reference tables")
    p.add_argument("--results", required=True)
    p.add_argument("--factor", type=float, default=5.0)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
