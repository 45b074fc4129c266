"""Command-line front end.

Subcommands: gen-data, train, bench, diag, verify.  Metrics land in a CSV
with the fixed header

    iter,loss,batch_loss,Q_max,Q_mean,K,t_query_ns,t_forward_ns,t_delta_ns,t_update_ns,divergence

where ``loss`` is populated only on evaluation iterations and ``divergence``
only in ``--mode both``.  Exit codes: 0 success, 1 verification failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import verify as verify_mod
from .data import generate_synthetic, load_dataset, save_dataset
from .gram import h_cts_mc, h_dis
from .network import (
    gradient_norm_check,
    init_network,
    resolve_eta,
    resolve_tau,
    train_naive,
)
from .trainer import fire_statistics, init_trainer, train, weight_movement

CSV_HEADER = [
    "iter", "loss", "batch_loss", "Q_max", "Q_mean", "K",
    "t_query_ns", "t_forward_ns", "t_delta_ns", "t_update_ns", "divergence",
]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("KRON_SGD_WORKERS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            print(f"warning: ignoring non-integer KRON_SGD_WORKERS={env!r}", file=sys.stderr)
    return 1


def _load_or_generate(args, parser):
    if args.dataset:
        return load_dataset(args.dataset)
    if args.n is None or args.p is None or args.q is None:
        parser.error("either --dataset or all of --n/--p/--q are required")
    symmetric = getattr(args, "symmetric", False)
    if symmetric and args.p != args.q:
        parser.error(f"--symmetric requires p == q, got p={args.p} q={args.q}")
    return generate_synthetic(args.n, args.p, args.q, args.seed,
                              label_scale=args.label_scale, symmetric=symmetric)


def _auto_float(text: str):
    return None if text == "auto" else float(text)


def cmd_gen_data(args, parser) -> int:
    if args.symmetric and args.p != args.q:
        parser.error(f"--symmetric requires p == q, got p={args.p} q={args.q}")
    ds = generate_synthetic(args.n, args.p, args.q, args.seed,
                            label_scale=args.label_scale, symmetric=args.symmetric)
    save_dataset(ds, args.out)
    print(f"wrote {args.out}: n={ds.n} p={ds.p} q={ds.q} "
          f"symmetric={1 if ds.symmetric else 0} seed={args.seed} "
          f"label_scale={_fmt(args.label_scale)}")
    return 0


def _batch_loss(n, s_batch, u_batch, y_batch) -> float:
    return float((n / s_batch) * 0.5 * np.sum((u_batch - y_batch) ** 2))


def cmd_train(args, parser) -> int:
    ds = _load_or_generate(args, parser)
    if not 1 <= args.batch <= ds.n:
        parser.error(f"--batch must be in [1, {ds.n}]")
    if args.iters < 0:
        parser.error("--iters must be >= 0")
    tau = _auto_float(args.tau)
    if tau is None:
        tau = resolve_tau(args.m)
    elif tau < 0:
        parser.error("--tau must be >= 0")

    net = init_network(args.m, ds.p * ds.q, tau, args.seed)
    lambda_hat = h_dis(net, ds).lambda_min
    if lambda_hat <= 0:
        print(f"warning: lambda_hat={_fmt(lambda_hat)} <= 0; kernel matrix is degenerate",
              file=sys.stderr)
    eta = _auto_float(args.eta)
    if eta is None:
        if lambda_hat <= 0:
            parser.error("cannot resolve eta=auto with lambda_hat <= 0; pass --eta explicitly")
        eta = resolve_eta(lambda_hat, args.batch, ds.n)
    print(f"resolved tau={_fmt(tau)} eta={_fmt(eta)} lambda_hat={_fmt(lambda_hat)} "
          f"seed={args.seed}")

    eval_every = args.eval_every
    fast_traj = naive_traj = None
    if args.mode in ("fast", "both"):
        state = init_trainer(ds, args.m, tau, args.seed, backend=args.backend)
        fast_traj = train(state, args.iters, eta, args.batch, eval_every=eval_every)
    if args.mode in ("naive", "both"):
        naive_traj = train_naive(net, ds, eta, args.batch, args.iters, args.seed,
                                 eval_every=eval_every)

    primary = fast_traj if fast_traj is not None else naive_traj
    losses = dict(primary.losses)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerow([0, _fmt(losses.get(0, primary.initial_loss))] + [""] * 9)
        for t in range(1, args.iters + 1):
            idx = t - 1
            row = [t]
            row.append(_fmt(losses[t]) if t in losses else "")
            u_batch = primary.u_batches[idx]
            batch = primary.batches[idx]
            row.append(_fmt(_batch_loss(ds.n, args.batch, u_batch, ds.y[batch])))
            if fast_traj is not None:
                report = fast_traj.reports[idx]
                row += [report.q_max, _fmt(report.q_mean), report.k,
                        report.query_ns, report.forward_ns, report.delta_ns,
                        report.update_ns]
            else:
                q, f, dl, up = naive_traj.phase_ns[idx]
                row += ["", "", "", "", f, dl, up]
            if args.mode == "both":
                div = float(np.abs(fast_traj.u_batches[idx] - naive_traj.u_batches[idx]).max())
                row.append(_fmt(div))
            else:
                row.append("")
            writer.writerow(row)
    print(f"wrote {args.out}: mode={args.mode} iters={args.iters} "
          f"final_loss={_fmt(dict(primary.losses)[args.iters] if args.iters else primary.initial_loss)}")
    return 0


def cmd_bench(args, parser) -> int:
    dims = []
    for token in args.dims.split(","):
        token = token.strip()
        if token:
            try:
                dims.append(int(token))
            except ValueError:
                parser.error(f"bad dimension {token!r} in --dims")
    if not dims:
        parser.error("--dims must name at least one dimension")
    tau = _auto_float(args.tau)
    if tau is None:
        tau = resolve_tau(args.m)
    rows = bench_mod.dimension_sweep(
        dims, args.n, args.m, tau, args.eta, args.batch, args.iters, args.seed,
        backend=args.backend, warn=lambda msg: print(msg, file=sys.stderr),
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["d", "p", "q", "fast_ns_median", "naive_ns_median", "init_ns"])
        for row in rows:
            writer.writerow([row.d, row.p, row.q, _fmt(row.fast_ns_median),
                             _fmt(row.naive_ns_median), row.init_ns])
    for row in rows:
        print(f"d={row.d} p={row.p} q={row.q} fast={row.fast_ns_median:.0f}ns "
              f"naive={row.naive_ns_median:.0f}ns init={row.init_ns}ns")
    return 0


def cmd_diag(args, parser) -> int:
    ds = _load_or_generate(args, parser)
    tau = _auto_float(args.tau)
    if tau is None:
        tau = resolve_tau(args.m)
    workers = _workers(args)
    net = init_network(args.m, ds.p * ds.q, tau, args.seed)
    dis = h_dis(net, ds)
    print(f"lambda_min(H_dis) = {_fmt(dis.lambda_min)}")
    if np.all(dis.matrix == 0.0):
        print("warning: H_dis is identically zero (no neuron fires); kernel is degenerate")
    elif dis.lambda_min <= 0:
        print("warning: lambda_min(H_dis) <= 0; kernel is degenerate")
    mc = h_cts_mc(ds, tau, args.mc_samples, args.seed, workers=workers)
    print(f"lambda_hat(H_cts mc) = {_fmt(mc.lambda_min)} "
          f"+- {_fmt(mc.lambda_min_se)} (samples={mc.samples_used})")
    if mc.lambda_min <= 0:
        print("warning: lambda_hat <= 0; convergence-rate assumption does not hold here")

    if args.train_steps > 0:
        if not 1 <= args.batch <= ds.n:
            parser.error(f"--batch must be in [1, {ds.n}]")
        eta = args.eta if args.eta is not None else (
            resolve_eta(max(dis.lambda_min, 0.0), args.batch, ds.n) or 0.0
        )
        state = init_trainer(ds, args.m, tau, args.seed)
        train(state, args.train_steps, eta, args.batch, record_reports=False)
        movement = max(weight_movement(state, r) for r in range(args.m))
        stats = fire_statistics(state)
        print(f"max weight movement after {args.train_steps} steps = {_fmt(movement)}")
        print(f"fire stats: Q_max={stats.q_max} Q_mean={_fmt(stats.q_mean)} K_max={stats.k_max}")

        naive = train_naive(net, ds, eta, args.batch, args.train_steps, args.seed,
                            record_gradient_bound=True)
        max_ratio = max(naive.gradient_ratios) if naive.gradient_ratios else 0.0
        print(f"gradient bound max ratio = {_fmt(max_ratio)}")
    return 0


def cmd_verify(args, parser) -> int:
    suites = verify_mod.SUITE_NAMES if args.suite == "all" else (args.suite,)
    failures = []
    for name in suites:
        result = verify_mod.run_suite(name, seed=args.seed,
                                      inject_tree_fault=args.inject_tree_fault)
        status = "ok" if result.ok else "FAILED"
        print(f"suite {name}: {result.cases - len(result.failures)}/{result.cases} {status}")
        if not result.ok:
            failures.append(result)
    if failures:
        payload = [
            {"suite": r.name, "failures": r.failures} for r in failures
        ]
        with open(args.failure_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=str)
        print(f"failing cases serialized to {args.failure_out}", file=sys.stderr)
        return 1
    return 0


def _add_dataset_args(sub, include_symmetric=True):
    sub.add_argument("--dataset", help="dataset file; omitting it switches to synthetic data")
    sub.add_argument("--n", type=int, help="synthetic sample count")
    sub.add_argument("--p", type=int, help="synthetic left-factor dimension")
    sub.add_argument("--q", type=int, help="synthetic right-factor dimension")
    sub.add_argument("--label-scale", type=float, default=1.0)
    if include_symmetric:
        sub.add_argument("--symmetric", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kron-sgd",
        description="SGD on Kronecker-structured data with d-independent step cost",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen-data", help="write a synthetic dataset file")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--q", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--label-scale", type=float, default=1.0)
    gen.add_argument("--symmetric", action="store_true")
    gen.add_argument("--out", required=True)

    tr = subs.add_parser("train", help="train and emit per-iteration metrics CSV")
    tr.add_argument("--mode", choices=("fast", "naive", "both"), default="fast")
    _add_dataset_args(tr)
    tr.add_argument("--m", type=int, required=True, help="hidden width")
    tr.add_argument("--tau", default="auto", help="shift threshold or 'auto'")
    tr.add_argument("--eta", default="auto", help="step size or 'auto'")
    tr.add_argument("--batch", type=int, required=True, help="batch size")
    tr.add_argument("--iters", type=int, required=True)
    tr.add_argument("--seed", type=int, required=True)
    tr.add_argument("--eval-every", type=int, default=10)
    tr.add_argument("--out", required=True)
    tr.add_argument("--workers", type=int)
    tr.add_argument("--backend", choices=("compiled", "python"))

    be = subs.add_parser("bench", help="d-sweep step-time benchmark")
    be.add_argument("--dims", required=True, help="comma-separated dimensions, e.g. 64,256,1024")
    be.add_argument("--n", type=int, default=64)
    be.add_argument("--m", type=int, default=1024)
    be.add_argument("--tau", default="auto")
    be.add_argument("--eta", type=float, default=0.01)
    be.add_argument("--batch", type=int, default=4)
    be.add_argument("--iters", type=int, default=100)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--out", required=True)
    be.add_argument("--backend", choices=("compiled", "python"))

    dg = subs.add_parser("diag", help="kernel diagnostics and training-run bounds")
    _add_dataset_args(dg)
    dg.add_argument("--m", type=int, required=True)
    dg.add_argument("--tau", default="auto")
    dg.add_argument("--seed", type=int, required=True)
    dg.add_argument("--mc-samples", type=int, default=100000)
    dg.add_argument("--train-steps", type=int, default=0)
    dg.add_argument("--batch", type=int, default=4)
    dg.add_argument("--eta", type=float)
    dg.add_argument("--workers", type=int)

    vf = subs.add_parser("verify", help="run the self-check suites")
    vf.add_argument("--suite", choices=("all",) + verify_mod.SUITE_NAMES, default="all")
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--inject-tree-fault", action="store_true",
                    help="debug: corrupt one tree node to prove the harness fails")
    vf.add_argument("--failure-out", default="kron-sgd-verify-failure.json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "bench": cmd_bench,
        "diag": cmd_diag,
        "verify": cmd_verify,
    }
    return handlers[args.command](args, parser)


if __name__ == "__main__":
    sys.exit(main())
