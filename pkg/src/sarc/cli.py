"""Command-line benchmark front end.

    bench run --algo sarc --synth 1000,20,0,1 --lambda 1e-5 --out trace.csv

Exit codes: 0 when the gradient tolerance is reached, 2 on the iteration cap,
1 on any error (including usage errors and diverged baselines). Multiple
comma-separated algorithms/seeds expand to a grid of runs; --jobs runs them
in parallel, and --out must then contain {algo} / {seed} placeholders as
needed to keep output files distinct.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .bench import ALGORITHMS, RunSpec, run_benchmark


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors, which this tool reserves for the
    # iteration cap; remap usage problems to exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _parse_synth(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected n,d,seed,skew")
    try:
        return int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_algos(text: str):
    algos = [a.strip() for a in text.split(",") if a.strip()]
    if not algos:
        raise argparse.ArgumentTypeError("no algorithm given")
    for a in algos:
        if a not in ALGORITHMS:
            raise argparse.ArgumentTypeError(
                f"unknown algorithm {a!r} (choose from {', '.join(ALGORITHMS)})"
            )
    return algos


def _parse_seeds(text: str):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bench", description="second-order benchmark runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one algorithm on one dataset")
    run.add_argument("--algo", required=True, type=_parse_algos,
                     help=f"one of {', '.join(ALGORITHMS)}, or a comma list")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="LIBSVM text file")
    src.add_argument("--synth", type=_parse_synth, metavar="N,D,SEED,SKEW",
                     help="synthetic logistic data")
    run.add_argument("--lambda", dest="lam", type=float, default=1e-5,
                     help="regularization weight (default 1e-5)")
    run.add_argument("--scheme", choices=("uniform", "nonuniform"), default="uniform")
    run.add_argument("--eps", type=float, default=1e-2,
                     help="target optimality driving sample sizes")
    run.add_argument("--delta", type=float, default=0.1,
                     help="total sampling failure probability")
    run.add_argument("--seed", type=_parse_seeds, default=[0],
                     help="RNG seed, or a comma list")
    run.add_argument("--out", required=True,
                     help="trace CSV path; use {algo}/{seed} placeholders for grids")
    run.add_argument("--grad-tol", type=float, default=1e-9)
    run.add_argument("--max-iters", type=int, default=500)
    run.add_argument("--x0-std", type=float, default=5000.0,
                     help="stddev of the Gaussian initial point")
    run.add_argument("--batch", type=int, default=32, help="SGD batch size")
    run.add_argument("--jobs", type=int, default=1,
                     help="parallel processes for grid runs")
    return parser


def _expand_specs(args) -> list[RunSpec]:
    base = RunSpec(
        algo=args.algo[0],
        data_path=args.data,
        synth=args.synth,
        lam=args.lam,
        scheme=args.scheme,
        eps=args.eps,
        delta=args.delta,
        seed=args.seed[0],
        out=args.out,
        grad_tol=args.grad_tol,
        max_iters=args.max_iters,
        x0_std=args.x0_std,
        batch=args.batch,
    )
    specs = []
    for algo in args.algo:
        for seed in args.seed:
            out = args.out.format(algo=algo, seed=seed)
            specs.append(replace(base, algo=algo, seed=seed, out=out))
    if len(specs) > 1:
        outs = [s.out for s in specs]
        if len(set(outs)) != len(outs):
            raise ValueError(
                "grid runs need {algo}/{seed} placeholders in --out to keep files distinct"
            )
    return specs


def _run_one(spec: RunSpec):
    result = run_benchmark(spec)
    return (
        spec.algo, spec.seed, result.status, len(result.trace) - 1,
        result.ledger.epochs, result.f, result.grad_norm, spec.out, result.exit_code,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        specs = _expand_specs(args)
        if args.jobs > 1 and len(specs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                rows = list(pool.map(_run_one, specs))
        else:
            rows = [_run_one(spec) for spec in specs]
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(f"bench: error: {exc}\n")
        return 1
    code = 0
    for algo, seed, status, iters, epochs, f, gn, out, rc in rows:
        print(
            f"algo={algo} seed={seed} status={status} iters={iters} "
            f"epochs={epochs:.3f} f={f:.6e} grad_norm={gn:.3e} out={out}"
        )
        code = max(code, rc)
    return code


if __name__ == "__main__":
    sys.exit(main())
