"""Command-line interface: synth, rank, eval, and sweep subcommands.

Every command writes its resolved parameters to ``<out>.config.json``
next to its outputs, takes all randomness from explicit ``--seed``
flags, and produces byte-identical files when repeated. Exit codes:
0 success, 1 solver/runtime failure, 2 usage or validation error.
Set ``RAN_THREADS`` to parallelize per-query evaluation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .baselines import KernelGraphConfig
from .dataset import gen_three_rings, gen_two_moons, load_csv, save_csv
from .evaluation import (
    EvalError,
    evaluate_method,
    euclidean_method,
    external_scores_method,
    manifold_method,
    ran_method,
    sweep_k,
)
from .ranking import RankConfig, SolverError, query_indicator, ran_solve

__all__ = ["entrypoint", "main"]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_config(out: Path, command: str, params: dict) -> None:
    config = {"command": command, "version": __version__, "params": params}
    _write_json(out.with_suffix(".config.json"), config)


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ValueError(f"{flag} must list at least one value")
    return values


def _rank_config(args) -> RankConfig:
    return RankConfig(
        k=args.k,
        lam=args.lam,
        query_weight=args.query_weight,
        max_iters=args.max_iters,
        tol=args.tol,
        gamma_override=args.gamma,
    )


def _kernel_config(args) -> KernelGraphConfig:
    return KernelGraphConfig(
        sigma=args.sigma, k_sparsify=args.k_sparsify, alpha=args.alpha
    )


def _add_rank_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=5, help="neighbors per point")
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0,
                        help="smoothness weight")
    parser.add_argument("--gamma", type=float, default=None,
                        help="freeze the row regularizer at this value")
    parser.add_argument("--query-weight", type=float, default=1e8)
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--max-iters", type=int, default=50)
    parser.add_argument("--sigma", type=float, default=None,
                        help="diffusion kernel bandwidth (default: median distance)")
    parser.add_argument("--alpha", type=float, default=0.99,
                        help="diffusion damping factor")
    parser.add_argument("--k-sparsify", type=int, default=None,
                        help="restrict the diffusion kernel graph to k neighbors")


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="dataset CSV path")
    parser.add_argument("--label-column", default="-1",
                        help="label column index (default: last; 'none' for unlabeled)")


def _load_dataset(args):
    raw = str(args.label_column).strip().lower()
    label_column = None if raw == "none" else int(args.label_column)
    return load_csv(args.data, label_column=label_column)


def _method_params(args) -> dict:
    return {
        "method": args.method,
        "k": args.k,
        "lambda": args.lam,
        "gamma": args.gamma,
        "query_weight": args.query_weight,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "sigma": args.sigma,
        "alpha": args.alpha,
        "k_sparsify": args.k_sparsify,
    }


def _n_jobs() -> int:
    raw = os.environ.get("RAN_THREADS", "").strip()
    if not raw or raw == "0":
        return 1
    return max(1, int(raw))


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.kind == "two_moons":
        dataset = gen_two_moons(args.n, args.noise, args.seed)
    else:
        radii = tuple(float(tok) for tok in args.radii.split(","))
        dataset = gen_three_rings(args.n, radii, args.noise, args.seed)
    save_csv(dataset, out)
    _write_config(out, "synth", {
        "kind": args.kind,
        "n": args.n,
        "noise": args.noise,
        "seed": args.seed,
        "radii": args.radii if args.kind == "three_rings" else None,
        "out": str(out),
    })
    return EXIT_OK


def _select_method(args):
    if args.method == "ran":
        return ran_method(_rank_config(args))
    if args.method == "euclidean":
        return euclidean_method()
    if args.method == "mr":
        return manifold_method(_kernel_config(args))
    if args.method == "external":
        if not args.scores:
            raise ValueError("--scores directory is required for method 'external'")
        return external_scores_method(args.scores)
    raise ValueError(f"unknown method {args.method!r}")


def cmd_rank(args) -> int:
    dataset = _load_dataset(args)
    queries = _parse_int_list(args.query, "--query")
    for q in queries:
        if not 0 <= q < dataset.n:
            raise ValueError(f"query index {q} out of range for n={dataset.n}")
    y = query_indicator(dataset.n, queries)

    base = Path(args.out)
    if base.suffix in {".json", ".csv"}:
        base = base.with_suffix("")
    if args.method == "ran":
        result = ran_solve(dataset.data, y, _rank_config(args))
        payload = result.to_json_dict()
        scores = result.f
    else:
        method = _select_method(args)
        scores = method(dataset.data, y)
        payload = {"scores": [float(v) for v in scores]}
    payload["method"] = args.method
    payload["queries"] = queries
    _write_json(base.with_suffix(".json"), payload)

    with base.with_suffix(".csv").open("w", encoding="utf-8") as handle:
        width = dataset.d
        header = ["index"] + [f"x{i}" for i in range(width)] + ["score"]
        handle.write(",".join(header) + "\n")
        for i, (point, score) in enumerate(zip(dataset.data, scores)):
            cells = [str(i)] + [repr(float(v)) for v in point] + [repr(float(score))]
            handle.write(",".join(cells) + "\n")
    params = _method_params(args)
    params.update({"data": args.data, "query": queries, "out": str(base)})
    _write_config(base, "rank", params)
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = _load_dataset(args)
    method = _select_method(args)
    report = evaluate_method(
        dataset,
        method,
        args.at_k,
        method_name=args.method,
        config_echo=_method_params(args) | {"at_k": args.at_k, "data": args.data},
        n_jobs=_n_jobs(),
    )
    base = Path(args.out)
    if base.suffix in {".json", ".csv"}:
        base = base.with_suffix("")
    _write_json(base.with_suffix(".json"), report.to_json_dict())
    with base.with_suffix(".csv").open("w", encoding="utf-8") as handle:
        handle.write("method,at_k,mean_precision,mean_recall\n")
        handle.write(report.summary_row() + "\n")
    params = _method_params(args)
    params.update({"data": args.data, "at_k": args.at_k, "out": str(base)})
    _write_config(base, "eval", params)
    return EXIT_OK


def cmd_sweep(args) -> int:
    dataset = _load_dataset(args)
    k_values = _parse_int_list(args.k_list, "--k")
    cfg = RankConfig(
        k=k_values[0],
        lam=args.lam,
        query_weight=args.query_weight,
        max_iters=args.max_iters,
        tol=args.tol,
        gamma_override=args.gamma,
    )
    results = sweep_k(dataset, k_values, cfg, args.at_k, n_jobs=_n_jobs())
    base = Path(args.out)
    if base.suffix in {".json", ".csv"}:
        base = base.with_suffix("")
    with base.with_suffix(".csv").open("w", encoding="utf-8") as handle:
        handle.write("k,precision,recall\n")
        for k, report in results:
            handle.write(
                f"{k},{report.mean_precision:.2f},{report.mean_recall:.2f}\n"
            )
    _write_json(
        base.with_suffix(".json"),
        {"sweep": [{"k": k, "report": r.to_json_dict()} for k, r in results]},
    )
    params = {
        "k_list": k_values,
        "lambda": args.lam,
        "gamma": args.gamma,
        "query_weight": args.query_weight,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "at_k": args.at_k,
        "data": args.data,
        "out": str(base),
    }
    _write_config(base, "sweep", params)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptrank",
        description="Rank data points against queries on a learned neighbor graph.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    synth.add_argument("kind", choices=["two_moons", "three_rings"])
    synth.add_argument("--n", type=int, required=True, help="points per class")
    synth.add_argument("--noise", type=float, default=0.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--radii", default="1,2,3", help="three_rings radii")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    rank = sub.add_parser("rank", help="score all points against a query set")
    _add_data_flags(rank)
    rank.add_argument("--query", required=True, help="comma-separated query indices")
    rank.add_argument("--method", choices=["ran", "euclidean", "mr"], default="ran")
    rank.add_argument("--scores", default=None, help=argparse.SUPPRESS)
    _add_rank_flags(rank)
    rank.add_argument("--out", required=True)
    rank.set_defaults(func=cmd_rank)

    ev = sub.add_parser("eval", help="leave-one-out retrieval evaluation")
    _add_data_flags(ev)
    ev.add_argument("--method", choices=["ran", "euclidean", "mr", "external"],
                    default="ran")
    ev.add_argument("--scores", default=None,
                    help="directory of query_<i>.csv files for method 'external'")
    _add_rank_flags(ev)
    ev.add_argument("--at-k", dest="at_k", type=int, required=True)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    sweep = sub.add_parser("sweep", help="evaluate across neighbor counts")
    _add_data_flags(sweep)
    sweep.add_argument("--k", dest="k_list", required=True,
                       help="comma-separated neighbor counts")
    sweep.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sweep.add_argument("--gamma", type=float, default=None)
    sweep.add_argument("--query-weight", type=float, default=1e8)
    sweep.add_argument("--tol", type=float, default=1e-6)
    sweep.add_argument("--max-iters", type=int, default=50)
    sweep.add_argument("--at-k", dest="at_k", type=int, required=True)
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except (SolverError, EvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())
