"""Command-line entry point: ``ckm <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from . import io as ckm_io
from .core import CKMError, Distribution, FrequencySpec, InitStrategy, SolverConfig
from .datagen import GmmGenConfig, gen_gmm
from .frequencies import estimate_sigma2, sample_frequencies
from .metrics import METRICS_HEADER, ari, assign_labels, sse
from .pipeline import best_ckm, best_lloyd
from .sketcher import sketch_dataset

log = logging.getLogger("ckm")

DISTRIBUTIONS = {"adapted": Distribution.ADAPTED_RADIUS, "gaussian": Distribution.GAUSSIAN}


def _meta_path(model_path) -> Path:
    return Path(str(model_path) + ".json")


def _write_meta(model_path, meta: dict) -> None:
    with open(_meta_path(model_path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_meta(model_path) -> dict:
    p = _meta_path(model_path)
    if p.exists():
        with open(p) as fh:
            return json.load(fh)
    return {}


def _load_data(args, attr="data"):
    return ckm_io.load_dataset(getattr(args, attr), labels_last=args.csv_labels)


def _freq_spec(args, data=None) -> FrequencySpec:
    if args.sigma2 is not None:
        sigma2 = args.sigma2
    elif data is not None:
        try:
            sigma2 = estimate_sigma2(data.points[: args.sigma2_subsample], seed=args.freq_seed)
        except CKMError as exc:
            log.warning("%s; falling back to sigma2=1", exc)
            sigma2 = 1.0
    else:
        raise CKMError("--sigma2 is required when no data is given for estimation")
    return FrequencySpec(DISTRIBUTIONS[args.dist], sigma2, args.freq_seed)


# -- subcommands -----------------------------------------------------------

def cmd_gen(args):
    data = gen_gmm(GmmGenConfig(K=args.k, n=args.n, N=args.N, c=args.c, seed=args.seed))
    ckm_io.save_dataset(data, args.out)
    log.info("wrote %d points in %d dimensions to %s", data.N, data.n, args.out)


def cmd_freqs(args):
    data = _load_data(args) if args.data else None
    if data is None and args.n is None:
        raise CKMError("freqs needs --n or --data")
    n = data.n if data is not None else args.n
    freq = sample_frequencies(_freq_spec(args, data), args.m, n)
    ckm_io.save_freqs(freq, args.out)
    log.info("wrote %dx%d frequency matrix (sigma2=%.6g) to %s", freq.m, freq.n, freq.spec.sigma2, args.out)


def cmd_sketch(args):
    data = _load_data(args)
    if args.freqs:
        freq = ckm_io.load_freqs(args.freqs)
    else:
        freq = sample_frequencies(_freq_spec(args, data), args.m, data.n)
    if freq.n != data.n:
        raise CKMError(f"dimension mismatch: data n={data.n}, frequencies n={freq.n}")
    t0 = time.perf_counter()
    sk = sketch_dataset(data, freq, shards=args.shards)
    log.info("sketched N=%d with m=%d in %.1f ms", data.N, freq.m, 1e3 * (time.perf_counter() - t0))
    ckm_io.save_sketch(sk, args.out)


def cmd_solve(args):
    sk = ckm_io.load_sketch(args.sketch)
    init = InitStrategy(args.init)
    data = None
    if init != InitStrategy.RANGE:
        if not args.data:
            raise CKMError(f"init={init.value} requires data access: pass --data "
                           "(only 'range' works from the sketch alone)")
        data = _load_data(args)
        if data.n != sk.n:
            raise CKMError(f"dimension mismatch: data n={data.n}, sketch n={sk.n}")
    config = SolverConfig(K=args.k, init_strategy=init, seed=args.seed,
                          max_ascent_iters=args.ascent_iters, max_descent_iters=args.descent_iters)
    t0 = time.perf_counter()
    run = best_ckm(sk, config, args.replicates, data)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    ckm_io.save_model(run.model, args.out)
    _write_meta(args.out, {"method": "ckm", "replicates": args.replicates, "m": sk.m,
                           "sketch_residual": run.sketch_residual, "wall_ms": wall_ms})
    log.info("ckm: residual %.6g in %.1f ms", run.sketch_residual, wall_ms)


def cmd_kmeans(args):
    data = _load_data(args)
    if args.k > data.N:
        raise CKMError(f"K={args.k} exceeds the number of points N={data.N}")
    t0 = time.perf_counter()
    run = best_lloyd(data, args.k, args.replicates, args.init, args.seed, args.max_iters)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    ckm_io.save_model(run.model, args.out)
    _write_meta(args.out, {"method": "kmeans", "replicates": args.replicates, "m": "",
                           "sse": run.sse, "wall_ms": wall_ms})
    log.info("kmeans: SSE %.6g in %.1f ms", run.sse, wall_ms)


def cmd_eval(args):
    data = _load_data(args)
    model = ckm_io.load_model(args.model)
    if model.n != data.n:
        raise CKMError(f"dimension mismatch: data n={data.n}, model n={model.n}")
    meta = _read_meta(args.model)
    labels = data.labels
    if args.truth:
        labels = ckm_io.load_dataset(args.truth, labels_last=True).labels
    score = ""
    if labels is not None:
        score = ari(labels, assign_labels(data, model))
    row = {"run_id": args.run_id, "method": meta.get("method", ""),
           "replicates": meta.get("replicates", ""), "m": meta.get("m", ""), "K": model.K,
           "n": data.n, "N": data.N, "sse": sse(data, model), "ari": score,
           "wall_ms": meta.get("wall_ms", "")}
    _emit_rows([row], args.out, METRICS_HEADER, append=args.append)


def cmd_bench(args):
    if args.experiment == "phase-transition":
        rows = bench.phase_transition(args.vary, args.values, args.ratios, args.fixed, args.N,
                                      args.trials, args.seed)
    elif args.experiment == "stability":
        rows = bench.stability(args.k, args.n, args.N, args.m, args.runs, args.datasets,
                               args.inits, args.seed)
    else:
        rows = bench.timing(args.Ns, args.k, args.n, args.m, args.seed, args.shards)
    _emit_rows(rows, args.out, list(rows[0]) if rows else [])


def _emit_rows(rows, out, header, append=False):
    def fmt(v):
        return repr(float(v)) if isinstance(v, (float, np.floating)) else v

    if out in (None, "-"):
        fh, close = sys.stdout, False
    else:
        exists = Path(out).exists() and Path(out).stat().st_size > 0
        fh, close = open(out, "a" if append else "w", newline=""), True
        append = append and exists
    try:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        if not append:
            w.writeheader()
        for r in rows:
            w.writerow({k: fmt(v) for k, v in r.items()})
    finally:
        if close:
            fh.close()


# -- parser ----------------------------------------------------------------

def _float_list(s):
    return [float(x) for x in s.split(",") if x]


def _int_list(s):
    return [int(float(x)) for x in s.split(",") if x]


def _add_freq_args(p):
    p.add_argument("--m", type=int, default=1000, help="number of frequencies")
    p.add_argument("--dist", choices=sorted(DISTRIBUTIONS), default="adapted")
    p.add_argument("--sigma2", type=float, default=None, help="scale; estimated from data if omitted")
    p.add_argument("--sigma2-subsample", type=int, default=5000)
    p.add_argument("--freq-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ckm", description="Compressive K-means from dataset sketches.")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--csv-labels", action="store_true",
                        help="CSV datasets carry an integer label in the last column")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic Gaussian mixture")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--N", type=int, default=300_000)
    p.add_argument("--c", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("freqs", help="draw a frequency matrix")
    _add_freq_args(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--data", default=None, help="dataset used to estimate sigma2 and n")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_freqs)

    p = sub.add_parser("sketch", help="sketch a dataset")
    _add_freq_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--freqs", default=None, help="frequency file from 'ckm freqs'")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("solve", help="recover centroids from a sketch")
    p.add_argument("--sketch", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--init", choices=[s.value for s in InitStrategy], default="range")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", default=None, help="dataset, needed by sample/kpp inits")
    p.add_argument("--ascent-iters", type=int, default=300)
    p.add_argument("--descent-iters", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("kmeans", help="Lloyd-Max baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--init", choices=[s.value for s in InitStrategy], default="range")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("eval", help="SSE / ARI of a model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--truth", default=None, help="CSV with ground-truth labels in the last column")
    p.add_argument("--run-id", default="0")
    p.add_argument("--append", action="store_true")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="named experiments")
    p.add_argument("experiment", choices=["phase-transition", "stability", "timing"])
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--N", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vary", choices=["K", "n"], default="K")
    p.add_argument("--values", type=_int_list, default=[2, 5, 10])
    p.add_argument("--ratios", type=_float_list, default=[1, 2, 5, 10])
    p.add_argument("--fixed", type=int, default=10, help="value of the non-varied K or n")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--datasets", type=int, default=1)
    p.add_argument("--inits", type=lambda s: s.split(","), default=["range", "sample", "kpp"])
    p.add_argument("--Ns", type=_int_list, default=[10_000, 100_000, 1_000_000])
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (CKMError, OSError) as exc:
        print(f"ckm {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
