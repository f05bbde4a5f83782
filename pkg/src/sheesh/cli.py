"""Command-line entry point.

Subcommands: cluster (run an engine, emit per-iteration CSV), gen (synthetic
dataset to fvecs), convert (fvecs <-> bvecs), bench-sanns (seeded-search
micro-benchmark), and bench-vamanasp (guarantee-rate experiments; not listed
in --help).

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import dataset, graph, kmeans, metric, sanns, vamanasp
from .errors import ContractViolation, FormatError, SheeshError

CSV_HEADER = "iteration,wall_seconds,score,avg_center_movement,reassigned_count,engine,k,seed"


def _fmt(x):
    return f"{x:.9g}"


@dataclass
class RunConfig:
    dataset: object  # path or VectorSet
    format: str = "fvecs"
    k: int = 100
    engine: str = "lloyd"
    init: str = "uniform"
    seed: int = 0
    time_limit_seconds: float = 500.0
    max_iterations: int = 20
    ef_build: int = 200
    M: int = 60
    ef_search: int = 100
    min_iterations: int = 21
    num_prev_assignments: int = 10
    avoid_regress: bool = True
    enable_seeds: bool = True
    enable_bulk: bool = True
    enable_min_iter: bool = True
    use_rebuilds: bool = True
    threads: int = 12
    chunk_size: int = None
    output: str = None

    def load_dataset(self):
        if isinstance(self.dataset, dataset.VectorSet):
            return self.dataset
        if self.format == "fvecs":
            return dataset.open_fvecs(self.dataset)
        if self.format == "bvecs":
            return dataset.open_bvecs(self.dataset)
        raise ContractViolation(f"unknown dataset format {self.format!r}")


def write_rows(path, rows, engine, k, seed):
    with open(path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for r in rows:
            f.write(",".join([str(r.iteration), _fmt(r.wall_seconds), _fmt(r.score),
                              _fmt(r.avg_center_movement), str(r.reassigned_count),
                              engine, str(k), str(seed)]) + "\n")


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SHEESH_SEED")
    return int(env) if env else 0


def cmd_cluster(args):
    cfg = RunConfig(dataset=args.dataset, format=args.format, k=args.k,
                    engine=args.engine, init=args.init, seed=_resolve_seed(args),
                    time_limit_seconds=args.time_limit_seconds,
                    max_iterations=args.max_iterations, ef_build=args.ef_build,
                    M=args.M, ef_search=args.ef_search,
                    min_iterations=args.min_iterations,
                    num_prev_assignments=args.num_prev_assignments,
                    avoid_regress=args.avoid_regress,
                    enable_seeds=args.enable_seeds, enable_bulk=args.enable_bulk,
                    enable_min_iter=args.enable_min_iter,
                    use_rebuilds=args.use_rebuilds, threads=args.threads,
                    chunk_size=args.chunk_size, output=args.output)
    rows, _ = kmeans.run_clustering(cfg)
    write_rows(cfg.output, rows, cfg.engine, cfg.k, cfg.seed)
    return 0


def cmd_gen(args):
    vs = dataset.gen_gaussian_mixture(args.n, args.d, args.clusters, args.spread,
                                      _resolve_seed(args))
    dataset.write_fvecs(args.out, vs.read_all())
    return 0


def cmd_convert(args):
    src_fmt = args.from_format or ("bvecs" if args.input.endswith(".bvecs") else "fvecs")
    dst_fmt = args.to_format or ("bvecs" if args.output.endswith(".bvecs") else "fvecs")
    vs = dataset.open_bvecs(args.input) if src_fmt == "bvecs" else dataset.open_fvecs(args.input)
    data = vs.read_all()
    if dst_fmt == "bvecs":
        dataset.write_bvecs(args.output, data)
    else:
        dataset.write_fvecs(args.output, data)
    return 0


def cmd_bench_sanns(args):
    """Recall / visit-count / guarantee micro-benchmark for seeded search."""
    seed = _resolve_seed(args)
    vs = dataset.gen_gaussian_mixture(args.n, args.d, args.clusters, args.spread, seed)
    pts = vs.read_all()
    rng = np.random.default_rng(seed + 1)
    queries = pts[rng.integers(0, len(pts), size=args.queries)] + \
        rng.normal(0, max(args.spread, 1e-3), size=(args.queries, args.d)).astype(np.float32)

    g = graph.bulk_build(pts, graph.BuildParams(ef_build=args.ef_build, M=args.M,
                                                level_seed=seed))
    sp = graph.SearchParams(beam_width=args.ef_search, result_count=1)
    seeder = vamanasp.ProjectionSeeder(pts, seed + 2)

    distinct = len(np.unique(pts, axis=0)) == len(pts) and len(pts) <= vamanasp.DEFAULT_POINT_CAP
    ag = vamanasp.build_slow(pts, vamanasp.AlphaParams()) if distinct else None

    variants = {"unseeded": lambda q, nn: [],
                "seeded_random": lambda q, nn: [int(rng.integers(len(pts)))],
                "seeded_true_nn": lambda q, nn: [nn],
                "projection_seeded": lambda q, nn: [seeder.query(q)]}
    rows = []
    for name, seeds_for in variants.items():
        hits = 0
        visits = 0
        met = 0
        for q in queries:
            nn, nnd = metric.nearest_brute(q, pts, 1)[0]
            seeds = seeds_for(q, nn)
            tr = sanns.seeded_query(g, sanns.SeededQuery(q=q, seeds=seeds, m=1), sp)
            visits += tr.visited_count
            if tr.results[0][1] == nnd:
                hits += 1
            if ag is not None:
                start = seeds[0] if seeds else 0
                met += vamanasp.seeded_greedy_search(ag, q, start).guarantee_met
        rows.append((name, hits / len(queries), visits / len(queries),
                     met / len(queries) if ag is not None else float("nan")))
    out = sys.stdout if args.output is None else open(args.output, "w")
    out.write("variant,recall_at_1,mean_visits,guarantee_rate\n")
    for name, rec, vis, rate in rows:
        out.write(f"{name},{_fmt(rec)},{_fmt(vis)},{_fmt(rate)}\n")
    if out is not sys.stdout:
        out.close()
    return 0


def cmd_bench_vamanasp(args):
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    pts = rng.random((args.n, args.d)).astype(np.float32)
    ap = vamanasp.AlphaParams(alpha=args.alpha, epsilon=args.epsilon)
    ag = vamanasp.build_slow(pts, ap)
    worst = 0.0
    met = 0
    trials = 0
    for _ in range(args.queries):
        q = rng.random(args.d).astype(np.float32)
        nn, nnd = metric.nearest_brute(q, pts, 1)[0]
        d_exact = np.sqrt(nnd)
        for s in rng.integers(0, args.n, size=args.starts_per_query):
            res = vamanasp.seeded_greedy_search(ag, q, int(s), ap)
            if d_exact > 0:
                worst = max(worst, res.best_dist / d_exact)
            met += res.guarantee_met
            trials += 1
    print(f"aspect_ratio={_fmt(ag.aspect_ratio)} max_degree={ag.max_degree()} "
          f"worst_ratio={_fmt(worst)} target={_fmt(ap.target_ratio)} "
          f"guarantee_rate={_fmt(met / trials)}")
    return 0


def _add_bool_flag(p, name, default):
    flag = name.replace("_", "-")
    p.add_argument(f"--{flag}", dest=name, action=argparse.BooleanOptionalAction,
                   default=default)


def build_parser():
    p = argparse.ArgumentParser(prog="sheesh")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="run a clustering engine, emit CSV")
    c.add_argument("--dataset", required=True)
    c.add_argument("--format", choices=["fvecs", "bvecs"], default="fvecs")
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--engine", choices=["lloyd", "blackbox", "sheesh"], default="lloyd")
    c.add_argument("--init", choices=["uniform", "kmeanspp"], default="uniform")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--time-limit-seconds", type=float, default=500.0)
    c.add_argument("--max-iterations", type=int, default=20)
    c.add_argument("--ef-build", type=int, default=200)
    c.add_argument("--M", type=int, default=60)
    c.add_argument("--ef-search", type=int, default=100)
    c.add_argument("--min-iterations", type=int, default=21)
    c.add_argument("--num-prev-assignments", type=int, default=10)
    for name in ["avoid_regress", "enable_seeds", "enable_bulk", "enable_min_iter",
                 "use_rebuilds"]:
        _add_bool_flag(c, name, True)
    c.add_argument("--threads", type=int, default=12)
    c.add_argument("--chunk-size", type=int, default=None)
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_cluster)

    g = sub.add_parser("gen", help="generate a synthetic Gaussian-mixture fvecs file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--clusters", type=int, required=True)
    g.add_argument("--spread", type=float, default=0.02)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("convert", help="convert between fvecs and bvecs")
    v.add_argument("--input", required=True)
    v.add_argument("--output", required=True)
    v.add_argument("--from-format", choices=["fvecs", "bvecs"], default=None)
    v.add_argument("--to-format", choices=["fvecs", "bvecs"], default=None)
    v.set_defaults(func=cmd_convert)

    b = sub.add_parser("bench-sanns", help="seeded-search micro-benchmark")
    b.add_argument("--n", type=int, default=256)
    b.add_argument("--d", type=int, default=16)
    b.add_argument("--clusters", type=int, default=8)
    b.add_argument("--spread", type=float, default=0.05)
    b.add_argument("--queries", type=int, default=100)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--ef-build", type=int, default=100)
    b.add_argument("--M", type=int, default=16)
    b.add_argument("--ef-search", type=int, default=10)
    b.add_argument("--output", default=None)
    b.set_defaults(func=cmd_bench_sanns)

    h = sub.add_parser("bench-vamanasp")
    h.add_argument("--n", type=int, default=256)
    h.add_argument("--d", type=int, default=8)
    h.add_argument("--alpha", type=float, default=2.0)
    h.add_argument("--epsilon", type=float, default=0.5)
    h.add_argument("--queries", type=int, default=50)
    h.add_argument("--starts-per-query", type=int, default=20)
    h.add_argument("--seed", type=int, default=None)
    h.set_defaults(func=cmd_bench_vamanasp)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except ContractViolation as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except SheeshError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
