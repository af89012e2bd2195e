"""Batch command-line front end.

Subcommands: generate, release, query, audit, evaluate, sweep. Exit codes:
0 success, 2 usage or bad flag values, 3 input-contract violations (bad or
mismatched input files), 4 failed audits. Every command is deterministic
under a fixed --seed; output files are written atomically.
"""

import argparse
import sys

from . import audit as audit_mod
from . import baselines, graphs, grid_release, release_io, tree_release
from .dp import PrivacyParams

USAGE_ERROR = 2
INPUT_ERROR = 3
AUDIT_FAILED = 4


def _warn_unsafe(scale: float) -> None:
    print(
        f"WARNING: noise scale overridden to {scale}; this release is NOT "
        "differentially private and must only be used for testing",
        file=sys.stderr,
    )


def cmd_generate(args) -> int:
    try:
        graph = graphs.generate_graph(
            args.family if args.family != "tree" else "random-tree",
            args.weights,
            seed=args.seed,
            nodes=args.nodes,
            depth=args.depth,
            side=args.side,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    release_io.atomic_write_text(args.output, graphs.dump_graph(graph))
    print(f"wrote {args.output}: kind={graph.kind} V={graph.vertex_count} "
          f"E={graph.edge_count}")
    return 0


def cmd_release(args) -> int:
    if args.mechanism == "grid" and args.delta is None:
        print("error: --mechanism grid requires --delta", file=sys.stderr)
        return USAGE_ERROR
    if args.unsafe_noise_scale is not None:
        _warn_unsafe(args.unsafe_noise_scale)
    try:
        graph = graphs.load_graph(args.input)
    except (ValueError, OSError) as exc:
        print(f"error: cannot load graph: {exc}", file=sys.stderr)
        return INPUT_ERROR
    try:
        params = PrivacyParams(args.epsilon, args.delta or 0.0)
        if args.mechanism == "tree":
            release = tree_release.build_tree_sketch(
                graph, params, args.seed, scale_override=args.unsafe_noise_scale)
        elif args.mechanism == "grid":
            release = grid_release.build_grid_sketch(
                graph, params, args.seed, scale_override=args.unsafe_noise_scale)
        else:
            release = baselines.build_edge_noise_release(
                graph, args.epsilon, args.seed,
                scale_override=args.unsafe_noise_scale)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    release.clamp_nonnegative = args.clamp_nonnegative
    release_io.save_release(release, args.output)
    print(f"wrote {args.output}: mechanism={args.mechanism} "
          f"V={graph.vertex_count} seed={args.seed}")
    return 0


def cmd_query(args) -> int:
    try:
        release = release_io.load_release(args.release)
    except (ValueError, OSError) as exc:
        print(f"error: cannot load release: {exc}", file=sys.stderr)
        return INPUT_ERROR
    v = release.vertex_count if hasattr(release, "vertex_count") \
        else release.noisy_graph.vertex_count
    if args.all_pairs:
        for s in range(v):
            for t in range(s + 1, v):
                value, terms = release_io.query_release(release, s, t)
                print(f"{s} {t} {value!r} {terms}")
        return 0
    if args.pair is None:
        print("error: need --pair s,t or --all-pairs", file=sys.stderr)
        return USAGE_ERROR
    try:
        s_str, t_str = args.pair.split(",")
        s, t = int(s_str), int(t_str)
    except ValueError:
        print(f"error: malformed --pair {args.pair!r}", file=sys.stderr)
        return USAGE_ERROR
    try:
        value, terms = release_io.query_release(release, s, t)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    print(f"{s} {t} {value!r} {terms}")
    return 0


def cmd_audit(args) -> int:
    try:
        graph = graphs.load_graph(args.input)
    except (ValueError, OSError) as exc:
        print(f"error: cannot load graph: {exc}", file=sys.stderr)
        return INPUT_ERROR
    try:
        observed, claimed, ok = audit_mod.sensitivity_audit(
            args.mechanism, graph, args.trials, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    print(f"mechanism={args.mechanism} trials={args.trials} "
          f"observed={observed!r} claimed={claimed!r} "
          f"pass={'true' if ok else 'false'}")
    return 0 if ok else AUDIT_FAILED


def cmd_evaluate(args) -> int:
    if args.mechanism == "grid" and args.delta is None:
        print("error: --mechanism grid requires --delta", file=sys.stderr)
        return USAGE_ERROR
    if args.unsafe_noise_scale is not None:
        _warn_unsafe(args.unsafe_noise_scale)
    try:
        graph = graphs.load_graph(args.input)
    except (ValueError, OSError) as exc:
        print(f"error: cannot load graph: {exc}", file=sys.stderr)
        return INPUT_ERROR
    config = audit_mod.ReleaseConfig(
        mechanism=args.mechanism,
        epsilon=args.epsilon,
        delta=args.delta or 0.0,
        gamma=args.gamma,
        scale_override=args.unsafe_noise_scale,
        clamp=args.clamp_nonnegative,
    )
    try:
        report = audit_mod.evaluate_errors(
            graph, config, args.trials, args.gamma, args.seed)
    except (ValueError, graphs.ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    if args.output:
        audit_mod.write_csv([report], args.output)
    print(f"mechanism={report.mechanism} V={report.vertex_count} "
          f"trials={report.trials} pairs={report.pairs_evaluated} "
          f"max_abs_error={report.max_abs_error!r} "
          f"noise_term_max={report.noise_term_max}")
    return 0


def cmd_sweep(args) -> int:
    if args.family == "grid" and args.delta is None:
        print("error: --family grid requires --delta", file=sys.stderr)
        return USAGE_ERROR
    sizes = [int(x) for x in args.sizes.split(",") if x.strip()] if args.sizes else []
    mechanism = "tree" if args.family == "tree" else "grid"
    config = audit_mod.ReleaseConfig(
        mechanism=mechanism,
        epsilon=args.epsilon,
        delta=args.delta or 0.0,
        gamma=args.gamma,
    )
    try:
        reports = audit_mod.scaling_experiment(
            args.family, sizes, config, args.trials, args.seed)
    except (ValueError, graphs.ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    audit_mod.write_csv(reports, args.output)
    if args.gnuplot:
        audit_mod.write_gnuplot_script(args.output, args.gnuplot)
    for report in reports:
        print(f"V={report.vertex_count} median_max_error="
              f"{report.median_max_error!r} max={report.max_abs_error!r}")
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privdist",
        description="Differentially private all-pairs distance release",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a graph file")
    p.add_argument("--family", required=True,
                   choices=["path", "tree", "balanced-tree", "grid", "star"])
    p.add_argument("--nodes", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--side", type=int)
    p.add_argument("--weights", default="const:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("release", help="build a private release file")
    p.add_argument("--mechanism", required=True,
                   choices=["tree", "grid", "edge-noise"])
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--clamp-nonnegative", action="store_true")
    p.add_argument("--unsafe-noise-scale", type=float,
                   help="override the noise scale (NOT private; testing only)")
    p.set_defaults(func=cmd_release)

    p = sub.add_parser("query", help="query a release file")
    p.add_argument("--release", required=True)
    p.add_argument("--pair", help="s,t")
    p.add_argument("--all-pairs", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("audit", help="sensitivity audit over random neighbors")
    p.add_argument("--mechanism", required=True,
                   choices=["tree", "grid", "path", "edge-noise"])
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("evaluate", help="measure additive error of releases")
    p.add_argument("--mechanism", required=True,
                   choices=["tree", "grid", "edge-noise"])
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.add_argument("--clamp-nonnegative", action="store_true")
    p.add_argument("--unsafe-noise-scale", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="size sweep with CSV + plot script output")
    p.add_argument("--family", required=True, choices=["tree", "grid"])
    p.add_argument("--sizes", required=True,
                   help="comma-separated vertex counts (tree) or sides (grid)")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--gnuplot")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
