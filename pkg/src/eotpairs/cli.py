"""Command-line surface: build, sample, simulate, evaluate, reference vectors.

Every randomized command requires an explicit seed and is bit-reproducible.
Outputs are written atomically. Exit codes: 0 success, 2 usage error,
1 with a machine-parseable ``error: <kind>: <message>`` line otherwise.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .builders import DataRecipeSpec, MixturesPresetSpec, build_from_data, build_mixtures_preset
from .dynamics import OptimalDrift, sample_sb_trajectories_exact, simulate_sb
from .errors import DimensionMismatchError, EotPairsError
from .mala import ExplicitInit, FromJointDraw, MalaConfig, default_step_size, sample_reverse_conditional
from .metrics import MetricReport, bw2_uvp, cbw2_uvp, kl_forward, kl_reverse, mmd_rbf
from .pair import BenchmarkPair
from .pairfile import load_pair, save_pair
from .plan import conditional_plan, sample_conditional, sample_joint
from .potential import validate_potential
from .protocol import SubprocessDrift, serve_drift
from .refvectors import (
    export_reference_vectors,
    load_reference_file,
    verify_reference,
    write_reference_file,
)
from .rng import Seed
from .tensorio import (
    atomic_write_text,
    read_points,
    write_samples,
    write_samples_csv,
    write_trajectories,
)


def _seed_args(p: argparse.ArgumentParser, name: str = "--seed", required: bool = True) -> None:
    p.add_argument(name, type=int, required=required, help="64-bit seed value")
    p.add_argument("--stream", type=int, default=0, help="seed stream index (default 0)")


def _get_seed(args: argparse.Namespace) -> Seed:
    return Seed(args.seed, args.stream)


def _load_pair_arg(args: argparse.Namespace) -> BenchmarkPair:
    return load_pair(args.pair)


def _write_sample_output(path: str, samples: np.ndarray, csv: bool) -> None:
    if csv:
        write_samples_csv(path, samples)
    else:
        write_samples(path, samples)


def _check_points_dim(points: np.ndarray, pair: BenchmarkPair, what: str) -> np.ndarray:
    if points.ndim != 2 or points.shape[1] != pair.dim:
        raise DimensionMismatchError(
            f"{what} has dimension {points.shape[-1] if points.ndim else '?'}, "
            f"pair expects {pair.dim}"
        )
    return points


def _emit_report(report: MetricReport, out: str | None) -> None:
    for line in report.text_lines():
        print(line)
    if out:
        header, row = report.csv_row()
        atomic_write_text(out, header + "\n" + row + "\n")


def _emit_reports(reports: list[MetricReport], out: str | None) -> None:
    for r in reports:
        for line in r.text_lines():
            print(line)
    if out:
        header, _ = reports[0].csv_row()
        rows = [r.csv_row()[1] for r in reports]
        atomic_write_text(out, header + "\n" + "\n".join(rows) + "\n")


def cmd_build_preset(args: argparse.Namespace) -> int:
    spec = MixturesPresetSpec(
        dim=args.dim,
        epsilon=args.eps,
        seed=_get_seed(args),
        n_components=args.n,
        radius=args.radius,
        source_variance=args.source_var,
        matrix_scale=args.matrix_scale,
    )
    pair = build_mixtures_preset(spec)
    save_pair(args.output, pair)
    print(f"wrote {args.output} ({pair.name})")
    return 0


def cmd_build_from_data(args: argparse.Namespace) -> int:
    target = read_points(args.target)
    source_data = read_points(args.source) if args.source else None
    spec = DataRecipeSpec(
        target=target,
        n_clusters=args.clusters,
        lam=getattr(args, "lambda"),
        epsilon=args.eps,
        seed=_get_seed(args),
        kmeans_restarts=args.restarts,
    )
    pair, fit = build_from_data(spec, source_data=source_data)
    save_pair(args.output, pair)
    print(f"wrote {args.output} ({pair.name})")
    print(f"kmeans_inertia={fit.inertia!r}")
    print("cluster_counts=" + ",".join(str(int(c)) for c in fit.counts))
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    report = validate_potential(pair.potential)
    print(f"appropriate={str(report.appropriate).lower()}")
    for i, v in enumerate(report.min_eigenvalues):
        print(f"min_eigenvalue[{i}]={v!r}")
    return 0 if report.appropriate else 1


def cmd_sample(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    seed = _get_seed(args)
    kind = args.what
    if kind == "source":
        out = pair.source.sample(seed, args.count)
    elif kind == "target":
        out = sample_joint(pair, seed, args.count).ys
    elif kind == "joint":
        js = sample_joint(pair, seed, args.count)
        out = np.hstack([js.xs, js.ys])
    elif kind == "conditional":
        probes = _check_points_dim(read_points(args.x_file), pair, "--x-file")
        chunks = []
        for i, x in enumerate(probes):
            plan = conditional_plan(pair, x)
            chunks.append(sample_conditional(plan, seed.child(i), args.count))
        out = np.vstack(chunks) if chunks else np.empty((0, pair.dim))
    else:
        raise EotPairsError(f"unknown sample kind {kind!r}")
    _write_sample_output(args.output, out, args.csv)
    return 0


def cmd_sample_reverse(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    seed = _get_seed(args)
    ys = _check_points_dim(read_points(args.y_file), pair, "--y-file")
    step_size = args.step_size if args.step_size is not None else default_step_size(pair.epsilon)
    init = ExplicitInit(np.zeros(pair.dim)) if args.start_at_zero else FromJointDraw()
    cfg = MalaConfig(step_size=step_size, steps=args.steps, init=init)
    rows = []
    rates = []
    for i, y in enumerate(ys):
        for c in range(args.chains):
            chain, diag = sample_reverse_conditional(pair, y, cfg, seed.child(i * args.chains + c))
            kept = chain[args.burn_in:]
            rows.append(kept if args.keep_chain else kept[-1:])
            rates.append(diag.acceptance_rate)
    out = np.vstack(rows) if rows else np.empty((0, pair.dim))
    _write_sample_output(args.output, out, args.csv)
    print(f"acceptance_rate_mean={float(np.mean(rates)) if rates else float('nan')!r}")
    return 0


def cmd_sample_bridge(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    seed = _get_seed(args)
    if args.grid:
        grid = [float(v) for v in args.grid.split(",")]
    else:
        grid = list(np.linspace(0.0, 1.0, args.grid_steps + 1))
    times, states = sample_sb_trajectories_exact(pair, seed, grid, args.count)
    write_trajectories(args.output, states)
    print("times=" + ",".join("%.17g" % t for t in times))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    seed = _get_seed(args)
    eps = args.eps if args.eps is not None else pair.epsilon
    x0 = pair.source.sample(seed.child(0), args.paths)
    trajectories = simulate_sb(OptimalDrift(pair), x0, eps, args.steps, seed.child(1))
    states = np.stack([t.states for t in trajectories])
    write_trajectories(args.output, states)
    diverged = sum(t.diverged for t in trajectories)
    if diverged:
        print(f"diverged_paths={diverged}")
    return 0


def cmd_evaluate_bw2uvp(args: argparse.Namespace) -> int:
    pred = read_points(args.pred)
    ref = read_points(args.ref)
    _emit_report(bw2_uvp(pred, ref), args.output)
    return 0


def cmd_evaluate_cbw2uvp(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    seed = _get_seed(args)
    test_x = _check_points_dim(read_points(args.test_x), pair, "--test-x")
    pred = _check_points_dim(read_points(args.pred_samples), pair, "--pred-samples")
    m = test_x.shape[0]
    k = args.samples_per_x
    if pred.shape[0] != m * k:
        raise EotPairsError(
            f"--pred-samples has {pred.shape[0]} rows, expected {m} probes x {k} samples"
        )
    groups = pred.reshape(m, k, pair.dim)
    means = groups.mean(axis=1)
    covs = np.stack([np.cov(g, rowvar=False, ddof=1).reshape(pair.dim, pair.dim) for g in groups])
    report = cbw2_uvp(
        pair,
        predictor=None,
        test_x=test_x,
        samples_per_x=k,
        seed=seed,
        normalization_samples=args.norm_samples,
        predicted_moments=(means, covs),
    )
    _emit_report(report, args.output)
    return 0


def cmd_evaluate_kl(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    seed = _get_seed(args)
    truth = OptimalDrift(pair)
    source_draws = pair.source.sample(seed.child(0), args.paths)
    reports = []
    with SubprocessDrift(args.cand_drift_endpoint, pair.dim) as cand:
        if args.metric in ("fwd", "both"):
            reports.append(
                kl_forward(truth, cand, source_draws, pair.epsilon, args.steps, seed.child(1))
            )
        if args.metric in ("rev", "both"):
            reports.append(
                kl_reverse(truth, cand, source_draws, pair.epsilon, args.steps, seed.child(2))
            )
    _emit_reports(reports, args.output)
    return 0


def cmd_evaluate_mmd(args: argparse.Namespace) -> int:
    a = read_points(args.a)
    b = read_points(args.b)
    bandwidth = args.bandwidth if args.bandwidth is not None else "median"
    _emit_report(mmd_rbf(a, b, bandwidth=bandwidth), args.output)
    return 0


def cmd_export_reference(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    doc = export_reference_vectors(pair, Seed(args.probe_seed, args.stream))
    write_reference_file(args.output, doc)
    print(f"wrote {args.output}")
    return 0


def cmd_verify_reference(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    doc = load_reference_file(args.reference)
    failures = verify_reference(pair, doc)
    if failures:
        for f in failures:
            print(f"mismatch: {f}", file=sys.stderr)
        raise EotPairsError(f"{len(failures)} reference probes failed")
    print("reference vectors verified")
    return 0


def cmd_drift_server(args: argparse.Namespace) -> int:
    pair = _load_pair_arg(args)
    serve_drift(pair, sys.stdin, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eotpairs",
        description="Benchmark pairs with closed-form conditional plans and bridge drifts.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="construct benchmark pairs").add_subparsers(
        dest="recipe", required=True
    )
    preset = build.add_parser("preset-mixtures", help="random sphere-center mixtures preset")
    preset.add_argument("--dim", type=int, required=True)
    preset.add_argument("--eps", type=float, required=True)
    preset.add_argument("--n", type=int, default=5, help="component count (default 5)")
    preset.add_argument("--radius", type=float, default=5.0)
    preset.add_argument("--source-var", type=float, default=0.25)
    preset.add_argument("--matrix-scale", type=float, default=None,
                        help="override the preset matrix scalar")
    _seed_args(preset)
    preset.add_argument("-o", "--output", required=True)
    preset.set_defaults(fn=cmd_build_preset)

    fromdata = build.add_parser("from-data", help="k-means recipe from a target dataset")
    fromdata.add_argument("--target", required=True, help="target dataset (CSV or tensor)")
    fromdata.add_argument("--source", default=None,
                          help="source dataset for the Gaussian source fit")
    fromdata.add_argument("--clusters", type=int, required=True)
    fromdata.add_argument("--lambda", type=float, required=True, dest="lambda")
    fromdata.add_argument("--eps", type=float, required=True)
    fromdata.add_argument("--restarts", type=int, default=10)
    _seed_args(fromdata)
    fromdata.add_argument("-o", "--output", required=True)
    fromdata.set_defaults(fn=cmd_build_from_data)

    validate = sub.add_parser("validate", help="appropriateness report for a pair")
    validate.add_argument("--pair", required=True)
    validate.set_defaults(fn=cmd_validate)

    sample = sub.add_parser("sample", help="draw from pair objects").add_subparsers(
        dest="what", required=True
    )
    for kind in ("source", "target", "joint"):
        p = sample.add_parser(kind)
        p.add_argument("--pair", required=True)
        p.add_argument("--count", type=int, required=True)
        _seed_args(p)
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--csv", action="store_true", help="CSV output (dim <= 8)")
        p.set_defaults(fn=cmd_sample, what=kind)

    cond = sample.add_parser("conditional")
    cond.add_argument("--pair", required=True)
    cond.add_argument("--x-file", required=True, help="probe points (CSV or tensor)")
    cond.add_argument("--count", type=int, required=True, help="draws per probe")
    _seed_args(cond)
    cond.add_argument("-o", "--output", required=True)
    cond.add_argument("--csv", action="store_true")
    cond.set_defaults(fn=cmd_sample, what="conditional")

    rev = sample.add_parser("reverse", help="MALA chains targeting the reverse conditional")
    rev.add_argument("--pair", required=True)
    rev.add_argument("--y-file", required=True)
    rev.add_argument("--steps", type=int, default=200)
    rev.add_argument("--step-size", type=float, default=None,
                     help="default scales with epsilon: 1e-4 * eps")
    rev.add_argument("--chains", type=int, default=1)
    rev.add_argument("--burn-in", type=int, default=0)
    rev.add_argument("--keep-chain", action="store_true",
                     help="emit every post-burn-in state instead of the final one")
    rev.add_argument("--start-at-zero", action="store_true",
                     help="explicit zero start instead of a plan-draw start")
    _seed_args(rev)
    rev.add_argument("-o", "--output", required=True)
    rev.add_argument("--csv", action="store_true")
    rev.set_defaults(fn=cmd_sample_reverse)

    bridge = sample.add_parser("bridge", help="exact bridge trajectories on a grid")
    bridge.add_argument("--pair", required=True)
    bridge.add_argument("--count", type=int, required=True)
    bridge.add_argument("--grid", default=None, help="comma-separated times incl. 0 and 1")
    bridge.add_argument("--grid-steps", type=int, default=10)
    _seed_args(bridge)
    bridge.add_argument("-o", "--output", required=True)
    bridge.set_defaults(fn=cmd_sample_bridge)

    simulate = sub.add_parser("simulate", help="Euler-Maruyama bridge paths (optimal drift)")
    simulate.add_argument("--pair", required=True)
    simulate.add_argument("--paths", type=int, required=True)
    simulate.add_argument("--steps", type=int, default=200)
    simulate.add_argument("--eps", type=float, default=None,
                          help="volatility override (default: pair epsilon)")
    _seed_args(simulate)
    simulate.add_argument("-o", "--output", required=True)
    simulate.set_defaults(fn=cmd_simulate)

    ev = sub.add_parser("evaluate", help="metrics").add_subparsers(dest="metric_kind", required=True)

    bw = ev.add_parser("bw2uvp", help="marginal unexplained variance percentage")
    bw.add_argument("--pred", required=True)
    bw.add_argument("--ref", required=True)
    bw.add_argument("-o", "--output", default=None)
    bw.set_defaults(fn=cmd_evaluate_bw2uvp)

    cbw = ev.add_parser("cbw2uvp", help="conditional unexplained variance percentage")
    cbw.add_argument("--pair", required=True)
    cbw.add_argument("--test-x", required=True)
    cbw.add_argument("--pred-samples", required=True,
                     help="rows grouped per test point, samples-per-x each")
    cbw.add_argument("--samples-per-x", type=int, default=1000)
    cbw.add_argument("--norm-samples", type=int, default=10000)
    _seed_args(cbw)
    cbw.add_argument("-o", "--output", default=None)
    cbw.set_defaults(fn=cmd_evaluate_cbw2uvp)

    kl = ev.add_parser("kl", help="Girsanov KL between drift processes")
    kl.add_argument("--pair", required=True)
    kl.add_argument("--cand-drift-endpoint", required=True,
                    help="command answering the line-delimited drift protocol")
    kl.add_argument("--metric", choices=("fwd", "rev", "both"), default="both")
    kl.add_argument("--paths", type=int, default=1000)
    kl.add_argument("--steps", type=int, default=200)
    _seed_args(kl)
    kl.add_argument("-o", "--output", default=None)
    kl.set_defaults(fn=cmd_evaluate_kl)

    mmd = ev.add_parser("mmd", help="RBF-kernel MMD^2 (unbiased)")
    mmd.add_argument("--a", required=True)
    mmd.add_argument("--b", required=True)
    mmd.add_argument("--bandwidth", type=float, default=None)
    mmd.add_argument("-o", "--output", default=None)
    mmd.set_defaults(fn=cmd_evaluate_mmd)

    exp = sub.add_parser("export-reference", help="freeze cross-implementation probes")
    exp.add_argument("--pair", required=True)
    exp.add_argument("--probe-seed", type=int, required=True)
    exp.add_argument("--stream", type=int, default=0)
    exp.add_argument("-o", "--output", required=True)
    exp.set_defaults(fn=cmd_export_reference)

    ver = sub.add_parser("verify-reference", help="recompute and compare probes")
    ver.add_argument("--pair", required=True)
    ver.add_argument("--reference", required=True)
    ver.set_defaults(fn=cmd_verify_reference)

    srv = sub.add_parser("drift-server", help="serve the optimal drift over the line protocol")
    srv.add_argument("--pair", required=True)
    srv.set_defaults(fn=cmd_drift_server)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except EotPairsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
