"""Command-line interface.

Every stochastic subcommand requires an explicit ``--seed`` (or a seed in
its config file): given the same inputs and seed, every invocation writes
byte-identical output files. Exit codes: 0 success, 2 usage error,
1 runtime error (message on stderr).
"""

import argparse
import glob as globmod
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as cio
from .curvature import (
    curvature_sample,
    curvature_skewness,
    curvature_values,
    estimate_normals,
    fps,
    global_curvature,
)
from .errors import CloudUpError
from .metrics import add_noise, evaluate
from .shapes import PatchPair, make_patch_dataset, parse_shape_spec
from .geometry import normalize
from .training import (
    classify_difficulty,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .upsampling import (
    OracleField,
    ProjectionParams,
    duplicate_count,
    prepare_field,
    upsample,
)

_FLOAT = "%.9g"


def _write_csv(path, header, rows):
    lines = [header]
    lines += [",".join(str(c) for c in row) for row in rows]
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def cmd_synth(args):
    oracle = parse_shape_spec(args.shape)
    cloud = oracle.sample_surface(args.points, args.seed)
    cio.write_cloud(cloud, args.out)
    return 0


def cmd_curvature(args):
    points = cio.read_cloud(args.infile)
    normals = estimate_normals(points, args.normals_k)
    values = curvature_values(points, normals, args.k)
    rows = [(i, _FLOAT % v) for i, v in enumerate(values)]
    _write_csv(args.out, "index,c", rows)
    print(f"global_curvature={_FLOAT % global_curvature(values)}")
    return 0


def cmd_sample(args):
    points = cio.read_cloud(args.infile)
    if args.method == "curvature":
        if args.steps is None:
            raise CloudUpError("--steps is required for method 'curvature'")
        normals = estimate_normals(points, args.normals_k)
        values = curvature_values(points, normals, args.k)
        ladder = curvature_sample(points, values, args.steps)
        for level, cloud in enumerate(ladder.clouds):
            cio.write_cloud(cloud, f"{args.out_prefix}_level{level}.xyz")
    else:
        if args.count is None:
            raise CloudUpError("--count is required for method 'fps'")
        subset, _ = fps(points, args.count, start_index=args.start)
        cio.write_cloud(subset, f"{args.out_prefix}_fps.xyz")
    return 0


def _dense_partner(sparse_path):
    path = Path(sparse_path)
    if "sparse" not in path.name:
        raise CloudUpError(
            f"cannot derive dense partner for {sparse_path}: "
            "filename must contain 'sparse' (paired with 'dense')"
        )
    head, _, tail = path.name.rpartition("sparse")
    dense = path.with_name(head + "dense" + tail)
    if not dense.exists():
        raise CloudUpError(f"dense partner {dense} for {sparse_path} does not exist")
    return dense


def cmd_split(args):
    paths = sorted(globmod.glob(args.glob))
    if not paths:
        raise CloudUpError(f"no files match {args.glob!r}")
    rows = []
    for sparse_path in paths:
        dense_path = _dense_partner(sparse_path)
        points = cio.read_cloud(sparse_path)
        normals = estimate_normals(points, args.normals_k)
        values = curvature_values(points, normals, args.k)
        gcv = global_curvature(values)
        rows.append(
            (
                sparse_path,
                str(dense_path),
                _FLOAT % gcv,
                _FLOAT % curvature_skewness(values),
                classify_difficulty(gcv, args.threshold),
            )
        )
    _write_csv(args.out, "sparse,dense,global_curvature,skewness,difficulty", rows)
    return 0


def _read_manifest(path):
    with open(path, "r", encoding="ascii") as handle:
        lines = [l.strip() for l in handle if l.strip()]
    if not lines or not lines[0].startswith("sparse,dense"):
        raise CloudUpError(f"manifest {path} lacks the 'sparse,dense,...' header")
    pairs = []
    for line in lines[1:]:
        fields = line.split(",")
        if len(fields) < 2:
            raise CloudUpError(f"manifest row {line!r} lacks sparse,dense paths")
        pairs.append((fields[0], fields[1]))
    return pairs


def cmd_train(args):
    values = cio.parse_config(args.config)
    config, _, _ = cio.split_config(values)
    patches = []
    for sparse_path, dense_path in _read_manifest(args.data):
        dense, transform = normalize(cio.read_cloud(dense_path))
        sparse = transform.apply(cio.read_cloud(sparse_path))
        patches.append(PatchPair(sparse=sparse, dense=dense, transform=transform))
    checkpoint, trace = train(patches, config)
    save_checkpoint(checkpoint, args.out)
    loss_out = args.loss_out or f"{args.out}.loss.csv"
    _write_csv(
        loss_out,
        "epoch,phase,mean_loss",
        [(r["epoch"], r["phase"], _FLOAT % r["mean_loss"]) for r in trace],
    )
    return 0


def cmd_upsample(args):
    points = cio.read_cloud(args.infile)
    if args.ckpt:
        checkpoint = load_checkpoint(args.ckpt)
        params = ProjectionParams(
            step_size=args.step_size if args.step_size is not None else checkpoint.config.step_size,
            iterations=args.iters if args.iters is not None else checkpoint.config.iterations,
            seed_sigma=args.seed_sigma if args.seed_sigma is not None else checkpoint.config.seed_sigma,
        )
        # The model works in the centered unit frame it was trained in.
        normalized, transform = normalize(points)
        field = prepare_field(
            checkpoint.model, normalized, normals_k=checkpoint.config.normals_k
        )
        result = transform.invert(upsample(field, normalized, args.rate, params, args.seed))
    else:
        params = ProjectionParams(
            step_size=args.step_size if args.step_size is not None else 0.02,
            iterations=args.iters if args.iters is not None else 10,
            seed_sigma=args.seed_sigma if args.seed_sigma is not None else 0.02,
        )
        field = OracleField(parse_shape_spec(args.oracle))
        result = upsample(field, points, args.rate, params, args.seed)
    cio.write_cloud(result, args.out)
    print(f"duplicates={duplicate_count(result)}", file=sys.stderr)
    return 0


def cmd_noise(args):
    points = cio.read_cloud(args.infile)
    cio.write_cloud(add_noise(points, args.tau, args.seed), args.out)
    return 0


def cmd_eval(args):
    pred = cio.read_cloud(args.pred)
    gt = cio.read_cloud(args.gt)
    surface = None
    if args.mesh:
        surface = cio.read_off_mesh(args.mesh)
    elif args.oracle:
        surface = parse_shape_spec(args.oracle)
    report = evaluate(pred, gt, surface)
    rows = [(name, _FLOAT % raw, "%.3f" % scaled) for name, raw, scaled in report.rows()]
    _write_csv(args.out, "metric,value_raw,value_x1e3", rows)
    return 0


def _parse_steps_range(text):
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise CloudUpError(f"bad steps range {text!r} (use e.g. 0..5)") from None
    try:
        return [int(text)]
    except ValueError:
        raise CloudUpError(f"bad steps value {text!r} (use N or A..B)") from None


def cmd_ablate_steps(args):
    values = cio.parse_config(args.config)
    base_config, projection, dataset = cio.split_config(values)
    oracles = [parse_shape_spec(s) for s in dataset["shapes"].split(";") if s.strip()]
    train_patches = make_patch_dataset(
        oracles, dataset["patches_per_shape"], dataset["sparse_n"], dataset["rate"],
        rng=base_config.seed,
    )
    eval_patches = make_patch_dataset(
        oracles, 1, dataset["sparse_n"], dataset["rate"], rng=base_config.seed + 1
    )
    rows = []
    for steps in _parse_steps_range(args.steps):
        config = replace(base_config, sampling_steps=steps)
        checkpoint, _ = train(train_patches, config)
        reports = []
        for patch in eval_patches:
            field = prepare_field(
                checkpoint.model, patch.sparse, normals_k=config.normals_k
            )
            pred = upsample(
                field, patch.sparse, dataset["rate"], projection, rng=base_config.seed + 2
            )
            reports.append(
                evaluate(pred, patch.dense, OracleField(patch.oracle, patch.transform))
            )
        rows.append(
            (
                steps,
                _FLOAT % float(np.mean([r.cd for r in reports])),
                _FLOAT % float(np.mean([r.hd for r in reports])),
                _FLOAT % float(np.mean([r.p2f for r in reports])),
            )
        )
        print(f"steps={steps} done", file=sys.stderr)
    _write_csv(args.out, "sampling_steps,cd,hd,p2f", rows)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cloudup",
        description="Projection-based arbitrary-scale point cloud upsampling toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample an analytic surface into a cloud file")
    p.add_argument("--shape", required=True,
                   help="shape spec: sphere[:r=..], box[:hx=..,hy=..,hz=..], "
                        "torus[:R=..,r=..], plane[:nx=..,ny=..,nz=..,off=..,ext=..]")
    p.add_argument("--points", type=int, required=True, help="number of surface samples")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    p.add_argument("--out", required=True, help="output cloud (.xyz or .ply)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("curvature", help="per-point curvature scores and the global mean")
    p.add_argument("--in", dest="infile", required=True, help="input cloud")
    p.add_argument("--k", type=int, default=16, help="curvature neighborhood size")
    p.add_argument("--normals-k", type=int, default=16, help="normal-estimation neighborhood")
    p.add_argument("--out", required=True, help="output CSV (index,c)")
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("sample", help="curvature-ladder or farthest-point subsets")
    p.add_argument("--in", dest="infile", required=True, help="input cloud")
    p.add_argument("--method", choices=["curvature", "fps"], required=True)
    p.add_argument("--steps", type=int, help="halving steps (curvature method)")
    p.add_argument("--count", type=int, help="subset size (fps method)")
    p.add_argument("--start", type=int, default=0, help="fps start index")
    p.add_argument("--k", type=int, default=16, help="curvature neighborhood size")
    p.add_argument("--normals-k", type=int, default=16, help="normal-estimation neighborhood")
    p.add_argument("--out-prefix", required=True, help="output file prefix")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("split", help="label sparse/dense pairs easy or hard")
    p.add_argument("--glob", required=True,
                   help="glob of sparse clouds; dense partners derived by "
                        "replacing 'sparse' with 'dense' in the filename")
    p.add_argument("--threshold", type=float, default=0.5, help="difficulty threshold")
    p.add_argument("--k", type=int, default=16, help="curvature neighborhood size")
    p.add_argument("--normals-k", type=int, default=16, help="normal-estimation neighborhood")
    p.add_argument("--out", required=True, help="output manifest CSV")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the distance network on a manifest")
    p.add_argument("--config", required=True, help="key=value config file (must set seed)")
    p.add_argument("--data", required=True, help="manifest CSV from 'split'")
    p.add_argument("--out", required=True, help="output checkpoint (JSON)")
    p.add_argument("--loss-out", help="loss trace CSV (default: <out>.loss.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("upsample", help="project jittered seeds onto a distance field")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--ckpt", help="trained checkpoint")
    group.add_argument("--oracle", help="analytic shape spec instead of a model")
    p.add_argument("--in", dest="infile", required=True, help="input sparse cloud")
    p.add_argument("--rate", type=float, required=True, help="upsampling rate (> 1, any real)")
    p.add_argument("--lambda", dest="step_size", type=float, help="projection step size")
    p.add_argument("--iters", type=int, help="projection iterations")
    p.add_argument("--seed-sigma", type=float, help="seed jitter std")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    p.add_argument("--out", required=True, help="output cloud")
    p.set_defaults(func=cmd_upsample)

    p = sub.add_parser("noise", help="add Gaussian noise to a cloud")
    p.add_argument("--in", dest="infile", required=True, help="input cloud")
    p.add_argument("--tau", type=float, required=True, help="noise std per coordinate")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    p.add_argument("--out", required=True, help="output cloud")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("eval", help="CD/HD (and P2F with a reference surface)")
    p.add_argument("--pred", required=True, help="predicted cloud")
    p.add_argument("--gt", required=True, help="ground-truth cloud")
    p.add_argument("--mesh", help="reference surface as ASCII OFF mesh")
    p.add_argument("--oracle", help="reference surface as shape spec")
    p.add_argument("--out", required=True, help="output CSV (metric,value_raw,value_x1e3)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate-steps", help="sweep sampling steps through the full pipeline")
    p.add_argument("--config", required=True, help="key=value config file (must set seed)")
    p.add_argument("--steps", default="0..5", help="range A..B or single N (default 0..5)")
    p.add_argument("--out", required=True, help="output CSV (sampling_steps,cd,hd,p2f)")
    p.set_defaults(func=cmd_ablate_steps)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CloudUpError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
