"""Command-line surface.

Subcommands: deltahyp, gradcheck, gradfield, train, infer, uncertainty,
losscape, euclid-baseline.  Every command writes a run manifest
(command, full config, seed, version, paths, wall clock, clamp events)
next to its outputs; re-running with the same flags reproduces every
output byte for byte (the manifest itself carries the wall clock).

Exit codes: 0 success, 1 failed numerical check, 2 usage error,
3 IO/parse error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import grad as gr
from . import hyperbolicity as hyp
from . import maskhead as mh
from . import segtoy as st
from . import uncertainty as unc
from .errors import DomainError, ParseError, UsageError
from .fileio import (
    export_scalar_map,
    load_param_blocks,
    save_param_blocks,
    write_json,
    write_pgm,
)
from .lorentz import clamp_events, reset_clamp_events
from .reference import REFERENCE_MASK_HEAD, REFERENCE_SCENE, REFERENCE_TRAIN


def _manifest(command: str, config: dict, seed, inputs, outputs, started: float) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_clock_s": time.time() - started,
        "clamp_events": clamp_events(),
    }


def _scene_flags(p: argparse.ArgumentParser):
    p.add_argument("--parents", type=int, default=REFERENCE_SCENE.parents)
    p.add_argument("--children", type=int, default=REFERENCE_SCENE.children_per_parent)
    p.add_argument("--height", type=int, default=REFERENCE_SCENE.height)
    p.add_argument("--width", type=int, default=REFERENCE_SCENE.width)
    p.add_argument("--noise", type=float, default=REFERENCE_SCENE.noise_sigma)
    p.add_argument("--edge-blend", type=float, default=REFERENCE_SCENE.edge_blend)
    p.add_argument("--descriptor-dim", type=int, default=REFERENCE_SCENE.descriptor_dim)
    p.add_argument("--scene-seed", type=int, default=REFERENCE_SCENE.seed)


def _train_flags(p: argparse.ArgumentParser):
    p.add_argument("--epochs", type=int, default=REFERENCE_TRAIN.epochs)
    p.add_argument("--lr", type=float, default=None, help="default 0.5 (pixel) or 2e-3 (mask)")
    p.add_argument("--lambda-w", type=float, default=REFERENCE_TRAIN.lambda_w)
    p.add_argument("--tau", type=float, default=REFERENCE_TRAIN.tau)
    p.add_argument("--cone-k", type=float, default=REFERENCE_TRAIN.K)
    p.add_argument("--seed", type=int, default=REFERENCE_TRAIN.seed)
    p.add_argument("--weight-decay", type=float, default=REFERENCE_TRAIN.weight_decay)
    p.add_argument("--hidden", type=int, default=REFERENCE_TRAIN.hidden)
    p.add_argument("--embed-dim", type=int, default=REFERENCE_TRAIN.embed_dim)
    p.add_argument("--exclude-class", type=int, default=None)
    p.add_argument("--queries", type=int, default=REFERENCE_MASK_HEAD.n_queries)


def _scene_from_args(args) -> st.SceneConfig:
    if min(args.parents, args.children, args.height, args.width) < 1:
        raise UsageError("--parents/--children/--height/--width must all be >= 1")
    if args.noise < 0:
        raise UsageError("--noise must be >= 0")
    if not 0.0 <= args.edge_blend <= 1.0:
        raise UsageError("--edge-blend must lie in [0, 1]")
    return st.SceneConfig(
        parents=args.parents,
        children_per_parent=args.children,
        height=args.height,
        width=args.width,
        noise_sigma=args.noise,
        edge_blend=args.edge_blend,
        descriptor_dim=args.descriptor_dim,
        seed=args.scene_seed,
    )


def _train_from_args(args, head: str) -> st.TrainConfig:
    lr = args.lr if args.lr is not None else (0.5 if head != "mask" else 2e-3)
    if args.epochs < 0 or lr < 0:
        raise UsageError("--epochs and --lr must be >= 0")
    if args.tau <= 0 or args.cone_k <= 0:
        raise UsageError("--tau and --cone-k must be positive")
    return st.TrainConfig(
        epochs=args.epochs, lr=lr, lambda_w=args.lambda_w, tau=args.tau,
        K=args.cone_k, seed=args.seed, weight_decay=args.weight_decay,
        hidden=args.hidden, embed_dim=args.embed_dim,
    )


def _write_trace_csv(path, trace: dict, columns):
    with open(path, "w") as fh:
        fh.write("# lorentzseg/trace/v1\n")
        fh.write(",".join(columns) + "\n")
        for i in range(len(trace["epoch"])):
            fh.write(",".join(repr(float(trace[c][i])) for c in columns) + "\n")


def _write_label_map(prefix, label_map: st.LabelMap):
    write_pgm(str(prefix) + ".pgm", label_map.values.astype(np.uint8))
    write_json(str(prefix) + ".legend.json", {str(k): v for k, v in label_map.legend.items()})


def _save_model(prefix, head, params, scene_cfg, train_cfg, extras_extra=None, queries=None):
    blocks = params.blocks()
    extras = {
        "head": head,
        "scene": dataclasses.asdict(scene_cfg),
        "train": dataclasses.asdict(train_cfg),
    }
    if queries is not None:
        blocks = dict(blocks)
        blocks["class_tangents"] = queries.class_tangents
        blocks["mask_tangents"] = queries.mask_tangents
        blocks["no_object_bias"] = np.array([queries.no_object_bias])
    if extras_extra:
        extras.update(extras_extra)
    save_param_blocks(prefix, blocks, extras)


def load_model(prefix):
    """Load a trained head: returns (head, params, scene_cfg, train_cfg,
    extras, queries_or_None)."""
    blocks, extras = load_param_blocks(prefix)
    params = st.EncoderParams.from_blocks(blocks)
    scene_cfg = st.SceneConfig(**extras["scene"])
    train_cfg = st.TrainConfig(**extras["train"])
    queries = None
    if extras["head"] == "mask":
        queries = mh.QuerySet(
            class_tangents=blocks["class_tangents"],
            mask_tangents=blocks["mask_tangents"],
            no_object_bias=float(blocks["no_object_bias"][0]),
        )
    return extras["head"], params, scene_cfg, train_cfg, extras, queries


def cmd_deltahyp(args) -> int:
    started = time.time()
    reset_clamp_events()
    report = hyp.batched_delta_rel(
        args.input, batch_size=args.batch_size, batch_count=args.batches,
        seed=args.seed, metric=args.metric,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, report.to_dict())
    cfg = {"input": str(args.input), "metric": args.metric,
           "batch_size": args.batch_size, "batches": args.batches, "seed": args.seed}
    write_json(str(out) + ".manifest.json",
               _manifest("deltahyp", cfg, args.seed, [args.input], [out], started))
    print(f"delta_rel={report.delta_rel:.6f} over {report.batch_count} batches")
    return 0


def cmd_gradcheck(args) -> int:
    started = time.time()
    reset_clamp_events()
    report = gr.gradient_interaction_report(
        args.samples, seed=args.seed, inject_error=args.inject_error
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, report.to_dict())
    cfg = {"samples": args.samples, "seed": args.seed}
    write_json(str(out) + ".manifest.json",
               _manifest("gradcheck", cfg, args.seed, [], [out], started))
    ok = report.max_rel_error <= 1e-5 and report.sign_agreement_rate == 1.0
    print(
        f"max_rel_error={report.max_rel_error:.3e} "
        f"sign_agreement={report.sign_agreement_rate:.4f} "
        f"euclid_violations={report.euclid_orthogonality_violations} "
        f"-> {'PASS' if ok else 'FAIL'}"
    )
    return 0 if ok else 1


def _gradfield_row(v, target):
    from .lorentz import lift_point

    x = lift_point(np.asarray(v))
    y = lift_point(np.asarray(target))
    zeros = [0.0] * 15
    if np.allclose(v, target, atol=1e-12):
        return zeros + [0]
    try:
        gd = gr.grad_lorentz_distance(x, y)
        ga = gr.grad_exterior_angle(x, y)
    except (DomainError, UsageError):
        return zeros + [0]
    jac = gr.exp_map_jacobian(np.asarray(v))[1:]  # spatial block
    gd_t = jac.T @ gd
    ga_t = jac.T @ ga
    cos_sp = float(np.dot(gd, ga) / max(np.linalg.norm(gd) * np.linalg.norm(ga), 1e-300))
    sign = gr.grad_sign_predictor(x, y)
    try:
        ed = gr.grad_euclidean_distance(np.asarray(v), np.asarray(target))
        ea = gr.grad_euclidean_exterior_angle(np.asarray(v), np.asarray(target))
        ecos = float(np.dot(ed, ea) / (np.linalg.norm(ed) * np.linalg.norm(ea)))
    except DomainError:
        ed = ea = np.zeros(2)
        ecos = 0.0
    return [
        float(gd[0]), float(gd[1]), float(np.linalg.norm(gd)),
        float(ga[0]), float(ga[1]), float(np.linalg.norm(ga)),
        float(gd_t[0]), float(gd_t[1]), float(np.linalg.norm(gd_t)),
        float(ga_t[0]), float(ga_t[1]), float(np.linalg.norm(ga_t)),
        cos_sp, ecos, float(np.linalg.norm(ed)), sign,
    ]


GRADFIELD_COLUMNS = (
    "v1,v2,"
    "ld_dx,ld_dy,ld_mag,lext_dx,lext_dy,lext_mag,"
    "ltd_dx,ltd_dy,ltd_mag,ltext_dx,ltext_dy,ltext_mag,"
    "cos_spatial,euclid_cos,euclid_d_mag,sign"
)


def cmd_gradfield(args) -> int:
    started = time.time()
    reset_clamp_events()
    if args.resolution < 2:
        raise UsageError("resolution must be >= 2")
    target = np.array([float(t) for t in args.target.split(",")])
    if target.size != 2:
        raise UsageError("--target expects 'a,b'")
    coords = np.linspace(-args.grid_extent, args.grid_extent, args.resolution)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write("# lorentzseg/gradfield/v1\n")
        fh.write(GRADFIELD_COLUMNS + "\n")
        for v1 in coords:
            for v2 in coords:
                row = _gradfield_row(np.array([v1, v2]), target)
                fh.write(",".join(repr(float(c)) for c in [v1, v2] + row[:-1]))
                fh.write(f",{int(row[-1])}\n")
    cfg = {"grid_extent": args.grid_extent, "resolution": args.resolution,
           "target": args.target}
    write_json(str(out) + ".manifest.json",
               _manifest("gradfield", cfg, None, [], [out], started))
    print(f"wrote {args.resolution * args.resolution} rows to {out}")
    return 0


def cmd_train(args) -> int:
    started = time.time()
    reset_clamp_events()
    scene_cfg = _scene_from_args(args)
    train_cfg = _train_from_args(args, args.head)
    scene = st.generate_scene(scene_cfg)
    exclude = () if args.exclude_class is None else (args.exclude_class,)
    bank = st.DescriptorBank.fit(scene, d=args.embed_dim, exclude=exclude)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    metrics = {}
    if args.head == "pixel":
        res = st.train(scene, bank, train_cfg, exclude_class=args.exclude_class)
        _save_model(out_dir / "model", "pixel", res.params, scene_cfg, train_cfg,
                    {"exclude_class": args.exclude_class})
        _write_trace_csv(out_dir / "trace.csv", res.trace, ["epoch", "ce", "entail", "total"])
        pred_d = st.infer_distance(res.params, res.protos, scene)
        pred_a = st.infer_angle(res.params, res.protos, scene)
        metrics["train_miou_distance"] = st.miou(pred_d, st.LabelMap(scene.labels, {}), scene.n_classes) if args.exclude_class is None else None
        metrics["distance_angle_agreement"] = float((pred_d.values == pred_a.values).mean())
        metrics["final_loss"] = res.final_loss
    elif args.head == "mask":
        head_cfg = mh.MaskHeadConfig(n_queries=args.queries)
        res = mh.train_maskhead(scene, bank, head_cfg, train_cfg)
        _save_model(out_dir / "model", "mask", res.params, scene_cfg, train_cfg,
                    {"head_cfg": dataclasses.asdict(head_cfg)}, queries=res.queries)
        _write_trace_csv(out_dir / "trace.csv", res.trace, ["epoch", "ce", "mask", "total"])
        pred = mh.predict_semantic(res, scene)
        metrics["train_miou_semantic"] = st.miou(pred, st.LabelMap(scene.labels, {}), scene.n_classes)
        metrics["final_loss"] = res.final_loss
    else:
        raise UsageError(f"unknown head {args.head!r}")
    _write_label_map(out_dir / "gt", st.LabelMap(scene.labels, dict(enumerate(scene.class_names))))
    outputs += [out_dir / "model.json", out_dir / "model.bin", out_dir / "trace.csv",
                out_dir / "gt.pgm", out_dir / "gt.legend.json"]
    write_json(out_dir / "metrics.json", metrics)
    outputs.append(out_dir / "metrics.json")
    cfg = {"scene": dataclasses.asdict(scene_cfg), "train": dataclasses.asdict(train_cfg),
           "head": args.head, "exclude_class": args.exclude_class}
    write_json(out_dir / "manifest.json",
               _manifest(f"train --head {args.head}", cfg, train_cfg.seed, [], outputs, started))
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_infer(args) -> int:
    started = time.time()
    reset_clamp_events()
    head, params, scene_cfg, train_cfg, extras, queries = load_model(args.model)
    scene = st.generate_scene(scene_cfg)
    exclude = extras.get("exclude_class")
    bank = st.DescriptorBank.fit(scene, d=train_cfg.embed_dim,
                                 exclude=() if exclude is None else (exclude,))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = {}
    if head == "pixel":
        protos = st.build_prototypes(bank, train_cfg.entail_cfg)
        pred_d = st.infer_distance(params, protos, scene)
        pred_a = st.infer_angle(params, protos, scene)
        picked = pred_d if args.mode == "distance" else pred_a
        metrics["distance_angle_agreement"] = float((pred_d.values == pred_a.values).mean())
        if exclude is None:
            metrics[f"miou_{args.mode}"] = st.miou(picked, st.LabelMap(scene.labels, {}), scene.n_classes)
    elif head == "euclid":
        picked = st.infer_euclidean(params, bank, scene)
        if exclude is None:
            metrics["miou_euclid"] = st.miou(picked, st.LabelMap(scene.labels, {}), scene.n_classes)
    elif head == "mask":
        head_cfg = mh.MaskHeadConfig(**extras["head_cfg"])
        protos = st.build_prototypes(bank, train_cfg.entail_cfg)
        res = mh.MaskHeadResult(queries, params, protos, bank, {}, head_cfg, train_cfg)
        picked = mh.predict_semantic(res, scene)
        metrics["miou_semantic"] = st.miou(picked, st.LabelMap(scene.labels, {}), scene.n_classes)
    else:
        raise UsageError(f"model head {head!r} unknown")
    _write_label_map(out_dir / "pred", picked)
    write_json(out_dir / "metrics.json", metrics)
    outputs = [out_dir / "pred.pgm", out_dir / "pred.legend.json", out_dir / "metrics.json"]
    cfg = {"model": str(args.model), "mode": args.mode}
    write_json(out_dir / "manifest.json",
               _manifest("infer", cfg, train_cfg.seed, [args.model + ".json", args.model + ".bin"],
                         outputs, started))
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_uncertainty(args) -> int:
    started = time.time()
    reset_clamp_events()
    head, params, scene_cfg, train_cfg, extras, queries = load_model(args.model)
    scene = st.generate_scene(scene_cfg)
    exclude = extras.get("exclude_class")
    bank = st.DescriptorBank.fit(scene, d=train_cfg.embed_dim,
                                 exclude=() if exclude is None else (exclude,))
    grid = st.embed_scene(params, scene)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    ru = unc.radius_uncertainty(grid)
    export_scalar_map(out_dir / "radius_uncertainty", ru.values, ru.kind)
    if head == "mask":
        head_cfg = mh.MaskHeadConfig(**extras["head_cfg"])
        au = mh.mask_angle_uncertainty(grid, queries)
    else:
        protos = st.build_prototypes(bank, train_cfg.entail_cfg)
        au = unc.angle_uncertainty(grid, protos)
    export_scalar_map(out_dir / "angle_uncertainty", au.values, au.kind)
    bm = unc.boundary_map(au, args.percentile)
    export_scalar_map(out_dir / "boundary", bm.values, bm.kind,
                      {"percentile": args.percentile})
    conf = unc.class_confidence(grid, scene.labels == args.class_id)
    export_scalar_map(out_dir / f"confidence_class{args.class_id}", conf.values, conf.kind,
                      {"class_id": args.class_id})
    for stem in ("radius_uncertainty", "angle_uncertainty", "boundary",
                 f"confidence_class{args.class_id}"):
        outputs += [out_dir / f"{stem}.pgm", out_dir / f"{stem}.csv", out_dir / f"{stem}.json"]
    cfg = {"model": str(args.model), "percentile": args.percentile, "class_id": args.class_id}
    write_json(out_dir / "manifest.json",
               _manifest("uncertainty", cfg, train_cfg.seed,
                         [args.model + ".json", args.model + ".bin"], outputs, started))
    print(f"wrote uncertainty maps to {out_dir}")
    return 0


def cmd_losscape(args) -> int:
    started = time.time()
    reset_clamp_events()
    head, params, scene_cfg, train_cfg, extras, queries = load_model(args.model)
    if head not in ("pixel", "euclid"):
        raise UsageError("loss landscape supports the pixel and euclid heads")
    scene = st.generate_scene(scene_cfg)
    exclude = extras.get("exclude_class")
    bank = st.DescriptorBank.fit(scene, d=train_cfg.embed_dim,
                                 exclude=() if exclude is None else (exclude,))
    geometry = "lorentz" if head == "pixel" else "euclidean"

    rng = np.random.default_rng(args.directions_seed)
    base = params.blocks()
    dirs = []
    for _ in range(2):
        d = {}
        for name, block in base.items():
            raw = rng.normal(size=np.asarray(block).shape)
            bnorm = float(np.linalg.norm(block))
            rnorm = float(np.linalg.norm(raw))
            # filter normalization: each direction block rescaled to the
            # norm of the matching parameter block
            d[name] = raw * (bnorm / rnorm) if rnorm > 0 and bnorm > 0 else raw * 0.0
        dirs.append(d)

    coords = np.linspace(-args.extent, args.extent, args.grid)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    center_loss = None
    with open(out, "w") as fh:
        fh.write("# lorentzseg/losscape/v1\n")
        fh.write("alpha,beta,loss\n")
        for a in coords:
            for b in coords:
                if a == 0.0 and b == 0.0:
                    probe = params
                else:
                    blocks = {
                        name: np.asarray(block) + a * dirs[0][name] + b * dirs[1][name]
                        for name, block in base.items()
                    }
                    probe = st.EncoderParams.from_blocks(blocks, seed=params.seed)
                loss = st.evaluate_loss(probe, scene, bank, train_cfg,
                                        exclude_class=exclude, geometry=geometry)
                if a == 0.0 and b == 0.0:
                    center_loss = loss
                fh.write(f"{repr(float(a))},{repr(float(b))},{repr(float(loss))}\n")
    cfg = {"model": str(args.model), "directions_seed": args.directions_seed,
           "grid": args.grid, "extent": args.extent}
    write_json(str(out) + ".manifest.json",
               _manifest("losscape", cfg, args.directions_seed,
                         [args.model + ".json", args.model + ".bin"], [out], started))
    print(f"center_loss={center_loss!r}")
    return 0


def cmd_euclid_baseline(args) -> int:
    started = time.time()
    reset_clamp_events()
    scene_cfg = _scene_from_args(args)
    train_cfg = _train_from_args(args, "pixel")
    scene = st.generate_scene(scene_cfg)
    exclude = () if args.exclude_class is None else (args.exclude_class,)
    bank = st.DescriptorBank.fit(scene, d=args.embed_dim, exclude=exclude)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = st.train_euclidean(scene, bank, train_cfg, exclude_class=args.exclude_class)
    _save_model(out_dir / "model", "euclid", res.params, scene_cfg, train_cfg,
                {"exclude_class": args.exclude_class})
    _write_trace_csv(out_dir / "trace.csv", res.trace, ["epoch", "ce", "total"])
    pred = st.infer_euclidean(res.params, bank, scene)
    metrics = {"final_loss": res.final_loss}
    if args.exclude_class is None:
        metrics["train_miou_euclid"] = st.miou(pred, st.LabelMap(scene.labels, {}), scene.n_classes)
    write_json(out_dir / "metrics.json", metrics)
    outputs = [out_dir / "model.json", out_dir / "model.bin",
               out_dir / "trace.csv", out_dir / "metrics.json"]
    cfg = {"scene": dataclasses.asdict(scene_cfg), "train": dataclasses.asdict(train_cfg),
           "exclude_class": args.exclude_class}
    write_json(out_dir / "manifest.json",
               _manifest("euclid-baseline", cfg, train_cfg.seed, [], outputs, started))
    print(json.dumps(metrics, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorentzseg")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deltahyp", help="batched Gromov delta-hyperbolicity of an embedding CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--metric", choices=hyp.METRICS, default="euclidean")
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--batches", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_deltahyp)

    p = sub.add_parser("gradcheck", help="analytic-vs-FD gradient verification report")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--inject-error", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("gradfield", help="2-D gradient field CSV around a target embedding")
    p.add_argument("--grid-extent", type=float, default=1.5)
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--target", default="0.8,0.4")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gradfield)

    p = sub.add_parser("train", help="train a head on a synthetic scene")
    p.add_argument("--head", choices=("pixel", "mask"), default="pixel")
    _scene_flags(p)
    _train_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="label maps from a trained model")
    p.add_argument("--model", required=True, help="model path prefix (no extension)")
    p.add_argument("--mode", choices=("distance", "angle"), default="distance")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("uncertainty", help="uncertainty/confidence/boundary maps")
    p.add_argument("--model", required=True)
    p.add_argument("--percentile", type=float, default=90.0)
    p.add_argument("--class-id", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_uncertainty)

    p = sub.add_parser("losscape", help="filter-normalized loss surface grid")
    p.add_argument("--model", required=True)
    p.add_argument("--directions-seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_losscape)

    p = sub.add_parser("euclid-baseline", help="identical pipeline with Euclidean distances")
    _scene_flags(p)
    _train_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_euclid_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
