"""Command-line surface for the retargeting and retargetability pipeline."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import annotstats, collage, evalkit, features, imaging, importance, methodsel, mtlnet
from .engines import EngineError, RetargetJob, retarget

ENGINE_ALIASES = {
    "mo": "multi_operator",
    "aad": "aad_warp",
    "shiftmap": "shift_map",
    "crop": "crop",
    "auto": "auto",
}


class UserError(Exception):
    """Bad arguments or inputs; exits with code 1."""


def _read_image(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            return imaging.decode_image(fh.read())
    except FileNotFoundError:
        raise UserError(f"no such file: {path}")
    except imaging.ImageError as exc:
        raise UserError(f"{path}: {exc}")


def _write_png(path: str, img: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(imaging.encode_png(img))


def _importance_for(img: np.ndarray, mask_paths: Optional[List[str]]) -> np.ndarray:
    masks = None
    if mask_paths:
        masks = [importance.load_external_mask(p) for p in mask_paths]
    return importance.importance_for(img, masks)


def _load_model(path: str) -> mtlnet.MtlNetwork:
    try:
        return mtlnet.load_model(path)
    except FileNotFoundError:
        raise UserError(f"no such model file: {path}")
    except mtlnet.NetworkError as exc:
        raise UserError(f"{path}: {exc}")


def _feature_vector(img: np.ndarray) -> np.ndarray:
    return features.extract(img)


def _suggest_for_image(img: np.ndarray, model_path: str, classifier_path: str) -> str:
    net = _load_model(model_path)
    clfs = methodsel.load_classifiers(classifier_path)
    _, _, shared = mtlnet.predict(net, _feature_vector(img))
    return methodsel.suggest_method(clfs, shared)


# ------------------------------------------------------------------ subcommands


def cmd_retarget(args) -> int:
    img = _read_image(args.infile)
    h, w = img.shape[:2]
    if args.axis == "long":
        axis = "w" if w >= h else "h"
    else:
        axis = args.axis
    if not 0.0 < args.ratio <= 1.0:
        raise UserError(f"--ratio must be in (0, 1], got {args.ratio}")
    tw, th = w, h
    if axis == "w":
        tw = max(1, round(w * args.ratio))
    else:
        th = max(1, round(h * args.ratio))
    engine = ENGINE_ALIASES[args.engine]
    if engine == "auto":
        if not (args.model and args.classifiers):
            raise UserError("--engine auto requires --model and --classifiers")
        engine = _suggest_for_image(img, args.model, args.classifiers)
    imp = _importance_for(img, args.mask)
    job = RetargetJob(source=img, importance=imp, engine=engine,
                      target_width=tw, target_height=th)
    outcome = retarget(job)
    _write_png(args.out, outcome.result)
    print(f"{args.out}: {w}x{h} -> {tw}x{th} via {outcome.engine}")
    return 0


def cmd_importance(args) -> int:
    img = _read_image(args.infile)
    imp = _importance_for(img, args.mask)
    _write_png(args.out, np.repeat(imp[:, :, None], 3, axis=2))
    print(f"{args.out}: importance map {imp.shape[1]}x{imp.shape[0]}")
    return 0


def _load_manifest(path: str) -> list:
    try:
        return annotstats.load_manifest(path)
    except FileNotFoundError:
        raise UserError(f"no such manifest: {path}")
    except annotstats.AnnotationError as exc:
        raise UserError(str(exc))


def cmd_dataset(args) -> int:
    if args.action == "init":
        if os.path.exists(args.manifest):
            raise UserError(f"{args.manifest} already exists")
        annotstats.save_manifest(args.manifest, [])
        print(f"{args.manifest}: empty manifest created")
        return 0

    entries = _load_manifest(args.manifest)
    if args.action == "validate":
        records = annotstats.manifest_ratings(entries)
        try:
            labels = annotstats.aggregate_ratings(records) if records else {}
        except annotstats.IncompleteDataError as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return 1
        print(f"{args.manifest}: {len(entries)} images, {len(records)} ratings, "
              f"{len(labels)} aggregated labels: OK")
        return 0

    # stats
    records = annotstats.manifest_ratings(entries)
    if not records:
        raise UserError("manifest has no ratings")
    raters = sorted({r.rater_id for r in records})
    items = sorted({(r.image_id, r.method) for r in records})
    matrix = np.full((len(raters), len(items)), np.nan)
    for r in records:
        matrix[raters.index(r.rater_id), items.index((r.image_id, r.method))] = r.score
    if np.isnan(matrix).any():
        raise UserError("stats requires every rater to cover every (image, method) pair")
    w_stat, p_value = annotstats.kendalls_w(matrix)

    level_counts = np.zeros(3)
    per_method = {m: np.zeros(3) for m in annotstats.METHODS}
    for r in records:
        idx = annotstats.LEVELS.index(r.level)
        level_counts[idx] += 1
        per_method[r.method][idx] += 1
    ridit = annotstats.ridit_analysis(level_counts, per_method)

    summary = {
        "kendalls_w": w_stat,
        "p_value": p_value,
        "ridit": {m: {"mean": v[0], "ci95": v[1]} for m, v in ridit.items()},
    }
    print(json.dumps(summary, sort_keys=True, indent=2))

    annos = [annotstats.ImageAnnotation(e.image_id, e.attributes)
             for e in entries if e.attributes is not None]
    if args.out and len(annos) >= 2:
        corr = annotstats.attribute_correlation(annos)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["attribute"] + list(annotstats.ATTRIBUTE_NAMES))
            for name, row in zip(annotstats.ATTRIBUTE_NAMES, corr):
                writer.writerow([name] + [repr(v) for v in row])
        print(f"{args.out}: attribute correlation CSV written")
    return 0


def cmd_features(args) -> int:
    if args.action == "extract":
        entries = _load_manifest(args.manifest)
        if not entries:
            raise UserError("manifest has no images")
        table: Dict[str, np.ndarray] = {}
        for entry in entries:
            path = entry.file
            if not os.path.isabs(path) and args.images:
                path = os.path.join(args.images, path or f"{entry.image_id}.png")
            table[entry.image_id] = _feature_vector(_read_image(path))
        features.export_features(args.out, table)
        print(f"{args.out}: {len(table)} feature vectors written")
        return 0
    # import: validate an externally produced feature file and re-emit it
    try:
        table = features.import_features(args.features)
    except (FileNotFoundError, features.FeatureError) as exc:
        raise UserError(f"{args.features}: {exc}")
    features.export_features(args.out, table)
    print(f"{args.out}: {len(table)} feature vectors imported")
    return 0


def _training_arrays(entries, table):
    labels = annotstats.aggregate_ratings(annotstats.manifest_ratings(entries))
    ids = [e.image_id for e in entries
           if e.image_id in table and e.image_id in labels and e.attributes is not None]
    if len(ids) < 2:
        raise UserError("need at least 2 images with features, ratings, and attributes")
    x = np.stack([table[i] for i in ids])
    attrs = np.array([next(e.attributes for e in entries if e.image_id == i) for i in ids],
                     dtype=np.float64)
    scores = np.array([labels[i].score for i in ids])
    return ids, x, attrs, scores, labels


def cmd_train(args) -> int:
    entries = _load_manifest(args.manifest)
    table = features.import_features(args.features)
    _, x, attrs, scores, _ = _training_arrays(entries, table)
    hp_fields = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            hp_fields = json.load(fh)
    try:
        hp = mtlnet.Hyperparams(**hp_fields)
    except TypeError as exc:
        raise UserError(f"bad config: {exc}")
    if args.seed is not None:
        hp = mtlnet.Hyperparams(**{**hp.__dict__, "seed": args.seed})
    try:
        net, trace = mtlnet.train(x, attrs, scores, hp, variant=args.variant)
    except mtlnet.DivergedTraining as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1
    mtlnet.save_model(args.model_out, net)
    print(f"{args.model_out}: variant {net.variant}, final loss {trace[-1]:.6f}")
    return 0


def cmd_predict(args) -> int:
    net = _load_model(args.model)
    if args.infile:
        vec = _feature_vector(_read_image(args.infile))
    elif args.features and args.image_id:
        table = features.import_features(args.features)
        if args.image_id not in table:
            raise UserError(f"{args.image_id!r} not in feature file")
        vec = table[args.image_id]
    else:
        raise UserError("predict needs --in FILE or --features FILE with --id")
    y, flags, shared = mtlnet.predict(net, vec)
    payload = {
        "retargetability": y,
        "attributes": [int(f) for f in flags] if flags is not None else None,
    }
    if args.classifiers:
        clfs = methodsel.load_classifiers(args.classifiers)
        payload["suggested_method"] = methodsel.suggest_method(clfs, shared)
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"retargetability: {y:.4f}")
        if "suggested_method" in payload:
            print(f"suggested method: {payload['suggested_method']}")
    return 0


def cmd_evaluate(args) -> int:
    net = _load_model(args.model)
    entries = _load_manifest(args.manifest)
    table = features.import_features(args.features)
    ids, x, attrs, scores, _ = _training_arrays(entries, table)
    preds, pred_flags = [], []
    for vec in x:
        y, flags, _ = mtlnet.predict(net, vec)
        preds.append(y)
        pred_flags.append(flags if flags is not None else np.zeros(attrs.shape[1]))
    rmse_value = evalkit.rmse(scores, preds)
    report: Dict[str, object] = {"rmse": rmse_value, "n": len(ids)}
    try:
        points, auc = evalkit.roc_auc(scores, preds, sigma=args.sigma)
        report["auc"] = auc
        if args.roc_csv:
            with open(args.roc_csv, "w", encoding="utf-8") as fh:
                fh.write(evalkit.roc_csv(points))
    except evalkit.UndefinedAUCError as exc:
        report["auc"] = None
        report["auc_note"] = str(exc)
    report["attribute_accuracy"] = [float(a)
                                    for a in evalkit.attribute_accuracy(pred_flags, attrs)]
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def cmd_select_method(args) -> int:
    img = _read_image(args.infile)
    print(_suggest_for_image(img, args.model, args.classifiers))
    return 0


def cmd_assess_set(args) -> int:
    try:
        lo_text, hi_text = args.band.split(":")
        band = (float(lo_text), float(hi_text))
    except ValueError:
        raise UserError(f"--band must look like 0.0:0.75, got {args.band!r}")
    entries = _load_manifest(args.manifest)
    labels = annotstats.aggregate_ratings(annotstats.manifest_ratings(entries))
    scores = {i: lab.score for i, lab in labels.items()}
    kept = sorted(evalkit.assessment_filter(scores, band))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("".join(i + "\n" for i in kept))
    print(f"{args.out}: {len(kept)} of {len(scores)} images in ({band[0]}, {band[1]}]")
    return 0


def cmd_collage(args) -> int:
    try:
        w_text, h_text = args.canvas.lower().split("x")
        canvas_w, canvas_h = int(w_text), int(h_text)
    except ValueError:
        raise UserError(f"--canvas must look like 800x600, got {args.canvas!r}")
    paths = sorted(p for p in os.listdir(args.images)
                   if p.lower().endswith((".png", ".jpg", ".jpeg")))
    if not paths:
        raise UserError(f"no images in {args.images}")
    images, imps, scores, aspects = {}, {}, {}, {}
    shared_reprs: Dict[str, np.ndarray] = {}
    net = _load_model(args.model) if args.model else None
    for p in paths:
        img = _read_image(os.path.join(args.images, p))
        images[p] = img
        imps[p] = importance.importance_for(img)
        aspects[p] = img.shape[1] / img.shape[0]
        if net is not None:
            y, _, shared = mtlnet.predict(net, _feature_vector(img))
            scores[p] = y
            shared_reprs[p] = shared
        else:
            scores[p] = 0.5
    regions = collage.slice_layout(canvas_w, canvas_h, len(paths), seed=args.seed)
    assignment = collage.assign_by_retargetability(paths, scores, aspects, regions)
    layout = collage.CollageLayout(canvas_w, canvas_h, regions, assignment)
    clfs = methodsel.load_classifiers(args.classifiers) if args.classifiers else None
    out = collage.render_collage(layout, images, imps, clfs,
                                 shared_reprs if clfs is not None else None)
    _write_png(args.out, out)
    if args.layout_out:
        with open(args.layout_out, "w", encoding="utf-8") as fh:
            fh.write(collage.layout_to_json(layout))
    print(f"{args.out}: {len(paths)}-image collage on {canvas_w}x{canvas_h}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .annoserve import AnnotationStore, create_app

    entries = _load_manifest(args.manifest)
    if not entries:
        raise UserError("manifest has no images")
    images, variants = {}, {}
    for entry in entries:
        path = entry.file
        if not os.path.isabs(path) and args.images:
            path = os.path.join(args.images, path or f"{entry.image_id}.png")
        img = _read_image(path)
        images[entry.image_id] = img
        h, w = img.shape[:2]
        tw = max(8, round(w * 0.5)) if w >= h else w
        th = h if w >= h else max(8, round(h * 0.5))
        imp = importance.importance_for(img)
        variants[entry.image_id] = {
            m: retarget(RetargetJob(img, imp, m, tw, th)).result
            for m in annotstats.METHODS
        }
    raters = args.raters.split(",")
    store = AnnotationStore(images, variants, raters, log_path=args.log)
    app = create_app(store, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retargetkit",
        description="Content-aware image retargeting and retargetability learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retarget", help="retarget one image")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--engine", choices=sorted(ENGINE_ALIASES), default="crop")
    p.add_argument("--ratio", type=float, default=0.5)
    p.add_argument("--axis", choices=("long", "w", "h"), default="long")
    p.add_argument("--mask", action="append")
    p.add_argument("--model")
    p.add_argument("--classifiers")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_retarget)

    p = sub.add_parser("importance", help="compute an importance map")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mask", action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_importance)

    p = sub.add_parser("dataset", help="manage the annotation manifest")
    p.add_argument("action", choices=("init", "validate", "stats"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="attribute correlation CSV (stats only)")
    p.set_defaults(fn=cmd_dataset)

    p = sub.add_parser("features", help="extract or import feature vectors")
    p.add_argument("action", choices=("extract", "import"))
    p.add_argument("--manifest")
    p.add_argument("--images", help="image directory for relative manifest paths")
    p.add_argument("--features", help="source feature file (import only)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("train", help="train the retargetability network")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--variant", choices=sorted(mtlnet.VARIANTS), default="full")
    p.add_argument("--config", help="JSON file of hyperparameter fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--model-out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="predict retargetability for one image")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile")
    p.add_argument("--features")
    p.add_argument("--id", dest="image_id")
    p.add_argument("--classifiers")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="evaluate a model against the manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--sigma", type=float, default=0.95)
    p.add_argument("--roc-csv")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("select-method", help="suggest the best engine for an image")
    p.add_argument("--model", required=True)
    p.add_argument("--classifiers", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(fn=cmd_select_method)

    p = sub.add_parser("assess-set", help="filter images useful for method assessment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--band", default="0.0:0.75")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_assess_set)

    p = sub.add_parser("collage", help="compose a retargetability-guided collage")
    p.add_argument("--images", required=True)
    p.add_argument("--model")
    p.add_argument("--classifiers")
    p.add_argument("--canvas", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout-out")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_collage)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", help="image directory for relative manifest paths")
    p.add_argument("--raters", default="r1,r2,r3,r4,r5,r6")
    p.add_argument("--log", help="event log path")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; this surface treats that as user error
        return 0 if exc.code == 0 else 1
    try:
        return args.fn(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EngineError, annotstats.AnnotationError, features.FeatureError,
            methodsel.SelectionError, collage.CollageError, evalkit.EvalError,
            imaging.ImageError, importance.ImportanceError,
            mtlnet.NetworkError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - internal failure boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
