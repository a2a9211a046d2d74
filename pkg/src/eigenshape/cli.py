"""Command-line entry point: dataset generation, spectra, training,
evaluation tables, and every downstream application as a subcommand.

Exit codes: 1 for configuration problems, 2 for data problems, 3 for
numerical failures. Errors also go to stderr as one JSON object per line.
"""

import argparse
import hashlib
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import apps
from .eigensolve import EigensolveError, Spectrum, SpectrumCache, spectrum_of
from .geometry import (
    Contour,
    GeometryError,
    Mesh,
    PointCloud,
    ShapeFamily,
    icosphere,
    load_shape,
    save_shape,
)
from .laplacian import AssemblyError
from .spectral_ae import (
    TrainConfig,
    TrainingDiverged,
    build_dense_model,
    build_pointcloud_model,
    cloud_dataset,
    dense_dataset,
    load_bundle,
    save_bundle,
    train_model,
    write_history_csv,
)


class ConfigError(ValueError):
    pass


def _git_revision():
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def _write_run_manifest(out_path, command, payload):
    """Replay record: full arguments, their hash, and the source revision."""
    payload = {k: str(v) if isinstance(v, Path) else v
               for k, v in payload.items() if not callable(v)}
    blob = json.dumps(payload, sort_keys=True)
    manifest = {
        "command": command,
        "config": payload,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "git_revision": _git_revision(),
    }
    path = Path(str(out_path) + ".run.json")
    path.write_text(json.dumps(manifest, indent=2))


TRAIN_KEYS = {
    "family", "count", "train_count", "k", "order", "epochs", "batch_size",
    "lr", "alpha", "seed", "with_inverse", "model", "cloud_fraction",
    "decoded_points", "cache_dir",
}
FAMILY_KEYS = {"kind", "resolution", "seed", "n_harmonics"}


def _load_train_config(path):
    with open(path) as fh:
        cfg = json.load(fh)
    unknown = set(cfg) - TRAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    fam = cfg.get("family")
    if not isinstance(fam, dict):
        raise ConfigError("config needs a 'family' table")
    unknown = set(fam) - FAMILY_KEYS
    if unknown:
        raise ConfigError(f"unknown family keys: {sorted(unknown)}")
    return cfg


def cmd_gen_data(args):
    fam = ShapeFamily(args.family, args.resolution, args.seed,
                      n_harmonics=args.harmonics)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = fam.manifest(args.count)
    (out / "manifest.json").write_text(json.dumps(manifest))
    shapes_dir = out / "shapes"
    shapes_dir.mkdir(exist_ok=True)
    ext = "json" if args.family == "contour2d" else "off"
    for i, shape in enumerate(fam.samples(args.count)):
        save_shape(shape, shapes_dir / f"{i:04d}.{ext}")
    _write_run_manifest(out / "manifest.json", "gen-data", vars(args))
    print(f"wrote {args.count} shapes and manifest to {out}")
    return 0


def cmd_spectrum(args):
    shape = load_shape(args.input)
    cache = SpectrumCache(args.cache) if args.cache else None
    t0 = time.perf_counter()
    spec = spectrum_of(shape, args.k, order=args.order, cache=cache)
    dt = time.perf_counter() - t0
    Path(args.out).write_text(json.dumps(spec.to_json_dict()))
    _write_run_manifest(args.out, "spectrum", vars(args))
    print(f"k={spec.k} disc={spec.disc} in {dt * 1000:.1f} ms -> {args.out}")
    return 0


def _family_from_config(cfg):
    fam = cfg["family"]
    return ShapeFamily(fam["kind"], fam["resolution"], fam.get("seed", 0),
                       n_harmonics=fam.get("n_harmonics", 10))


def cmd_train(args):
    cfg = _load_train_config(args.config)
    family = _family_from_config(cfg)
    count = cfg.get("count", 700)
    train_count = cfg.get("train_count", 600)
    k = cfg.get("k", 30)
    order = cfg.get("order", "cubic")
    cache = SpectrumCache(cfg["cache_dir"]) if cfg.get("cache_dir") else None
    model_kind = cfg.get("model", "dense")
    tc = TrainConfig(epochs=cfg.get("epochs", 600),
                     batch_size=cfg.get("batch_size", 16),
                     lr=cfg.get("lr", 1e-4), seed=cfg.get("seed", 0),
                     alpha=cfg.get("alpha", 1e-4))
    if model_kind == "dense":
        coords, spectra = dense_dataset(family, count, k, order=order, cache=cache)
        dim = 2 if family.kind == "contour2d" else 3
        faces = icosphere(family.resolution)[1] if family.kind == "blob3d" else None
        bundle = build_dense_model(coords.shape[1], k, dim=dim, alpha=tc.alpha,
                                   seed=tc.seed,
                                   with_inverse=cfg.get("with_inverse", True),
                                   template_faces=faces)
    elif model_kind == "pointcloud":
        coords, spectra = cloud_dataset(family, count, k,
                                        fraction=cfg.get("cloud_fraction", 0.2),
                                        order=order, cache=cache, seed=tc.seed)
        bundle = build_pointcloud_model(k, cfg.get("decoded_points", 256),
                                        alpha=tc.alpha, seed=tc.seed)
    else:
        raise ConfigError(f"unknown model kind {model_kind!r}")
    history = train_model(bundle, coords[:train_count], spectra[:train_count, :k], tc)
    save_bundle(bundle, args.out)
    if args.log:
        write_history_csv(history, args.log)
    _write_run_manifest(args.out, "train", cfg)
    print(f"trained {model_kind} bundle (k={k}, {tc.epochs} epochs) -> {args.out}; "
          f"final loss {history[-1]['loss']:.6g}")
    return 0


def per_vertex_mse(pred, truth):
    out = []
    for p, t in zip(pred, truth):
        d = np.asarray(p, dtype=np.float64) - np.asarray(t, dtype=np.float64)
        out.append((d ** 2).sum() / d.shape[0])
    return float(np.mean(out))


def _shape_coords(shape):
    return np.asarray(getattr(shape, "vertices", getattr(shape, "points", shape)))


def cmd_eval_table1(args):
    bundle = load_bundle(args.checkpoint)
    ablated = load_bundle(args.ablated)
    cfg = _load_train_config(args.config)
    family = _family_from_config(cfg)
    count = cfg.get("count", 700)
    train_count = cfg.get("train_count", 600)
    k = bundle.k
    cache = SpectrumCache(cfg["cache_dir"]) if cfg.get("cache_dir") else None
    coords, spectra = dense_dataset(family, count, k, order=cfg.get("order", "cubic"),
                                    cache=cache)
    test_c, test_s = coords[train_count:], spectra[train_count:]
    rows = []
    for name, model in (("ours", bundle), ("ours-without-inverse", ablated)):
        rec = [_shape_coords(apps.shape_from_spectrum(model, s)) for s in test_s]
        rows.append((name, per_vertex_mse(rec, test_c)))
    index = apps.NearestIndex(spectra[:train_count], payload=coords[:train_count],
                              scale=np.median(spectra[:train_count, -1]))
    nn_rec = [index.query(s)[0] for s in test_s]
    rows.append(("nearest-neighbor", per_vertex_mse(nn_rec, test_c)))
    width = max(len(r[0]) for r in rows)
    lines = [f"{name:<{width}}  {err:.6e}" for name, err in rows]
    table = "\n".join(lines)
    print(table)
    if args.out:
        Path(args.out).write_text(json.dumps(
            {name: err for name, err in rows}, indent=2))
        _write_run_manifest(args.out, "eval-table1", vars(args))
    ours, without, nn = rows[0][1], rows[1][1], rows[2][1]
    ok = ours < without < nn
    print(f"ordering ours < without-inverse < nn: {'pass' if ok else 'FAIL'}")
    return 0


def _load_spectrum(path):
    with open(path) as fh:
        return Spectrum.from_json_dict(json.load(fh))


def cmd_reconstruct(args):
    bundle = load_bundle(args.checkpoint)
    spec = _load_spectrum(args.spectrum)
    t0 = time.perf_counter()
    shape = apps.shape_from_spectrum(bundle, spec)
    dt = time.perf_counter() - t0
    save_shape(shape, args.out)
    _write_run_manifest(args.out, "reconstruct", vars(args))
    print(f"forward pass {dt * 1000:.2f} ms -> {args.out}")
    return 0


def cmd_superres(args):
    bundle = load_bundle(args.checkpoint)
    low = load_shape(args.input)
    shape = apps.super_resolve(bundle, low, order=args.order)
    save_shape(shape, args.out)
    _write_run_manifest(args.out, "superres", vars(args))
    n_in = len(_shape_coords(low))
    print(f"{n_in} -> {bundle.n} points -> {args.out}")
    return 0


def cmd_style_transfer(args):
    bundle = load_bundle(args.checkpoint)
    spec = _load_spectrum(args.style_spectrum)
    pose = load_shape(args.pose_shape)
    cfg = apps.StyleTransferConfig(w=args.w, steps=args.steps, lr=args.lr)
    res = apps.style_transfer(bundle, spec, pose, cfg)
    save_shape(res.shape, args.out)
    if args.curve:
        with open(args.curve, "w") as fh:
            fh.write("step,alignment,objective\n")
            for i, (a, o) in enumerate(zip(res.alignment, res.objective)):
                fh.write(f"{i},{a:.10g},{o:.10g}\n")
    _write_run_manifest(args.out, "style-transfer", vars(args))
    print(f"alignment {res.alignment[0]:.4g} -> {res.alignment[-1]:.4g} "
          f"over {args.steps} steps -> {args.out}")
    return 0


def cmd_interpolate(args):
    bundle = load_bundle(args.checkpoint)
    corners = [_load_spectrum(p) for p in args.corners]
    grid = apps.interpolate_latent(bundle, corners, grid=args.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "json" if bundle.dim == 2 else ("obj" if bundle.template_faces is not None
                                          else "xyz")
    for i, row in enumerate(grid):
        for j, shape in enumerate(row):
            save_shape(shape, out / f"cell_{i}{j}.{ext}")
    _write_run_manifest(out / "grid", "interpolate", vars(args))
    print(f"wrote {args.grid}x{args.grid} grid to {out}")
    return 0


def cmd_band(args):
    spec = _load_spectrum(args.spectrum)
    modified = apps.band_modify(spec, args.lo, args.hi, args.factor)
    Path(args.out).write_text(json.dumps(modified.to_json_dict()))
    if args.checkpoint and args.decode_out:
        bundle = load_bundle(args.checkpoint)
        save_shape(apps.shape_from_spectrum(bundle, modified), args.decode_out)
    _write_run_manifest(args.out, "band", vars(args))
    print(f"scaled [{args.lo}, {args.hi}] by {args.factor} -> {args.out}")
    return 0


def cmd_estimate_spectrum(args):
    bundle = load_bundle(args.checkpoint)
    cloud = load_shape(args.cloud)
    if not isinstance(cloud, PointCloud):
        raise GeometryError(f"{args.cloud} is not a point cloud")
    spec = apps.estimate_spectrum(bundle, cloud)
    Path(args.out).write_text(json.dumps(spec.to_json_dict()))
    _write_run_manifest(args.out, "estimate-spectrum", vars(args))
    print(f"estimated k={spec.k} spectrum -> {args.out}")
    return 0


def cmd_match(args):
    bundle = load_bundle(args.checkpoint)
    spec_a = _load_spectrum(args.spectrum_a)
    spec_b = _load_spectrum(args.spectrum_b)
    points_a = _shape_coords(load_shape(args.shape_a)) if args.shape_a else None
    corr = apps.match_shapes(bundle, spec_a, spec_b, points_a=points_a)
    Path(args.out).write_text(json.dumps({
        "map": corr.map.tolist(), "quality": corr.quality}))
    _write_run_manifest(args.out, "match", vars(args))
    print(f"matched {len(corr.map)} points, mean assignment distance "
          f"{corr.quality:.4g} -> {args.out}")
    return 0


def cmd_serve(args):
    from .server import serve

    serve(args.checkpoint, host=args.host, port=args.port, data_dir=args.data,
          ui_dir=args.ui)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="eigenshape",
        description="Shape analysis and recovery from Laplacian eigenvalues.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic shape family")
    g.add_argument("--family", choices=("contour2d", "blob3d"), required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--resolution", type=int, default=256,
                   help="points per contour, or icosphere subdivision level")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--harmonics", type=int, default=10)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen_data)

    s = sub.add_parser("spectrum", help="compute the first k eigenvalues of a shape")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--k", type=int, default=30)
    s.add_argument("--order", choices=("linear", "cubic"), default="cubic")
    s.add_argument("--cache", help="directory for the spectrum cache")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_spectrum)

    t = sub.add_parser("train", help="train a model from a JSON config")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--log", help="CSV loss-curve path")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluation reports")
    esub = e.add_subparsers(dest="report", required=True)
    t1 = esub.add_parser("table1", help="ours / without-inverse / nearest-neighbor "
                                        "reconstruction error table")
    t1.add_argument("--checkpoint", required=True)
    t1.add_argument("--ablated", required=True,
                    help="checkpoint trained without the inverse map")
    t1.add_argument("--config", required=True, help="the training config (dataset)")
    t1.add_argument("--out")
    t1.set_defaults(fn=cmd_eval_table1)

    r = sub.add_parser("reconstruct", help="decode a shape from a spectrum JSON")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--spectrum", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_reconstruct)

    sr = sub.add_parser("superres", help="upsample a low-resolution shape")
    sr.add_argument("--checkpoint", required=True)
    sr.add_argument("--in", dest="input", required=True)
    sr.add_argument("--order", choices=("linear", "cubic"), default="cubic")
    sr.add_argument("--out", required=True)
    sr.set_defaults(fn=cmd_superres)

    st = sub.add_parser("style-transfer",
                        help="apply a style spectrum to a pose shape")
    st.add_argument("--checkpoint", required=True)
    st.add_argument("--style-spectrum", required=True)
    st.add_argument("--pose-shape", required=True)
    st.add_argument("--w", type=float, default=1e-2, help="anchor weight")
    st.add_argument("--steps", type=int, default=500)
    st.add_argument("--lr", type=float, default=1e-2)
    st.add_argument("--curve", help="CSV path for the alignment curve")
    st.add_argument("--out", required=True)
    st.set_defaults(fn=cmd_style_transfer)

    it = sub.add_parser("interpolate", help="bilinear latent grid from 4 spectra")
    it.add_argument("--checkpoint", required=True)
    it.add_argument("--corners", nargs=4, required=True)
    it.add_argument("--grid", type=int, default=5)
    it.add_argument("--out", required=True)
    it.set_defaults(fn=cmd_interpolate)

    b = sub.add_parser("band", help="scale a band of eigenvalues")
    b.add_argument("--spectrum", required=True)
    b.add_argument("--lo", type=int, required=True)
    b.add_argument("--hi", type=int, required=True)
    b.add_argument("--factor", type=float, required=True)
    b.add_argument("--checkpoint")
    b.add_argument("--decode-out")
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_band)

    es = sub.add_parser("estimate-spectrum",
                        help="predict a spectrum from a point cloud")
    es.add_argument("--checkpoint", required=True)
    es.add_argument("--cloud", required=True)
    es.add_argument("--out", required=True)
    es.set_defaults(fn=cmd_estimate_spectrum)

    m = sub.add_parser("match", help="correspondence between two spectra")
    m.add_argument("--checkpoint", required=True)
    m.add_argument("--spectrum-a", required=True)
    m.add_argument("--spectrum-b", required=True)
    m.add_argument("--shape-a", help="external points to map onto the template")
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_match)

    sv = sub.add_parser("serve", help="HTTP inference service")
    sv.add_argument("--checkpoint", required=True)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8707)
    sv.add_argument("--data", help="dataset directory for /samples")
    sv.add_argument("--ui", help="static explorer assets to serve at /ui")
    sv.set_defaults(fn=cmd_serve)

    return p


def _fail(code, kind, exc):
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, json.JSONDecodeError) as exc:
        return _fail(1, "config", exc)
    except FileNotFoundError as exc:
        return _fail(2, "data", exc)
    except (GeometryError, AssemblyError) as exc:
        return _fail(2, "data", exc)
    except (EigensolveError, TrainingDiverged, apps.StyleTransferDiverged,
            np.linalg.LinAlgError) as exc:
        return _fail(3, "numerical", exc)
    except ValueError as exc:
        return _fail(1, "config", exc)


if __name__ == "__main__":
    sys.exit(main())
