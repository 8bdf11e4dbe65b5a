"""Command-line interface.

Every subcommand reads its inputs, writes one JSON file per artifact under
``--out`` (plus CSV/PLY/OFF/PNG where relevant) and exits with
0 on success, 2 on bad input, 3 on validation failure, 4 on numerical failure.
Errors are reported on stderr as a JSON record.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from . import __version__, benchmark, correspondence, diffusion, retrieval, symmetry
from .errors import AffdiffError, InputError, ValidationError
from .mesh import AffineTransform, apply_affine, export_scalar_ply, load_mesh, random_equi_affine, save_off
from .metric import EQUI_AFFINE, MODES
from .pipeline import laplacian_spectrum

BUNDLED_MANIFEST = os.path.join(os.path.dirname(__file__), "data", "minibench", "manifest.json")


@dataclass
class RunConfig:
    mode: str = EQUI_AFFINE
    k: int = 100
    scales: tuple = diffusion.DEFAULT_SCALES
    vocabulary_size: int = 64
    seed: int = 0
    tol: float = 1e-10
    out: str = "."
    figures: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k <= 0 or self.vocabulary_size <= 0:
            raise ValidationError("counts must be positive")
        if np.any(np.diff(self.scales) <= 0) or min(self.scales) <= 0:
            raise ValidationError("scales must be positive and ascending")


def _write_json(path, obj):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _out(cfg, name):
    return os.path.join(cfg.out, name)


def _spectrum(args, cfg, mesh=None, path=None):
    mesh = mesh if mesh is not None else load_mesh(path or args.mesh)
    sp = laplacian_spectrum(mesh, cfg.mode, min(cfg.k, mesh.n_vertices), cfg.tol)
    if getattr(args, "dump_metric", False):
        sp.metric.dump_json(_out(cfg, "metric.json"))
    if getattr(args, "dump_matrices", False):
        sp.system.dump_matrix_market(_out(cfg, "fem"))
    return mesh, sp


# ----------------------------------------------------------------- commands


def cmd_spectrum(args, cfg):
    mesh, sp = _spectrum(args, cfg)
    spec = sp.spec
    out = {"mode": cfg.mode, "k": spec.k, "lambda": spec.values.tolist(),
           "residuals": spec.residuals.tolist(), "multiplet": spec.multiplet.tolist(),
           "n_vertices": mesh.n_vertices, "fallback_faces": int(sp.metric.fallback.sum())}
    written = [_write_json(_out(cfg, "spectrum.json"), out)]
    if cfg.figures:
        from . import plotting
        written.append(plotting.spectrum_figure(spec.values, _out(cfg, "spectrum.png"), cfg.mode))
    return written


def cmd_hks(args, cfg):
    _, sp = _spectrum(args, cfg)
    desc = diffusion.hks(sp.spec, cfg.scales)
    out = {"mode": cfg.mode, **desc.to_json_dict()}
    written = [_write_json(_out(cfg, "hks.json"), out)]
    if cfg.figures:
        from . import plotting
        written.append(plotting.hks_figure(desc, _out(cfg, "hks.png")))
    return written


def cmd_distance(args, cfg):
    mesh, sp = _spectrum(args, cfg)
    n = mesh.n_vertices
    for v in (args.source, args.target):
        if not 0 <= v < n:
            raise ValidationError(f"vertex {v} out of range [0, {n})")
    spec = sp.spec
    records = []
    if args.metric in ("commute", "both"):
        records.append({"metric": "commute", "from": args.source, "to": args.target, "t": None,
                        "value": diffusion.commute_time(spec, args.source, args.target)})
    if args.metric in ("diffusion", "both"):
        records.append({"metric": "diffusion", "from": args.source, "to": args.target, "t": args.t,
                        "value": diffusion.diffusion_distance(spec, args.source, args.target, args.t,
                                                              literal=args.literal)})
    if args.metric == "heat":
        records.append({"metric": "heat", "from": args.source, "to": args.target, "t": args.t,
                        "value": diffusion.heat_kernel(spec, args.source, args.target, args.t)})
    return [_write_json(_out(cfg, "distance.json"), {"mode": cfg.mode, "queries": records})]


def cmd_retrieve(args, cfg):
    man = retrieval.DatasetManifest.load(args.manifest)
    modes = MODES if args.modes == "both" else (args.modes,)
    reports, written = [], []
    for mode in modes:
        scales = args.scales if args.scales else None
        rep, rankings = benchmark.run_benchmark(man, mode, cfg.k, scales=scales,
                                                vocabulary_size=args.vocabulary_size,
                                                seed=args.seed, area_weighted=not args.unweighted,
                                                sigma2=args.sigma2)
        reports.append(rep)
        csv_path = _out(cfg, f"rankings_{mode}.csv")
        retrieval.write_rankings_csv(csv_path, man.queries, man.corpus, rankings)
        written.append(csv_path)
    report = {r["mode"]: r for r in reports}
    written.insert(0, _write_json(_out(cfg, "retrieval.json"), report))
    if cfg.figures:
        from . import plotting
        written.append(plotting.retrieval_figure(reports, _out(cfg, "retrieval.png")))
    return written


def cmd_symmetry(args, cfg):
    mesh, sp = _spectrum(args, cfg)
    spec = sp.spec
    import warnings
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cands = symmetry.detect_symmetries(spec, args.K, None, sp.area_weights,
                                           drop_multiplets=args.drop_multiplets)
    top = cands[:args.top]
    out = {"mode": cfg.mode, "K": args.K,
           "warnings": [str(w.message) for w in caught],
           "candidates": [{"signs": list(c.signs), "energy": c.energy, "f": c.mapping.tolist()}
                          for c in top]}
    written = [_write_json(_out(cfg, "symmetry.json"), out)]
    if args.ply and top:
        path = _out(cfg, "symmetry_f.ply")
        export_scalar_ply(mesh, top[0].mapping.astype(float), path)
        written.append(path)
    if cfg.figures:
        from . import plotting
        written.append(plotting.symmetry_figure(cands, _out(cfg, "symmetry.png")))
    return written


def cmd_match(args, cfg):
    mx = load_mesh(args.mesh)
    my = load_mesh(args.other)
    if mx.n_vertices != my.n_vertices:
        raise ValidationError("ground-truth matching needs meshes with the same vertex set")
    _, sx = _spectrum(args, cfg, mesh=mx)
    _, sy = _spectrum(args, cfg, mesh=my)
    ids, _ = correspondence.farthest_point_sample(sx.spec, args.count, args.seed)
    kw = {"metric": args.metric, "t": args.t}
    X = correspondence.SampledMetricSpace.from_spectrum(sx.spec, ids, source=args.mesh, **kw)
    Y = correspondence.SampledMetricSpace.from_spectrum(sy.spec, ids, source=args.other, **kw)
    identity = [(i, i) for i in range(len(ids))]
    rep = correspondence.evaluate_matching(X, Y, identity)
    g = min(args.gh_size, len(ids))
    Xs = correspondence.SampledMetricSpace(ids[:g], X.D[:g, :g])
    Ys = correspondence.SampledMetricSpace(ids[:g], Y.D[:g, :g])
    dgh, pairs = correspondence.gromov_hausdorff_bruteforce(Xs, Ys)
    D_iu = X.D[np.triu_indices(len(ids), 1)]
    out = {"mode": cfg.mode, "samples": ids.tolist(), "distortion": rep["distortion"],
           "median_distance": float(np.median(D_iu)) if len(D_iu) else 0.0,
           "dgh": dgh, "gh_samples": g, "pairs": [list(p) for p in pairs]}
    written = [_write_json(_out(cfg, "match.json"), out)]
    if cfg.figures:
        from . import plotting
        written.append(plotting.stress_figure(rep["stress"], _out(cfg, "match_stress.png")))
    return written


def cmd_transform(args, cfg):
    mesh = load_mesh(args.mesh)
    if args.matrix:
        if len(args.matrix) != 9:
            raise InputError("--matrix takes 9 numbers (row-major)")
        T = AffineTransform(np.array(args.matrix).reshape(3, 3), np.array(args.translate or [0, 0, 0]))
    else:
        T = random_equi_affine(cfg.seed, args.max_condition, exact=args.exact)
    if args.det_check and not T.is_equi_affine:
        raise ValidationError(f"transform is not volume preserving (det = {T.det:.12g})")
    stem = os.path.splitext(os.path.basename(args.mesh))[0]
    off = _out(cfg, f"{stem}_transformed.off")
    save_off(apply_affine(mesh, T), off)
    info = {"A": T.A.tolist(), "b": T.b.tolist(), "det": T.det, "condition": T.condition,
            "equi_affine": T.is_equi_affine}
    return [off, _write_json(_out(cfg, "transform.json"), info)]


def cmd_export(args, cfg):
    mesh = load_mesh(args.mesh)
    if args.field_file:
        try:
            with open(args.field_file) as fh:
                field_values = np.asarray(json.load(fh), dtype=float).ravel()
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read field file: {exc}") from exc
        name = "field"
    else:
        _, sp = _spectrum(args, cfg, mesh=mesh)
        if args.hks is not None:
            desc = diffusion.hks(sp.spec, cfg.scales)
            if not 0 <= args.hks < desc.dim:
                raise ValidationError("hks scale index out of range")
            field_values = desc.values[:, args.hks]
            name = f"hks{args.hks}"
        else:
            i = args.eigenfunction if args.eigenfunction is not None else 1
            if not 0 <= i < sp.spec.k:
                raise ValidationError("eigenfunction index out of range")
            field_values = sp.spec.vectors[:, i]
            name = f"eig{i}"
    path = _out(cfg, f"{name}.ply")
    export_scalar_ply(mesh, field_values, path)
    return [path]


# ------------------------------------------------------------------ parser


def _add_common(p, mesh=True):
    if mesh:
        p.add_argument("mesh", help="input mesh (.off or .obj)")
    p.add_argument("--mode", choices=MODES, default=EQUI_AFFINE, help="metric used for the Laplacian")
    p.add_argument("-k", type=int, default=100, help="number of eigenpairs (default 100)")
    p.add_argument("--tol", type=float, default=1e-10, help="eigensolver tolerance relative to |A|")
    p.add_argument("--scales", type=float, nargs="+", default=None, help="HKS time scales")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.add_argument("--dump-metric", action="store_true", help="write per-face metric JSON")
    p.add_argument("--dump-matrices", action="store_true", help="write A and B in Matrix Market format")


def build_parser():
    parser = argparse.ArgumentParser(prog="affdiff", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="smallest Laplace-Beltrami eigenvalues", allow_abbrev=False)
    _add_common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("hks", help="per-vertex heat kernel signatures", allow_abbrev=False)
    _add_common(p)
    p.set_defaults(func=cmd_hks)

    p = sub.add_parser("distance", help="commute-time / diffusion distance between two vertices",
                       allow_abbrev=False)
    _add_common(p)
    p.add_argument("--from", dest="source", type=int, required=True)
    p.add_argument("--to", dest="target", type=int, required=True)
    p.add_argument("--metric", choices=("commute", "diffusion", "both", "heat"), default="both")
    p.add_argument("--t", type=float, default=1.0, help="diffusion time")
    p.add_argument("--literal", action="store_true", help="use exp(-lambda t) in the diffusion distance")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("retrieve", help="bag-of-features retrieval benchmark", allow_abbrev=False)
    _add_common(p, mesh=False)
    p.add_argument("manifest", nargs="?", default=BUNDLED_MANIFEST,
                   help="dataset manifest JSON (default: bundled synthetic benchmark)")
    p.add_argument("--modes", choices=MODES + ("both",), default="both")
    p.add_argument("--vocabulary-size", type=int, default=None)
    p.add_argument("--sigma2", type=float, default=None, help="soft quantization variance")
    p.add_argument("--unweighted", action="store_true", help="count vertices instead of area weighting")
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("symmetry", help="intrinsic symmetries from sign signatures", allow_abbrev=False)
    _add_common(p)
    p.add_argument("-K", type=int, default=5, help="number of non-trivial eigenfunctions")
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--drop-multiplets", action="store_true")
    p.add_argument("--ply", action="store_true", help="export the best map as a PLY field")
    p.set_defaults(func=cmd_symmetry)

    p = sub.add_parser("match", help="distortion of the vertex-identity correspondence", allow_abbrev=False)
    _add_common(p)
    p.add_argument("other", help="second mesh with the same vertex set")
    p.add_argument("--count", type=int, default=50, help="farthest-point samples")
    p.add_argument("--gh-size", type=int, default=5, help="samples used for exhaustive d_GH (<= 7)")
    p.add_argument("--metric", choices=("commute", "diffusion"), default="commute")
    p.add_argument("--t", type=float, default=1.0)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("transform", help="apply an (equi-)affine map and write OFF", allow_abbrev=False)
    _add_common(p)
    p.add_argument("--matrix", type=float, nargs="+", default=None, help="9 entries of A, row-major")
    p.add_argument("--translate", type=float, nargs=3, default=None)
    p.add_argument("--max-condition", type=float, default=5.0)
    p.add_argument("--exact", action="store_true", help="make cond(A) equal --max-condition")
    p.add_argument("--det-check", action="store_true", help="refuse transforms with det != 1")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("export", help="write a scalar field as a colored PLY", allow_abbrev=False)
    _add_common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--eigenfunction", type=int, default=None)
    g.add_argument("--hks", type=int, default=None, help="HKS scale index")
    g.add_argument("--field-file", default=None, help="JSON list of per-vertex values")
    p.set_defaults(func=cmd_export)
    return parser


def _limits(threads):
    if not threads:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=threads)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scales = tuple(args.scales) if args.scales else diffusion.DEFAULT_SCALES
        cfg = RunConfig(mode=args.mode, k=args.k, scales=scales, seed=args.seed, tol=args.tol,
                        out=args.out, figures=args.figures)
        os.makedirs(cfg.out, exist_ok=True)
        with _limits(args.threads):
            written = args.func(args, cfg)
    except AffdiffError as exc:
        json.dump({"error": exc.code, "message": str(exc), "exit_code": exc.exit_code}, sys.stderr)
        sys.stderr.write("\n")
        return exc.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
