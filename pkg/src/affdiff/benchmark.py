"""Synthetic retrieval benchmark with per-transform, per-strength mAP tables.

Six base shapes form the corpus; queries are their equi-affine transforms
(strengths 1-5) and near-isometric bends (strengths 1-3). Transforms are
stored in the manifest as parameters and applied when an entry is loaded.
"""

from __future__ import annotations

import os

import numpy as np

from . import diffusion, retrieval, shapes
from .mesh import apply_affine, load_mesh, random_equi_affine, save_off
from .pipeline import laplacian_spectrum

AFFINE_STRENGTHS = (1, 2, 3, 4, 5)
BEND_STRENGTHS = (1, 2, 3)


def affine_condition(strength):
    """Condition number of the equi-affine query transform at ``strength`` (5 -> 5.0)."""
    return 1.0 + 0.8 * strength


def bend_curvature(strength):
    return 0.15 * strength


def _lobed(sph, lobes, amp):
    def r(d):
        phi = np.arctan2(d[:, 1], d[:, 0])
        s2 = 1 - d[:, 2] ** 2
        return 1.0 + amp * np.cos(lobes * phi) * s2
    return shapes.radial_surface(sph, r)


def _rounded_box(sph, p):
    def r(d):
        return 1.0 / (np.abs(d) ** p).sum(1) ** (1.0 / p)
    return shapes.radial_surface(sph, r)


def _egg(sph):
    def r(d):
        return 1.0 + 0.25 * d[:, 2] + 0.08 * d[:, 0] * d[:, 1]
    return shapes.radial_surface(sph, r)


def base_shapes(subdivisions=4):
    """The six corpus shapes, keyed by label."""
    sph = shapes.icosphere(subdivisions)
    out = {
        "blob": shapes.bumped_blob(seed=1, subdivisions=subdivisions, amplitude=0.1),
        "peanut": shapes.fused_spheres(subdivisions)[0],
        "trilobe": _lobed(sph, 3, 0.3),
        "box": _rounded_box(sph, 3.0),
        "egg": _egg(sph),
        "star": _lobed(sph, 5, 0.2),
    }
    return out


def make_minibench(out_dir, subdivisions=4, seed=0, scales=None, labels=None):
    """Write base OFF files and a manifest describing every query transform.

    ``labels`` restricts the benchmark to a subset of the base shapes.
    """
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    rng = np.random.default_rng(seed)
    for label, mesh in base_shapes(subdivisions).items():
        if labels is not None and label not in labels:
            continue
        fname = f"{label}.off"
        save_off(mesh, os.path.join(out_dir, fname))
        entries.append(retrieval.ManifestEntry(f"{label}-null", fname, label))
        for s in AFFINE_STRENGTHS:
            entries.append(retrieval.ManifestEntry(
                f"{label}-affine-{s}", fname, label, "affine", s, int(rng.integers(2 ** 31)), "query"))
        for s in BEND_STRENGTHS:
            entries.append(retrieval.ManifestEntry(
                f"{label}-bend-{s}", fname, label, "bend", s, 0, "query"))
    config = {"scales": scales or default_benchmark_scales(), "vocabulary_size": 64, "seed": seed}
    man = retrieval.DatasetManifest(entries, out_dir, config)
    man.save(os.path.join(out_dir, "manifest.json"))
    return man


def default_benchmark_scales():
    ladder = [2.0 ** (2.0 * k / 5.0) for k in range(6)]
    return {"euclidean": [0.3 * x for x in ladder], "equi-affine": [0.3 * x for x in ladder]}


def materialize(manifest, entry, cache=None):
    """Load the entry's file and apply its transform."""
    path = manifest.resolve(entry)
    if cache is not None and path in cache:
        mesh = cache[path]
    else:
        mesh = load_mesh(path)
        if cache is not None:
            cache[path] = mesh
    if entry.transform == "null":
        return mesh
    if entry.transform == "affine":
        T = random_equi_affine(entry.seed, affine_condition(entry.strength), exact=True)
        return apply_affine(mesh, T)
    if entry.transform == "bend":
        return shapes.bend(mesh, bend_curvature(entry.strength))
    raise ValueError(f"unknown transform {entry.transform!r}")


def run_benchmark(manifest, mode, k=100, scales=None, vocabulary_size=None, seed=None,
                  area_weighted=True, sigma2=None, progress=None):
    """Evaluate one metric mode. Returns (report dict, per-query rankings)."""
    cfg = manifest.config
    if scales is None:
        scales = cfg.get("scales", {}).get(mode, diffusion.DEFAULT_SCALES)
    vocabulary_size = vocabulary_size or cfg.get("vocabulary_size", 64)
    seed = cfg.get("seed", 0) if seed is None else seed

    cache = {}
    desc, weights = {}, {}
    for e in manifest.entries:
        if progress:
            progress(e.id)
        mesh = materialize(manifest, e, cache)
        sp = laplacian_spectrum(mesh, mode, k)
        desc[e.id] = diffusion.hks(sp.spec, scales)
        weights[e.id] = sp.area_weights if area_weighted else None

    corpus = manifest.corpus
    queries = manifest.queries
    vocab = retrieval.build_vocabulary([desc[e.id] for e in corpus], vocabulary_size, seed)
    bag = {e.id: retrieval.bag_of_features(desc[e.id], vocab, weights[e.id], sigma2)
           for e in manifest.entries}
    corpus_bags = [bag[e.id] for e in corpus]
    rankings, relevance = [], []
    for q in queries:
        ranked = retrieval.rank(bag[q.id], corpus_bags)
        rankings.append(ranked)
        relevance.append([corpus[i].label == q.label for i, _ in ranked])
    aps = [retrieval.average_precision(r) for r in relevance]
    report = {
        "mode": mode,
        "k": k,
        "scales": [float(t) for t in scales],
        "vocabulary_size": vocabulary_size,
        "overall": float(np.mean(aps)),
        "per_transform": retrieval.cumulative_map(queries, aps),
    }
    return report, rankings
