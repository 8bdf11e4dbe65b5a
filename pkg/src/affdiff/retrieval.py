"""Bag-of-features shape retrieval on heat kernel signatures.

Descriptors are clustered into a vocabulary with k-means, every vertex is
softly assigned to the vocabulary words, and a shape becomes the
area-weighted, L1-normalized histogram of those assignments. Shapes are
ranked by L1 distance between histograms and scored by mean average
precision.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DimensionMismatchError,
    InputError,
    InsufficientDataError,
    NoRelevantError,
    ValidationError,
)


@dataclass
class Vocabulary:
    centers: np.ndarray

    @property
    def size(self):
        return len(self.centers)

    @property
    def dim(self):
        return self.centers.shape[1]

    def median_distance(self):
        C = self.centers
        d = np.sqrt(((C[:, None, :] - C[None, :, :]) ** 2).sum(-1))
        iu = np.triu_indices(len(C), 1)
        return float(np.median(d[iu])) if len(iu[0]) else 1.0

    def default_sigma2(self):
        """Twice the median distance between centers."""
        return 2.0 * self.median_distance()


@dataclass
class BagOfFeatures:
    histogram: np.ndarray

    def __len__(self):
        return len(self.histogram)


def _stack(descriptor_sets):
    arrs = [np.asarray(getattr(d, "values", d), dtype=float) for d in descriptor_sets]
    dims = {a.shape[1] for a in arrs}
    if len(dims) != 1:
        raise DimensionMismatchError("descriptor dimensions differ")
    return np.vstack(arrs)


def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(X, k, rng):
    n = len(X)
    idx = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[idx])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise InsufficientDataError("fewer distinct descriptors than vocabulary size")
        j = int(rng.choice(n, p=d2 / total))
        idx.append(j)
        d2 = np.minimum(d2, _sq_dists(X, X[j:j + 1])[:, 0])
    return X[idx].copy()


def build_vocabulary(descriptor_sets, size=64, seed=0, max_iter=200, rtol=1e-6):
    """k-means (k-means++ seeding, Lloyd iterations) over all descriptors."""
    X = _stack(descriptor_sets)
    if len(X) < size:
        raise InsufficientDataError(f"{len(X)} descriptors for a vocabulary of {size}")
    rng = np.random.default_rng(seed)
    C = _kmeanspp(X, size, rng)
    scale = max(float(np.abs(X).max()), 1e-300)
    for _ in range(max_iter):
        labels = np.argmin(_sq_dists(X, C), axis=1)
        counts = np.bincount(labels, minlength=size)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        new = C.copy()
        nz = counts > 0
        new[nz] = sums[nz] / counts[nz, None]
        move = np.abs(new - C).max()
        C = new
        if move < rtol * scale:
            break
    if len(np.unique(C, axis=0)) != size:
        raise InsufficientDataError("vocabulary centers coincide")
    return Vocabulary(C)


def soft_quantize(p, vocab, sigma2=None):
    """Weights proportional to exp(-|p - c|^2 / (2 sigma2)), summing to one.

    ``p`` may be a single descriptor or an (n, d) array (one row per vertex).
    """
    if sigma2 is None:
        sigma2 = vocab.default_sigma2()
    if sigma2 <= 0:
        raise ValidationError("sigma2 must be positive")
    P = np.atleast_2d(np.asarray(p, dtype=float))
    if P.shape[1] != vocab.dim:
        raise DimensionMismatchError("descriptor and vocabulary dimensions differ")
    # direct differences: equidistant centers get bitwise-equal weights
    d2 = ((P[:, None, :] - vocab.centers[None, :, :]) ** 2).sum(-1)
    logits = -d2 / (2.0 * sigma2)
    W = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    return W[0] if np.ndim(p) == 1 else W


def bag_of_features(desc, vocab, area_weights=None, sigma2=None):
    """Area-weighted soft histogram over the vocabulary, L1-normalized.

    With ``area_weights=None`` every vertex counts once.
    """
    P = np.asarray(getattr(desc, "values", desc), dtype=float)
    W = soft_quantize(P, vocab, sigma2)
    if W.ndim == 1:
        W = W[None]
    a = np.ones(len(P)) if area_weights is None else np.asarray(area_weights, dtype=float)
    if len(a) != len(P) or np.any(a <= 0):
        raise ValidationError("area weights must be positive, one per vertex")
    h = a @ W
    return BagOfFeatures(h / h.sum())


def rank(query, corpus):
    """Corpus indices sorted by ascending L1 distance to ``query`` (ties by index)."""
    q = np.asarray(getattr(query, "histogram", query), dtype=float)
    H = [np.asarray(getattr(b, "histogram", b), dtype=float) for b in corpus]
    if any(h.shape != q.shape for h in H):
        raise DimensionMismatchError("bags built on different vocabularies")
    d = np.array([np.abs(h - q).sum() for h in H])
    order = np.lexsort((np.arange(len(d)), d))
    return [(int(i), float(d[i])) for i in order]


def average_precision(relevance):
    rel = np.asarray(relevance, dtype=bool)
    n_rel = int(rel.sum())
    if n_rel == 0:
        raise NoRelevantError("query has no relevant item")
    hits = np.cumsum(rel)
    precision = hits / np.arange(1, len(rel) + 1)
    return float(precision[rel].sum() / n_rel)


def mean_average_precision(rankings):
    """Mean over queries of sum_r P(r) rel(r) / #relevant.

    ``rankings`` is a list of per-query relevance sequences in rank order.
    """
    if len(rankings) == 0:
        raise NoRelevantError("no queries")
    return float(np.mean([average_precision(r) for r in rankings]))


# ------------------------------------------------------------ manifests


@dataclass
class ManifestEntry:
    id: str
    path: str
    label: str
    transform: str = "null"
    strength: float = 0
    seed: int = 0
    role: str = "corpus"

    @property
    def is_query(self):
        return self.role == "query"


@dataclass
class DatasetManifest:
    entries: list
    root: str = "."
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("manifest ids must be unique")

    @property
    def queries(self):
        return [e for e in self.entries if e.role == "query"]

    @property
    def corpus(self):
        return [e for e in self.entries if e.role == "corpus"]

    def resolve(self, entry):
        return os.path.join(self.root, entry.path)

    def check_paths(self):
        missing = [e.path for e in self.entries if not os.path.exists(self.resolve(e))]
        if missing:
            raise InputError(f"manifest paths not found: {missing[:3]}")

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read manifest {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed manifest {path}: {exc}") from exc
        entries = [ManifestEntry(**e) for e in data["entries"]]
        m = cls(entries, os.path.dirname(os.path.abspath(path)), data.get("config", {}))
        m.check_paths()
        return m

    def save(self, path):
        data = {"config": self.config, "entries": [vars(e) for e in self.entries]}
        with open(path, "w") as fh:
            json.dump(data, fh, indent=1)


def cumulative_map(query_entries, aps):
    """Per transform: {strength s: mAP over queries with strength <= s}."""
    out = {}
    for tr in sorted({e.transform for e in query_entries}):
        rows = [(e.strength, ap) for e, ap in zip(query_entries, aps) if e.transform == tr]
        out[tr] = {}
        for s in sorted({r[0] for r in rows}):
            sel = [ap for st, ap in rows if st <= s]
            out[tr][_strength_key(s)] = float(np.mean(sel))
    return out


def _strength_key(s):
    return str(int(s)) if float(s).is_integer() else repr(float(s))


def write_rankings_csv(path, query_entries, corpus_entries, rankings):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "rank", "corpus_id", "distance", "relevant"])
        for q, ranked in zip(query_entries, rankings):
            for r, (i, d) in enumerate(ranked, 1):
                c = corpus_entries[i]
                w.writerow([q.id, r, c.id, "%.12g" % d, int(c.label == q.label)])
