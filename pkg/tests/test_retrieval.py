import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affdiff import benchmark, diffusion, retrieval, shapes
from affdiff.errors import (DimensionMismatchError, InputError, InsufficientDataError,
                            NoRelevantError, ValidationError)
from affdiff.mesh import apply_affine, random_equi_affine, shear
from affdiff.pipeline import laplacian_spectrum
from affdiff.retrieval import (BagOfFeatures, Vocabulary, average_precision, bag_of_features,
                               build_vocabulary, mean_average_precision, rank, soft_quantize)


# ------------------------------------------------------------- vocabulary


def test_vocabulary_k_equals_n(rng):
    X = rng.standard_normal((64, 6))
    v = build_vocabulary([X], size=64, seed=0)
    assert sorted(map(tuple, v.centers)) == sorted(map(tuple, X))


def test_vocabulary_two_blobs(rng):
    a = rng.normal([0, 0], 0.3, (200, 2))
    b = rng.normal([10, 0], 0.3, (200, 2))
    C = build_vocabulary([a, b], size=2, seed=1).centers
    C = C[np.argsort(C[:, 0])]
    assert np.linalg.norm(C[0] - a.mean(0)) < 1.0
    assert np.linalg.norm(C[1] - b.mean(0)) < 1.0


def test_vocabulary_deterministic(rng):
    X = rng.standard_normal((500, 3))
    assert np.array_equal(build_vocabulary([X], 16, seed=7).centers,
                          build_vocabulary([X], 16, seed=7).centers)


def test_vocabulary_insufficient():
    with pytest.raises(InsufficientDataError):
        build_vocabulary([np.zeros((3, 2))], size=4)
    with pytest.raises(InsufficientDataError):
        build_vocabulary([np.zeros((10, 2))], size=4)  # all identical


def test_vocabulary_centers_distinct(rng):
    C = build_vocabulary([rng.standard_normal((300, 4))], 32, seed=0).centers
    d = np.linalg.norm(C[:, None] - C[None], axis=-1)
    assert d[np.triu_indices(32, 1)].min() > 0


def test_default_sigma2():
    v = Vocabulary(np.array([[0.0], [1.0], [3.0]]))
    assert v.median_distance() == 2.0 and v.default_sigma2() == 4.0


# ------------------------------------------------------------- quantization


def test_soft_quantize_hard_limit():
    v = Vocabulary(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]))
    w = soft_quantize(v.centers[1], v, sigma2=1e-6 * v.median_distance())
    assert w[1] == pytest.approx(1.0, abs=1e-12)


def test_soft_quantize_equidistant():
    v = Vocabulary(np.array([[-1.3, 0.2], [1.3, 0.2]]))
    w = soft_quantize(np.array([0.0, 0.2]), v, 0.7)
    assert w[0] == w[1] == 0.5


def test_soft_quantize_hand_values():
    v = Vocabulary(np.array([[0.0], [1.0], [3.0]]))
    w = soft_quantize(np.array([1.0]), v, sigma2=2.0)
    raw = np.array([np.exp(-0.25), 1.0, np.exp(-1.0)])
    assert np.allclose(w, raw / raw.sum(), rtol=1e-14)


def test_soft_quantize_errors():
    v = Vocabulary(np.array([[0.0], [1.0]]))
    with pytest.raises(ValidationError):
        soft_quantize(np.array([0.5]), v, 0.0)
    with pytest.raises(DimensionMismatchError):
        soft_quantize(np.array([0.5, 1.0]), v, 1.0)


def test_bag_concentrated():
    v = Vocabulary(np.array([[0.0], [100.0], [200.0]]))
    bag = bag_of_features(np.full((10, 1), 100.0), v, sigma2=1.0)
    assert np.allclose(bag.histogram, [0, 1, 0], atol=1e-300)


def test_bag_two_halves():
    v = Vocabulary(np.array([[0.0], [100.0], [200.0]]))
    P = np.array([[0.0], [0.0], [200.0], [200.0]])
    bag = bag_of_features(P, v, area_weights=[1, 1, 1, 1], sigma2=1.0)
    assert np.allclose(bag.histogram, [0.5, 0, 0.5], atol=1e-15)


def test_bag_area_weights():
    v = Vocabulary(np.array([[0.0], [100.0]]))
    bag = bag_of_features(np.array([[0.0], [100.0]]), v, area_weights=[3, 1], sigma2=1.0)
    assert np.allclose(bag.histogram, [0.75, 0.25])
    with pytest.raises(ValidationError):
        bag_of_features(np.array([[0.0]]), v, area_weights=[-1.0], sigma2=1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_bag_normalized(seed):
    r = np.random.default_rng(seed)
    v = Vocabulary(r.standard_normal((8, 3)))
    bag = bag_of_features(r.standard_normal((50, 3)), v, r.uniform(0.1, 2, 50))
    assert np.all(bag.histogram >= 0)
    assert bag.histogram.sum() == pytest.approx(1.0, abs=1e-10)


# ------------------------------------------------------------- ranking / mAP


def test_rank_self_match():
    bags = [BagOfFeatures(np.array(h, float)) for h in ([1, 0, 0], [0.5, 0.5, 0], [0, 0, 1])]
    assert rank(bags[1], bags)[0] == (1, 0.0)


def test_rank_orthogonal_indicators():
    bags = [BagOfFeatures(np.eye(4)[i]) for i in range(4)]
    r = rank(bags[2], bags)
    assert r[0] == (2, 0.0)
    assert [d for _, d in r[1:]] == [2.0, 2.0, 2.0]
    assert [i for i, _ in r[1:]] == [0, 1, 3]


def test_rank_hand_computed():
    q = np.array([0.5, 0.5, 0.0])
    corpus = [np.array([0.0, 0.0, 1.0]), np.array([0.4, 0.6, 0.0]), np.array([0.9, 0.0, 0.1])]
    r = rank(q, corpus)
    assert [i for i, _ in r] == [1, 2, 0]
    assert [d for _, d in r] == pytest.approx([0.2, 1.0, 2.0])


def test_rank_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        rank(np.ones(3) / 3, [np.ones(4) / 4])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_rank_permutation_invariant(seed):
    r = np.random.default_rng(seed)
    corpus = [r.dirichlet(np.ones(5)) for _ in range(8)]
    q = r.dirichlet(np.ones(5))
    perm = r.permutation(8)
    a = rank(q, corpus)
    b = rank(q, [corpus[i] for i in perm])
    assert [perm[i] for i, _ in b] == [i for i, _ in a]


def test_map_values():
    assert mean_average_precision([[True, False], [True, False, False]]) == 1.0
    assert average_precision([False, True]) == 0.5
    assert average_precision([True, False, True]) == pytest.approx((1 + 2 / 3) / 2)
    with pytest.raises(NoRelevantError):
        average_precision([])
    with pytest.raises(NoRelevantError):
        mean_average_precision([])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=20).filter(any), st.integers(0, 10))
def test_map_invariant_to_trailing_irrelevant(rel, extra):
    assert average_precision(rel + [False] * extra) == average_precision(rel)


# ------------------------------------------------------------- manifests


def test_manifest_roundtrip(tmp_path):
    shapes.icosphere(1)
    from affdiff.mesh import save_off
    save_off(shapes.icosphere(1), str(tmp_path / "s.off"))
    m = retrieval.DatasetManifest([retrieval.ManifestEntry("a", "s.off", "sphere")], str(tmp_path))
    p = tmp_path / "manifest.json"
    m.save(p)
    back = retrieval.DatasetManifest.load(p)
    assert back.entries == m.entries


def test_manifest_errors(tmp_path):
    with pytest.raises(ValidationError):
        retrieval.DatasetManifest([retrieval.ManifestEntry("a", "x", "l")] * 2)
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"entries": [{"id": "a", "path": "missing.off", "label": "l"}]}))
    with pytest.raises(InputError):
        retrieval.DatasetManifest.load(p)
    p.write_text("{not json")
    with pytest.raises(InputError):
        retrieval.DatasetManifest.load(p)


def test_cumulative_map():
    E = retrieval.ManifestEntry
    q = [E("a", "p", "x", "affine", 1, role="query"), E("b", "p", "x", "affine", 2, role="query"),
         E("c", "p", "x", "bend", 1, role="query")]
    out = retrieval.cumulative_map(q, [1.0, 0.5, 0.25])
    assert out == {"affine": {"1": 1.0, "2": 0.75}, "bend": {"1": 0.25}}


def test_bundled_manifest_shape():
    from affdiff.cli import BUNDLED_MANIFEST
    m = retrieval.DatasetManifest.load(BUNDLED_MANIFEST)
    assert len({e.label for e in m.entries}) == 6
    assert len(m.corpus) == 6 and len(m.queries) == 48
    per_shape = {}
    for e in m.queries:
        per_shape.setdefault(e.label, []).append((e.transform, e.strength))
    for rows in per_shape.values():
        assert sorted(rows) == [("affine", s) for s in range(1, 6)] + [("bend", s) for s in range(1, 4)]


def test_materialized_affine_is_volume_preserving():
    from affdiff.cli import BUNDLED_MANIFEST
    m = retrieval.DatasetManifest.load(BUNDLED_MANIFEST)
    e = next(x for x in m.queries if x.transform == "affine" and x.strength == 5)
    T = random_equi_affine(e.seed, benchmark.affine_condition(5), exact=True)
    assert abs(T.det - 1) <= 1e-12 and T.condition == pytest.approx(5.0)


# ------------------------------------------------------------- pipeline


def _bags(meshes, mode, vocab_from=None):
    scales = benchmark.default_benchmark_scales()[mode]
    out = []
    for m in meshes:
        s = laplacian_spectrum(m, mode, k=100)
        out.append((diffusion.hks(s.spec, scales), s.area_weights))
    return out


@pytest.mark.parametrize("mode", ["euclidean", "equi-affine"])
def test_refinement_stability(mode):
    # subdivisions=4 is the 1-to-4 split of subdivisions=3, re-projected onto the same surface
    coarse = shapes.bumped_blob(seed=2, subdivisions=3)
    fine = shapes.bumped_blob(seed=2, subdivisions=4)
    (dc, ac), (df, af) = _bags([coarse, fine], mode)
    vocab = build_vocabulary([dc, df], 64, seed=0)
    d = np.abs(bag_of_features(dc, vocab, ac).histogram - bag_of_features(df, vocab, af).histogram).sum()
    assert d <= 0.05


def test_pipeline_invariance():
    base = shapes.bumped_blob(seed=4, subdivisions=4)
    moved = apply_affine(base, random_equi_affine(21, 5.0, exact=True))
    others = [shapes.bumped_blob(seed=s, subdivisions=3) for s in (10, 11)]
    dist = {}
    for mode in ("equi-affine", "euclidean"):
        feats = _bags([base, moved] + others, mode)
        vocab = build_vocabulary([f for f, _ in feats], 64, seed=0)
        b0, b1 = (bag_of_features(f, vocab, a).histogram for f, a in feats[:2])
        dist[mode] = np.abs(b0 - b1).sum()
    assert dist["equi-affine"] <= 0.1
    assert dist["euclidean"] >= 2 * dist["equi-affine"]


def test_rankings_csv(tmp_path):
    E = retrieval.ManifestEntry
    q = [E("q", "p", "x", role="query")]
    c = [E("a", "p", "x"), E("b", "p", "y")]
    p = tmp_path / "r.csv"
    retrieval.write_rankings_csv(p, q, c, [[(1, 0.25), (0, 0.5)]])
    assert p.read_text().splitlines() == ["query,rank,corpus_id,distance,relevant",
                                          "q,1,b,0.25,0", "q,2,a,0.5,1"]
