import itertools

import numpy as np
import pytest

from affdiff import correspondence as cr
from affdiff import shapes
from affdiff.errors import InvalidCorrespondenceError, SizeCapError, ValidationError
from affdiff.mesh import apply_affine, shear
from affdiff.pipeline import laplacian_spectrum


def space(D):
    D = np.asarray(D, dtype=float)
    return cr.SampledMetricSpace(np.arange(len(D)), D)


def random_space(rng, n):
    P = rng.standard_normal((n, 2))
    return space(np.linalg.norm(P[:, None] - P[None], axis=-1))


def exhaustive_gh(X, Y):
    """Oracle: every subset of X x Y that covers both sides."""
    pairs = list(itertools.product(range(len(X)), range(len(Y))))
    best = np.inf
    for mask in range(1, 1 << len(pairs)):
        C = [p for i, p in enumerate(pairs) if mask >> i & 1]
        if {a for a, _ in C} != set(range(len(X))) or {b for _, b in C} != set(range(len(Y))):
            continue
        best = min(best, cr.distortion(C, X, Y))
    return best / 2


def test_distortion_identity_zero():
    X = space([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]])
    assert cr.distortion([(i, i) for i in range(3)], X, X) == 0.0


def test_distortion_one_point():
    X = space([[0.0]])
    assert cr.distortion([(0, 0)], X, X) == 0.0


def test_distortion_two_points():
    X, Y = space([[0, 1], [1, 0]]), space([[0, 2], [2, 0]])
    assert cr.distortion([(0, 0), (1, 1)], X, Y) == 1.0


def test_invalid_correspondence():
    X = space([[0, 1], [1, 0]])
    with pytest.raises(InvalidCorrespondenceError):
        cr.distortion([(0, 0)], X, X)
    with pytest.raises(InvalidCorrespondenceError):
        cr.distortion([(0, 0), (1, 5)], X, X)
    with pytest.raises(InvalidCorrespondenceError):
        cr.distortion([], X, X)


def test_gh_two_points():
    X, Y = space([[0, 1], [1, 0]]), space([[0, 2], [2, 0]])
    d, pairs = cr.gromov_hausdorff_bruteforce(X, Y)
    assert d == 0.5
    assert cr.distortion(pairs, X, Y) == 1.0


def test_gh_three_points_by_hand():
    # equilateral triangle vs a path 1-1-2: the diameters already force 1/2
    X = space([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    Y = space([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    assert cr.gromov_hausdorff_bruteforce(X, Y)[0] == 0.5
    # any space against one point: half its diameter
    Z = space([[0, 1, 3], [1, 0, 2], [3, 2, 0]])
    assert cr.gromov_hausdorff_bruteforce(Z, space([[0.0]]))[0] == 1.5


def test_gh_identity_among_minimizers(rng):
    X = random_space(rng, 5)
    d, pairs = cr.gromov_hausdorff_bruteforce(X, X)
    assert d == 0.0
    assert cr.distortion([(i, i) for i in range(5)], X, X) == 0.0


@pytest.mark.parametrize("nx,ny", [(1, 3), (2, 2), (2, 3), (3, 3)])
def test_gh_matches_exhaustive_oracle(rng, nx, ny):
    for _ in range(5):
        X, Y = random_space(rng, nx), random_space(rng, ny)
        assert cr.gromov_hausdorff_bruteforce(X, Y)[0] == pytest.approx(exhaustive_gh(X, Y), abs=1e-12)


def test_gh_properties_random_instances(rng):
    for _ in range(200):
        nx, ny = rng.integers(1, 6, size=2)
        X, Y = random_space(rng, nx), random_space(rng, ny)
        dxy, pxy = cr.gromov_hausdorff_bruteforce(X, Y)
        dyx, _ = cr.gromov_hausdorff_bruteforce(Y, X)
        assert dxy == pytest.approx(dyx, abs=1e-12)
        assert cr.gromov_hausdorff_bruteforce(X, X)[0] == 0.0
        assert dxy == pytest.approx(cr.distortion(pxy, X, Y) / 2, abs=0)


def test_gh_eps_isometric(rng):
    X = random_space(rng, 4)
    eps = 0.05
    E = rng.uniform(-eps, eps, (4, 4))
    E = np.triu(E, 1)
    Y = space(X.D + E + E.T)
    d, _ = cr.gromov_hausdorff_bruteforce(X, Y)
    assert d <= 2 * eps
    assert d <= eps / 2 + 1e-15


def test_gh_beats_random_correspondences(rng):
    X, Y = random_space(rng, 5), random_space(rng, 5)
    d, pairs = cr.gromov_hausdorff_bruteforce(X, Y)
    best = cr.distortion(pairs, X, Y)
    for _ in range(100):
        f = rng.integers(0, 5, 5)
        C = [(i, int(f[i])) for i in range(5)]
        C += [(int(rng.integers(5)), j) for j in range(5) if j not in f]
        C += [tuple(map(int, rng.integers(0, 5, 2))) for _ in range(rng.integers(0, 4))]
        assert best <= cr.distortion(C, X, Y)


def test_gh_size_cap(rng):
    with pytest.raises(SizeCapError):
        cr.gromov_hausdorff_bruteforce(random_space(rng, 8), random_space(rng, 3))
    with pytest.raises(SizeCapError):
        cr.gromov_hausdorff_bruteforce(random_space(rng, 5), random_space(rng, 5), max_size=4)


def test_gh_size_seven_runs(rng):
    d, _ = cr.gromov_hausdorff_bruteforce(random_space(rng, 7), random_space(rng, 7))
    assert d >= 0


def test_space_validation():
    with pytest.raises(ValidationError):
        space([[0, 1], [2, 0]]).check()
    with pytest.raises(ValidationError):
        space([[0, 1, 5], [1, 0, 1], [5, 1, 0]]).check()
    with pytest.raises(ValidationError):
        cr.SampledMetricSpace([0, 1], np.zeros((3, 3)))


# ------------------------------------------------------------- mesh pipeline


@pytest.fixture(scope="module")
def blob_pair():
    mesh = shapes.bumped_blob(seed=3, subdivisions=4)
    return mesh, apply_affine(mesh, shear(1.0, (0, 1)))


def test_fps_properties(blob_spectrum):
    spec = blob_spectrum.spec
    n = spec.vertex_count
    ids, radii = cr.farthest_point_sample(spec, 1, seed=9)
    assert ids.tolist() == [int(np.random.default_rng(9).integers(n))]
    ids, radii = cr.farthest_point_sample(spec, n, seed=9)
    assert sorted(ids.tolist()) == list(range(n))
    assert np.all(np.diff(radii[1:]) <= 1e-12)
    a, _ = cr.farthest_point_sample(spec, 30, seed=2)
    b, _ = cr.farthest_point_sample(spec, 30, seed=2)
    assert np.array_equal(a, b)
    with pytest.raises(ValidationError):
        cr.farthest_point_sample(spec, n + 1)


def test_commute_space_is_metric(blob_spectrum):
    ids, _ = cr.farthest_point_sample(blob_spectrum.spec, 20)
    cr.SampledMetricSpace.from_spectrum(blob_spectrum.spec, ids).check()
    cr.SampledMetricSpace.from_spectrum(blob_spectrum.spec, ids, "diffusion", t=0.1).check()


def test_identity_stress_zero(blob_spectrum):
    ids, _ = cr.farthest_point_sample(blob_spectrum.spec, 10)
    X = cr.SampledMetricSpace.from_spectrum(blob_spectrum.spec, ids)
    rep = cr.evaluate_matching(X, X, [(i, i) for i in range(10)])
    assert rep["distortion"] == 0.0 and not any(rep["stress"])
    assert len(rep["stress"]) == 45


def test_ground_truth_matching(blob_pair):
    mesh, moved = blob_pair
    out = {}
    for mode in ("equi-affine", "euclidean"):
        sx = laplacian_spectrum(mesh, mode, k=100).spec
        sy = laplacian_spectrum(moved, mode, k=100).spec
        ids, _ = cr.farthest_point_sample(sx, 50, seed=0)
        X = cr.SampledMetricSpace.from_spectrum(sx, ids)
        Y = cr.SampledMetricSpace.from_spectrum(sy, ids)
        rep = cr.evaluate_matching(X, Y, [(i, i) for i in range(50)])
        out[mode] = rep["distortion"], float(np.median(X.D[np.triu_indices(50, 1)]))
    dis, med = out["equi-affine"]
    assert dis <= 0.2 * med
    assert out["euclidean"][0] > dis
