import numpy as np
import pytest
from scipy import integrate

from affdiff import diffusion, shapes
from affdiff.eigen import SpectralDecomposition, dense_eigenpairs
from affdiff.errors import DisconnectedError, ValidationError
from affdiff.mesh import TriangleMesh
from affdiff.pipeline import laplacian_spectrum


def test_default_scales():
    s = diffusion.DEFAULT_SCALES
    assert len(s) == 6
    assert s[0] == 1024.0 and s[-1] == pytest.approx(4096.0, rel=1e-15)
    assert [round(x, 1) for x in s[1:4]] == [1351.2, 1782.9, 2352.5]
    assert round(s[4], 1) == 3104.2


def test_heat_kernel_long_time_limit(blob_spectrum):
    spec = blob_spectrum.spec
    area = blob_spectrum.system.area()
    t = 1e6 / spec.values[1]
    for x, y in [(0, 1), (5, 300), (17, 17)]:
        assert diffusion.heat_kernel(spec, x, y, t) == pytest.approx(1 / area, rel=1e-6)


def test_heat_kernel_symmetric(blob_spectrum):
    spec = blob_spectrum.spec
    for x, y in [(0, 9), (100, 3)]:
        for t in (0.01, 0.3, 5.0):
            assert diffusion.heat_kernel(spec, x, y, t) == diffusion.heat_kernel(spec, y, x, t)


def test_heat_kernel_toy():
    phi = np.array([[0.5, 0.7], [0.5, -0.1]])
    spec = SpectralDecomposition(np.array([0.0, 1.0]), phi)
    t = 0.4
    expected = 0.5 * 0.5 + np.exp(-0.4) * 0.7 * -0.1
    assert diffusion.heat_kernel(spec, 0, 1, t) == pytest.approx(expected, rel=1e-15)
    row = diffusion.heat_kernel_row(spec, 0, t)
    assert row[1] == pytest.approx(expected, rel=1e-15)


def test_heat_kernel_rejects_nonpositive_time(blob_spectrum):
    with pytest.raises(ValidationError):
        diffusion.heat_kernel(blob_spectrum.spec, 0, 0, 0.0)


def test_hks_positive_and_monotone_tail(blob_spectrum):
    spec = blob_spectrum.spec
    lam1 = spec.values[1]
    ts = 10 / lam1 * 2.0 ** np.arange(6)
    h = diffusion.hks(spec, ts).values
    assert np.all(h > 0)
    assert np.all(np.diff(h, axis=1) <= 0)
    assert np.allclose(h[:, -1], 1 / blob_spectrum.system.area(), rtol=1e-3)


def test_hks_default_scales_positive(blob_spectrum):
    d = diffusion.hks(blob_spectrum.spec)
    assert d.dim == 6 and len(d) == blob_spectrum.spec.vertex_count
    assert np.all(d.values > 0)


def test_hks_scale_validation(blob_spectrum):
    with pytest.raises(ValidationError):
        diffusion.hks(blob_spectrum.spec, [2.0, 1.0])
    with pytest.raises(ValidationError):
        diffusion.hks(blob_spectrum.spec, [-1.0, 1.0])


def test_hks_icosphere_symmetry():
    mesh = shapes.icosphere(3)
    spec = laplacian_spectrum(mesh, "euclidean", k=36).spec  # complete groups up to l = 5
    h = diffusion.hks(spec, [0.05, 0.1, 0.2]).values
    # z -> -z maps the icosphere vertex set onto itself
    v = mesh.vertices
    w = v * np.array([1, 1, -1])
    perm = np.array([np.argmin(np.linalg.norm(v - p, axis=1)) for p in w])
    assert np.allclose(v[perm], w, atol=1e-12)
    assert np.allclose(h[perm], h, rtol=1e-6)


def test_diffusion_distance_basic(blob_spectrum):
    spec = blob_spectrum.spec
    assert diffusion.diffusion_distance(spec, 4, 4, 0.1) == 0.0
    assert diffusion.diffusion_distance(spec, 4, 9, 0.1) == diffusion.diffusion_distance(spec, 9, 4, 0.1)
    assert diffusion.diffusion_distance(spec, 4, 9, 0.1) > 0


def test_diffusion_literal_switch(blob_spectrum):
    spec = blob_spectrum.spec
    a = diffusion.diffusion_distance(spec, 1, 50, 0.2, literal=True)
    b = diffusion.diffusion_distance(spec, 1, 50, 0.1)
    assert a == pytest.approx(b, rel=1e-12)


def test_diffusion_distance_integral_form():
    mesh = shapes.bumped_blob(seed=8, subdivisions=2)
    assert mesh.n_vertices <= 200
    s = laplacian_spectrum(mesh, "euclidean", k=mesh.n_vertices)
    spec, B = s.spec, s.system.B
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, y = rng.choice(mesh.n_vertices, 2, replace=False)
        t = rng.uniform(0.01, 1.0)
        diff = diffusion.heat_kernel_row(spec, x, t) - diffusion.heat_kernel_row(spec, y, t)
        integral = diff @ (B @ diff)
        assert diffusion.diffusion_distance(spec, x, y, t) ** 2 == pytest.approx(integral, rel=1e-8)


def test_commute_time_quadrature_small(small_spectrum):
    _, s = small_spectrum
    spec = s.spec
    lam, phi = spec.values[1:], spec.vectors[:, 1:]
    for x, y in [(0, 50), (10, 90)]:
        d2 = lambda t: float(np.sum(np.exp(-2 * lam * t) * (phi[x] - phi[y]) ** 2))
        val, _ = integrate.quad(d2, 0, np.inf, epsabs=0, epsrel=1e-10, limit=500)
        assert 2 * val == pytest.approx(diffusion.commute_time(spec, x, y) ** 2, rel=1e-4)


def test_commute_time_basic(blob_spectrum):
    spec = blob_spectrum.spec
    assert diffusion.commute_time(spec, 3, 3) == 0.0
    assert diffusion.commute_time(spec, 3, 70) == diffusion.commute_time(spec, 70, 3)


def test_commute_time_triangle_inequality(blob_spectrum, rng):
    spec = blob_spectrum.spec
    E = diffusion.commute_time_embedding(spec)
    n = spec.vertex_count
    for x, y, z in rng.integers(0, n, size=(1000, 3)):
        dxz = np.linalg.norm(E[x] - E[z])
        assert dxz <= np.linalg.norm(E[x] - E[y]) + np.linalg.norm(E[y] - E[z]) + 1e-12
    assert np.linalg.norm(E[3] - E[70]) == pytest.approx(diffusion.commute_time(spec, 3, 70), rel=1e-12)


def test_truncation_monotone(blob_spectrum):
    spec = blob_spectrum.spec
    prev_ct = prev_dd = 0.0
    for k in range(2, spec.k + 1, 5):
        s = spec.truncate(k)
        ct = diffusion.commute_time(s, 0, 200) ** 2
        dd = diffusion.diffusion_distance(s, 0, 200, 0.05) ** 2
        assert ct >= prev_ct and dd >= prev_dd
        prev_ct, prev_dd = ct, dd


def test_matrices(blob_spectrum):
    spec = blob_spectrum.spec
    ids = [0, 7, 99]
    D = diffusion.commute_time_matrix(spec, ids)
    assert D[0, 2] == pytest.approx(diffusion.commute_time(spec, 0, 99), rel=1e-12)
    Dd = diffusion.diffusion_distance_matrix(spec, ids, 0.2)
    assert Dd[1, 2] == pytest.approx(diffusion.diffusion_distance(spec, 7, 99, 0.2), rel=1e-12)


def test_determinism_chain(blob):
    a = laplacian_spectrum(blob, "equi-affine", k=20).spec
    b = laplacian_spectrum(blob, "equi-affine", k=20).spec
    assert np.array_equal(diffusion.hks(a).values, diffusion.hks(b).values)
    assert diffusion.commute_time(a, 1, 2) == diffusion.commute_time(b, 1, 2)


def test_disconnected():
    s1 = shapes.icosphere(1)
    v = np.vstack([s1.vertices, s1.vertices + [5, 0, 0]])
    f = np.vstack([s1.faces, s1.faces + s1.n_vertices])
    spec = laplacian_spectrum(TriangleMesh(v, f), "euclidean", k=5).spec
    with pytest.raises(DisconnectedError):
        diffusion.commute_time(spec, 0, 50)
