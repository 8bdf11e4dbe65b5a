"""Synthetic test shapes: spheres, bumped convex blobs, a mirror-symmetric
two-lobe shape, flat grids, and a near-isometric bend deformation."""

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriangleMesh

PHI = (1 + 5 ** 0.5) / 2


def tetrahedron():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    f = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    return TriangleMesh(v, f)


def single_triangle():
    return TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def icosahedron():
    v = np.array([
        [-1, PHI, 0], [1, PHI, 0], [-1, -PHI, 0], [1, -PHI, 0],
        [0, -1, PHI], [0, 1, PHI], [0, -1, -PHI], [0, 1, -PHI],
        [PHI, 0, -1], [PHI, 0, 1], [-PHI, 0, -1], [-PHI, 0, 1],
    ], dtype=float)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return v, f


def _midpoint_split(v, f):
    """One 1-to-4 split. Returns new (v, f) with midpoints appended."""
    n = len(v)
    e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(e[:, 0] * n + e[:, 1], return_inverse=True)
    a, b = uniq // n, uniq % n
    mid = 0.5 * (v[a] + v[b])
    m = len(f)
    ab, bc, ca = (inv[:m] + n, inv[m:2 * m] + n, inv[2 * m:] + n)
    f0, f1, f2 = f[:, 0], f[:, 1], f[:, 2]
    nf = np.concatenate([
        np.column_stack([f0, ab, ca]),
        np.column_stack([ab, f1, bc]),
        np.column_stack([ca, bc, f2]),
        np.column_stack([ab, bc, ca]),
    ])
    return np.vstack([v, mid]), nf


def icosphere(subdivisions=3, radius=1.0):
    """Recursively 4-split icosahedron projected to the sphere.

    Vertex count is ``10 * 4**subdivisions + 2``.
    """
    v, f = icosahedron()
    for _ in range(subdivisions):
        v, f = _midpoint_split(v, f)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    return TriangleMesh(radius * v, f)


def geodesic_sphere(frequency, radius=1.0):
    """Class-I geodesic sphere: every icosahedron edge split into ``frequency``
    segments, vertex count ``10 * frequency**2 + 2``."""
    base, bf = icosahedron()
    k = int(frequency)
    index = {}
    pts = []

    def vid(key, p):
        if key not in index:
            index[key] = len(pts)
            pts.append(p)
        return index[key]

    def point_id(face, i, j):
        a, b, c = bf[face]
        bary = {a: k - i - j, b: i, c: j}
        nz = tuple(sorted((vtx, w) for vtx, w in bary.items() if w))
        p = sum(w * base[vtx] for vtx, w in bary.items()) / k
        if len(nz) == 3:
            return vid(("f", face, i, j), p)
        return vid(nz, p)

    faces = []
    for fi in range(len(bf)):
        grid = {}
        for i in range(k + 1):
            for j in range(k + 1 - i):
                grid[i, j] = point_id(fi, i, j)
        for i in range(k):
            for j in range(k - i):
                faces.append([grid[i, j], grid[i + 1, j], grid[i, j + 1]])
                if i + j < k - 1:
                    faces.append([grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1]])
    v = np.array(pts)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return TriangleMesh(radius * v, np.array(faces))


def sphere_points(mesh):
    d = np.asarray(mesh.vertices, dtype=float)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def radial_surface(sphere, radius_fn):
    """Star-shaped surface ``d -> radius_fn(d) * d`` over a unit-sphere mesh."""
    d = sphere_points(sphere)
    r = np.asarray(radius_fn(d), dtype=float)
    return sphere.with_vertices(d * r[:, None])


def _random_polynomial(rng, degree):
    terms = [(a, b, c) for a in range(degree + 1) for b in range(degree + 1 - a)
             for c in range(degree + 1 - a - b) if 2 <= a + b + c]
    coef = rng.standard_normal(len(terms))
    coef /= np.linalg.norm(coef)

    def poly(d):
        out = np.zeros(len(d))
        for (a, b, c), w in zip(terms, coef):
            out += w * d[:, 0] ** a * d[:, 1] ** b * d[:, 2] ** c
        return out
    return poly


def bumped_blob(seed=0, frequency=None, subdivisions=3, amplitude=0.08,
                axes=(1.0, 0.85, 0.7), degree=3):
    """Strictly convex, asymmetric blob: a low-order random radial bump on the
    unit sphere, then scaled by ``axes``. Small amplitudes keep convexity."""
    rng = np.random.default_rng(seed)
    poly = _random_polynomial(rng, degree)
    sph = geodesic_sphere(frequency) if frequency else icosphere(subdivisions)
    blob = radial_surface(sph, lambda d: 1.0 + amplitude * poly(d))
    return blob.with_vertices(blob.vertices * np.asarray(axes, dtype=float))


def fused_spheres(subdivisions=4, offset=0.55, radius=1.0, sharpness=6.0,
                  tilt=(0.12, 0.08, 0.10), squash=0.8):
    """Two overlapping spheres at (+/-offset, 0, 0), smoothly fused.

    The radial profile depends on the x direction only through its square,
    so x -> -x is an exact symmetry. ``tilt`` adds terms in y, z and y*z that
    break every other symmetry; ``squash`` scales z.

    Returns ``(mesh, mirror)`` where ``mirror[i]`` is the vertex index of the
    reflection of vertex ``i``.
    """
    sph = icosphere(subdivisions)
    c2 = offset ** 2

    def rfun(d):
        dx2 = d[:, 0] ** 2
        root = np.sqrt(c2 * dx2 - c2 + radius ** 2)
        t1 = offset * np.sqrt(dx2) + root
        t2 = -offset * np.sqrt(dx2) + root
        r = (t1 ** sharpness + t2 ** sharpness) ** (1.0 / sharpness)
        a, b, c = tilt
        return r * (1.0 + a * d[:, 1] + b * d[:, 2] + c * d[:, 1] * d[:, 2])

    mesh = radial_surface(sph, rfun)
    mesh = mesh.with_vertices(mesh.vertices * np.array([1.0, 1.0, squash]))
    mirror = mirror_permutation(mesh, axis=0)
    return mesh, mirror


def mirror_permutation(mesh, axis=0, tol=1e-8):
    """Vertex permutation realising the reflection of ``axis``; raises if the
    vertex set is not symmetric."""
    v = np.array(mesh.vertices)
    w = v.copy()
    w[:, axis] *= -1
    dist, idx = cKDTree(v).query(w)
    scale = np.abs(v).max()
    if dist.max() > tol * scale or len(np.unique(idx)) != len(idx):
        raise ValueError("vertex set is not mirror symmetric")
    return idx


def flat_grid(nx=10, ny=10, size=1.0):
    """Square grid in the z=0 plane, two triangles per cell."""
    xs, ys = np.meshgrid(np.linspace(0, size, nx + 1), np.linspace(0, size, ny + 1), indexing="ij")
    v = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    f = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriangleMesh(v, f)


def subdivide(mesh, project=None):
    """1-to-4 midpoint subdivision; ``project`` optionally maps new positions."""
    v, f = _midpoint_split(np.array(mesh.vertices), np.array(mesh.faces))
    if project is not None:
        v = project(v)
    return TriangleMesh(v, f)


def bend(mesh, curvature, axis=0, normal=2):
    """Bend the shape about an axis perpendicular to ``axis`` and ``normal``.

    Points on the plane through the centroid orthogonal to ``normal`` keep
    their arclength along ``axis``; the deformation is an isometry of that
    plane and close to one for nearby points.
    """
    if curvature == 0:
        return mesh.with_vertices(mesh.vertices)
    v = np.array(mesh.vertices)
    c = v.mean(axis=0)
    p = v - c
    R = 1.0 / curvature
    x, z = p[:, axis], p[:, normal]
    theta = x / R
    out = p.copy()
    out[:, axis] = (R - z) * np.sin(theta)
    out[:, normal] = R - (R - z) * np.cos(theta)
    return mesh.with_vertices(out + c)
