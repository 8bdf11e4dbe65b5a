"""Triangle mesh container, ASCII OFF/OBJ/PLY I/O and affine maps of the embedding."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFaceError,
    InputError,
    NonManifoldError,
    OrientationError,
    ParseError,
    SingularTransformError,
    ValidationError,
)

DEGENERATE_AREA_RATIO = 1e-12


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class TriangleMesh:
    """Indexed triangle mesh with edge/face adjacency.

    The mesh is immutable: ``vertices`` and ``faces`` are read-only arrays.
    Faces are vertex-index triples; local edge ``k`` of a face joins its
    vertices ``k`` and ``(k + 1) % 3``.

    Attributes
    ----------
    vertices : (n, 3) float array
    faces : (m, 3) int array
    edges : (e, 2) int array, each row sorted ascending
    edge_faces : (e, 2) int array of incident faces, ``-1`` for a missing side
    face_edges : (m, 3) int array, edge index of each local edge
    face_neighbors : (m, 3) int array, face across each local edge or ``-1``
    """

    def __init__(self, vertices, faces, validate=True):
        v = np.asarray(vertices, dtype=float)
        t = np.asarray(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError("vertices must be an (n, 3) array")
        if t.ndim != 2 or t.shape[1] != 3:
            if t.size == 0:
                t = t.reshape(0, 3)
            else:
                raise ValidationError("faces must be an (m, 3) array")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValidationError("face index out of range")
        self.vertices = _readonly(v)
        self.faces = _readonly(t)
        self._build_adjacency()
        if validate:
            self._validate()

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]

    def _build_adjacency(self):
        t = self.faces
        m = len(t)
        n = max(len(self.vertices), 1)
        tail = t.reshape(-1)
        head = t[:, [1, 2, 0]].reshape(-1)
        lo = np.minimum(tail, head)
        hi = np.maximum(tail, head)
        keys = lo * n + hi
        uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        self._edge_counts = counts
        self._directed = (tail, head)
        self.edges = _readonly(np.column_stack([uniq // n, uniq % n]).astype(np.int64))
        self.face_edges = _readonly(inverse.reshape(m, 3))

        face_of_half = np.repeat(np.arange(m), 3)
        order = np.argsort(inverse, kind="stable")
        edge_faces = -np.ones((len(uniq), 2), dtype=np.int64)
        sorted_edges = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        # at most the first two incidences are stored; extras are caught by _validate
        run_start = np.maximum.accumulate(np.where(first, np.arange(len(order)), 0))
        slot = np.arange(len(order)) - run_start
        keep = slot < 2
        edge_faces[sorted_edges[keep], slot[keep]] = face_of_half[order][keep]
        self.edge_faces = _readonly(edge_faces)

        ef = edge_faces[inverse]  # (3m, 2)
        other = np.where(ef[:, 0] == face_of_half, ef[:, 1], ef[:, 0])
        self.face_neighbors = _readonly(other.reshape(m, 3))

    def _validate(self):
        t = self.faces
        if len(t) == 0:
            return
        rep = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        if rep.any():
            raise DegenerateFaceError(f"face {int(np.flatnonzero(rep)[0])} repeats a vertex")
        areas = self.face_areas()
        mean = areas.mean()
        bad = areas <= DEGENERATE_AREA_RATIO * mean
        if mean <= 0 or bad.any():
            idx = int(np.flatnonzero(bad)[0]) if bad.any() else 0
            raise DegenerateFaceError(f"face {idx} has (near) zero area")
        if (self._edge_counts > 2).any():
            e = self.edges[np.flatnonzero(self._edge_counts > 2)[0]]
            raise NonManifoldError(f"edge ({e[0]}, {e[1]}) is shared by more than two faces")
        tail, head = self._directed
        n = len(self.vertices)
        directed = tail * n + head
        if len(np.unique(directed)) != len(directed):
            raise OrientationError("inconsistent face orientation: a directed edge appears twice")

    def face_areas(self):
        v = self.vertices
        t = self.faces
        cr = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        return 0.5 * np.linalg.norm(cr, axis=1)

    def area(self):
        return float(self.face_areas().sum())

    def face_normals(self):
        v = self.vertices
        t = self.faces
        cr = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
        return cr / np.linalg.norm(cr, axis=1, keepdims=True)

    def mean_edge_length(self):
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).mean())

    def is_closed(self):
        return bool((self.edge_faces[:, 1] >= 0).all())

    def boundary_edges(self):
        return self.edges[self.edge_faces[:, 1] < 0]

    def vertex_adjacency(self):
        """Sparse symmetric 0/1 vertex adjacency (CSR)."""
        from scipy import sparse

        n = self.n_vertices
        e = self.edges
        i = np.concatenate([e[:, 0], e[:, 1]])
        j = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix((np.ones(len(i)), (i, j)), shape=(n, n))

    def with_vertices(self, vertices):
        """Same connectivity, new positions (adjacency is reused, not rebuilt)."""
        new = object.__new__(TriangleMesh)
        new.__dict__.update(self.__dict__)
        v = np.asarray(vertices, dtype=float)
        if v.shape != self.vertices.shape:
            raise ValidationError("vertex array shape mismatch")
        new.vertices = _readonly(v)
        return new

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"


def face_one_ring(mesh, face):
    """Faces sharing an edge with ``face``, one slot per local edge.

    Slot ``k`` is the neighbor across edge ``(k, k+1)``; ``None`` marks a
    boundary edge.
    """
    nb = mesh.face_neighbors[int(face)]
    return [int(f) if f >= 0 else None for f in nb]


# ---------------------------------------------------------------- transforms


@dataclass(frozen=True, eq=False)
class AffineTransform:
    """x -> A x + b with A invertible."""

    A: np.ndarray
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        A = np.array(self.A, dtype=float).reshape(3, 3)
        b = np.array(self.b, dtype=float).reshape(3)
        if not np.all(np.isfinite(A)) or abs(np.linalg.det(A)) <= 1e-12:
            raise SingularTransformError("transform matrix is singular")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def det(self):
        return float(np.linalg.det(self.A))

    @property
    def is_equi_affine(self):
        return abs(self.det - 1.0) <= 1e-12

    @property
    def condition(self):
        return float(np.linalg.cond(self.A))

    def inverse(self):
        Ai = np.linalg.inv(self.A)
        return AffineTransform(Ai, -Ai @ self.b)

    def __call__(self, points):
        return np.asarray(points, dtype=float) @ self.A.T + self.b


def apply_affine(mesh, T):
    """Map every vertex through ``T``; connectivity is unchanged."""
    if not isinstance(T, AffineTransform):
        T = AffineTransform(*T) if isinstance(T, tuple) else AffineTransform(T)
    return mesh.with_vertices(T(mesh.vertices))


def random_equi_affine(seed, max_condition, exact=False):
    """Deterministic random orientation-preserving transform with det A = 1.

    Singular values of a Gaussian matrix are log-centred (product one) and
    their spread clamped so that cond(A) <= max_condition. With ``exact``
    the spread is stretched so cond(A) equals ``max_condition``.
    """
    if max_condition < 1:
        raise ValidationError("max_condition must be >= 1")
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((3, 3))
    U, s, Vt = np.linalg.svd(M)
    if np.linalg.det(U) < 0:
        U[:, -1] *= -1
    if np.linalg.det(Vt) < 0:
        Vt[-1, :] *= -1
    logs = np.log(s)
    logs -= logs.mean()
    spread = logs.max() - logs.min()
    budget = np.log(max_condition)
    if spread > budget or (exact and spread > 0):
        logs *= budget / spread
        logs -= logs.mean()
    A = U @ np.diag(np.exp(logs)) @ Vt
    A /= np.cbrt(np.linalg.det(A))
    return AffineTransform(A, np.zeros(3))


def shear(amount, axes=(0, 1)):
    """Unit-determinant shear adding ``amount`` * x[axes[1]] to x[axes[0]]."""
    A = np.eye(3)
    A[axes[0], axes[1]] = amount
    return AffineTransform(A)


# ---------------------------------------------------------------------- I/O


def _tokens(lines):
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _read_text(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        return data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: binary files are not supported (ASCII only)") from exc


def _parse_off(text, path):
    lines = list(_tokens(text.splitlines()))
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = lines[0].split()
    if head[0] != "OFF":
        if head[0].endswith("OFF"):
            raise ParseError(f"{path}: unsupported OFF variant {head[0]!r}")
        raise ParseError(f"{path}: missing OFF header")
    rest = head[1:]
    if rest and rest[0].upper() == "BINARY":
        raise ParseError(f"{path}: binary OFF is not supported")
    body = lines[1:]
    if not rest:
        if not body:
            raise ParseError(f"{path}: missing counts line")
        rest = body[0].split()
        body = body[1:]
    try:
        nv, nf = int(rest[0]), int(rest[1])
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: malformed counts line") from exc
    if nv < 0 or nf < 0 or len(body) < nv + nf:
        raise ParseError(f"{path}: file truncated (expected {nv} vertices and {nf} faces)")
    try:
        verts = np.array([[float(x) for x in body[i].split()[:3]] for i in range(nv)])
    except ValueError as exc:
        raise ParseError(f"{path}: malformed vertex line") from exc
    if nv and verts.shape != (nv, 3):
        raise ParseError(f"{path}: vertex lines need 3 coordinates")
    faces = []
    for line in body[nv:nv + nf]:
        parts = line.split()
        try:
            k = int(parts[0])
            idx = [int(x) for x in parts[1:1 + k]]
        except (IndexError, ValueError) as exc:
            raise ParseError(f"{path}: malformed face line {line!r}") from exc
        if k != 3:
            raise ParseError(f"{path}: non-triangular face with {k} vertices")
        if len(idx) != 3:
            raise ParseError(f"{path}: face line {line!r} is truncated")
        faces.append(idx)
    return verts.reshape(nv, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _parse_obj(text, path):
    verts, faces = [], []
    for line in _tokens(text.splitlines()):
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise ParseError(f"{path}: malformed vertex record {line!r}") from exc
            if len(verts[-1]) != 3:
                raise ParseError(f"{path}: vertex record needs 3 coordinates")
        elif tag == "f":
            poly = []
            for p in parts[1:]:
                try:
                    i = int(p.split("/")[0])
                except ValueError as exc:
                    raise ParseError(f"{path}: malformed face record {line!r}") from exc
                if i == 0:
                    raise ParseError(f"{path}: OBJ indices are 1-based")
                poly.append(i - 1 if i > 0 else len(verts) + i)
            if len(poly) < 3:
                raise ParseError(f"{path}: face with fewer than 3 vertices")
            for j in range(1, len(poly) - 1):
                faces.append([poly[0], poly[j], poly[j + 1]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, format=None):
    """Read an ASCII OFF or Wavefront OBJ triangle mesh and validate it."""
    path = os.fspath(path)
    if format is None:
        format = os.path.splitext(path)[1].lstrip(".").lower()
    if not os.path.exists(path):
        raise InputError(f"no such file: {path}")
    text = _read_text(path)
    if format == "off":
        v, f = _parse_off(text, path)
    elif format == "obj":
        v, f = _parse_obj(text, path)
    else:
        raise InputError(f"unsupported mesh format {format!r}")
    if f.size and (f.min() < 0 or f.max() >= len(v)):
        raise ParseError(f"{path}: face references a vertex index out of range")
    if not np.all(np.isfinite(v)):
        raise ParseError(f"{path}: non-finite vertex coordinate")
    return TriangleMesh(v, f)


def save_off(mesh, path):
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}"]
    lines += ["%r %r %r" % tuple(float(c) for c in p) for p in mesh.vertices]
    lines += ["3 %d %d %d" % tuple(f) for f in mesh.faces]
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path, text):
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def scalar_colors(field):
    """Blue-to-red linear colormap over [min, max]; constant fields are mid-gray."""
    f = np.asarray(field, dtype=float)
    lo, hi = f.min(), f.max()
    if not hi > lo:
        return np.full((len(f), 3), 128, dtype=np.int64)
    s = (f - lo) / (hi - lo)
    red = np.rint(255 * s).astype(np.int64)
    blue = np.rint(255 * (1 - s)).astype(np.int64)
    return np.column_stack([red, np.zeros_like(red), blue])


def export_scalar_ply(mesh, field, path):
    """Write an ASCII PLY with per-vertex colors encoding ``field``."""
    field = np.asarray(field, dtype=float).ravel()
    if len(field) != mesh.n_vertices:
        raise ValidationError("field length must equal the vertex count")
    rgb = scalar_colors(field)
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property double x",
        "property double y",
        "property double z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    body = ["%r %r %r %d %d %d" % (*map(float, p), *c) for p, c in zip(mesh.vertices, rgb)]
    body += ["3 %d %d %d" % tuple(f) for f in mesh.faces]
    _write_text(path, "\n".join(header + body) + "\n")


def read_ply(path):
    """Parse an ASCII PLY written by :func:`export_scalar_ply`.

    Returns ``(vertices, faces, colors)``.
    """
    lines = _read_text(os.fspath(path)).splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(f"{path}: missing ply magic")
    counts = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "end_header":
        parts = lines[i].split()
        if parts[:1] == ["format"] and parts[1] != "ascii":
            raise ParseError(f"{path}: only ASCII PLY is supported")
        if parts[:1] == ["element"]:
            counts[parts[1]] = int(parts[2])
        i += 1
    if i == len(lines):
        raise ParseError(f"{path}: missing end_header")
    body = lines[i + 1:]
    nv, nf = counts.get("vertex", 0), counts.get("face", 0)
    if len(body) < nv + nf:
        raise ParseError(f"{path}: file truncated")
    vrows = np.array([[float(x) for x in body[k].split()] for k in range(nv)]).reshape(nv, -1)
    frows = [[int(x) for x in body[nv + k].split()] for k in range(nf)]
    faces = np.array([r[1:1 + r[0]] for r in frows], dtype=np.int64).reshape(nf, -1)
    return vrows[:, :3], faces, vrows[:, 3:6].astype(np.int64)
