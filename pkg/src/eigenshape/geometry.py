"""Shape containers, synthetic shape families, decimation, and shape file I/O.

Shapes come in three flavors: triangle meshes (validated, edge-manifold,
connected), closed 2D contours (cycle connectivity is implicit), and
unorganized 3D point clouds. Two parametric families generate datasets in
dense template correspondence, split into a *style* factor that changes the
intrinsic geometry and a *pose* factor built from near-isometric bends plus
rigid motion.
"""

import json
import math
import warnings

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class GeometryError(ValueError):
    """Invalid shape data, out-of-bounds parameters, or unreadable files."""


DEGENERATE_AREA = 1e-12


def _face_areas(vertices, faces):
    e1 = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    e2 = vertices[faces[:, 2]] - vertices[faces[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


def _edge_counts(faces):
    """Undirected edge -> number of incident faces, as a dict."""
    edges = {}
    for tri in faces:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (a, b) if a < b else (b, a)
            edges[key] = edges.get(key, 0) + 1
    return edges


class Mesh:
    """Triangle mesh: (n, 3) float vertices, (m, 3) int faces, counter-clockwise.

    Construction validates index bounds, face degeneracy (distinct indices and
    area above ``DEGENERATE_AREA``), edge-manifoldness (every undirected edge on
    at most two faces) and connectedness. Instances are treated as immutable.
    """

    def __init__(self, vertices, faces):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise GeometryError("vertices must be an (n, 3) array")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise GeometryError("faces must be an (m, 3) array")
        if not np.isfinite(self.vertices).all():
            raise GeometryError("vertices contain non-finite coordinates")
        self._validate()

    def _validate(self):
        n = len(self.vertices)
        if self.faces.size == 0:
            raise GeometryError("mesh has no faces")
        if self.faces.min() < 0 or self.faces.max() >= n:
            bad = int(np.argmax((self.faces < 0).any(axis=1) | (self.faces >= n).any(axis=1)))
            raise GeometryError(
                f"face {bad} references vertex index outside [0, {n})"
            )
        same = (
            (self.faces[:, 0] == self.faces[:, 1])
            | (self.faces[:, 1] == self.faces[:, 2])
            | (self.faces[:, 2] == self.faces[:, 0])
        )
        if same.any():
            raise GeometryError(f"face {int(np.argmax(same))} repeats a vertex index")
        areas = _face_areas(self.vertices, self.faces)
        if (areas <= DEGENERATE_AREA).any():
            bad = int(np.argmax(areas <= DEGENERATE_AREA))
            raise GeometryError(f"face {bad} is degenerate (area {areas[bad]:.3e})")
        for edge, count in _edge_counts(self.faces).items():
            if count > 2:
                raise GeometryError(f"edge {edge} lies on {count} faces (non-manifold)")
        if not self.is_connected():
            raise GeometryError("mesh is disconnected")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def edges(self):
        """Unique undirected edges as an (E, 2) array with min index first."""
        e = np.vstack([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def face_areas(self):
        return _face_areas(self.vertices, self.faces)

    def total_area(self):
        return float(self.face_areas().sum())

    def is_connected(self):
        i = self.faces[:, [0, 1, 2]].ravel()
        j = self.faces[:, [1, 2, 0]].ravel()
        n = len(self.vertices)
        adj = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
        n_comp, _ = connected_components(adj, directed=False)
        return n_comp == 1

    def diameter(self):
        """Euclidean bounding-box diagonal, a cheap shape-size proxy."""
        ext = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(ext))


class Contour:
    """Closed planar curve: (n, 2) points, point i joined to point (i+1) mod n."""

    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise GeometryError("contour points must be an (n, 2) array")
        if len(self.points) < 3:
            raise GeometryError("contour needs at least 3 points")
        if not np.isfinite(self.points).all():
            raise GeometryError("contour contains non-finite coordinates")
        nxt = np.roll(self.points, -1, axis=0)
        lengths = np.linalg.norm(nxt - self.points, axis=1)
        if (lengths == 0).any():
            raise GeometryError(
                f"consecutive contour points {int(np.argmax(lengths == 0))} and next coincide"
            )

    @property
    def n_points(self):
        return len(self.points)

    def edge_lengths(self):
        nxt = np.roll(self.points, -1, axis=0)
        return np.linalg.norm(nxt - self.points, axis=1)

    def total_length(self):
        return float(self.edge_lengths().sum())

    def diameter(self):
        ext = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.linalg.norm(ext))


class PointCloud:
    """Unorganized 3D point set: (p, 3) points, no connectivity or ordering."""

    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise GeometryError("point cloud must be a (p, 3) array")
        if len(self.points) < 4:
            raise GeometryError("point cloud needs at least 4 points")
        if not np.isfinite(self.points).all():
            raise GeometryError("point cloud contains non-finite coordinates")

    @property
    def n_points(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# Contour family
# ---------------------------------------------------------------------------

# Parameter boxes. Styles outside these raise; family draws stay inside.
CONTOUR_AXIS_RANGE = (0.5, 2.0)
CONTOUR_HARMONIC_MAX = 0.15      # per-harmonic radial amplitude
CONTOUR_HARMONIC_SUM = 0.45      # total radial amplitude budget
CONTOUR_BEND_MAX = 0.01          # bend curvature; keeps edge lengths within ~3%
CONTOUR_SHIFT_MAX = 1.0


def _check_contour_params(style, pose):
    style = np.asarray(style, dtype=np.float64)
    pose = np.asarray(pose, dtype=np.float64)
    if style.size < 2:
        raise GeometryError("contour style needs at least the two semi-axes")
    lo, hi = CONTOUR_AXIS_RANGE
    if not (lo <= style[0] <= hi and lo <= style[1] <= hi):
        raise GeometryError(f"semi-axes must lie in [{lo}, {hi}]")
    amps = np.abs(style[2:])
    if amps.size and (amps.max() > CONTOUR_HARMONIC_MAX + 1e-12
                      or amps.sum() > CONTOUR_HARMONIC_SUM + 1e-12):
        raise GeometryError(
            f"harmonic amplitudes exceed |a| <= {CONTOUR_HARMONIC_MAX}, "
            f"sum <= {CONTOUR_HARMONIC_SUM}"
        )
    pose = np.concatenate([pose, np.zeros(max(0, 4 - pose.size))])
    if abs(pose[1]) > CONTOUR_BEND_MAX + 1e-12:
        raise GeometryError(f"bend curvature must satisfy |b| <= {CONTOUR_BEND_MAX}")
    if np.abs(pose[2:4]).max(initial=0.0) > CONTOUR_SHIFT_MAX + 1e-12:
        raise GeometryError(f"translation must satisfy |t| <= {CONTOUR_SHIFT_MAX}")
    return style, pose


def _bend2d(points, curvature):
    """Map the x-axis onto an arc of the given curvature; identity at zero."""
    if abs(curvature) < 1e-12:
        return points
    x, y = points[:, 0], points[:, 1]
    r = 1.0 / curvature
    bx = (r - y) * np.sin(curvature * x)
    by = r - (r - y) * np.cos(curvature * x)
    return np.column_stack([bx, by])


def generate_contour(style, pose, n):
    """Closed curve sampled at n points.

    The base shape is an ellipse with semi-axes ``style[0], style[1]``,
    modulated radially by low-order cosine harmonics: entry ``style[j]`` for
    j >= 2 drives harmonic ``j + 1``. The pose vector ``[rotation, bend, tx,
    ty]`` applies a smooth near-isometric bend, then a rigid rotation and
    translation. Deterministic in all arguments.
    """
    if n < 3:
        raise GeometryError("contour needs n >= 3 sample points")
    style, pose = _check_contour_params(style, pose)
    theta = 2.0 * np.pi * np.arange(n) / n
    radial = np.ones(n)
    for j in range(2, style.size):
        radial += style[j] * np.cos((j + 1) * theta)
    pts = np.column_stack([style[0] * radial * np.cos(theta),
                           style[1] * radial * np.sin(theta)])
    pts = _bend2d(pts, pose[1])
    c, s = math.cos(pose[0]), math.sin(pose[0])
    pts = pts @ np.array([[c, s], [-s, c]])
    pts = pts + pose[2:4]
    return Contour(pts)


# ---------------------------------------------------------------------------
# Blob family (deformed icospheres)
# ---------------------------------------------------------------------------

BLOB_AXIS_RANGE = (0.7, 1.4)
BLOB_BUMP_MAX = 0.12             # per-bump radial amplitude
BLOB_TWIST_MAX = 0.06            # twist rate; keeps edge lengths within ~3%
BLOB_SHIFT_MAX = 1.0

_ICOSA_T = (1.0 + math.sqrt(5.0)) / 2.0
_ICOSA_VERTS = np.array([
    [-1, _ICOSA_T, 0], [1, _ICOSA_T, 0], [-1, -_ICOSA_T, 0], [1, -_ICOSA_T, 0],
    [0, -1, _ICOSA_T], [0, 1, _ICOSA_T], [0, -1, -_ICOSA_T], [0, 1, -_ICOSA_T],
    [_ICOSA_T, 0, -1], [_ICOSA_T, 0, 1], [-_ICOSA_T, 0, -1], [-_ICOSA_T, 0, 1],
], dtype=np.float64)
_ICOSA_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


def icosphere(subdiv):
    """Unit icosphere: (vertices, faces) at the given subdivision level.

    Vertex/face counts follow 10 * 4**s + 2 and 20 * 4**s.
    """
    if not 0 <= subdiv <= 4:
        raise GeometryError("subdivision level must be in [0, 4]")
    verts = list(_ICOSA_VERTS / np.linalg.norm(_ICOSA_VERTS[0]))
    faces = _ICOSA_FACES.copy()
    for _ in range(subdiv):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for i0, i1, i2 in faces:
            a, b, c = mid(i0, i1), mid(i1, i2), mid(i2, i0)
            new_faces += [[i0, a, c], [i1, b, a], [i2, c, b], [a, b, c]]
        faces = np.array(new_faces, dtype=np.int64)
    return np.array(verts), faces


def _blob_bumps(directions):
    """Five smooth degree-2 direction fields, each with range [-1, 1]."""
    x, y, z = directions[:, 0], directions[:, 1], directions[:, 2]
    return np.column_stack([2 * x * y, 2 * x * z, 2 * y * z,
                            x * x - y * y, (3 * z * z - 1) / 2])


def _check_blob_params(style, pose):
    style = np.asarray(style, dtype=np.float64)
    pose = np.asarray(pose, dtype=np.float64)
    if style.size < 3:
        raise GeometryError("blob style needs at least the three axis scales")
    if style.size > 8:
        raise GeometryError("blob style has at most 3 axis scales + 5 bump amplitudes")
    lo, hi = BLOB_AXIS_RANGE
    if (style[:3] < lo - 1e-12).any() or (style[:3] > hi + 1e-12).any():
        raise GeometryError(f"axis scales must lie in [{lo}, {hi}]")
    if style.size > 3 and np.abs(style[3:]).max() > BLOB_BUMP_MAX + 1e-12:
        raise GeometryError(f"bump amplitudes must satisfy |b| <= {BLOB_BUMP_MAX}")
    pose = np.concatenate([pose, np.zeros(max(0, 7 - pose.size))])
    if abs(pose[0]) > BLOB_TWIST_MAX + 1e-12:
        raise GeometryError(f"twist rate must satisfy |t| <= {BLOB_TWIST_MAX}")
    if np.abs(pose[4:7]).max() > BLOB_SHIFT_MAX + 1e-12:
        raise GeometryError(f"translation must satisfy |t| <= {BLOB_SHIFT_MAX}")
    return style, pose


def _rotation_matrix(rx, ry, rz):
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mz @ my @ mx


def generate_blob(style, pose, subdiv):
    """Deformed icosphere mesh with shared connectivity per subdivision level.

    Style applies radial bumps (five fixed smooth direction fields weighted by
    ``style[3:]``) followed by per-axis scaling ``style[:3]``. Pose applies a
    twist about the z axis (rate ``pose[0]``), a rigid rotation
    (``pose[1:4]``, xyz angles) and a translation (``pose[4:7]``).
    """
    style, pose = _check_blob_params(style, pose)
    verts, faces = icosphere(subdiv)
    radial = np.ones(len(verts))
    if style.size > 3:
        radial += _blob_bumps(verts) @ style[3:]
    pts = verts * radial[:, None] * style[:3]
    # twist: rotate each point about z by an angle proportional to its height
    ang = pose[0] * pts[:, 2]
    ca, sa = np.cos(ang), np.sin(ang)
    pts = np.column_stack([ca * pts[:, 0] - sa * pts[:, 1],
                           sa * pts[:, 0] + ca * pts[:, 1], pts[:, 2]])
    pts = pts @ _rotation_matrix(*pose[1:4]).T + pose[4:7]
    try:
        return Mesh(pts, faces)
    except GeometryError:
        # deformation collapsed a face; nudge deterministically and retry
        rng = np.random.default_rng(0)
        pts = pts + 1e-9 * rng.standard_normal(pts.shape)
        return Mesh(pts, faces)


def unit_square_grid(divisions):
    """Flat triangulated unit square [0, 1]^2 in the z = 0 plane.

    Handy for checking the eigenvalue pipeline against a domain with boundary.
    """
    if divisions < 1:
        raise GeometryError("grid needs at least one division")
    m = divisions + 1
    xs, ys = np.meshgrid(np.linspace(0, 1, m), np.linspace(0, 1, m), indexing="ij")
    verts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(m * m)])
    faces = []
    for i in range(divisions):
        for j in range(divisions):
            a = i * m + j
            b = a + m
            faces.append([a, b, a + 1])
            faces.append([a + 1, b, b + 1])
    return Mesh(verts, np.array(faces, dtype=np.int64))


# ---------------------------------------------------------------------------
# Shape families and dataset manifests
# ---------------------------------------------------------------------------

class ShapeFamily:
    """Parametric synthetic family with a style/pose factorization.

    ``kind`` is ``"contour2d"`` (resolution = point count) or ``"blob3d"``
    (resolution = icosphere subdivision level). All samples of a family share
    the template connectivity, so point i corresponds across samples. Draws
    are pure functions of the seed; rebuilding a sample from its parameter
    vectors is bit-identical.
    """

    def __init__(self, kind, resolution, seed, n_harmonics=10):
        if kind not in ("contour2d", "blob3d"):
            raise GeometryError(f"unknown family kind {kind!r}")
        self.kind = kind
        self.resolution = int(resolution)
        self.seed = int(seed)
        self.n_harmonics = int(n_harmonics)

    @property
    def template_size(self):
        if self.kind == "contour2d":
            return self.resolution
        return 10 * 4 ** self.resolution + 2

    def draw_params(self, count):
        """(styles, poses) for ``count`` samples, drawn from the family boxes.

        Pose rotations and shifts are kept small so that embeddings stay
        roughly canonical: the articulation signal lives in the bend/twist.
        """
        rng = np.random.default_rng(self.seed)
        if self.kind == "contour2d":
            axes = rng.uniform(0.7, 1.5, size=(count, 2))
            a_max = min(CONTOUR_HARMONIC_MAX, 0.9 * CONTOUR_HARMONIC_SUM / self.n_harmonics)
            amps = rng.uniform(-a_max, a_max, size=(count, self.n_harmonics))
            styles = np.column_stack([axes, amps])
            poses = np.column_stack([
                rng.uniform(-0.02, 0.02, count),                 # rotation
                rng.uniform(-CONTOUR_BEND_MAX, CONTOUR_BEND_MAX, count),
                rng.uniform(-0.01, 0.01, size=(count, 2)),
            ])
        else:
            scales = rng.uniform(0.8, 1.3, size=(count, 3))
            bumps = rng.uniform(-BLOB_BUMP_MAX, BLOB_BUMP_MAX, size=(count, 5))
            styles = np.column_stack([scales, bumps])
            poses = np.column_stack([
                rng.uniform(-BLOB_TWIST_MAX, BLOB_TWIST_MAX, count),
                rng.uniform(-0.02, 0.02, size=(count, 3)),
                rng.uniform(-0.01, 0.01, size=(count, 3)),
            ])
        return styles, poses

    def build(self, style, pose):
        if self.kind == "contour2d":
            return generate_contour(style, pose, self.resolution)
        return generate_blob(style, pose, self.resolution)

    def samples(self, count):
        styles, poses = self.draw_params(count)
        return [self.build(s, p) for s, p in zip(styles, poses)]

    def manifest(self, count):
        """JSON-ready description from which the dataset regenerates bit-exactly."""
        styles, poses = self.draw_params(count)
        return {
            "family": self.kind,
            "resolution": self.resolution,
            "seed": self.seed,
            "n_harmonics": self.n_harmonics,
            "count": count,
            "styles": styles.tolist(),
            "poses": poses.tolist(),
        }

    @staticmethod
    def from_manifest(data):
        fam = ShapeFamily(data["family"], data["resolution"], data["seed"],
                          data.get("n_harmonics", 10))
        return fam

    @staticmethod
    def rebuild_from_manifest(data):
        fam = ShapeFamily.from_manifest(data)
        return [fam.build(np.asarray(s), np.asarray(p))
                for s, p in zip(data["styles"], data["poses"])]


# ---------------------------------------------------------------------------
# Surface sampling
# ---------------------------------------------------------------------------

def sample_pointcloud(mesh, fraction, seed, mode="uniform"):
    """Random surface sampling of ceil(fraction * n) points.

    Modes: ``"uniform"`` draws area-weighted points on the triangles,
    ``"vertex"`` picks a subset of mesh vertices, ``"nonuniform"`` biases the
    triangle selection toward a random half-space to mimic uneven scan density.
    Deterministic given the seed.
    """
    if not 0 < fraction <= 1:
        raise GeometryError("sampling fraction must lie in (0, 1]")
    count = math.ceil(fraction * mesh.n_vertices)
    if count < 4:
        raise GeometryError(f"sampling would keep only {count} points (need >= 4)")
    rng = np.random.default_rng(seed)
    if mode == "vertex":
        idx = rng.choice(mesh.n_vertices, size=count, replace=False)
        return PointCloud(mesh.vertices[idx])
    weights = mesh.face_areas()
    if mode == "nonuniform":
        centroids = mesh.vertices[mesh.faces].mean(axis=1)
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        centered = centroids - centroids.mean(axis=0)
        scale = np.abs(centered @ direction).max()
        weights = weights * np.exp(2.0 * (centered @ direction) / max(scale, 1e-12))
    elif mode != "uniform":
        raise GeometryError(f"unknown sampling mode {mode!r}")
    probs = weights / weights.sum()
    tri = rng.choice(mesh.n_faces, size=count, p=probs)
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    corn = mesh.vertices[mesh.faces[tri]]
    pts = (1 - u - v)[:, None] * corn[:, 0] + u[:, None] * corn[:, 1] + v[:, None] * corn[:, 2]
    return PointCloud(pts)


# ---------------------------------------------------------------------------
# Decimation
# ---------------------------------------------------------------------------

def decimate(mesh, target_n):
    """Reduce a mesh to ``target_n`` vertices by greedy shortest-edge collapse.

    Each collapse merges an edge to its midpoint, guarded by the link
    condition so the result stays edge-manifold and connected. The collapse
    order (shortest edge first, ties by index) is deterministic. Raises if no
    legal collapse remains before the target is reached.
    """
    if not 4 <= target_n < mesh.n_vertices:
        raise GeometryError("target vertex count must satisfy 4 <= target < n")
    verts = [v.copy() for v in mesh.vertices]
    faces = {i: tuple(f) for i, f in enumerate(map(tuple, mesh.faces))}
    vert_faces = {i: set() for i in range(len(verts))}
    for fi, f in faces.items():
        for v in f:
            vert_faces[v].add(fi)
    alive = set(range(len(verts)))

    def neighbors(v):
        out = set()
        for fi in vert_faces[v]:
            out.update(faces[fi])
        out.discard(v)
        return out

    def collapse_ok(u, v):
        # link condition: shared neighbors of u and v must be exactly the
        # opposite vertices of the faces on edge (u, v)
        shared_faces = vert_faces[u] & vert_faces[v]
        if not 1 <= len(shared_faces) <= 2:
            return False
        wing = set()
        for fi in shared_faces:
            wing.update(faces[fi])
        wing -= {u, v}
        if neighbors(u) & neighbors(v) != wing:
            return False
        # collapsing must not create a degenerate or flipped face
        mid = 0.5 * (verts[u] + verts[v])
        for fi in (vert_faces[u] | vert_faces[v]) - shared_faces:
            tri = [mid if w in (u, v) else verts[w] for w in faces[fi]]
            area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
            if area <= DEGENERATE_AREA:
                return False
        return True

    def do_collapse(u, v):
        verts[u] = 0.5 * (verts[u] + verts[v])
        dead = vert_faces[u] & vert_faces[v]
        for fi in list(vert_faces[v]):
            if fi in dead:
                continue
            faces[fi] = tuple(u if w == v else w for w in faces[fi])
            vert_faces[u].add(fi)
        for fi in dead:
            for w in faces[fi]:
                vert_faces[w].discard(fi)
            del faces[fi]
        vert_faces[v] = set()
        alive.discard(v)

    import heapq

    def edge_entry(u, w):
        if w < u:
            u, w = w, u
        return (float(np.linalg.norm(verts[u] - verts[w])), u, w)

    heap = []
    seen = set()
    for u in alive:
        for w in neighbors(u):
            key = (u, w) if u < w else (w, u)
            if key not in seen:
                seen.add(key)
                heap.append(edge_entry(u, w))
    heapq.heapify(heap)

    n_alive = len(alive)
    stale_sweeps = 0
    while n_alive > target_n:
        # lazy-invalidation heap: entries go stale as neighborhoods change,
        # so each popped candidate is re-validated against the current mesh
        while heap:
            d, u, w = heapq.heappop(heap)
            if u not in alive or w not in alive or w not in neighbors(u):
                continue
            if abs(edge_entry(u, w)[0] - d) > 1e-15:
                continue  # length changed since it was pushed
            if collapse_ok(u, w):
                do_collapse(u, w)
                n_alive -= 1
                for x in neighbors(u) | {u}:
                    for y in neighbors(x):
                        heapq.heappush(heap, edge_entry(x, y))
                break
        else:
            stale_sweeps += 1
            if stale_sweeps > 1:
                raise GeometryError(
                    f"no manifold-preserving collapse left at {n_alive} vertices "
                    f"(target {target_n})"
                )
            # rebuild once in case every entry went stale
            heap = [edge_entry(u, w) for u in alive for w in neighbors(u) if u < w]
            heapq.heapify(heap)

    order = sorted(alive)
    remap = {old: new for new, old in enumerate(order)}
    new_verts = np.array([verts[i] for i in order])
    new_faces = np.array([[remap[w] for w in f] for f in faces.values()], dtype=np.int64)
    return Mesh(new_verts, new_faces)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _fmt(x):
    return f"{x:.9g}"


def save_shape(shape, path):
    """Write a shape to OFF/OBJ (mesh), OBJ/XYZ (point cloud) or JSON (contour)."""
    path = str(path)
    ext = path.rsplit(".", 1)[-1].lower() if "." in path else ""
    if isinstance(shape, Mesh):
        if ext == "off":
            with open(path, "w") as fh:
                fh.write("OFF\n")
                fh.write(f"{shape.n_vertices} {shape.n_faces} 0\n")
                for v in shape.vertices:
                    fh.write(f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
                for f in shape.faces:
                    fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
        elif ext == "obj":
            with open(path, "w") as fh:
                for v in shape.vertices:
                    fh.write(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
                for f in shape.faces:
                    fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
        else:
            raise GeometryError(f"unsupported mesh extension {ext!r} (use off/obj)")
    elif isinstance(shape, PointCloud):
        if ext == "xyz":
            with open(path, "w") as fh:
                for p in shape.points:
                    fh.write(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
        elif ext == "obj":
            with open(path, "w") as fh:
                for p in shape.points:
                    fh.write(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}\n")
        else:
            raise GeometryError(f"unsupported point-cloud extension {ext!r} (use xyz/obj)")
    elif isinstance(shape, Contour):
        if ext != "json":
            raise GeometryError(f"unsupported contour extension {ext!r} (use json)")
        with open(path, "w") as fh:
            json.dump([[float(_fmt(x)), float(_fmt(y))] for x, y in shape.points], fh)
    else:
        raise GeometryError(f"cannot save object of type {type(shape).__name__}")


def _load_off(path):
    with open(path) as fh:
        lines = fh.readlines()
    body = [(i + 1, ln.strip()) for i, ln in enumerate(lines)
            if ln.strip() and not ln.strip().startswith("#")]
    if not body or body[0][1] != "OFF":
        raise GeometryError(f"{path}: missing OFF header on line 1")
    try:
        counts = body[1][1].split()
        nv, nf = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise GeometryError(f"{path}: bad count line at line {body[1][0]}") from None
    rows = body[2:]
    if len(rows) < nv + nf:
        raise GeometryError(f"{path}: expected {nv} vertices + {nf} faces, file is short")
    verts = np.empty((nv, 3))
    for i in range(nv):
        lineno, text = rows[i]
        parts = text.split()
        if len(parts) < 3:
            raise GeometryError(f"{path}: line {lineno}: vertex needs 3 coordinates")
        verts[i] = [float(p) for p in parts[:3]]
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        lineno, text = rows[nv + i]
        parts = text.split()
        if len(parts) < 4 or parts[0] != "3":
            raise GeometryError(f"{path}: line {lineno}: only triangular faces supported")
        faces[i] = [int(p) for p in parts[1:4]]
        if faces[i].min() < 0 or faces[i].max() >= nv:
            raise GeometryError(
                f"{path}: line {lineno}: face {i} references vertex {faces[i].max()} "
                f"outside [0, {nv})"
            )
    return Mesh(verts, faces)


def _load_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise GeometryError(f"{path}: line {lineno}: vertex needs 3 coordinates")
                verts.append([float(p) for p in parts[1:4]])
            elif tag == "f":
                if len(parts) != 4:
                    raise GeometryError(
                        f"{path}: line {lineno}: only triangular faces supported"
                    )
                idx = []
                for p in parts[1:]:
                    head = p.split("/")[0]
                    i = int(head)
                    if i < 1 or i > len(verts):
                        raise GeometryError(
                            f"{path}: line {lineno}: face index {i} outside [1, {len(verts)}]"
                        )
                    idx.append(i - 1)
                faces.append(idx)
            else:
                warnings.warn(f"{path}: line {lineno}: ignoring OBJ record {tag!r}")
    if not verts:
        raise GeometryError(f"{path}: no vertices found")
    if faces:
        return Mesh(np.array(verts), np.array(faces, dtype=np.int64))
    return PointCloud(np.array(verts))


def load_shape(path):
    """Read a Mesh, Contour, or PointCloud; the extension picks the format."""
    path = str(path)
    ext = path.rsplit(".", 1)[-1].lower() if "." in path else ""
    if ext == "off":
        return _load_off(path)
    if ext == "obj":
        return _load_obj(path)
    if ext == "xyz":
        rows = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) < 3:
                    raise GeometryError(f"{path}: line {lineno}: expected 'x y z'")
                rows.append([float(p) for p in parts[:3]])
        return PointCloud(np.array(rows))
    if ext == "json":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise GeometryError(f"{path}: invalid JSON at position {exc.pos}") from None
        return Contour(np.array(data, dtype=np.float64))
    raise GeometryError(f"unsupported shape extension {ext!r}")
