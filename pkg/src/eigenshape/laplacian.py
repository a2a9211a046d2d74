"""Sparse FEM discretizations of the Laplace-Beltrami operator.

Each assembly returns a stiffness/mass pair (S, M) for the generalized
eigenproblem S phi = lambda M phi. Three discretizations are provided:
linear (P1) elements on triangle meshes, which reduce to the classical
cotangent weights; cubic (P3) Lagrange elements with nodes on vertices,
edge thirds, and face centroids; and 1D P1 elements on closed polylines.
Boundaries, when present, get the natural (Neumann) treatment of the weak
form: no rows are modified. Mass matrices are consistent, not lumped, so
the conserved quantity is the total mass 1^T M 1 (the surface area or curve
length), not the trace.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .geometry import Contour, Mesh


class AssemblyError(ValueError):
    """Degenerate elements or otherwise unassemblable input."""


@dataclass(frozen=True)
class LaplacianPair:
    """Stiffness S and mass M (sparse symmetric, CSR) with node bookkeeping.

    ``node_map`` records how many nodes play each role; for linear and
    contour FEM all nodes are vertices, for cubic FEM the node vector is
    ordered vertices, then two nodes per edge, then one per face.
    """

    S: sparse.csr_matrix
    M: sparse.csr_matrix
    disc: str
    node_map: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.S.shape[0]

    def total_mass(self):
        """1^T M 1: total surface area (meshes) or curve length (contours)."""
        ones = np.ones(self.n_nodes)
        return float(ones @ (self.M @ ones))


def _symmetrize(A):
    A = sparse.csr_matrix(A)
    return ((A + A.T) * 0.5).tocsr()


# ---------------------------------------------------------------------------
# Linear FEM (cotangent weights, consistent P1 mass)
# ---------------------------------------------------------------------------

def assemble_linear_fem(mesh):
    """Cotangent stiffness and consistent P1 mass matrix of a triangle mesh."""
    if not isinstance(mesh, Mesh):
        raise AssemblyError("linear FEM needs a Mesh")
    V, T = mesh.vertices, mesh.faces
    n = len(V)
    e = [V[T[:, (i + 2) % 3]] - V[T[:, (i + 1) % 3]] for i in range(3)]
    double_area = np.linalg.norm(np.cross(e[1], e[2]), axis=1)
    if (double_area <= 2e-12).any():
        bad = int(np.argmax(double_area <= 2e-12))
        raise AssemblyError(f"face {bad} is degenerate (area {double_area[bad] / 2:.3e})")

    # cot of the angle at corner i = (e_j . e_k) / (2 A), opposite edge (j, k)
    rows, cols, vals = [], [], []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        cot = np.einsum("ij,ij->i", V[T[:, j]] - V[T[:, i]],
                        V[T[:, k]] - V[T[:, i]]) / double_area
        w = 0.5 * cot
        a, b = T[:, j], T[:, k]
        rows += [a, b, a, b]
        cols += [b, a, a, b]
        vals += [-w, -w, w, w]
    S = sparse.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))

    area = 0.5 * double_area
    rows, cols, vals = [], [], []
    for i in range(3):
        for j in range(3):
            rows.append(T[:, i])
            cols.append(T[:, j])
            vals.append(area * (2.0 if i == j else 1.0) / 12.0)
    M = sparse.coo_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
    return LaplacianPair(_symmetrize(S), _symmetrize(M), "linear_fem",
                         {"vertex": n})


# ---------------------------------------------------------------------------
# Cubic FEM (P3 Lagrange: vertex, edge-third, and centroid nodes)
# ---------------------------------------------------------------------------

def _p3_reference():
    """Reference P3 data: nodes, quadrature, basis values and gradients.

    Basis coefficients come from inverting the degree-3 monomial Vandermonde
    at the ten Lagrange nodes; integrals use a symmetric 12-point triangle
    rule exact through polynomial degree 6.
    """
    nodes = np.array([
        [0, 0], [1, 0], [0, 1],
        [1 / 3, 0], [2 / 3, 0],          # edge (0, 1), ordered from node 0
        [2 / 3, 1 / 3], [1 / 3, 2 / 3],  # edge (1, 2), ordered from node 1
        [0, 2 / 3], [0, 1 / 3],          # edge (2, 0), ordered from node 2
        [1 / 3, 1 / 3],
    ])
    powers = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2),
              (3, 0), (2, 1), (1, 2), (0, 3)]

    def monomials(pts):
        return np.stack([pts[:, 0] ** p * pts[:, 1] ** q for p, q in powers], axis=1)

    coeff = np.linalg.inv(monomials(nodes))  # column i = coefficients of phi_i

    # Dunavant degree-6 rule: 12 points, weights normalized to sum to 1
    g1, w1 = 0.063089014491502, 0.050844906370207
    g2, w2 = 0.249286745170910, 0.116786275726379
    g3a, g3b, w3 = 0.310352451033785, 0.053145049844816, 0.082851075618374
    pts, wts = [], []
    for (a, w) in (((g1, g1), w1), ((g2, g2), w2)):
        a1, a2 = a
        third = 1 - a1 - a2
        pts += [(third, a1), (a1, third), (a1, a2)]
        wts += [w] * 3
    third = 1 - g3a - g3b
    pts += [(g3a, g3b), (g3b, g3a), (g3a, third), (third, g3a), (g3b, third), (third, g3b)]
    wts += [w3] * 6
    quad_pts = np.array(pts)
    quad_wts = np.array(wts)

    phi = monomials(quad_pts) @ coeff  # (12, 10)
    dx = np.stack([p * quad_pts[:, 0] ** max(p - 1, 0) * quad_pts[:, 1] ** q
                   for p, q in powers], axis=1) @ coeff
    dy = np.stack([q * quad_pts[:, 0] ** p * quad_pts[:, 1] ** max(q - 1, 0)
                   for p, q in powers], axis=1) @ coeff

    # reference integrals over the unit triangle (area 1/2)
    mass = 0.5 * (phi.T * quad_wts) @ phi
    k = {}
    for a, da in (("x", dx), ("y", dy)):
        for b, db in (("x", dx), ("y", dy)):
            k[a + b] = 0.5 * (da.T * quad_wts) @ db
    return mass, k


_P3_MASS, _P3_STIFF = _p3_reference()

_EDGE_LOCAL = ((0, 1, 3, 4), (1, 2, 5, 6), (2, 0, 7, 8))  # (from, to, node@1/3, node@2/3)


def cubic_node_positions(mesh):
    """Embedded coordinates of the P3 nodes (vertices, edge thirds, centroids)."""
    edges = mesh.edges()
    a, b = mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]]
    edge_nodes = np.empty((2 * len(edges), 3))
    edge_nodes[0::2] = a + (b - a) / 3.0
    edge_nodes[1::2] = a + 2.0 * (b - a) / 3.0
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    return np.vstack([mesh.vertices, edge_nodes, centroids])


def assemble_cubic_fem(mesh):
    """P3 Lagrange stiffness/mass pair on the n + 2E + F node set."""
    if not isinstance(mesh, Mesh):
        raise AssemblyError("cubic FEM needs a Mesh")
    V, T = mesh.vertices, mesh.faces
    n, nf = len(V), len(T)
    edges = mesh.edges()
    edge_index = {(int(a), int(b)): i for i, (a, b) in enumerate(edges)}
    ne = len(edges)
    N = n + 2 * ne + nf

    # per-face metric from the two embedded edge vectors
    e1 = V[T[:, 1]] - V[T[:, 0]]
    e2 = V[T[:, 2]] - V[T[:, 0]]
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    det = g11 * g22 - g12 * g12
    if (det <= 4e-24).any():
        bad = int(np.argmax(det <= 4e-24))
        raise AssemblyError(f"face {bad} is degenerate (area {np.sqrt(max(det[bad], 0)) / 2:.3e})")
    rg = np.sqrt(det)  # = 2 * face area
    i11 = g22 / det
    i12 = -g12 / det
    i22 = g11 / det

    kxx, kxy, kyx, kyy = (_P3_STIFF["xx"], _P3_STIFF["xy"],
                          _P3_STIFF["yx"], _P3_STIFF["yy"])
    S_el = (rg * i11)[:, None, None] * kxx \
        + (rg * i12)[:, None, None] * (kxy + kyx) \
        + (rg * i22)[:, None, None] * kyy
    M_el = rg[:, None, None] * _P3_MASS

    # global node ids per face, matching the reference local ordering
    gidx = np.empty((nf, 10), dtype=np.int64)
    gidx[:, 0:3] = T
    for loc_a, loc_b, loc_n1, loc_n2 in _EDGE_LOCAL:
        A = T[:, loc_a]
        B = T[:, loc_b]
        lo = np.minimum(A, B)
        hi = np.maximum(A, B)
        eidx = np.array([edge_index[(int(x), int(y))] for x, y in zip(lo, hi)])
        fwd = A < B  # local 1/3 node sits at the edge's slot 0 iff A is the low end
        gidx[:, loc_n1] = n + 2 * eidx + np.where(fwd, 0, 1)
        gidx[:, loc_n2] = n + 2 * eidx + np.where(fwd, 1, 0)
    gidx[:, 9] = n + 2 * ne + np.arange(nf)

    rows = np.repeat(gidx, 10, axis=1).ravel()
    cols = np.tile(gidx, (1, 10)).ravel()
    S = sparse.coo_matrix((S_el.ravel(), (rows, cols)), shape=(N, N))
    M = sparse.coo_matrix((M_el.ravel(), (rows, cols)), shape=(N, N))
    return LaplacianPair(_symmetrize(S), _symmetrize(M), "cubic_fem",
                         {"vertex": n, "edge_node": 2 * ne, "face_node": nf})


# ---------------------------------------------------------------------------
# 1D ring FEM for closed contours
# ---------------------------------------------------------------------------

def assemble_contour_fem(contour):
    """P1 elements on the closed polyline: cycle-graph stiffness and mass."""
    if not isinstance(contour, Contour):
        raise AssemblyError("contour FEM needs a Contour")
    n = contour.n_points
    ell = contour.edge_lengths()
    if (ell <= 0).any():
        raise AssemblyError(f"edge {int(np.argmax(ell <= 0))} has zero length")
    i = np.arange(n)
    j = (i + 1) % n
    inv = 1.0 / ell
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    S = sparse.coo_matrix((np.concatenate([-inv, -inv, inv, inv]), (rows, cols)),
                          shape=(n, n))
    M = sparse.coo_matrix(
        (np.concatenate([ell / 6, ell / 6, ell / 3, ell / 3]), (rows, cols)),
        shape=(n, n))
    return LaplacianPair(_symmetrize(S), _symmetrize(M), "contour_fem",
                         {"vertex": n})


def assemble(shape, order="cubic"):
    """Dispatch on shape type: contours get ring FEM, meshes P1 or P3."""
    if isinstance(shape, Contour):
        return assemble_contour_fem(shape)
    if isinstance(shape, Mesh):
        if order == "linear":
            return assemble_linear_fem(shape)
        if order == "cubic":
            return assemble_cubic_fem(shape)
        raise AssemblyError(f"unknown FEM order {order!r}")
    raise AssemblyError(f"no Laplacian discretization for {type(shape).__name__}")


def export_triplets(matrix, path):
    """Write a sparse matrix as '"i j v"' coordinate lines, 0-based."""
    coo = sparse.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")
