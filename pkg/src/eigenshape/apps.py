"""Everything built on top of a trained bundle: shape recovery from
eigenvalues, mesh super-resolution, style transfer by latent-space search,
latent and eigenvalue interpolation, band edits, point-cloud spectrum
estimation, correspondence from decoder ordering, and the nearest-neighbor /
ICP baselines used for comparison.
"""

from dataclasses import dataclass, field

import numpy as np

from .eigensolve import Spectrum, spectrum_of
from .geometry import PointCloud
from .neural import Adam


def shape_from_spectrum(bundle, spectrum):
    """Recover a shape from its eigenvalues alone: decode(spec_to_latent(lam)).

    A single forward pass; no optimization at test time.
    """
    return bundle.decode(bundle.spec_to_latent(spectrum))


def super_resolve(bundle, low_shape, order="cubic", k=None, cache=None):
    """Predict the template-resolution counterpart of a low-resolution shape.

    Computes the input's spectrum with the requested FEM order and decodes
    it; the output lives on the training template, in dense correspondence
    with the training set regardless of the input connectivity.
    """
    spec = spectrum_of(low_shape, bundle.k if k is None else k, order=order,
                       cache=cache)
    return shape_from_spectrum(bundle, spec)


# ---------------------------------------------------------------------------
# Style transfer
# ---------------------------------------------------------------------------

@dataclass
class StyleTransferConfig:
    w: float = 1e-2       # anchor weight tying the result to the pose donor
    steps: int = 500
    lr: float = 1e-2

    def __post_init__(self):
        if self.w < 0 or self.steps <= 0 or self.lr <= 0:
            raise ValueError("need w >= 0, steps > 0, lr > 0")


@dataclass
class StyleTransferResult:
    shape: object
    latent: np.ndarray
    alignment: list           # per-step gap to the target spectrum (raw units)
    objective: list
    predicted_spectrum: np.ndarray


class StyleTransferDiverged(RuntimeError):
    pass


def style_transfer(bundle, spec_style, shape_pose, cfg=None):
    """Latent-space search: align the predicted spectrum with the style donor
    while staying near the pose donor's code.

    Minimizes ``||lam_style - rho(v)||^2 + w ||v - E(X_pose)||^2`` over the
    latent v with Adam, starting from v = E(X_pose). The spectrum term is
    evaluated in the bundle's normalized eigenvalue units. The best iterate
    is returned, so the objective never ends above its starting value; fifty
    consecutive increases abort.
    """
    cfg = cfg or StyleTransferConfig()
    rho = bundle.latent_to_spec_net
    if rho is None:
        raise ValueError("style transfer needs a bundle with the inverse map")
    target_vals = spec_style.values if isinstance(spec_style, Spectrum) \
        else np.asarray(spec_style, dtype=np.float64)
    if target_vals.shape[-1] != bundle.k:
        raise ValueError(f"style spectrum has k={target_vals.shape[-1]}, "
                         f"bundle expects {bundle.k}")
    target = np.sort(target_vals / bundle.eig_scale).astype(np.float32)
    v_init = bundle.encode(shape_pose).astype(np.float32)
    v = v_init.copy()

    def evaluate(vec, with_grad=False):
        pred = rho.forward(vec[None])[0]
        # spectra are nondecreasing sequences, so the alignment acts on the
        # sorted prediction; gradients flow back through the permutation
        order = np.argsort(pred, kind="stable")
        diff = pred[order] - target
        gap2 = float((diff.astype(np.float64) ** 2).sum())
        anchor = vec.astype(np.float64) - v_init
        g = gap2 + cfg.w * float((anchor ** 2).sum())
        if not with_grad:
            return g, gap2
        d_pred = np.empty_like(pred)
        d_pred[order] = 2.0 * diff
        grad_v = rho.backward(d_pred[None])[0]
        grad_v = grad_v + (2.0 * cfg.w * anchor).astype(np.float32)
        return g, gap2, grad_v

    opt = Adam([("v", v)], lr=cfg.lr)
    best_g, best_gap = evaluate(v)
    best_v = v.copy()
    alignment = [np.sqrt(best_gap) * bundle.eig_scale]
    objective = [best_g]
    prev_g = best_g
    rises = 0
    for _ in range(cfg.steps):
        g, gap2, grad = evaluate(v, with_grad=True)
        opt.step([("v", v)], [("v", grad)])
        g_new, gap2_new = evaluate(v)
        alignment.append(np.sqrt(gap2_new) * bundle.eig_scale)
        objective.append(g_new)
        if g_new < best_g:
            best_g, best_v = g_new, v.copy()
        rises = rises + 1 if g_new > prev_g else 0
        prev_g = g_new
        if rises >= 50:
            raise StyleTransferDiverged(
                f"objective rose for {rises} consecutive steps "
                f"(best {best_g:.3e}, current {g_new:.3e})"
            )
    predicted = bundle.latent_to_spec(best_v)
    return StyleTransferResult(bundle.decode(best_v), best_v, alignment,
                               objective, predicted)


# ---------------------------------------------------------------------------
# Exploration
# ---------------------------------------------------------------------------

def interpolate_latent(bundle, corner_spectra, grid=5):
    """g x g grid of shapes from bilinear blending of four latent codes.

    ``corner_spectra`` order is (top-left, top-right, bottom-left,
    bottom-right); each is mapped through the spectrum-to-latent net, the
    grid is blended in latent space and decoded. Corner cells reproduce
    ``shape_from_spectrum`` of the corners exactly.
    """
    if len(corner_spectra) != 4:
        raise ValueError("need exactly four corner spectra")
    if grid < 2:
        raise ValueError("grid must be at least 2 x 2")
    c00, c01, c10, c11 = [bundle.spec_to_latent(s) for s in corner_spectra]
    rows = []
    for i in range(grid):
        u = i / (grid - 1)
        row = []
        for j in range(grid):
            w = j / (grid - 1)
            v = ((1 - u) * (1 - w) * c00 + (1 - u) * w * c01
                 + u * (1 - w) * c10 + u * w * c11)
            row.append(bundle.decode(v))
        rows.append(row)
    return rows


def interpolate_spectra(bundle, spec_a, spec_b, t):
    """Decode the linear blend (1 - t) lam_a + t lam_b of two spectra."""
    if not 0 <= t <= 1:
        raise ValueError("interpolation parameter must lie in [0, 1]")
    a = spec_a.values if isinstance(spec_a, Spectrum) else np.asarray(spec_a)
    b = spec_b.values if isinstance(spec_b, Spectrum) else np.asarray(spec_b)
    return shape_from_spectrum(bundle, (1 - t) * a + t * b)


def band_modify(spectrum, lo, hi, factor):
    """Scale eigenvalues lo..hi (inclusive) by a positive factor.

    The result is re-sorted into nondecreasing order and the leading
    eigenvalue is pinned to zero, so it remains a valid spectrum.
    """
    if factor <= 0:
        raise ValueError("band factor must be positive")
    vals = spectrum.values.copy()
    if not 0 <= lo <= hi < len(vals):
        raise ValueError(f"band [{lo}, {hi}] outside spectrum of length {len(vals)}")
    vals[lo:hi + 1] *= factor
    vals = np.sort(vals)
    vals[0] = 0.0
    return Spectrum(vals, spectrum.disc, spectrum.tol)


# ---------------------------------------------------------------------------
# Point-cloud spectra
# ---------------------------------------------------------------------------

def estimate_spectrum(bundle, cloud):
    """Spectrum of the surface under a point cloud, in one forward pass."""
    if bundle.kind != "pointcloud":
        raise ValueError("spectrum estimation needs a point-cloud bundle")
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(np.asarray(cloud))
    return bundle.predict_spectrum(cloud)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

class NearestIndex:
    """Exact nearest-neighbor lookup over a fixed key matrix.

    Keys can be spectra (the retrieval baseline) or latent codes (the
    latent-space variant); ties break toward the lowest index.
    """

    def __init__(self, keys, payload=None, scale=None):
        self.keys = np.asarray(keys, dtype=np.float64)
        if self.keys.ndim != 2 or len(self.keys) == 0:
            raise ValueError("index needs a nonempty (count, dim) key matrix")
        self.payload = payload
        self.scale = float(scale) if scale else 1.0

    def query(self, key):
        """(payload_or_index, distance, index) of the closest stored key."""
        key = np.asarray(key, dtype=np.float64)
        d = np.linalg.norm((self.keys - key) / self.scale, axis=1)
        idx = int(d.argmin())
        item = self.payload[idx] if self.payload is not None else idx
        return item, float(d[idx]), idx


def nn_baseline(spectrum, index):
    """Retrieval baseline: the training shape whose spectrum is closest."""
    vals = spectrum.values if isinstance(spectrum, Spectrum) else np.asarray(spectrum)
    return index.query(vals)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

@dataclass
class Correspondence:
    """Point map from shape A into shape B's template indexing."""

    map: np.ndarray
    quality: float

    def propagate(self, labels):
        """Pull per-point labels of B back onto A through the map."""
        labels = np.asarray(labels)
        return labels[self.map]


def _points_of(shape):
    return np.asarray(getattr(shape, "vertices", getattr(shape, "points", shape)),
                      dtype=np.float64)


def match_shapes(bundle, spec_a, spec_b, points_a=None):
    """Correspondence between two shapes given only their spectra.

    Both spectra are decoded onto the training template, whose shared point
    ordering carries the correspondence. Each point of A (its decoded stand-in
    when ``points_a`` is omitted) is assigned to the nearest decoded-A
    template point; that template index addresses B's decoding directly.
    """
    dec_a = _points_of(shape_from_spectrum(bundle, spec_a))
    shape_from_spectrum(bundle, spec_b)  # validates spec_b against the bundle
    src = dec_a if points_a is None else np.asarray(points_a, dtype=np.float64)
    d = np.linalg.norm(src[:, None] - dec_a[None], axis=2)
    mapping = d.argmin(axis=1)
    quality = float(d[np.arange(len(src)), mapping].mean())
    return Correspondence(mapping, quality)


# ---------------------------------------------------------------------------
# Rigid ICP baseline
# ---------------------------------------------------------------------------

@dataclass
class IcpResult:
    rotation: np.ndarray
    translation: np.ndarray
    residual: float
    history: list = field(default_factory=list)

    def apply(self, points):
        return points @ self.rotation.T + self.translation


def _kabsch(src, dst):
    """Least-squares rigid fit src -> dst (rotation + translation)."""
    ca = src.mean(axis=0)
    cb = dst.mean(axis=0)
    H = (src - ca).T @ (dst - cb)
    if np.linalg.matrix_rank(H) < 2:
        raise ValueError("degenerate covariance: points are collinear")
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    return R, t


def icp_rigid(a, b, iters=100):
    """Point-to-point ICP: nearest-neighbor pairing and a rigid Kabsch fit,
    repeated; the mean squared pairing distance never increases."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 3 or len(b) < 3:
        raise ValueError("ICP needs at least three points per set")
    R = np.eye(3)
    t = np.zeros(3)
    cur = a.copy()
    history = []
    for _ in range(iters):
        d = np.linalg.norm(cur[:, None] - b[None], axis=2)
        nn = d.argmin(axis=1)
        step_R, step_t = _kabsch(cur, b[nn])
        R = step_R @ R
        t = step_R @ t + step_t
        cur = a @ R.T + t
        residual = float(((cur - b[nn]) ** 2).sum(axis=1).mean())
        history.append(residual)
        if residual < 1e-28:
            break
    return IcpResult(R, t, history[-1], history)
