"""Smallest eigenvalues of the sparse symmetric-definite pencil (S, M).

Uses shift-invert Lanczos (ARPACK) with a small negative shift so the
factorized operator S - sigma * M stays positive definite despite the
constant null space of closed/Neumann domains. Start vectors come from a
seeded generator, so results are reproducible bit for bit.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .geometry import Contour, Mesh
from .laplacian import LaplacianPair, assemble

DEFAULT_TOL = 1e-8
ZERO_CLAMP = 1e-9


class EigensolveError(RuntimeError):
    """Factorization failure, non-convergence, or inconsistent null space."""


@dataclass(frozen=True)
class Spectrum:
    """Nondecreasing vector of the first k eigenvalues plus its provenance tag."""

    values: np.ndarray
    disc: str
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("spectrum must be a nonempty 1D vector")
        if np.diff(vals).min(initial=0.0) < -1e-12:
            raise ValueError("spectrum values must be nondecreasing")
        if vals[0] < -1e-8 * max(abs(vals[-1]), 1.0):
            raise ValueError(f"leading eigenvalue {vals[0]} is too negative")

    @property
    def k(self):
        return len(self.values)

    def to_json_dict(self):
        return {"k": self.k, "disc": self.disc, "tol": self.tol,
                "values": self.values.tolist()}

    @staticmethod
    def from_json_dict(data):
        return Spectrum(np.asarray(data["values"], dtype=np.float64),
                        data["disc"], data.get("tol", DEFAULT_TOL))


@dataclass(frozen=True)
class EigenPairs:
    """Spectrum plus M-orthonormal eigenvectors (columns of a nodes x k matrix)."""

    spectrum: Spectrum
    vectors: np.ndarray


def smallest_k(pair, k, tol=DEFAULT_TOL, seed=0):
    """The k algebraically smallest generalized eigenpairs of (S, M).

    Near-zero eigenvalues (below ZERO_CLAMP relative to the largest computed
    one) are reported as exactly 0. A zero eigenvalue of multiplicity above
    one means the underlying domain is disconnected and raises.
    """
    if not isinstance(pair, LaplacianPair):
        raise TypeError("smallest_k expects a LaplacianPair")
    N = pair.n_nodes
    if not 0 < k < N:
        raise ValueError(f"need 0 < k < {N}, got k={k}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    # scale of the pencil, used to place the factorization shift
    scale = abs(pair.S.diagonal()).sum() / max(pair.M.diagonal().sum(), 1e-300)
    sigma = -1e-6 * max(scale, 1e-12)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(N)
    # a roomy Krylov subspace keeps clustered eigenvalues (symmetry
    # multiplicities) from being skipped
    ncv = min(N, max(2 * k + 1, 40))
    try:
        vals, vecs = eigsh(pair.S, k=k, M=pair.M, sigma=sigma, which="LM",
                           v0=v0, tol=tol, maxiter=200 * k, ncv=ncv)
    except ArpackNoConvergence as exc:
        raise EigensolveError(f"Lanczos failed to converge: {exc}") from exc
    except RuntimeError as exc:
        raise EigensolveError(f"factorization of S - sigma*M failed: {exc}") from exc
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # k = 1 leaves no larger eigenvalue to compare against; the pencil scale
    # is a magnitude proxy of the same units
    clamp = ZERO_CLAMP * max(abs(vals[-1]) if k > 1 else scale, 1e-300)
    near_zero = np.abs(vals) < clamp
    vals = np.where(near_zero, 0.0, vals)
    if near_zero.sum() > 1:
        raise EigensolveError(
            "multiplicity of zero eigenvalue > 1, mesh likely disconnected"
        )
    # deterministic sign: make the largest-magnitude entry of each vector positive
    flip = np.sign(vecs[np.abs(vecs).argmax(axis=0), np.arange(vecs.shape[1])])
    vecs = vecs * np.where(flip == 0, 1.0, flip)
    return EigenPairs(Spectrum(vals, pair.disc, tol), vecs)


def _shape_hash(shape):
    h = hashlib.sha256()
    if isinstance(shape, Mesh):
        h.update(b"mesh")
        h.update(shape.vertices.tobytes())
        h.update(shape.faces.tobytes())
    elif isinstance(shape, Contour):
        h.update(b"contour")
        h.update(shape.points.tobytes())
    else:
        raise TypeError(f"cannot hash {type(shape).__name__}")
    return h.hexdigest()


class SpectrumCache:
    """In-memory store of computed spectra, optionally mirrored to a directory."""

    def __init__(self, directory=None):
        self._memory = {}
        self.directory = directory

    def _path(self, key):
        return None if self.directory is None else f"{self.directory}/{key}.json"

    def get(self, key):
        if key in self._memory:
            return self._memory[key]
        path = self._path(key)
        if path is not None:
            import json
            import os

            if os.path.exists(path):
                with open(path) as fh:
                    spec = Spectrum.from_json_dict(json.load(fh))
                self._memory[key] = spec
                return spec
        return None

    def put(self, key, spectrum):
        self._memory[key] = spectrum
        path = self._path(key)
        if path is not None:
            import json
            import os

            os.makedirs(self.directory, exist_ok=True)
            with open(path, "w") as fh:
                json.dump(spectrum.to_json_dict(), fh)


_GLOBAL_CACHE = SpectrumCache()


def spectrum_of(shape, k, order="cubic", tol=DEFAULT_TOL, cache=None):
    """Assemble, solve, and cache: the first k eigenvalues of a shape.

    Contours always use ring FEM; ``order`` selects linear or cubic FEM for
    meshes. Results are cached under (shape hash, discretization, k, tol), so
    a repeated call is a bit-identical cache hit.
    """
    cache = _GLOBAL_CACHE if cache is None else cache
    disc = "contour_fem" if isinstance(shape, Contour) else f"{order}_fem"
    key = f"{_shape_hash(shape)}_{disc}_{k}_{tol:.3e}"
    hit = cache.get(key)
    if hit is not None:
        return hit
    pair = assemble(shape, order=order)
    spec = smallest_k(pair, k, tol=tol).spectrum
    cache.put(key, spec)
    return spec
