"""Shared fixtures: synthetic datasets and trained bundles.

Training is deterministic (same seed => byte-identical checkpoints), so
trained bundles and spectra are cached under tests/_artifacts and reused
across runs; delete that directory for a from-scratch rebuild.
"""

import pathlib

import numpy as np
import pytest

from eigenshape.geometry import ShapeFamily
from eigenshape.spectral_ae import (
    TrainConfig,
    build_dense_model,
    build_pointcloud_model,
    cloud_dataset,
    dense_dataset,
    load_bundle,
    save_bundle,
    train_model,
)

ARTIFACTS = pathlib.Path(__file__).parent / "_artifacts"

# Shared protocol: 600 training shapes, 100 held out, fixed seeds throughout.
CONTOUR_N = 256
BLOB_SUBDIV = 3
N_TRAIN, N_TEST = 600, 100
K_MAIN = 30
CONTOUR_EPOCHS = 600
BLOB_EPOCHS = 300
CLOUD_EPOCHS = 300
LR = 4e-4
CLOUD_FRACTION = 0.2


def _cached_arrays(name, builder):
    path = ARTIFACTS / f"{name}.npz"
    if path.exists():
        data = np.load(path)
        return tuple(data[k] for k in data.files)
    out = builder()
    ARTIFACTS.mkdir(exist_ok=True)
    np.savez(path, *out)
    return out


def _cached_bundle(name, builder):
    path = ARTIFACTS / f"{name}.bin"
    if path.exists():
        return load_bundle(path)
    bundle = builder()
    ARTIFACTS.mkdir(exist_ok=True)
    save_bundle(bundle, path)
    return bundle


@pytest.fixture(scope="session")
def contour_family():
    return ShapeFamily("contour2d", CONTOUR_N, seed=0)


@pytest.fixture(scope="session")
def contour_data(contour_family):
    """(coords, spectra) for 700 contours; spectra at k=60 (slice for less)."""
    return _cached_arrays(
        "contour_data",
        lambda: dense_dataset(contour_family, N_TRAIN + N_TEST, 60),
    )


@pytest.fixture(scope="session")
def blob_family():
    return ShapeFamily("blob3d", BLOB_SUBDIV, seed=1)


@pytest.fixture(scope="session")
def blob_data(blob_family):
    """(vertices, spectra) for 700 blobs, cubic FEM, k=30."""
    return _cached_arrays(
        "blob_data",
        lambda: dense_dataset(blob_family, N_TRAIN + N_TEST, K_MAIN, order="cubic"),
    )


def _train_contour(contour_data, k, with_inverse=True, alpha=1e-4):
    coords, spectra = contour_data
    bundle = build_dense_model(CONTOUR_N, k, dim=2, seed=0, with_inverse=with_inverse)
    cfg = TrainConfig(epochs=CONTOUR_EPOCHS, lr=LR, seed=0, alpha=alpha)
    train_model(bundle, coords[:N_TRAIN], spectra[:N_TRAIN, :k], cfg)
    return bundle


@pytest.fixture(scope="session")
def contour_bundle(contour_data):
    return _cached_bundle("contour_k30", lambda: _train_contour(contour_data, K_MAIN))


@pytest.fixture(scope="session")
def contour_bundle_ablated(contour_data):
    return _cached_bundle(
        "contour_k30_noinv",
        lambda: _train_contour(contour_data, K_MAIN, with_inverse=False),
    )


@pytest.fixture(scope="session")
def contour_bundle_k15(contour_data):
    return _cached_bundle("contour_k15", lambda: _train_contour(contour_data, 15))


@pytest.fixture(scope="session")
def contour_bundle_k60(contour_data):
    return _cached_bundle("contour_k60", lambda: _train_contour(contour_data, 60))


@pytest.fixture(scope="session")
def blob_bundle(blob_data):
    def build():
        from eigenshape.geometry import icosphere

        verts, spectra = blob_data
        _, faces = icosphere(BLOB_SUBDIV)  # family-wide template connectivity
        bundle = build_dense_model(verts.shape[1], K_MAIN, dim=3, seed=0,
                                   template_faces=faces)
        cfg = TrainConfig(epochs=BLOB_EPOCHS, lr=LR, seed=0)
        train_model(bundle, verts[:N_TRAIN], spectra[:N_TRAIN], cfg)
        return bundle

    return _cached_bundle("blob_k30", build)


@pytest.fixture(scope="session")
def cloud_data(blob_family):
    return _cached_arrays(
        "cloud_data",
        lambda: cloud_dataset(blob_family, N_TRAIN + N_TEST, K_MAIN,
                              fraction=CLOUD_FRACTION, seed=100),
    )


@pytest.fixture(scope="session")
def cloud_bundle(cloud_data):
    def build():
        clouds, spectra = cloud_data
        bundle = build_pointcloud_model(K_MAIN, decoded_points=256, seed=0)
        cfg = TrainConfig(epochs=CLOUD_EPOCHS, lr=LR, seed=0)
        train_model(bundle, clouds[:N_TRAIN], spectra[:N_TRAIN], cfg)
        return bundle

    return _cached_bundle("cloud_k30", build)


# --- small, fast fixtures for mechanical tests -------------------------------

@pytest.fixture(scope="session")
def mini_family():
    return ShapeFamily("contour2d", 64, seed=3, n_harmonics=4)


@pytest.fixture(scope="session")
def mini_data(mini_family):
    return _cached_arrays("mini_data", lambda: dense_dataset(mini_family, 90, 12))


@pytest.fixture(scope="session")
def mini_bundle(mini_data):
    def build():
        coords, spectra = mini_data
        bundle = build_dense_model(64, 12, dim=2, seed=0)
        train_model(bundle, coords[:80], spectra[:80],
                    TrainConfig(epochs=60, lr=4e-4, seed=0))
        return bundle

    return _cached_bundle("mini_k12", build)


def per_vertex_mse(pred, truth):
    """Mean over shapes of (1/n) ||pred - truth||_F^2, in raw units."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    return float(np.mean([(d ** 2).sum() / d.shape[0] for d in pred - truth]))
