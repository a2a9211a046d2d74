"""Spectrum-coupled shape autoencoder.

The model is four networks around one latent space: an encoder E and decoder
D form a plain autoencoder on shape coordinates, while a pair of coupling
maps translates between eigenvalue sequences and latent codes (``spec_to_latent``
mapping spectra in, ``latent_to_spec`` mapping codes back out). The combined
training objective is

    l = l_coords + alpha * l_spectral
    l_coords   = (1/n) ||D(E(X)) - X||_F^2          (Chamfer for point clouds)
    l_spectral = (1/k) (||pi(lam) - E(X)||^2 + ||rho(E(X)) - lam||^2)

so the two coupling maps are trained to be mutual inverses through the latent
space. Once trained, a shape is recovered from its eigenvalues alone by
``D(pi(lam))`` in a single forward pass.

Coordinates are standardized by a dataset-level centroid and scale, and
eigenvalues by the dataset median of the top retained eigenvalue; both
factors live in the bundle and are inverted on output.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .eigensolve import Spectrum, spectrum_of
from .geometry import Contour, Mesh, PointCloud, sample_pointcloud
from .neural import Adam, Net, chamfer

CHECKPOINT_MAGIC = b"ESB1"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 16
    lr: float = 1e-4
    seed: int = 0
    alpha: float = 1e-4
    lr_schedule: str = "constant"  # or "cosine": decays to 0 over the run

    def __post_init__(self):
        if min(self.epochs, self.batch_size) <= 0 or self.lr <= 0 or self.alpha < 0:
            raise ValueError("epochs, batch size, and lr must be positive; alpha >= 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")

    def lr_at(self, epoch):
        if self.lr_schedule == "cosine":
            return self.lr * 0.5 * (1.0 + np.cos(np.pi * epoch / max(self.epochs, 1)))
        return self.lr


def _dense_ae_specs(n, dim, k):
    enc = [
        {"kind": "dense", "in": n * dim, "out": 300}, {"kind": "tanh"},
        {"kind": "dense", "in": 300, "out": 200}, {"kind": "tanh"},
        {"kind": "dense", "in": 200, "out": k}, {"kind": "tanh"},
    ]
    dec = [
        {"kind": "dense", "in": k, "out": 200}, {"kind": "tanh"},
        {"kind": "dense", "in": 200, "out": n * dim},
    ]
    return enc, dec


def _coupling_spec(k):
    # batchnorm + selu after every layer except the last
    widths = [k, 80, 160, 320, 640, 320, 160, 80, k]
    spec = []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        spec.append({"kind": "dense", "in": a, "out": b})
        if i < len(widths) - 2:
            spec.append({"kind": "batchnorm", "channels": b})
            spec.append({"kind": "selu"})
    return spec


def _pointnet_spec(k):
    return [
        {"kind": "shared_dense", "in": 3, "out": 64},
        {"kind": "batchnorm", "channels": 64}, {"kind": "tanh"},
        {"kind": "shared_dense", "in": 64, "out": 128},
        {"kind": "batchnorm", "channels": 128}, {"kind": "tanh"},
        {"kind": "maxpool_points"},
        {"kind": "dense", "in": 128, "out": 64}, {"kind": "tanh"},
        {"kind": "dense", "in": 64, "out": k}, {"kind": "tanh"},
    ]


class ModelBundle:
    """Trained (or trainable) networks plus the normalization metadata.

    ``kind`` is ``"dense"`` (template-correspondence autoencoder over contours
    or meshes) or ``"pointcloud"`` (permutation-invariant encoder, fixed-size
    decoded cloud). ``with_inverse=False`` drops the latent-to-spectrum map,
    the ablated variant.
    """

    def __init__(self, kind, n, dim, k, alpha=1e-4, seed=0, with_inverse=True,
                 template_faces=None):
        if kind not in ("dense", "pointcloud"):
            raise ValueError(f"unknown bundle kind {kind!r}")
        self.kind = kind
        self.n = int(n)          # template vertex count / decoded point count
        self.dim = int(dim)
        self.k = int(k)
        self.latent_dim = int(k)
        self.alpha = float(alpha)
        self.seed = int(seed)
        self.with_inverse = bool(with_inverse)
        self.template_faces = None if template_faces is None \
            else np.asarray(template_faces, dtype=np.int64)
        if kind == "dense":
            enc_spec, dec_spec = _dense_ae_specs(self.n, self.dim, self.k)
        else:
            if dim != 3:
                raise ValueError("point-cloud bundles are 3D")
            enc_spec = _pointnet_spec(self.k)
            _, dec_spec = _dense_ae_specs(self.n, 3, self.k)
        self.encoder = Net(enc_spec, seed=seed)
        self.decoder = Net(dec_spec, seed=seed + 1)
        self.spec_to_latent_net = Net(_coupling_spec(self.k), seed=seed + 2)
        self.latent_to_spec_net = Net(_coupling_spec(self.k), seed=seed + 3) \
            if with_inverse else None
        # normalization; identity until fitted on a dataset
        self.center = np.zeros(self.dim)
        self.coord_scale = 1.0
        self.eig_scale = 1.0
        self.metadata = {}

    # -- normalization ------------------------------------------------------

    def fit_normalization(self, coords, spectra):
        """Dataset-level centroid/scale for coordinates, median top eigenvalue
        for spectra."""
        flat = coords.reshape(-1, self.dim)
        self.center = flat.mean(axis=0)
        self.coord_scale = float(np.sqrt(((flat - self.center) ** 2).sum(axis=1).mean()))
        self.eig_scale = float(np.median(spectra[:, -1]))
        if self.coord_scale <= 0 or self.eig_scale <= 0:
            raise ValueError("degenerate dataset normalization")

    def normalize_coords(self, coords):
        return ((coords - self.center) / self.coord_scale).astype(np.float32)

    def denormalize_coords(self, coords):
        return coords.astype(np.float64) * self.coord_scale + self.center

    def normalize_spectra(self, spectra):
        return (spectra / self.eig_scale).astype(np.float32)

    # -- forward passes (eval mode, single sample or batch) ------------------

    def _coords_of(self, shape):
        if isinstance(shape, Mesh):
            pts = shape.vertices
        elif isinstance(shape, Contour):
            pts = shape.points
        elif isinstance(shape, PointCloud):
            pts = shape.points
        else:
            pts = np.asarray(shape, dtype=np.float64)
        if pts.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim}-dimensional coordinates, "
                             f"got shape {pts.shape}")
        if self.kind == "dense" and pts.shape[0] != self.n:
            raise ValueError(f"dense bundle expects the {self.n}-point template, "
                             f"got {pts.shape[0]} points")
        return pts

    def encode(self, shape):
        """Latent code of a shape (eval mode, batch of one)."""
        pts = self._coords_of(shape)
        x = self.normalize_coords(pts)
        if self.kind == "dense":
            x = x.reshape(1, -1)
        else:
            x = x[None]
        return self.encoder.forward(x)[0]

    def decode(self, latent):
        """Shape carried by a latent code, in original units."""
        latent = np.asarray(latent, dtype=np.float32)
        single = latent.ndim == 1
        out = self.decoder.forward(np.atleast_2d(latent))
        pts = self.denormalize_coords(out.reshape(len(out), self.n, self.dim))
        if not single:
            return pts
        pts = pts[0]
        if self.kind == "pointcloud":
            return PointCloud(pts)
        if self.dim == 2:
            return Contour(pts)
        if self.template_faces is not None:
            return Mesh(pts, self.template_faces)
        return pts

    def spec_to_latent(self, values):
        """Latent code from a (raw) eigenvalue sequence."""
        values = values.values if isinstance(values, Spectrum) else np.asarray(values)
        if values.shape[-1] != self.k:
            raise ValueError(f"bundle expects k={self.k} eigenvalues, "
                             f"got {values.shape[-1]}")
        x = self.normalize_spectra(np.atleast_2d(values))
        out = self.spec_to_latent_net.forward(x)
        return out[0] if np.ndim(values) == 1 else out

    def latent_to_spec(self, latent):
        """Predicted eigenvalue sequence of a latent code, in raw units,
        sorted into the nondecreasing cone."""
        if self.latent_to_spec_net is None:
            raise ValueError("this bundle was trained without the inverse map")
        latent = np.asarray(latent, dtype=np.float32)
        single = latent.ndim == 1
        out = self.latent_to_spec_net.forward(np.atleast_2d(latent))
        vals = np.sort(out.astype(np.float64) * self.eig_scale, axis=1)
        return vals[0] if single else vals

    def predict_spectrum(self, shape):
        """rho(E(X)): spectrum estimate through the encoder (point clouds)."""
        vals = np.maximum(self.latent_to_spec(self.encode(shape)), 0.0)
        vals[0] = 0.0
        return Spectrum(vals, "predicted")

    def all_nets(self):
        nets = {"encoder": self.encoder, "decoder": self.decoder,
                "spec_to_latent": self.spec_to_latent_net}
        if self.latent_to_spec_net is not None:
            nets["latent_to_spec"] = self.latent_to_spec_net
        return nets

    def to_float64(self):
        """Shadow copy with float64 networks, for finite-difference checks."""
        clone = ModelBundle(self.kind, self.n, self.dim, self.k, alpha=self.alpha,
                            seed=self.seed, with_inverse=self.with_inverse,
                            template_faces=self.template_faces)
        for name, net in self.all_nets().items():
            setattr(clone, _NET_ATTR[name], net.astype(np.float64))
        clone.center = self.center.copy()
        clone.coord_scale = self.coord_scale
        clone.eig_scale = self.eig_scale
        return clone


_NET_ATTR = {"encoder": "encoder", "decoder": "decoder",
             "spec_to_latent": "spec_to_latent_net",
             "latent_to_spec": "latent_to_spec_net"}


def build_dense_model(n, k, dim=3, alpha=1e-4, seed=0, with_inverse=True,
                      template_faces=None):
    """Template autoencoder: n*dim -> 300 -> 200 -> k -> 200 -> n*dim, with the
    two k -> 80 -> 160 -> 320 -> 640 -> ... -> k coupling maps."""
    return ModelBundle("dense", n, dim, k, alpha=alpha, seed=seed,
                       with_inverse=with_inverse, template_faces=template_faces)


def build_pointcloud_model(k, decoded_points, alpha=1e-4, seed=0):
    """Permutation-invariant encoder (shared 3->64->128 layers, max-pool,
    128 -> 64 -> k head) with the dense decoder and coupling maps."""
    return ModelBundle("pointcloud", decoded_points, 3, k, alpha=alpha, seed=seed)


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def compute_loss(bundle, coords, spectra, train=False, with_grads=False):
    """(l, l_coords, l_spectral) on a batch, optionally accumulating gradients.

    ``coords`` is (B, n, dim) for dense bundles or (B, p, 3) for point-cloud
    bundles; ``spectra`` is (B, k). Both in raw units; normalization applied
    internally. Gradients (when requested) land in the nets' ``grads`` dicts.
    """
    if spectra.shape[1] != bundle.k:
        raise ValueError(f"bundle k={bundle.k} but spectra have k={spectra.shape[1]}")
    dtype = bundle.encoder.layers[0].W.dtype
    B = len(coords)
    lam = (spectra / bundle.eig_scale).astype(dtype)
    xin = ((coords - bundle.center) / bundle.coord_scale).astype(dtype)
    if bundle.kind == "dense":
        x = xin.reshape(B, -1)
    else:
        x = xin
    z = bundle.encoder.forward(x, train=train)
    xhat = bundle.decoder.forward(z, train=train)
    p = bundle.spec_to_latent_net.forward(lam, train=train)
    r = None
    if bundle.latent_to_spec_net is not None:
        r = bundle.latent_to_spec_net.forward(z, train=train)

    if bundle.kind == "dense":
        diff = (xhat - x).astype(np.float64)
        n = bundle.n
        l_coords = float((diff ** 2).sum() / (n * B))
    else:
        decoded = xhat.reshape(B, bundle.n, 3)
        l_coords, g_dec, _ = chamfer(decoded.astype(np.float64),
                                     xin.astype(np.float64), with_grads=True)

    dz_extra = (z - p).astype(np.float64)
    l_spec = float((dz_extra ** 2).sum() / (bundle.k * B))
    if r is not None:
        rdiff = (r - lam).astype(np.float64)
        l_spec += float((rdiff ** 2).sum() / (bundle.k * B))
    total = l_coords + bundle.alpha * l_spec

    if with_grads:
        if bundle.kind == "dense":
            d_xhat = (2.0 / (n * B)) * diff.astype(dtype)
        else:
            d_xhat = g_dec.reshape(B, -1).astype(dtype)
        dz = bundle.decoder.backward(d_xhat)
        coef = 2.0 * bundle.alpha / (bundle.k * B)
        if r is not None:
            dz = dz + bundle.latent_to_spec_net.backward((coef * rdiff).astype(dtype))
        dz = dz + (coef * dz_extra).astype(dtype)
        bundle.encoder.backward(dz)
        bundle.spec_to_latent_net.backward((-coef * dz_extra).astype(dtype))
    return total, l_coords, l_spec


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _gather_params(bundle):
    out = []
    for net_name, net in bundle.all_nets().items():
        for pname, arr in net.params():
            out.append((f"{net_name}/{pname}", arr))
    return out


def _gather_grads(bundle):
    out = []
    for net_name, net in bundle.all_nets().items():
        for pname, g in net.grads():
            out.append((f"{net_name}/{pname}", g))
    return out


def train_model(bundle, coords, spectra, config, on_epoch=None):
    """Adam over the combined loss; returns the per-epoch loss history.

    ``coords``/``spectra`` are the stacked training arrays (raw units). The
    dataset normalization is fitted here and stored on the bundle. Training
    is deterministic for a fixed config seed. A non-finite loss aborts with
    the last completed epoch's parameters restored; a sustained rise of the
    smoothed loss raises with diagnostics. ``on_epoch(record)`` is called
    after each epoch with the entry just appended to the history.
    """
    coords = np.asarray(coords, dtype=np.float64)
    spectra = np.asarray(spectra, dtype=np.float64)
    bundle.alpha = config.alpha
    bundle.fit_normalization(coords, spectra)
    rng = np.random.default_rng(config.seed)
    params = _gather_params(bundle)
    opt = Adam(params, lr=config.lr)
    history = []
    count = len(coords)
    last_good = None
    smoothed = []
    for epoch in range(config.epochs):
        opt.lr = config.lr_at(epoch)
        order = rng.permutation(count)
        sums = np.zeros(3)
        batches = 0
        for start in range(0, count, config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:
                continue  # batchnorm needs at least two rows
            for net in bundle.all_nets().values():
                net.zero_grad()
            l, lc, ls = compute_loss(bundle, coords[idx], spectra[idx],
                                     train=True, with_grads=True)
            if not np.isfinite(l):
                if last_good is not None:
                    for name, net in bundle.all_nets().items():
                        net.load_state(last_good[name])
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}; parameters restored to "
                    f"epoch {epoch - 1}"
                )
            opt.step(params, _gather_grads(bundle))
            sums += (l, lc, ls)
            batches += 1
        epoch_loss = sums / max(batches, 1)
        history.append({"epoch": epoch, "loss": epoch_loss[0],
                        "loss_coords": epoch_loss[1], "loss_spectral": epoch_loss[2]})
        if on_epoch is not None:
            on_epoch(history[-1])
        last_good = {name: [(k_, v.copy()) for k_, v in net.state()]
                     for name, net in bundle.all_nets().items()}
        window = 10
        smoothed.append(np.mean([h["loss"] for h in history[-window:]]))
        if len(smoothed) > 2 * window and smoothed[-1] > 4.0 * min(smoothed):
            raise TrainingDiverged(
                f"smoothed loss rose from {min(smoothed):.3e} to {smoothed[-1]:.3e} "
                f"by epoch {epoch}"
            )
    bundle.metadata.update({
        "epochs": config.epochs, "batch_size": config.batch_size, "lr": config.lr,
        "seed": config.seed, "alpha": config.alpha,
        "batchnorm_momentum": 0.9, "eval_mode": "running-stats",
        "final_loss": history[-1]["loss"] if history else None,
    })
    return history


def train_coupling(bundle, coords, spectra, config, on_epoch=None,
                   freeze_stats=True):
    """Finish the spectrum <-> latent maps against the frozen autoencoder.

    Block-coordinate pass on the same objective: the encoder and decoder stay
    fixed, so the latent codes z = E(X) become stationary regression targets
    and the two coupling maps converge instead of chasing. With
    ``freeze_stats`` (default) the batchnorm layers run on their settled
    statistics, which removes the batch-composition noise floor of train-mode
    normalization and trains the maps in exactly the mode they are used in.
    Run after ``train_model``; normalization must already be fitted.
    """
    coords = np.asarray(coords, dtype=np.float64)
    spectra = np.asarray(spectra, dtype=np.float64)
    lam_all = bundle.normalize_spectra(spectra)
    xin = bundle.normalize_coords(coords)
    x = xin.reshape(len(coords), -1) if bundle.kind == "dense" else xin
    z_all = bundle.encoder.forward(x.astype(np.float32))  # frozen targets

    nets = {"spec_to_latent": bundle.spec_to_latent_net}
    if bundle.latent_to_spec_net is not None:
        nets["latent_to_spec"] = bundle.latent_to_spec_net
    params = [(f"{n}/{p}", arr) for n, net in nets.items() for p, arr in net.params()]
    opt = Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed + 1)
    count = len(coords)
    k = bundle.k
    history = []
    for epoch in range(config.epochs):
        opt.lr = config.lr_at(epoch)
        order = rng.permutation(count)
        total = 0.0
        batches = 0
        for start in range(0, count, config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:
                continue
            lam = lam_all[idx]
            z = z_all[idx]
            for net in nets.values():
                net.zero_grad()
            train_mode = not freeze_stats
            p = bundle.spec_to_latent_net.forward(lam, train=train_mode)
            pdiff = (p - z).astype(np.float64)
            loss = float((pdiff ** 2).sum() / (k * len(idx)))
            coef = 2.0 / (k * len(idx))
            bundle.spec_to_latent_net.backward((coef * pdiff).astype(np.float32))
            if bundle.latent_to_spec_net is not None:
                r = bundle.latent_to_spec_net.forward(z, train=train_mode)
                rdiff = (r - lam).astype(np.float64)
                loss += float((rdiff ** 2).sum() / (k * len(idx)))
                bundle.latent_to_spec_net.backward((coef * rdiff).astype(np.float32))
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite coupling loss at epoch {epoch}")
            grads = [(f"{n}/{p_}", g) for n, net in nets.items()
                     for p_, g in net.grads()]
            opt.step(params, grads)
            total += loss
            batches += 1
        history.append({"epoch": epoch, "loss": total / max(batches, 1),
                        "loss_coords": 0.0, "loss_spectral": total / max(batches, 1)})
        if on_epoch is not None:
            on_epoch(history[-1])
    bundle.metadata["coupling_epochs"] = config.epochs
    return history


def write_history_csv(history, path):
    with open(path, "w") as fh:
        fh.write("epoch,loss,loss_coords,loss_spectral\n")
        for h in history:
            fh.write(f"{h['epoch']},{h['loss']:.10g},{h['loss_coords']:.10g},"
                     f"{h['loss_spectral']:.10g}\n")


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

def dense_dataset(family, count, k, order="cubic", cache=None):
    """(coords, spectra) arrays for a template-correspondence family."""
    shapes = family.samples(count)
    coords = np.stack([s.points if isinstance(s, Contour) else s.vertices
                       for s in shapes])
    spectra = np.stack([spectrum_of(s, k, order=order, cache=cache).values
                        for s in shapes])
    return coords, spectra


def cloud_dataset(family, count, k, fraction=0.2, order="cubic", cache=None,
                  seed=0, mode="uniform"):
    """(clouds, spectra): sampled surface points with mesh-derived spectra."""
    shapes = family.samples(count)
    clouds = np.stack([
        sample_pointcloud(s, fraction, seed=seed + i, mode=mode).points
        for i, s in enumerate(shapes)
    ])
    spectra = np.stack([spectrum_of(s, k, order=order, cache=cache).values
                        for s in shapes])
    return clouds, spectra


# ---------------------------------------------------------------------------
# Checkpoints: JSON manifest + little-endian float32 blobs, one file
# ---------------------------------------------------------------------------

def save_bundle(bundle, path):
    manifest = {
        "format": "eigenshape-bundle",
        "kind": bundle.kind, "n": bundle.n, "dim": bundle.dim, "k": bundle.k,
        "latent_dim": bundle.latent_dim, "alpha": bundle.alpha,
        "seed": bundle.seed, "with_inverse": bundle.with_inverse,
        "center": bundle.center.tolist(),
        "coord_scale": bundle.coord_scale, "eig_scale": bundle.eig_scale,
        "template_faces": None if bundle.template_faces is None
        else bundle.template_faces.tolist(),
        "metadata": bundle.metadata,
        "nets": {},
        "blobs": [],
    }
    blobs = []
    for net_name, net in bundle.all_nets().items():
        manifest["nets"][net_name] = net.spec
        for pname, arr in net.state():
            manifest["blobs"].append({
                "name": f"{net_name}/{pname}",
                "shape": list(arr.shape),
                "dtype": "float32",
            })
            blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    payload = json.dumps(manifest).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for b in blobs:
            fh.write(b)


def load_bundle(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic {magic!r})")
        (length,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(length))
        bundle = ModelBundle(
            manifest["kind"], manifest["n"], manifest["dim"], manifest["k"],
            alpha=manifest["alpha"], seed=manifest["seed"],
            with_inverse=manifest["with_inverse"],
            template_faces=manifest["template_faces"],
        )
        bundle.center = np.asarray(manifest["center"], dtype=np.float64)
        bundle.coord_scale = manifest["coord_scale"]
        bundle.eig_scale = manifest["eig_scale"]
        bundle.metadata = manifest.get("metadata", {})
        states = {name: [] for name in manifest["nets"]}
        for blob in manifest["blobs"]:
            n_items = int(np.prod(blob["shape"])) if blob["shape"] else 1
            data = np.frombuffer(fh.read(4 * n_items), dtype="<f4")
            net_name, pname = blob["name"].split("/", 1)
            states[net_name].append((pname, data.reshape(blob["shape"])))
        for net_name, net in bundle.all_nets().items():
            net.load_state(states[net_name])
    return bundle
