"""Minimal reverse-mode neural blocks: dense layers, tanh/SELU, batch norm,
max-pool over points, Adam, and the Chamfer distance.

Everything operates on plain numpy arrays of up to three axes
(batch x points x channels). Layers cache what their backward pass needs
during ``forward(x, train=True)`` and release gradients through
``backward(gout)``, which also accumulates parameter gradients in
``layer.grads``. Parameters are float32; statistics and loss reductions
accumulate in float64 before casting back. Weight initialization is
uniform with fan-in scaling from a seeded generator, so builds are
reproducible.
"""

import numpy as np

SELU_ALPHA = 1.6732632423543772
SELU_LAMBDA = 1.0507009873554805
BN_EPS = 1e-5
BN_MOMENTUM = 0.9


class ShapeMismatch(ValueError):
    pass


def _check_last_dim(x, expected, who):
    if x.shape[-1] != expected:
        raise ShapeMismatch(
            f"{who}: expected last dimension {expected}, got shape {tuple(x.shape)}"
        )


class Dense:
    """Affine map on the last axis; shared across any leading axes."""

    def __init__(self, n_in, n_out, rng=None, dtype=np.float32):
        self.n_in, self.n_out = n_in, n_out
        if rng is None:
            self.W = np.zeros((n_in, n_out), dtype=dtype)
            self.b = np.zeros(n_out, dtype=dtype)
        else:
            bound = np.sqrt(6.0 / n_in)
            self.W = rng.uniform(-bound, bound, (n_in, n_out)).astype(dtype)
            self.b = np.zeros(n_out, dtype=dtype)
        self.grads = {}
        self._x = None

    def forward(self, x, train=False):
        _check_last_dim(x, self.n_in, "dense")
        self._x = x
        return x @ self.W + self.b

    def backward(self, g):
        xf = self._x.reshape(-1, self.n_in)
        gf = g.reshape(-1, self.n_out)
        self.grads["W"] = self.grads.get("W", 0) + xf.T @ gf
        self.grads["b"] = self.grads.get("b", 0) + gf.sum(axis=0)
        return g @ self.W.T

    def params(self):
        return [("W", self.W), ("b", self.b)]

    def state(self):
        return self.params()


class Tanh:
    def __init__(self):
        self.grads = {}
        self._y = None

    def forward(self, x, train=False):
        y = np.tanh(x)
        self._y = y
        return y

    def backward(self, g):
        return g * (1.0 - self._y * self._y)

    def params(self):
        return []

    def state(self):
        return []


class Selu:
    def __init__(self):
        self.grads = {}
        self._x = None

    def forward(self, x, train=False):
        self._x = x
        return np.where(x > 0, SELU_LAMBDA * x,
                        SELU_LAMBDA * SELU_ALPHA * np.expm1(x)).astype(x.dtype)

    def backward(self, g):
        x = self._x
        return g * np.where(x > 0, SELU_LAMBDA,
                            SELU_LAMBDA * SELU_ALPHA * np.exp(x)).astype(x.dtype)

    def params(self):
        return []

    def state(self):
        return []


class BatchNorm:
    """Per-channel normalization over all leading axes.

    Train mode uses in-batch statistics (and refuses a reduced count of one);
    eval mode uses the running averages, so single samples are fine. Running
    variance stores the biased estimator.
    """

    def __init__(self, channels, dtype=np.float32):
        self.channels = channels
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.grads = {}
        self._cache = None

    def forward(self, x, train=False):
        _check_last_dim(x, self.channels, "batchnorm")
        axes = tuple(range(x.ndim - 1))
        if train:
            count = int(np.prod([x.shape[a] for a in axes]))
            if count <= 1:
                raise ShapeMismatch(
                    "batchnorm in train mode needs more than one row per channel; "
                    "use eval mode or a larger batch"
                )
            mean = x.mean(axis=axes, dtype=np.float64)
            var = x.var(axis=axes, dtype=np.float64)
            self.running_mean = (BN_MOMENTUM * self.running_mean
                                 + (1 - BN_MOMENTUM) * mean).astype(self.gamma.dtype)
            self.running_var = (BN_MOMENTUM * self.running_var
                                + (1 - BN_MOMENTUM) * var).astype(self.gamma.dtype)
        else:
            mean = self.running_mean.astype(np.float64)
            var = self.running_var.astype(np.float64)
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = ((x - mean) * inv_std).astype(x.dtype)
        self._cache = (xhat, inv_std.astype(x.dtype), train, axes)
        return self.gamma * xhat + self.beta

    def backward(self, g):
        xhat, inv_std, train, axes = self._cache
        self.grads["gamma"] = self.grads.get("gamma", 0) + (g * xhat).sum(axis=axes)
        self.grads["beta"] = self.grads.get("beta", 0) + g.sum(axis=axes)
        if not train:
            return g * self.gamma * inv_std
        count = np.prod([g.shape[a] for a in axes])
        gx = g * self.gamma
        return inv_std * (gx - gx.mean(axis=axes)
                          - xhat * (gx * xhat).mean(axis=axes))

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state(self):
        return self.params() + [("running_mean", self.running_mean),
                                ("running_var", self.running_var)]


class MaxPoolPoints:
    """Max over the points axis: (batch, points, channels) -> (batch, channels)."""

    def __init__(self):
        self.grads = {}
        self._cache = None

    def forward(self, x, train=False):
        if x.ndim != 3:
            raise ShapeMismatch(f"maxpool_points needs a 3-axis input, got {tuple(x.shape)}")
        idx = x.argmax(axis=1)
        self._cache = (idx, x.shape)
        b = np.arange(x.shape[0])[:, None]
        return x[b, idx, np.arange(x.shape[2])[None, :]]

    def backward(self, g):
        idx, shape = self._cache
        out = np.zeros(shape, dtype=g.dtype)
        b = np.arange(shape[0])[:, None]
        out[b, idx, np.arange(shape[2])[None, :]] = g
        return out

    def params(self):
        return []

    def state(self):
        return []


_LAYER_KINDS = {"dense", "shared_dense", "tanh", "selu", "batchnorm", "maxpool_points"}


def _build_layer(spec, rng, dtype):
    kind = spec["kind"]
    if kind in ("dense", "shared_dense"):
        return Dense(spec["in"], spec["out"], rng=rng, dtype=dtype)
    if kind == "tanh":
        return Tanh()
    if kind == "selu":
        return Selu()
    if kind == "batchnorm":
        return BatchNorm(spec["channels"], dtype=dtype)
    if kind == "maxpool_points":
        return MaxPoolPoints()
    raise ValueError(f"unknown layer kind {kind!r} (one of {sorted(_LAYER_KINDS)})")


class Net:
    """Ordered layer stack, rebuildable bit-exactly from (spec, state)."""

    def __init__(self, spec, seed=0, dtype=np.float32):
        self.spec = [dict(s) for s in spec]
        rng = np.random.default_rng(seed)
        self.layers = [_build_layer(s, rng, dtype) for s in self.spec]

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def params(self):
        return [(f"{i}.{name}", arr)
                for i, layer in enumerate(self.layers)
                for name, arr in layer.params()]

    def grads(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, _ in layer.params():
                out.append((f"{i}.{name}", layer.grads.get(name)))
        return out

    def zero_grad(self):
        for layer in self.layers:
            layer.grads = {}

    def state(self):
        return [(f"{i}.{name}", arr)
                for i, layer in enumerate(self.layers)
                for name, arr in layer.state()]

    def load_state(self, arrays):
        """Overwrite parameters and running stats from a name -> array mapping."""
        table = dict(arrays)
        for i, layer in enumerate(self.layers):
            for name, arr in layer.state():
                key = f"{i}.{name}"
                if key not in table:
                    raise KeyError(f"missing state entry {key}")
                src = table[key]
                if src.shape != arr.shape:
                    raise ShapeMismatch(f"state {key}: {src.shape} != {arr.shape}")
                setattr(layer, name, src.astype(arr.dtype))

    def astype(self, dtype):
        """Deep copy at another precision (float64 shadow for gradient checks)."""
        clone = Net(self.spec, seed=0, dtype=dtype)
        clone.load_state([(k, v.astype(dtype)) for k, v in self.state()])
        return clone


class Adam:
    """Adam with bias correction over a fixed list of (name, array) parameters."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(arr, dtype=np.float32) for name, arr in params}
        self.v = {name: np.zeros_like(arr, dtype=np.float32) for name, arr in params}

    def step(self, params, grads):
        self.t += 1
        table = dict(grads)
        for name, arr in params:
            g = table.get(name)
            if g is None:
                continue
            if g.shape != arr.shape:
                raise ShapeMismatch(f"gradient {name}: {g.shape} != {arr.shape}")
            g = g.astype(np.float32)
            m = self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            mhat = m / (1 - self.beta1 ** self.t)
            vhat = v / (1 - self.beta2 ** self.t)
            arr -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(arr.dtype)

    def state(self):
        out = {"t": self.t}
        return out


def chamfer(a, b, with_grads=False):
    """Symmetric mean squared nearest-neighbor distance between two point sets.

    ``a`` and ``b`` are (p, d) arrays or (batch, p, d) stacks; batched inputs
    return the mean over the batch. With ``with_grads`` the gradients with
    respect to both inputs come back alongside the value.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 3:
        vals, gas, gbs = [], [], []
        for ai, bi in zip(a, b):
            v, ga, gb = chamfer(ai, bi, with_grads=True)
            vals.append(v)
            gas.append(ga)
            gbs.append(gb)
        value = float(np.mean(vals))
        if not with_grads:
            return value
        return value, np.stack(gas) / len(vals), np.stack(gbs) / len(vals)
    if a.size == 0 or b.size == 0:
        raise ValueError("chamfer distance needs nonempty point sets")
    diff = a[:, None, :] - b[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    ia = d2.argmin(axis=1)  # nearest b for each a
    ib = d2.argmin(axis=0)  # nearest a for each b
    na, nb = len(a), len(b)
    value = float(d2[np.arange(na), ia].sum(dtype=np.float64) / na
                  + d2[ib, np.arange(nb)].sum(dtype=np.float64) / nb)
    if not with_grads:
        return value
    ga = 2.0 * (a - b[ia]) / na
    gb = 2.0 * (b - a[ib]) / nb
    np.add.at(ga, ib, 2.0 * (a[ib] - b) / nb)
    np.add.at(gb, ia, 2.0 * (b[ia] - a) / na)
    return value, ga.astype(a.dtype), gb.astype(b.dtype)
