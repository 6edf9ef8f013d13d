"""Siamese multi-task network for retargetability and binary attribute learning.

Fourteen per-attribute MLPs (input D -> H1 -> H2 -> 1, ReLU) train under a
squared-hinge loss with an l2,1 group penalty on the H1->H2 weight matrices.
Their second hidden layers concatenate into a shared representation feeding a
regression head (M*H2 -> Hr -> 1) trained with a pairwise relative loss. Both
siamese channels share one parameter set. Everything is plain numpy with
hand-derived gradients; training is deterministic per seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

N_ATTRIBUTES = 14

VARIANTS = ("full", "net-", "net+", "net*", "net&", "net@")
_VARIANT_ALIASES = {
    "full": "full",
    "net-": "net-", "net_minus": "net-",
    "net+": "net+", "net_plus": "net+",
    "net*": "net*", "net_star": "net*",
    "net&": "net&", "net_amp": "net&",
    "net@": "net@", "net_at": "net@",
}

MODEL_MAGIC = b"RTGM"
MODEL_VERSION = 1


class NetworkError(Exception):
    pass


class DivergedTraining(NetworkError):
    def __init__(self, epoch: int, step: int):
        self.epoch, self.step = epoch, step
        super().__init__(f"training diverged (NaN loss) at epoch {epoch}, step {step}")


def normalize_variant(name: str) -> str:
    key = name.lower().replace("net_", "net_").strip()
    if key not in _VARIANT_ALIASES:
        raise NetworkError(f"unknown variant {name!r}; expected one of {VARIANTS}")
    return _VARIANT_ALIASES[key]


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 1e-3     # l2,1 weight
    beta: float = 1e-4      # Frobenius weight
    tau: float = 0.1        # relative margin
    delta: float = 1e-6     # similarity threshold on |y_i - y_j|
    lr: float = 0.01
    batch_size: int = 64
    dropout: float = 0.30
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.dropout < 1.0):
            raise NetworkError("dropout must be in [0, 1)")
        if min(self.alpha, self.beta, self.tau, self.delta, self.lr) < 0:
            raise NetworkError("hyperparameters must be nonnegative")


# parameter blocks in serialization order; biases carry no Frobenius penalty
PARAM_KEYS = ("W1", "b1", "W2", "b2", "W3", "b3", "Wh1", "bh1", "Wh2", "bh2")
WEIGHT_KEYS = ("W1", "W2", "W3", "Wh1", "Wh2")


class MtlNetwork:
    """Parameter container; `variant` fixes the architecture and loss composition."""

    def __init__(self, input_dim: int, h1: int = 64, h2: int = 32, hr: int = 64,
                 variant: str = "full", params: dict[str, np.ndarray] | None = None):
        self.input_dim = input_dim
        self.h1, self.h2, self.hr = h1, h2, hr
        self.variant = normalize_variant(variant)
        self.m = N_ATTRIBUTES
        self.params = params if params is not None else self._zero_params()

    @property
    def is_direct(self) -> bool:
        return self.variant == "net-"

    @property
    def shared_dim(self) -> int:
        return self.hr if self.is_direct else self.m * self.h2

    def _zero_params(self) -> dict[str, np.ndarray]:
        d, m, h1, h2, hr = self.input_dim, self.m, self.h1, self.h2, self.hr
        if self.is_direct:
            return {
                "Wh1": np.zeros((d, hr)), "bh1": np.zeros(hr),
                "Wh2": np.zeros(hr), "bh2": np.zeros(1),
            }
        return {
            "W1": np.zeros((m, d, h1)), "b1": np.zeros((m, h1)),
            "W2": np.zeros((m, h1, h2)), "b2": np.zeros((m, h2)),
            "W3": np.zeros((m, h2)), "b3": np.zeros(m),
            "Wh1": np.zeros((m * h2, hr)), "bh1": np.zeros(hr),
            "Wh2": np.zeros(hr), "bh2": np.zeros(1),
        }

    def init_random(self, rng: np.random.Generator) -> None:
        for key, value in self.params.items():
            if key.startswith("W"):
                fan_in = value.shape[-2] if value.ndim >= 2 else value.shape[-1]
                self.params[key] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=value.shape)
        # anchor the regression output at the midpoint of the [0,1] label
        # scale; the relative loss constrains only output differences, so
        # the starting level is what fixes the absolute calibration
        self.params["bh2"] = np.full(1, 0.5)

    def copy(self) -> "MtlNetwork":
        return MtlNetwork(self.input_dim, self.h1, self.h2, self.hr, self.variant,
                          {k: v.copy() for k, v in self.params.items()})


def _relu(z):
    return np.maximum(z, 0.0)


def forward(net: MtlNetwork, x: np.ndarray, dropout_masks: dict | None = None,
            keep_prob: float = 1.0) -> dict:
    """Batched one-way forward pass; returns activations cache.

    x has shape (B, D). Inverted-dropout masks, when given, apply to the hidden
    activations only.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    p = net.params
    cache = {"x": x}

    def drop(a, name):
        if dropout_masks is not None and name in dropout_masks:
            return a * dropout_masks[name] / keep_prob
        return a

    if net.is_direct:
        zh = x @ p["Wh1"] + p["bh1"]
        ah = drop(_relu(zh), "mh")
        cache.update(zh=zh, ah=ah, shared=ah)
        cache["ystar"] = ah @ p["Wh2"] + p["bh2"][0]
        return cache

    z1 = np.einsum("bd,mdh->bmh", x, p["W1"]) + p["b1"][None]
    a1 = drop(_relu(z1), "m1")
    z2 = np.einsum("bmh,mhk->bmk", a1, p["W2"]) + p["b2"][None]
    a2 = drop(_relu(z2), "m2")
    lstar = np.einsum("bmk,mk->bm", a2, p["W3"]) + p["b3"][None]
    shared = a2.reshape(x.shape[0], net.m * net.h2)
    zh = shared @ p["Wh1"] + p["bh1"]
    ah = drop(_relu(zh), "mh")
    ystar = ah @ p["Wh2"] + p["bh2"][0]
    cache.update(z1=z1, a1=a1, z2=z2, a2=a2, lstar=lstar, shared=shared,
                 zh=zh, ah=ah, ystar=ystar)
    return cache


def backward_head(net: MtlNetwork, cache: dict, d_ystar: np.ndarray,
                  d_lstar: np.ndarray | None, grads: dict,
                  dropout_masks: dict | None = None, keep_prob: float = 1.0) -> None:
    """Accumulate parameter gradients given loss derivatives at the outputs."""
    p = net.params

    def drop_grad(d, z, name):
        mask = z > 0.0
        d = d * mask
        if dropout_masks is not None and name in dropout_masks:
            d = d * dropout_masks[name] / keep_prob
        return d

    dah = d_ystar[:, None] * p["Wh2"][None, :]
    grads["Wh2"] += cache["ah"].T @ d_ystar
    grads["bh2"] += np.array([d_ystar.sum()])
    dzh = drop_grad(dah, cache["zh"], "mh")
    grads["Wh1"] += (cache["x"] if net.is_direct else cache["shared"]).T @ dzh
    grads["bh1"] += dzh.sum(axis=0)
    if net.is_direct:
        return

    dshared = dzh @ p["Wh1"].T
    da2 = dshared.reshape(cache["a2"].shape)
    if d_lstar is not None:
        da2 = da2 + d_lstar[:, :, None] * p["W3"][None]
        grads["W3"] += np.einsum("bmk,bm->mk", cache["a2"], d_lstar)
        grads["b3"] += d_lstar.sum(axis=0)
    dz2 = drop_grad(da2, cache["z2"], "m2")
    grads["W2"] += np.einsum("bmh,bmk->mhk", cache["a1"], dz2)
    grads["b2"] += dz2.sum(axis=0)
    da1 = np.einsum("bmk,mhk->bmh", dz2, p["W2"])
    dz1 = drop_grad(da1, cache["z1"], "m1")
    grads["W1"] += np.einsum("bd,bmh->mdh", cache["x"], dz1)
    grads["b1"] += dz1.sum(axis=0)


# ----------------------------------------------------------------------- loss


def l21_penalty(net: MtlNetwork) -> float:
    """Sum over attributes of the Frobenius norm of the H1->H2 weight block."""
    if net.is_direct:
        return 0.0
    return float(sum(np.linalg.norm(net.params["W2"][k]) for k in range(net.m)))


def theta_frobenius(net: MtlNetwork) -> float:
    """Frobenius norm of all weight matrices concatenated (biases excluded)."""
    total = sum(
        float((net.params[k] ** 2).sum()) for k in WEIGHT_KEYS if k in net.params
    )
    return float(np.sqrt(total))


def loss_binary_from_outputs(lstar: np.ndarray, labels: np.ndarray,
                             alpha: float, l21: float) -> float:
    margins = np.maximum(0.0, 1.0 - labels * lstar)
    return float(0.5 * (margins**2).sum() + 0.5 * alpha * l21)


def loss_binary(net: MtlNetwork, x: np.ndarray, labels: np.ndarray,
                alpha: float) -> tuple[float, np.ndarray]:
    """Squared-hinge attribute loss plus the l2,1 penalty; returns (value, L*)."""
    cache = forward(net, x)
    lstar = cache["lstar"][0]
    return loss_binary_from_outputs(lstar, np.asarray(labels, dtype=np.float64),
                                    alpha, l21_penalty(net)), lstar


def loss_relative(ystar_i: float, ystar_j: float, indicator: int, tau: float) -> float:
    """Margin loss for ordered pairs, half squared difference for similar pairs."""
    diff = ystar_i - ystar_j
    if indicator == 1:
        return float(max(0.0, tau - diff))
    return float(0.5 * diff * diff)


@dataclass(frozen=True)
class TrainingPair:
    xi: np.ndarray
    xj: np.ndarray
    labels_i: np.ndarray
    labels_j: np.ndarray
    yi: float
    yj: float
    indicator: int

    @staticmethod
    def make(xi, xj, labels_i, labels_j, yi, yj, delta: float) -> "TrainingPair":
        """Canonicalize so y_i >= y_j; indicator is 1 iff the pair is strictly ordered."""
        if yi < yj:
            xi, xj = xj, xi
            labels_i, labels_j = labels_j, labels_i
            yi, yj = yj, yi
        indicator = 1 if (yi - yj) > delta else 0
        return TrainingPair(np.asarray(xi, dtype=np.float64), np.asarray(xj, dtype=np.float64),
                            np.asarray(labels_i, dtype=np.float64),
                            np.asarray(labels_j, dtype=np.float64),
                            float(yi), float(yj), indicator)


def _loss_terms(net: MtlNetwork, hp: Hyperparams, pair: TrainingPair,
                cache_i: dict, cache_j: dict) -> float:
    variant = net.variant
    total = hp.beta * theta_frobenius(net)
    if variant == "net-":
        total += 0.5 * float((cache_i["ystar"][0] - pair.yi) ** 2)
        total += 0.5 * float((cache_j["ystar"][0] - pair.yj) ** 2)
        return total

    if variant in ("full", "net*", "net&", "net@"):
        alpha = 0.0 if variant == "net*" else hp.alpha
        l21 = l21_penalty(net)
        total += loss_binary_from_outputs(cache_i["lstar"][0], pair.labels_i, alpha, l21)
        total += loss_binary_from_outputs(cache_j["lstar"][0], pair.labels_j, alpha, l21)
    if variant == "net@":
        total += 0.5 * float((cache_i["ystar"][0] - pair.yi) ** 2)
        total += 0.5 * float((cache_j["ystar"][0] - pair.yj) ** 2)
    else:
        total += loss_relative(float(cache_i["ystar"][0]), float(cache_j["ystar"][0]),
                               pair.indicator, hp.tau)
    return total


def total_objective(net: MtlNetwork, pair: TrainingPair, hp: Hyperparams) -> float:
    """Full siamese objective for one pair (no dropout)."""
    cache_i = forward(net, pair.xi[None, :])
    cache_j = forward(net, pair.xj[None, :])
    return _loss_terms(net, hp, pair, cache_i, cache_j)


def _output_derivatives(net: MtlNetwork, hp: Hyperparams, pair: TrainingPair,
                        cache_i: dict, cache_j: dict):
    """(d_ystar_i, d_lstar_i, d_ystar_j, d_lstar_j) for the variant's loss."""
    variant = net.variant
    yi, yj = float(cache_i["ystar"][0]), float(cache_j["ystar"][0])
    d_li = d_lj = None
    if variant == "net-":
        return yi - pair.yi, None, yj - pair.yj, None

    if variant in ("full", "net*", "net&", "net@"):
        mi = np.maximum(0.0, 1.0 - pair.labels_i * cache_i["lstar"][0])
        mj = np.maximum(0.0, 1.0 - pair.labels_j * cache_j["lstar"][0])
        d_li = -pair.labels_i * mi
        d_lj = -pair.labels_j * mj
    if variant == "net@":
        return yi - pair.yi, d_li, yj - pair.yj, d_lj
    diff = yi - yj
    if pair.indicator == 1:
        active = (hp.tau - diff) >= 0.0  # right-sided derivative at the kink
        d_yi, d_yj = (-1.0, 1.0) if active else (0.0, 0.0)
    else:
        d_yi, d_yj = diff, -diff
    return d_yi, d_li, d_yj, d_lj


def _regularizer_grads(net: MtlNetwork, hp: Hyperparams, grads: dict,
                       binary_terms: int) -> None:
    fro = theta_frobenius(net)
    if fro > 0.0:
        for key in WEIGHT_KEYS:
            if key in net.params:
                grads[key] += hp.beta * net.params[key] / fro
    alpha = hp.alpha
    if net.is_direct or net.variant in ("net+", "net*") or alpha == 0.0:
        return
    w2 = net.params["W2"]
    for k in range(net.m):
        norm = np.linalg.norm(w2[k])
        if norm > 0.0:
            # one half-alpha term per channel of the siamese pair
            grads["W2"][k] += binary_terms * 0.5 * alpha * w2[k] / norm


def backward(net: MtlNetwork, pair: TrainingPair, hp: Hyperparams) -> dict[str, np.ndarray]:
    """Exact analytic gradient of total_objective w.r.t. every parameter."""
    cache_i = forward(net, pair.xi[None, :])
    cache_j = forward(net, pair.xj[None, :])
    grads = {k: np.zeros_like(v) for k, v in net.params.items()}
    d_yi, d_li, d_yj, d_lj = _output_derivatives(net, hp, pair, cache_i, cache_j)
    backward_head(net, cache_i, np.array([d_yi]),
                  None if d_li is None else d_li[None, :], grads)
    backward_head(net, cache_j, np.array([d_yj]),
                  None if d_lj is None else d_lj[None, :], grads)
    has_binary = net.variant in ("full", "net&", "net@")
    _regularizer_grads(net, hp, grads, binary_terms=2 if has_binary else 0)
    return grads


# ------------------------------------------------------------------- training


def train(features: np.ndarray, labels: np.ndarray, scores: np.ndarray,
          hp: Hyperparams, variant: str = "full",
          h1: int = 64, h2: int = 32, hr: int = 64) -> tuple[MtlNetwork, list[float]]:
    """Mini-batch SGD over randomly drawn pairs; returns (net, per-step loss trace)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    n = features.shape[0]
    if n < 2:
        raise NetworkError("need at least 2 training images")

    variant = normalize_variant(variant)
    rng = np.random.default_rng(hp.seed)
    net = MtlNetwork(features.shape[1], h1, h2, hr, variant)
    net.init_random(rng)
    keep = 1.0 - hp.dropout

    steps_per_epoch = max(1, min(n * (n - 1) // 2, 4 * n) // hp.batch_size + 1)
    trace: list[float] = []
    for epoch in range(hp.epochs):
        for step in range(steps_per_epoch):
            batch_loss = 0.0
            grads = {k: np.zeros_like(v) for k, v in net.params.items()}
            for _ in range(hp.batch_size):
                i, j = rng.choice(n, size=2, replace=False)
                pair = TrainingPair.make(features[i], features[j], labels[i], labels[j],
                                         scores[i], scores[j], hp.delta)
                masks = _make_masks(net, rng, keep) if hp.dropout > 0 else None
                ci = forward(net, pair.xi[None, :], masks, keep)
                cj = forward(net, pair.xj[None, :], masks, keep)
                batch_loss += _loss_terms(net, hp, pair, ci, cj)
                d_yi, d_li, d_yj, d_lj = _output_derivatives(net, hp, pair, ci, cj)
                backward_head(net, ci, np.array([d_yi]),
                              None if d_li is None else d_li[None, :], grads, masks, keep)
                backward_head(net, cj, np.array([d_yj]),
                              None if d_lj is None else d_lj[None, :], grads, masks, keep)
                has_binary = variant in ("full", "net&", "net@")
                _regularizer_grads(net, hp, grads, binary_terms=2 if has_binary else 0)
            batch_loss /= hp.batch_size
            if not np.isfinite(batch_loss):
                raise DivergedTraining(epoch, step)
            for key in net.params:
                net.params[key] -= hp.lr * grads[key] / hp.batch_size
            trace.append(batch_loss)
    return net, trace


def _make_masks(net: MtlNetwork, rng: np.random.Generator, keep: float) -> dict:
    if net.is_direct:
        return {"mh": (rng.random(net.hr) < keep).astype(np.float64)}
    return {
        "m1": (rng.random((net.m, net.h1)) < keep).astype(np.float64),
        "m2": (rng.random((net.m, net.h2)) < keep).astype(np.float64),
        "mh": (rng.random(net.hr) < keep).astype(np.float64),
    }


def predict(net: MtlNetwork, x: np.ndarray):
    """One-way pass: (retargetability in [0,1], attribute flags or None, shared repr)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != net.input_dim:
        raise NetworkError(f"expected feature vector of dim {net.input_dim}, got {x.shape}")
    cache = forward(net, x[None, :])
    y = float(np.clip(cache["ystar"][0], 0.0, 1.0))
    if net.is_direct:
        return y, None, cache["shared"][0].copy()
    flags = np.where(cache["lstar"][0] > 0.5, 1, -1)
    return y, flags, cache["shared"][0].copy()


# ------------------------------------------------------------------ model file


def save_model(path: str, net: MtlNetwork) -> None:
    """Versioned binary model file; parameter blocks in PARAM_KEYS order, float32."""
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<IIIIII", MODEL_VERSION, net.input_dim, net.m,
                            net.h1, net.h2, net.hr))
        raw = net.variant.encode("utf-8")
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        for key in PARAM_KEYS:
            if key in net.params:
                f.write(np.ascontiguousarray(net.params[key], dtype="<f4").tobytes())


def load_model(path: str) -> MtlNetwork:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MODEL_MAGIC:
        raise NetworkError("bad magic, not a model file")
    version, d, m, h1, h2, hr = struct.unpack_from("<IIIIII", data, 4)
    if version != MODEL_VERSION:
        raise NetworkError(f"unsupported model version {version}")
    if m != N_ATTRIBUTES:
        raise NetworkError(f"model has {m} attributes, expected {N_ATTRIBUTES}")
    (vlen,) = struct.unpack_from("<I", data, 28)
    offset = 32
    variant = data[offset : offset + vlen].decode("utf-8")
    offset += vlen
    net = MtlNetwork(d, h1, h2, hr, variant)
    for key in PARAM_KEYS:
        if key not in net.params:
            continue
        shape = net.params[key].shape
        count = int(np.prod(shape))
        vec = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        if vec.size != count:
            raise NetworkError(f"truncated parameter block {key}")
        net.params[key] = vec.astype(np.float64).reshape(shape)
        offset += 4 * count
    return net
