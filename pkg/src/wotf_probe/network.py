"""A small encoder-decoder phase-retrieval network with hand-written reverse-mode autodiff.

Everything runs on numpy.  Feature maps are stored channels-last
(batch, height, width, channels) internally; the public :func:`forward`
takes and returns (batch, 1, n, n) arrays.

Architecture (``n_down`` = ``n_up`` = L)::

    input -> stem conv -> DRB x L -> URB x L (each followed by a skip concat)
          -> RB x n_res -> 3x3 conv -> phase

* DRB: 3x3/2 conv -> act -> 3x3 conv, side branch 3x3/2 conv, summed, act.
* URB: 3x3/2 transposed conv -> act -> 3x3 conv, side branch 2x2/2 transposed conv.
* RB:  3x3 conv -> act -> 3x3 conv, side branch 1x1 conv.
"""

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._util import atomic_write_bytes

__all__ = [
    "Tensor",
    "conv2d",
    "conv_transpose2d",
    "leaky_relu",
    "add",
    "concat",
    "scale",
    "to_channels_last",
    "to_channels_first",
    "npcc_value",
    "npcc_loss",
    "NetworkConfig",
    "TrainConfig",
    "Network",
    "build_network",
    "forward",
    "backward",
    "AdamState",
    "adam_init",
    "adam_step",
    "TrainResult",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]


# --------------------------------------------------------------------------
# autodiff core

class Tensor:
    """An array with an optional gradient buffer and a link to the op that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, name={self.name!r})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Reverse-mode sweep from this tensor; gradients accumulate into ``.grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar tensor")
            grad = np.ones_like(self.data)
        order, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _windows(xp, kh, kw, stride):
    # (b, ho, wo, c, kh, kw) view of every kernel footprint
    return sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]


def _scatter_offsets(target, contrib, stride, ho, wo):
    # target[:, s*i + di, s*j + dj, :] += contrib[:, i, j, di, dj, :]
    kh, kw = contrib.shape[3], contrib.shape[4]
    span_h, span_w = stride * (ho - 1) + 1, stride * (wo - 1) + 1
    for di in range(kh):
        for dj in range(kw):
            target[:, di:di + span_h:stride, dj:dj + span_w:stride, :] += contrib[:, :, :, di, dj, :]


def conv2d(x, w, b, stride=1, pad=None):
    """Cross-correlation on channels-last maps; ``w`` has shape (kh, kw, c_in, c_out)."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    kh, kw, cin, cout = w.shape
    if x.shape[3] != cin:
        raise ValueError(f"conv2d expects {cin} input channels, got {x.shape[3]}")
    if pad is None:
        pad = (kh - 1) // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = _windows(xp, kh, kw, stride)
    ho, wo = win.shape[1], win.shape[2]
    out = np.tensordot(win, w.data.transpose(2, 0, 1, 3), axes=3) + b.data

    def _backward(g):
        gw = np.tensordot(win, g, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
        gb = g.sum(axis=(0, 1, 2))
        gxp = np.zeros_like(xp)
        _scatter_offsets(gxp, np.tensordot(g, w.data, axes=([3], [3])), stride, ho, wo)
        gx = gxp[:, pad:pad + x.shape[1], pad:pad + x.shape[2], :]
        return gx, gw, gb

    return Tensor(out, parents=(x, w, b), backward=_backward)


def conv_transpose2d(x, w, b, stride=2, pad=None):
    """Adjoint of a strided :func:`conv2d`; output side is ``stride * input side``.

    ``w`` has shape (kh, kw, c_in, c_out).
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    kh, kw, cin, cout = w.shape
    if x.shape[3] != cin:
        raise ValueError(f"conv_transpose2d expects {cin} input channels, got {x.shape[3]}")
    if pad is None:
        pad = (kh - 1) // 2
    bsz, h, wd, _ = x.shape
    ho, wo = stride * h, stride * wd
    full = np.zeros((bsz, stride * (h - 1) + kh, stride * (wd - 1) + kw, cout), dtype=x.data.dtype)
    if pad + ho > full.shape[1] or pad + wo > full.shape[2]:
        raise ValueError(f"transposed conv kernel {kh}x{kw} with pad {pad} cannot reach side {ho}")
    _scatter_offsets(full, np.tensordot(x.data, w.data, axes=([3], [2])), stride, h, wd)
    out = full[:, pad:pad + ho, pad:pad + wo, :] + b.data

    def _backward(g):
        gfull = np.zeros_like(full)
        gfull[:, pad:pad + ho, pad:pad + wo, :] = g
        win = _windows(gfull, kh, kw, stride)[:, :h, :wd]
        gx = np.tensordot(win, w.data.transpose(3, 0, 1, 2), axes=3)
        gw = np.tensordot(x.data, win, axes=([0, 1, 2], [0, 1, 2])).transpose(2, 3, 0, 1)
        gb = g.sum(axis=(0, 1, 2))
        return gx, gw, gb

    return Tensor(out, parents=(x, w, b), backward=_backward)


def leaky_relu(x, slope=0.01):
    x = _as_tensor(x)
    pos = x.data > 0
    out = np.where(pos, x.data, slope * x.data)
    return Tensor(out, parents=(x,), backward=lambda g: (np.where(pos, g, slope * g),))


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return Tensor(a.data + b.data, parents=(a, b), backward=lambda g: (g, g))


def scale(x, c):
    x = _as_tensor(x)
    return Tensor(c * x.data, parents=(x,), backward=lambda g: (c * g,))


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor(out, parents=tuple(tensors),
                  backward=lambda g: tuple(np.split(g, sizes, axis=axis)))


def to_channels_last(x):
    x = _as_tensor(x)
    return Tensor(x.data.transpose(0, 2, 3, 1), parents=(x,),
                  backward=lambda g: (g.transpose(0, 3, 1, 2),))


def to_channels_first(x):
    x = _as_tensor(x)
    return Tensor(x.data.transpose(0, 3, 1, 2), parents=(x,),
                  backward=lambda g: (g.transpose(0, 2, 3, 1),))


# --------------------------------------------------------------------------
# loss

def _centered(a):
    flat = a.reshape(a.shape[0], -1)
    return flat - flat.mean(axis=1, keepdims=True)


def npcc_value(est, truth):
    """Negative Pearson correlation of two arrays over all their elements."""
    est, truth = np.asarray(est, dtype=float).ravel(), np.asarray(truth, dtype=float).ravel()
    if est.shape != truth.shape:
        raise ValueError(f"npcc: shape mismatch {est.shape} vs {truth.shape}")
    e, t = est - est.mean(), truth - truth.mean()
    ne, nt = np.sqrt(e @ e), np.sqrt(t @ t)
    if ne == 0 or nt == 0:
        raise ValueError("npcc undefined: constant input has zero centered norm")
    return float(-(e @ t) / (ne * nt))


def npcc_loss(est, truth):
    """Batch-mean NPCC; ``est`` and ``truth`` have a leading batch axis."""
    est = _as_tensor(est)
    truth = np.asarray(truth.data if isinstance(truth, Tensor) else truth, dtype=est.data.dtype)
    if est.shape != truth.shape:
        raise ValueError(f"npcc: shape mismatch {est.shape} vs {truth.shape}")
    e, t = _centered(est.data), _centered(truth)
    ne, nt = np.linalg.norm(e, axis=1), np.linalg.norm(t, axis=1)
    if np.any(ne == 0) or np.any(nt == 0):
        raise ValueError("npcc undefined: constant sample has zero centered norm")
    dots = np.sum(e * t, axis=1)
    per_sample = -dots / (ne * nt)
    k = est.shape[0]

    def _backward(g):
        # d(-e.t/(|e||t|))/de, already mean-free because e and t are
        ge = -(t / (ne * nt)[:, None] - (dots / (ne ** 3 * nt))[:, None] * e)
        return ((g / k) * ge).reshape(est.shape),

    return Tensor(per_sample.mean(), parents=(est,), backward=_backward)


# --------------------------------------------------------------------------
# network

@dataclass(frozen=True)
class NetworkConfig:
    n_down_blocks: int = 2
    n_up_blocks: int = 2
    n_res_blocks: int = 1
    base_channels: int = 16
    input_side: int = 32
    main_kernel: int = 3
    up_side_kernel: int = 2
    res_side_kernel: int = 1
    leak: float = 0.01
    input_gain: float = 5.0

    def validate(self):
        if self.n_down_blocks != self.n_up_blocks:
            raise ValueError(
                f"n_down_blocks={self.n_down_blocks} and n_up_blocks={self.n_up_blocks} "
                "must match so skip connections pair up")
        for name in ("n_down_blocks", "base_channels", "input_side", "main_kernel",
                     "up_side_kernel", "res_side_kernel"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_res_blocks < 0:
            raise ValueError("n_res_blocks must be >= 0")
        if self.main_kernel % 2 == 0 or self.res_side_kernel % 2 == 0:
            raise ValueError("main and residual side kernels must be odd")
        side = self.input_side
        for i in range(self.n_down_blocks):
            if side % 2:
                raise ValueError(f"DRB {i}: input side {side} is odd; input_side must be "
                                 f"divisible by 2**{self.n_down_blocks}")
            side //= 2
        return self

    def feature_sides(self):
        """Spatial side at the output of stem, each DRB and each URB."""
        sides = [self.input_side]
        for _ in range(self.n_down_blocks):
            sides.append(sides[-1] // 2)
        for _ in range(self.n_up_blocks):
            sides.append(sides[-1] * 2)
        return sides


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 5
    epochs: int = 30
    seed: int = 0

    def validate(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        return self


class _Params:
    def __init__(self, rng, dtype):
        self.rng, self.dtype, self.tensors = rng, dtype, []

    def conv(self, name, kh, kw, cin, cout):
        bound = np.sqrt(6.0 / (kh * kw * cin))
        w = Tensor(self.rng.uniform(-bound, bound, (kh, kw, cin, cout)).astype(self.dtype),
                   requires_grad=True, name=f"{name}.w")
        b = Tensor(np.zeros(cout, dtype=self.dtype), requires_grad=True, name=f"{name}.b")
        self.tensors += [w, b]
        return w, b


class _DownBlock:
    def __init__(self, p, name, cin, cout, k, leak):
        self.a = p.conv(f"{name}.main0", k, k, cin, cout)
        self.b = p.conv(f"{name}.main1", k, k, cout, cout)
        self.side = p.conv(f"{name}.side", k, k, cin, cout)
        self.leak = leak

    def __call__(self, x):
        h = leaky_relu(conv2d(x, *self.a, stride=2), self.leak)
        h = conv2d(h, *self.b)
        return leaky_relu(add(h, conv2d(x, *self.side, stride=2)), self.leak)


class _UpBlock:
    def __init__(self, p, name, cin, cout, k, k_side, leak):
        self.a = p.conv(f"{name}.main0", k, k, cin, cout)
        self.b = p.conv(f"{name}.main1", k, k, cout, cout)
        self.side = p.conv(f"{name}.side", k_side, k_side, cin, cout)
        self.k_side, self.leak = k_side, leak

    def __call__(self, x):
        h = leaky_relu(conv_transpose2d(x, *self.a), self.leak)
        h = conv2d(h, *self.b)
        s = conv_transpose2d(x, *self.side, pad=(self.k_side - 2 + 1) // 2)
        return leaky_relu(add(h, s), self.leak)


class _ResBlock:
    def __init__(self, p, name, cin, cout, k, k_side, leak):
        self.a = p.conv(f"{name}.main0", k, k, cin, cout)
        self.b = p.conv(f"{name}.main1", k, k, cout, cout)
        self.side = p.conv(f"{name}.side", k_side, k_side, cin, cout)
        self.leak = leak

    def __call__(self, x):
        h = leaky_relu(conv2d(x, *self.a), self.leak)
        h = conv2d(h, *self.b)
        return leaky_relu(add(h, conv2d(x, *self.side)), self.leak)


class Network:
    """Parameters and block wiring; call :func:`forward` to evaluate."""

    def __init__(self, cfg: NetworkConfig, seed=0, dtype=np.float32):
        cfg.validate()
        self.cfg, self.seed, self.dtype = cfg, seed, np.dtype(dtype)
        p = _Params(np.random.default_rng(seed), self.dtype)
        c, k = cfg.base_channels, cfg.main_kernel
        self.stem = p.conv("stem", k, k, 1, c)
        chans = [c * 2 ** i for i in range(cfg.n_down_blocks + 1)]
        self.down = [_DownBlock(p, f"drb{i}", chans[i], chans[i + 1], k, cfg.leak)
                     for i in range(cfg.n_down_blocks)]
        self.up = []
        cin = chans[-1]
        for j, level in enumerate(reversed(range(cfg.n_up_blocks))):
            self.up.append(_UpBlock(p, f"urb{j}", cin, chans[level], k, cfg.up_side_kernel,
                                    cfg.leak))
            cin = 2 * chans[level]
        self.res = []
        for j in range(cfg.n_res_blocks):
            self.res.append(_ResBlock(p, f"rb{j}", cin, c, k, cfg.res_side_kernel, cfg.leak))
            cin = c
        self.head = p.conv("head", k, k, cin, 1)
        self.params = p.tensors

    @property
    def n_parameters(self):
        return int(sum(t.data.size for t in self.params))

    def parameter_arrays(self):
        return [t.data for t in self.params]

    def set_parameter_arrays(self, arrays):
        if len(arrays) != len(self.params):
            raise ValueError(f"expected {len(self.params)} parameter arrays, got {len(arrays)}")
        for t, a in zip(self.params, arrays):
            a = np.asarray(a)
            if a.shape != t.data.shape:
                raise ValueError(f"{t.name}: shape {a.shape} != {t.data.shape}")
            t.data = a.astype(self.dtype, copy=True)

    def zero_grad(self):
        for t in self.params:
            t.grad = None

    def __call__(self, batch):
        return forward(self, batch)


def build_network(cfg: NetworkConfig = NetworkConfig(), seed=0, dtype=np.float32) -> Network:
    return Network(cfg, seed=seed, dtype=dtype)


def forward(net: Network, batch):
    """Map a (b, 1, n, n) batch of intensities to a (b, 1, n, n) batch of phases.

    The network is fully convolutional: ``n`` may differ from the training
    side ``cfg.input_side`` as long as it is divisible by ``2**n_down_blocks``.
    """
    batch = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=net.dtype))
    div = 2 ** net.cfg.n_down_blocks
    if (batch.data.ndim != 4 or batch.shape[1] != 1 or batch.shape[2] != batch.shape[3]
            or batch.shape[2] % div):
        raise ValueError(f"expected input of shape (b, 1, n, n) with n divisible by {div}, "
                         f"got {batch.shape}")
    x = to_channels_last(scale(add(batch, Tensor(-np.ones_like(batch.data))),
                               net.cfg.input_gain))
    x = leaky_relu(conv2d(x, *net.stem), net.cfg.leak)
    skips = [x]
    for blk in net.down:
        x = blk(x)
        skips.append(x)
    skips.pop()
    for blk in net.up:
        x = concat([blk(x), skips.pop()])
    for blk in net.res:
        x = blk(x)
    return to_channels_first(conv2d(x, *net.head))


def backward(net: Network, loss: Tensor):
    """Clear and recompute parameter gradients of a scalar ``loss``; returns them in order."""
    if not isinstance(loss, Tensor) or loss._backward is None:
        raise RuntimeError("backward needs a loss produced by a forward pass")
    net.zero_grad()
    loss.backward()
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in net.params]


# --------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def adam_init(params) -> AdamState:
    return AdamState([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params, grads, state: AdamState, cfg: TrainConfig = TrainConfig()):
    """One bias-corrected Adam update; returns new parameter arrays and a new state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state differ in length")
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"parameter shape {p.shape} does not match gradient {g.shape}")
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        new_p.append(p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t)


# --------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    net: Network
    loss_history: list = field(default_factory=list)
    batch_losses: list = field(default_factory=list)


def train(net: Network, manifest, optics, tcfg: TrainConfig = TrainConfig(),
          max_phase=0.1 * np.pi, checkpoint_dir=None, noise_sigma=0.0, log=None):
    """Fit ``net`` to (intensity, phase) pairs from the training split with NPCC + Adam.

    Measurements are simulated with :func:`wotf_probe.optics.propagate` on the
    calibrated phases.  ``loss_history`` holds the mean training NPCC per epoch.
    """
    from .datasets import calibrate_to_phase
    from .optics import propagate

    tcfg.validate()
    entries = manifest.select("train")
    if not entries:
        raise ValueError(f"training split of {manifest.name!r} is empty")
    truths = calibrate_to_phase(np.stack([manifest.image(e) for e in entries]), max_phase)
    meas = propagate(truths, optics)
    rng = np.random.default_rng(tcfg.seed)
    if noise_sigma > 0:
        meas = meas + noise_sigma * meas.mean() * rng.standard_normal(meas.shape)
    x_all = meas[:, None].astype(net.dtype)
    y_all = truths[:, None].astype(net.dtype)
    state = adam_init(net.parameter_arrays())
    result = TrainResult(net)
    for epoch in range(tcfg.epochs):
        order = rng.permutation(len(entries))
        losses = []
        for start in range(0, len(order), tcfg.batch_size):
            idx = order[start:start + tcfg.batch_size]
            loss = npcc_loss(forward(net, x_all[idx]), y_all[idx])
            if not np.isfinite(loss.data):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}: {loss.data}")
            grads = backward(net, loss)
            params, state = adam_step(net.parameter_arrays(), grads, state, tcfg)
            for t, p in zip(net.params, params):
                t.data = p
            losses.append(float(loss.data))
        result.batch_losses.extend(losses)
        result.loss_history.append(float(np.mean(losses)))
        if log is not None:
            log(f"epoch {epoch + 1}/{tcfg.epochs}: npcc {result.loss_history[-1]:.4f}")
        if checkpoint_dir is not None:
            save_checkpoint(net, Path(checkpoint_dir) / "checkpoint.wpnn")
    return result


# --------------------------------------------------------------------------
# checkpoint
#
# Little-endian layout:
#   b"WPNN"  u32 version(=1)
#   u32 len  utf-8 JSON of NetworkConfig plus {"dtype", "seed"}
#   u32 n_params
#   n_params x [ u32 ndim, ndim x u32 dims, prod(dims) x f64 values ]
# Parameters appear in construction order (stem, DRBs, URBs, RBs, head;
# within a layer: weight then bias).

CHECKPOINT_MAGIC = b"WPNN"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(net: Network, path):
    meta = json.dumps({"config": asdict(net.cfg), "dtype": net.dtype.name, "seed": net.seed},
                      sort_keys=True).encode()
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(meta)), meta,
             struct.pack("<I", len(net.params))]
    for t in net.params:
        parts.append(struct.pack(f"<I{t.data.ndim}I", t.data.ndim, *t.data.shape))
        parts.append(t.data.astype("<f8").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def load_checkpoint(path) -> Network:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a WPNN checkpoint")
    try:
        version, meta_len = struct.unpack_from("<II", data, 4)
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        pos = 12
        meta = json.loads(data[pos:pos + meta_len])
        pos += meta_len
        net = Network(NetworkConfig(**meta["config"]), seed=meta["seed"], dtype=meta["dtype"])
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        arrays = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<I", data, pos)
            shape = struct.unpack_from(f"<{ndim}I", data, pos + 4)
            pos += 4 + 4 * ndim
            size = int(np.prod(shape))
            if pos + 8 * size > len(data):
                raise CheckpointError(f"{path}: truncated parameter buffer")
            arrays.append(np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape))
            pos += 8 * size
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    net.set_parameter_arrays(arrays)
    return net
