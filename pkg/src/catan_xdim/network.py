"""Cross-dimensional policy/value network in plain numpy.

Activations are kept channels-last internally, ``(B, rows, cols, C)``; the
public inputs use the ``(B, C, rows, cols)`` layout of ``StateEncoding``.
Backpropagation is written out by hand for the fixed layer family.

A hidden Xdim layer maps ``(X, s)`` to::

    Y = act(conv(X) + inflate(W_infl s) [+ X])
    z = act(W_dense s + b + W_defl deflate(X) [+ s])

where the bracketed skips are the residual variant on shape-preserving
layers.  Layer ``i`` uses tanh when ``i`` is even and leaky-ReLU otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from catan_xdim.encoding import (
    CELLS,
    COLS,
    KERNEL_COLS,
    KERNEL_ROWS,
    N_BOARD_CHANNELS,
    N_POLICY_CHANNELS,
    N_SCALAR_ACTIONS,
    N_SCALAR_ACTIONS_COMPAT,
    N_SCALARS,
    ROWS,
)

ARCHITECTURES = ("Xdim", "XdimRes", "CNNRes")
PAD_R, PAD_C = KERNEL_ROWS // 2, KERNEL_COLS // 2
KSIZE = KERNEL_ROWS * KERNEL_COLS


class ShapeMismatch(ValueError):
    pass


class EmptyMask(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    architecture: str = "Xdim"
    layers: int = 8
    channels: int = 15
    scalars: int = 40
    baseline_channels: int = 40
    leaky_slope: float = 0.01
    compat117: bool = False

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.layers < 2:
            raise ValueError("layers must be >= 2")
        if min(self.channels, self.scalars, self.baseline_channels) < 1:
            raise ValueError("widths must be >= 1")

    @property
    def n_scalar_actions(self) -> int:
        return N_SCALAR_ACTIONS_COMPAT if self.compat117 else N_SCALAR_ACTIONS

    @property
    def n_actions(self) -> int:
        return N_POLICY_CHANNELS * CELLS + self.n_scalar_actions


@dataclass
class NetworkParams:
    config: NetworkConfig
    arrays: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def astype(self, dtype) -> "NetworkParams":
        return NetworkParams(self.config, {k: v.astype(dtype) for k, v in self.arrays.items()})

    @property
    def dtype(self):
        return next(iter(self.arrays.values())).dtype

    def shapes(self) -> dict[str, tuple]:
        return {k: v.shape for k, v in self.arrays.items()}


@dataclass
class NetworkOutput:
    logits: np.ndarray   # (B, n_actions): spatial channel-major, then scalar
    value: np.ndarray    # (B,)
    cache: Optional[dict] = field(default=None, repr=False)

    @property
    def spatial_logits(self) -> np.ndarray:
        b = self.logits.shape[0]
        return self.logits[:, : N_POLICY_CHANNELS * CELLS].reshape(
            b, N_POLICY_CHANNELS, ROWS, COLS)

    @property
    def scalar_logits(self) -> np.ndarray:
        return self.logits[:, N_POLICY_CHANNELS * CELLS:]


# ---------------------------------------------------------------------------
# Shapes and initialization
# ---------------------------------------------------------------------------

def param_shapes(config: NetworkConfig) -> dict[str, tuple]:
    shapes: dict[str, tuple] = {}
    S = config.n_scalar_actions
    if config.architecture == "CNNRes":
        cin = N_BOARD_CHANNELS + N_SCALARS
        C = config.baseline_channels
        for i in range(config.layers):
            shapes[f"layer{i}.conv_w"] = (C, cin, KERNEL_ROWS, KERNEL_COLS)
            shapes[f"layer{i}.conv_b"] = (C,)
            cin = C
        shapes["policy_w"] = (N_POLICY_CHANNELS, C)
        shapes["policy_b"] = (N_POLICY_CHANNELS,)
        shapes["scalar_w"] = (S, 2 * C)
        shapes["scalar_b"] = (S,)
        shapes["value_w"] = (1, 2 * C)
        shapes["value_b"] = (1,)
        return shapes
    cin, nin = N_BOARD_CHANNELS, N_SCALARS
    C, N = config.channels, config.scalars
    for i in range(config.layers):
        shapes[f"layer{i}.conv_w"] = (C, cin, KERNEL_ROWS, KERNEL_COLS)
        shapes[f"layer{i}.conv_b"] = (C,)
        shapes[f"layer{i}.dense_w"] = (N, nin)
        shapes[f"layer{i}.dense_b"] = (N,)
        shapes[f"layer{i}.defl_w"] = (N, 2 * cin)
        shapes[f"layer{i}.infl_w"] = (C, nin)
        cin, nin = C, N
    shapes["policy_w"] = (N_POLICY_CHANNELS, C)
    shapes["policy_b"] = (N_POLICY_CHANNELS,)
    shapes["scalar_w"] = (S, N)
    shapes["scalar_b"] = (S,)
    shapes["value_w"] = (1, N)
    shapes["value_b"] = (1,)
    return shapes


def glorot_bound(shape: tuple) -> float:
    if len(shape) == 4:
        fan_in, fan_out = shape[1] * KSIZE, shape[0] * KSIZE
    else:
        fan_in, fan_out = shape[1], shape[0]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


HEAD_WEIGHTS = ("policy_w", "scalar_w", "value_w")


def init_network(config: NetworkConfig, rng: np.random.Generator,
                 dtype=np.float32, zero_heads: bool = False) -> NetworkParams:
    """Glorot-uniform weights and zero biases.

    ``zero_heads`` also zeroes the three output heads, so the initial policy
    is uniform over legal actions and the initial value is 0.
    """
    arrays = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 1 or (zero_heads and name in HEAD_WEIGHTS):
            arrays[name] = np.zeros(shape, dtype=dtype)
        else:
            bound = glorot_bound(shape)
            arrays[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return NetworkParams(config, arrays)


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def inflate(scalars: np.ndarray, grid_shape: tuple[int, int] = (ROWS, COLS)) -> np.ndarray:
    """(..., N) -> (..., N, rows, cols), each channel filled with its scalar."""
    scalars = np.asarray(scalars)
    return np.broadcast_to(scalars[..., None, None], scalars.shape + tuple(grid_shape)).copy()


def deflate(channels: np.ndarray) -> np.ndarray:
    """(..., C, rows, cols) -> (..., 2C) as (mean_0, var_0, mean_1, var_1, ...)."""
    channels = np.asarray(channels)
    mean = channels.mean(axis=(-2, -1))
    var = channels.var(axis=(-2, -1))
    return np.stack([mean, var], axis=-1).reshape(*mean.shape[:-1], -1)


def _deflate_last(x: np.ndarray):
    """Channels-last deflation; also returns the mean for backprop."""
    mean = x.mean(axis=(1, 2))
    var = x.var(axis=(1, 2))
    return np.stack([mean, var], axis=-1).reshape(x.shape[0], -1), mean


def _pad(x: np.ndarray) -> np.ndarray:
    b, h, w, c = x.shape
    xp = np.zeros((b, h + 2 * PAD_R, w + 2 * PAD_C, c), dtype=x.dtype)
    xp[:, PAD_R:PAD_R + h, PAD_C:PAD_C + w] = x
    return xp


def _im2col(x: np.ndarray) -> np.ndarray:
    """Rows are output cells; columns are ordered (kernel row, kernel col, channel)."""
    b, h, w, c = x.shape
    win = sliding_window_view(_pad(x), (KERNEL_ROWS, KERNEL_COLS), axis=(1, 2))
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(b * h * w, KSIZE * c)


def _flat_kernel(w: np.ndarray) -> np.ndarray:
    """(Cout, Cin, kr, kc) -> (Cout, kr*kc*Cin) matching ``_im2col`` columns."""
    return w.transpose(0, 2, 3, 1).reshape(w.shape[0], -1)


def _unflat_kernel(wf: np.ndarray, shape: tuple) -> np.ndarray:
    cout, cin, kr, kc = shape
    return wf.reshape(cout, kr, kc, cin).transpose(0, 3, 1, 2)


def _col2im(dcols: np.ndarray, shape: tuple) -> np.ndarray:
    b, h, w, c = shape
    d = dcols.reshape(b, h, w, KERNEL_ROWS, KERNEL_COLS, c)
    dxp = np.zeros((b, h + 2 * PAD_R, w + 2 * PAD_C, c), dtype=dcols.dtype)
    for i in range(KERNEL_ROWS):
        for j in range(KERNEL_COLS):
            dxp[:, i:i + h, j:j + w, :] += d[:, :, :, i, j, :]
    return dxp[:, PAD_R:PAD_R + h, PAD_C:PAD_C + w, :]


def _act(pre: np.ndarray, layer: int, slope: float) -> np.ndarray:
    if layer % 2 == 0:
        return np.tanh(pre)
    return np.where(pre > 0, pre, slope * pre)


def _act_grad(pre: np.ndarray, out: np.ndarray, layer: int, slope: float) -> np.ndarray:
    if layer % 2 == 0:
        return 1.0 - out * out
    return np.where(pre > 0, 1.0, slope).astype(pre.dtype)


def _residual(config: NetworkConfig, layer: int) -> bool:
    return config.architecture != "Xdim" and layer > 0


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

def _prepare(params: NetworkParams, channels, scalars):
    channels = np.asarray(channels, dtype=params.dtype)
    scalars = np.asarray(scalars, dtype=params.dtype)
    if channels.ndim == 3:
        channels = channels[None]
    if scalars.ndim == 1:
        scalars = scalars[None]
    if channels.shape[1:] != (N_BOARD_CHANNELS, ROWS, COLS):
        raise ShapeMismatch(f"channels shape {channels.shape}")
    if scalars.shape[1:] != (N_SCALARS,) or scalars.shape[0] != channels.shape[0]:
        raise ShapeMismatch(f"scalars shape {scalars.shape}")
    return channels.transpose(0, 2, 3, 1), scalars


def forward(params: NetworkParams, channels, scalars, keep_cache: bool = False) -> NetworkOutput:
    """Run the network on a batch (or a single unbatched encoding)."""
    cfg = params.config
    p = params.arrays
    x, s = _prepare(params, channels, scalars)
    b = x.shape[0]
    slope = cfg.leaky_slope
    layers = []
    if cfg.architecture == "CNNRes":
        x = np.concatenate(
            [x, np.broadcast_to(s[:, None, None, :], (b, ROWS, COLS, s.shape[1]))], axis=-1)
    for i in range(cfg.layers):
        cols = _im2col(x)
        ypre = (cols @ _flat_kernel(p[f"layer{i}.conv_w"]).T).reshape(b, ROWS, COLS, -1)
        ypre += p[f"layer{i}.conv_b"]
        rec = {"x": x, "cols": cols}
        if cfg.architecture != "CNNRes":
            ypre += (s @ p[f"layer{i}.infl_w"].T)[:, None, None, :]
            defl, mean = _deflate_last(x)
            zpre = s @ p[f"layer{i}.dense_w"].T + p[f"layer{i}.dense_b"] + defl @ p[f"layer{i}.defl_w"].T
            if _residual(cfg, i):
                ypre += x
                zpre += s
            z = _act(zpre, i, slope)
            rec.update(s=s, defl=defl, mean=mean, zpre=zpre, z=z)
            s = z
        elif _residual(cfg, i):
            ypre += x
        y = _act(ypre, i, slope)
        rec.update(ypre=ypre, y=y)
        layers.append(rec)
        x = y
    spatial = x @ p["policy_w"].T + p["policy_b"]          # (B, R, C, 5)
    spatial = spatial.transpose(0, 3, 1, 2).reshape(b, -1)
    if cfg.architecture == "CNNRes":
        head_in, head_mean = _deflate_last(x)
    else:
        head_in, head_mean = s, None
    scalar = head_in @ p["scalar_w"].T + p["scalar_b"]
    value = np.tanh(head_in @ p["value_w"][0] + p["value_b"][0])
    logits = np.concatenate([spatial, scalar], axis=1)
    cache = None
    if keep_cache:
        cache = {"layers": layers, "top": x, "head_in": head_in, "head_mean": head_mean}
    return NetworkOutput(logits, value, cache)


# ---------------------------------------------------------------------------
# Policy
# ---------------------------------------------------------------------------

def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Log-probabilities over set mask bits; -inf elsewhere."""
    if not np.all(mask.any(axis=-1)):
        raise EmptyMask("mask has no legal action")
    masked = np.where(mask, logits, -np.inf)
    top = masked.max(axis=-1, keepdims=True)
    shifted = masked - top
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def masked_policy(out: NetworkOutput | np.ndarray, mask: np.ndarray) -> np.ndarray:
    logits = out.logits if isinstance(out, NetworkOutput) else np.asarray(out)
    mask = np.asarray(mask, dtype=bool)
    single = logits.ndim == 1
    if single:
        logits, mask = logits[None], mask[None]
    probs = np.exp(masked_log_softmax(logits, mask))
    return probs[0] if single else probs


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossCoefficients:
    policy: float = 1.0
    value: float = 1e3
    entropy: float = 1e-4
    activity: float = 1e-8
    weight: float = 1e-4


def compute_targets(batch, params: NetworkParams, gamma: float = 1.0,
                    value: Optional[np.ndarray] = None):
    """One-step TD targets ``r + gamma v(s')`` (no bootstrap at terminals) and
    advantages ``target - v(s)``."""
    if value is None:
        value = forward(params, batch.channels, batch.scalars).value
    rewards = np.asarray(batch.rewards, dtype=np.float64)
    terminal = np.asarray(batch.terminal, dtype=bool)
    boot = np.zeros(len(rewards))
    live = ~terminal
    if gamma != 0.0 and live.any():
        boot[live] = forward(params, batch.next_channels[live], batch.next_scalars[live]).value
    targets = rewards + gamma * boot
    return targets - value, targets


def _backward(params: NetworkParams, cache: dict, dlogits: np.ndarray,
              dvalue_pre: np.ndarray) -> dict[str, np.ndarray]:
    cfg = params.config
    p = params.arrays
    slope = cfg.leaky_slope
    grads: dict[str, np.ndarray] = {}
    b = dlogits.shape[0]
    n_spatial = N_POLICY_CHANNELS * CELLS
    top = cache["top"]
    head_in = cache["head_in"]

    dsp = dlogits[:, :n_spatial].reshape(b, N_POLICY_CHANNELS, ROWS, COLS).transpose(0, 2, 3, 1)
    grads["policy_w"] = dsp.reshape(-1, N_POLICY_CHANNELS).T @ top.reshape(-1, top.shape[-1])
    grads["policy_b"] = dsp.sum(axis=(0, 1, 2))
    dx = dsp @ p["policy_w"]

    dsc = dlogits[:, n_spatial:]
    grads["scalar_w"] = dsc.T @ head_in
    grads["scalar_b"] = dsc.sum(axis=0)
    grads["value_w"] = (dvalue_pre @ head_in)[None]
    grads["value_b"] = np.array([dvalue_pre.sum()], dtype=dlogits.dtype)
    dhead = dsc @ p["scalar_w"] + np.outer(dvalue_pre, p["value_w"][0])

    if cfg.architecture == "CNNRes":
        dx = dx + _deflate_backward(dhead, top, cache["head_mean"])
        ds = None
    else:
        ds = dhead

    for i in reversed(range(cfg.layers)):
        rec = cache["layers"][i]
        x = rec["x"]
        dypre = dx * _act_grad(rec["ypre"], rec["y"], i, slope)
        w = p[f"layer{i}.conv_w"]
        dyf = dypre.reshape(-1, w.shape[0])
        grads[f"layer{i}.conv_w"] = _unflat_kernel(dyf.T @ rec["cols"], w.shape)
        grads[f"layer{i}.conv_b"] = dyf.sum(axis=0)
        dx_new = _col2im(dyf @ _flat_kernel(w), x.shape)
        if _residual(cfg, i):
            dx_new = dx_new + dypre
        if cfg.architecture != "CNNRes":
            s_in = rec["s"]
            dzpre = ds * _act_grad(rec["zpre"], rec["z"], i, slope)
            dinfl = dypre.sum(axis=(1, 2))
            grads[f"layer{i}.infl_w"] = dinfl.T @ s_in
            grads[f"layer{i}.dense_w"] = dzpre.T @ s_in
            grads[f"layer{i}.dense_b"] = dzpre.sum(axis=0)
            grads[f"layer{i}.defl_w"] = dzpre.T @ rec["defl"]
            dx_new = dx_new + _deflate_backward(dzpre @ p[f"layer{i}.defl_w"], x, rec["mean"])
            ds_new = dinfl @ p[f"layer{i}.infl_w"] + dzpre @ p[f"layer{i}.dense_w"]
            if _residual(cfg, i):
                ds_new = ds_new + dzpre
            ds = ds_new
        dx = dx_new
    return {name: grads[name] for name in p}


def _deflate_backward(ddefl: np.ndarray, x: np.ndarray, mean: np.ndarray) -> np.ndarray:
    b, h, w, c = x.shape
    n = h * w
    dmean = ddefl[:, 0::2]
    dvar = ddefl[:, 1::2]
    return (dmean[:, None, None, :] / n
            + dvar[:, None, None, :] * 2.0 * (x - mean[:, None, None, :]) / n)


def loss_terms(params: NetworkParams, batch, advantages, targets,
               out: Optional[NetworkOutput] = None) -> dict[str, float]:
    """Per-term losses (batch means; weight L2 is a plain sum)."""
    if out is None:
        out = forward(params, batch.channels, batch.scalars)
    logp = masked_log_softmax(out.logits, batch.masks)
    probs = np.exp(logp)
    rows = np.arange(len(batch.actions))
    logp_a = logp[rows, batch.actions]
    plogp = np.where(batch.masks, probs * np.where(batch.masks, logp, 0.0), 0.0).sum(axis=1)
    return {
        "policy_loss": float(-(advantages * logp_a).mean()),
        "value_loss": float((0.5 * (targets - out.value) ** 2).mean()),
        "neg_entropy": float(plogp.mean()),
        "logit_l2": float((out.logits.astype(np.float64) ** 2).sum(axis=1).mean()),
        "weight_l2": float(sum((v.astype(np.float64) ** 2).sum() for v in params.arrays.values())),
    }


def total_loss(terms: dict[str, float], coeffs: LossCoefficients) -> float:
    return (coeffs.policy * terms["policy_loss"] + coeffs.value * terms["value_loss"]
            + coeffs.entropy * terms["neg_entropy"] + coeffs.activity * terms["logit_l2"]
            + coeffs.weight * terms["weight_l2"])


def loss_and_gradients(params: NetworkParams, batch, coeffs: LossCoefficients = LossCoefficients(),
                       gamma: float = 1.0, targets=None):
    """Gradients for descent on the combined objective.

    ``targets`` may be an ``(advantages, value_targets)`` pair; otherwise they
    are computed with ``compute_targets`` and held constant.
    Returns ``(diagnostics, grads)``.
    """
    if not np.all(np.asarray(batch.masks)[np.arange(len(batch.actions)), batch.actions]):
        raise ValueError("an experience's action is not set in its mask")
    out = forward(params, batch.channels, batch.scalars, keep_cache=True)
    if out.logits.shape[1] != batch.masks.shape[1]:
        raise ShapeMismatch(f"mask width {batch.masks.shape[1]} != {out.logits.shape[1]}")
    if targets is None:
        adv, tgt = compute_targets(batch, params, gamma, value=out.value)
    else:
        adv, tgt = targets
    dtype = params.dtype
    adv = np.asarray(adv, dtype=dtype)
    tgt = np.asarray(tgt, dtype=dtype)
    b = len(batch.actions)
    masks = batch.masks
    logp = masked_log_softmax(out.logits, masks)
    probs = np.exp(logp)
    safe_logp = np.where(masks, logp, 0.0)
    plogp = (probs * safe_logp).sum(axis=1)

    onehot = np.zeros_like(probs)
    onehot[np.arange(b), batch.actions] = 1.0
    dlogits = coeffs.policy * (-adv[:, None]) * (onehot - probs)
    dlogits += coeffs.entropy * probs * (safe_logp - plogp[:, None])
    dlogits = np.where(masks, dlogits, 0.0)
    dlogits += coeffs.activity * 2.0 * out.logits
    dlogits /= b
    dvalue_pre = coeffs.value * (out.value - tgt) * (1.0 - out.value ** 2) / b

    grads = _backward(params, out.cache, dlogits.astype(dtype), dvalue_pre.astype(dtype))
    if coeffs.weight:
        for name, v in params.arrays.items():
            grads[name] = grads[name] + 2.0 * coeffs.weight * v

    terms = loss_terms(params, batch, adv, tgt, out)
    diag = dict(terms)
    diag["entropy"] = -terms["neg_entropy"]
    diag["total"] = total_loss(terms, coeffs)
    diag["mean_advantage"] = float(adv.mean())
    diag["mean_value"] = float(out.value.mean())
    return diag, grads
