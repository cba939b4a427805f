"""Complex-valued interpolation network: forward pass, exact gradients,
Adam training on scan-specific calibration data, and application to
zero-filled k-space.

Architecture: three bias-free complex convolution layers. Layer 1 sees the
zero-filled multi-coil k-space through a phase-encode-dilated kernel (taps
spaced ``rate`` rows apart, touching acquired lines only), layer 2 is a 1x1
mixing layer, layer 3 a 1 x ro_taps readout layer whose (rate-1)*n_coils
output channels predict every missing sample of one gap simultaneously.
Layers 1 and 2 are activated by a leaky rectifier applied independently to
real and imaginary parts; the output layer is linear. With no bias terms the
whole network is positively homogeneous, so k-space scaling passes through
exactly.

Complex convolution is evaluated as (a+ib)*(c+id) = (ac - bd) + i(ad + bc)
via complex matrix products over flattened windows; gradients are taken with
respect to the real and imaginary weight components independently and
returned packed as complex arrays (real part = d/d Re w, imaginary part =
d/d Im w).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import backend
from ._windows import (
    gather_targets,
    missing_anchor_map,
    scatter_predictions,
    source_rows,
)
from .core import SamplingPattern, as_kspace, zero_fill
from .errors import FormatError, InsufficientAcsError
from .phantom import STREAM_WEIGHTS
from .rng import SplitMix64, derive_seed


@dataclass(frozen=True)
class NetworkConfig:
    n_coils: int
    rate: int
    layer1_kernel: tuple[int, int] = (2, 5)  # (pe taps, ro taps), pe-dilated by rate
    layer1_channels: int = 256
    layer2_channels: int = 128
    layer3_ro_taps: int = 5
    leaky_slope: float = 0.01

    def __post_init__(self):
        ky, kx = self.layer1_kernel
        if ky < 2 or ky % 2 != 0:
            raise ValueError("layer-1 PE taps must be even and >= 2")
        if kx % 2 == 0 or self.layer3_ro_taps % 2 == 0:
            raise ValueError("readout kernel widths must be odd")
        if min(self.layer1_channels, self.layer2_channels) < 1:
            raise ValueError("channel counts must be >= 1")
        if self.leaky_slope <= 0:
            raise ValueError("leaky_slope must be > 0")
        if self.n_coils < 1 or self.rate < 1:
            raise ValueError("n_coils and rate must be >= 1")

    @property
    def gap(self) -> int:
        return self.layer1_kernel[0] // 2 - 1

    @property
    def out_channels(self) -> int:
        return (self.rate - 1) * self.n_coils

    @property
    def pe_extent(self) -> int:
        return (self.layer1_kernel[0] - 1) * self.rate + 1

    @property
    def ro_extent(self) -> int:
        return self.layer1_kernel[1] + self.layer3_ro_taps - 1

    @property
    def ro_center(self) -> int:
        return (self.ro_extent - 1) // 2


@dataclass
class RakiWeights:
    """Complex filter banks, each (out_ch, in_ch, pe_taps, ro_taps); no biases."""

    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray

    def copy(self) -> "RakiWeights":
        return RakiWeights(self.w1.copy(), self.w2.copy(), self.w3.copy())

    def arrays(self):
        return (self.w1, self.w2, self.w3)


@dataclass
class AdamState:
    """First/second moments per real weight component, plus the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_weights(cls, weights: RakiWeights) -> "AdamState":
        m = [np.zeros(w.shape + (2,), dtype=np.float64) for w in weights.arrays()]
        v = [np.zeros(w.shape + (2,), dtype=np.float64) for w in weights.arrays()]
        return cls(m=m, v=v)


@dataclass
class TrainReport:
    loss_history: np.ndarray
    final_loss: float
    steps: int


def cleaky_relu(z, alpha: float):
    """Leaky rectifier on real and imaginary parts independently."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    return backend.cleaky_forward(np.asarray(z, dtype=np.complex128), alpha)


def mse_loss(pred, target) -> float:
    """Mean of |pred - target|^2 over all complex samples."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("need at least one sample")
    diff = pred - target
    return float(np.mean(diff.real**2 + diff.imag**2))


def init_weights(cfg: NetworkConfig, seed: int) -> RakiWeights:
    """Seeded uniform init, [-b, b] per component with b = 1/sqrt(fan_in).

    fan_in counts real parameters feeding one output unit
    (in_ch * pe_taps * ro_taps * 2). Draw order: layer 1, 2, 3; within a
    layer, real/imaginary parts interleave in C-order of the weight array.
    """
    stream = SplitMix64(derive_seed(seed, STREAM_WEIGHTS))
    shapes = _weight_shapes(cfg)
    arrays = []
    for shape in shapes:
        fan_in = int(np.prod(shape[1:])) * 2
        bound = 1.0 / np.sqrt(fan_in)
        flat = stream.uniform(2 * int(np.prod(shape)), -bound, bound)
        arrays.append((flat[0::2] + 1j * flat[1::2]).reshape(shape))
    return RakiWeights(*arrays)


def _weight_shapes(cfg: NetworkConfig):
    ky, kx = cfg.layer1_kernel
    return (
        (cfg.layer1_channels, cfg.n_coils, ky, kx),
        (cfg.layer2_channels, cfg.layer1_channels, 1, 1),
        (cfg.out_channels, cfg.layer2_channels, 1, cfg.layer3_ro_taps),
    )


def _forward_cols(x1_cols, weights: RakiWeights, cfg: NetworkConfig, n_rows, n_ro1):
    """Plain forward pass on flattened layer-1 windows.

    Returns z3 of shape (n_rows*(n_ro1 - layer3_ro_taps + 1), out_channels).
    """
    alpha = cfg.leaky_slope
    w1m = weights.w1.reshape(cfg.layer1_channels, -1)
    w2m = weights.w2.reshape(cfg.layer2_channels, -1)
    w3m = weights.w3.reshape(cfg.out_channels, -1)
    s2 = backend.cleaky_forward(x1_cols @ w1m.T, alpha)
    s3 = backend.cleaky_forward(s2 @ w2m.T, alpha)
    s3_grid = s3.reshape(n_rows, n_ro1, cfg.layer2_channels)
    x3_cols = backend.row_windows(s3_grid, cfg.layer3_ro_taps)
    return x3_cols @ w3m.T


def _layer1_cols(ksp_zf, cfg: NetworkConfig):
    ksp_zf = as_kspace(ksp_zf)
    n_c, n_y, n_x = ksp_zf.shape
    if n_c != cfg.n_coils:
        raise ValueError(f"config expects {cfg.n_coils} coils, data has {n_c}")
    ky, kx = cfg.layer1_kernel
    n_rows = n_y - (ky - 1) * cfg.rate
    n_ro1 = n_x - kx + 1
    n_ro3 = n_ro1 - cfg.layer3_ro_taps + 1
    if n_rows < 1 or n_ro3 < 1:
        raise ValueError(
            f"input {n_y}x{n_x} smaller than the receptive field "
            f"{cfg.pe_extent}x{cfg.ro_extent}"
        )
    return backend.im2col(ksp_zf, ky, kx, cfg.rate), n_rows, n_ro1, n_ro3


def forward(ksp_zf, weights: RakiWeights, cfg: NetworkConfig) -> np.ndarray:
    """Prediction grid of shape (out_channels, n_rows, n_ro3), valid extent only.

    Output channel (r-1)*n_coils + c predicts coil c at phase-encode offset
    gap*rate + r from the window's first row and readout offset 0 from the
    window center.
    """
    x1_cols, n_rows, n_ro1, n_ro3 = _layer1_cols(ksp_zf, cfg)
    z3 = _forward_cols(x1_cols, weights, cfg, n_rows, n_ro1)
    return np.ascontiguousarray(
        z3.reshape(n_rows, n_ro3, cfg.out_channels).transpose(2, 0, 1)
    )


class _Engine:
    """Cache-blocked full-batch loss/gradient evaluator.

    The layer-1 window matrix is fixed for the life of the engine, so it and
    its conjugate are built once. Each evaluation streams over anchor-row
    chunks sized to keep every intermediate resident in cache, writing into
    preallocated buffers; weight gradients accumulate across chunks in a
    fixed order, so results do not depend on the chunking.
    """

    # target number of window rows per chunk; the intermediates for 1024
    # rows at 256 channels occupy a few MB each
    CHUNK_WINDOW_ROWS = 1024

    def __init__(self, x1_cols, targets_cols, cfg: NetworkConfig, n_rows, n_ro1):
        self.cfg = cfg
        self.n_rows = n_rows
        self.n_ro1 = n_ro1
        self.n_ro3 = n_ro1 - cfg.layer3_ro_taps + 1
        self.x1_cols = x1_cols
        self.x1_cols_conj = np.conj(x1_cols)
        self.targets_cols = targets_cols
        self.n_samples = targets_cols.size
        rows = max(1, self.CHUNK_WINDOW_ROWS // n_ro1)
        self.chunks = [
            (r0, min(r0 + rows, n_rows)) for r0 in range(0, n_rows, rows)
        ]
        m1 = rows * n_ro1
        m3 = rows * self.n_ro3
        c1, c2, c3 = cfg.layer1_channels, cfg.layer2_channels, cfg.out_channels
        k3 = c2 * cfg.layer3_ro_taps
        cplx = np.complex128
        self._z1 = np.empty((m1, c1), cplx)
        self._s2 = np.empty((m1, c1), cplx)
        self._z2 = np.empty((m1, c2), cplx)
        self._s3 = np.empty((m1, c2), cplx)
        self._x3 = np.empty((m3, k3), cplx)
        self._z3 = np.empty((m3, c3), cplx)
        self._gx3 = np.empty((m3, k3), cplx)
        self._gs3 = np.empty((m1, c2), cplx)
        self._gs2 = np.empty((m1, c1), cplx)

    def loss_and_grads(self, weights: RakiWeights):
        cfg = self.cfg
        alpha = cfg.leaky_slope
        kx3 = cfg.layer3_ro_taps
        w1t = weights.w1.reshape(cfg.layer1_channels, -1).T
        w2t = weights.w2.reshape(cfg.layer2_channels, -1).T
        w3m = weights.w3.reshape(cfg.out_channels, -1)
        w3t = w3m.T
        w3c = np.conj(w3m)
        w2c = np.conj(weights.w2.reshape(cfg.layer2_channels, -1))
        shapes = _weight_shapes(cfg)
        g_w1 = np.zeros((cfg.layer1_channels, w1t.shape[0]), np.complex128)
        g_w2 = np.zeros((cfg.layer2_channels, cfg.layer1_channels), np.complex128)
        g_w3 = np.zeros((cfg.out_channels, w3t.shape[0]), np.complex128)
        sq_sum = 0.0
        scale = 2.0 / self.n_samples
        for r0, r1 in self.chunks:
            rows = r1 - r0
            m1 = rows * self.n_ro1
            m3 = rows * self.n_ro3
            x1 = self.x1_cols[r0 * self.n_ro1 : r1 * self.n_ro1]
            x1c = self.x1_cols_conj[r0 * self.n_ro1 : r1 * self.n_ro1]
            z1 = self._z1[:m1]
            s2 = self._s2[:m1]
            z2 = self._z2[:m1]
            s3 = self._s3[:m1]
            x3 = self._x3[:m3]
            z3 = self._z3[:m3]
            gx3 = self._gx3[:m3]
            gs3 = self._gs3[:m1]
            gs2 = self._gs2[:m1]

            np.matmul(x1, w1t, out=z1)
            backend.cleaky_forward_out(z1, s2, alpha)
            np.matmul(s2, w2t, out=z2)
            backend.cleaky_forward_out(z2, s3, alpha)
            s3_grid = s3.reshape(rows, self.n_ro1, cfg.layer2_channels)
            backend.row_windows_out(s3_grid, kx3, x3)
            np.matmul(x3, w3t, out=z3)

            z3 -= self.targets_cols[r0 * self.n_ro3 : r1 * self.n_ro3]
            sq_sum += np.vdot(z3, z3).real
            z3 *= scale  # z3 now holds the output adjoint
            np.conjugate(x3, out=x3)
            g_w3 += z3.T @ x3
            np.matmul(z3, w3c, out=gx3)
            backend.row_windows_adjoint_out(gx3, rows, self.n_ro1, kx3, gs3)
            backend.cleaky_backward_inplace(z2, gs3, alpha)
            np.conjugate(s2, out=s2)
            g_w2 += gs3.T @ s2
            np.matmul(gs3, w2c, out=gs2)
            backend.cleaky_backward_inplace(z1, gs2, alpha)
            g_w1 += gs2.T @ x1c
        loss = sq_sum / self.n_samples
        return loss, (
            g_w1.reshape(shapes[0]),
            g_w2.reshape(shapes[1]),
            g_w3.reshape(shapes[2]),
        )


def gradients(ksp_zf, targets, weights: RakiWeights, cfg: NetworkConfig):
    """Exact reverse-mode gradients of mse_loss(forward(..), targets).

    ``targets`` matches the forward output grid (out_channels, n_rows,
    n_ro3). Returns (loss, (g1, g2, g3)) with gradients packed as complex
    arrays: real part = d loss / d Re(w), imag part = d loss / d Im(w).
    """
    x1_cols, n_rows, n_ro1, n_ro3 = _layer1_cols(ksp_zf, cfg)
    targets = np.asarray(targets, dtype=np.complex128)
    expected = (cfg.out_channels, n_rows, n_ro3)
    if targets.shape != expected:
        raise ValueError(f"targets shape {targets.shape} != {expected}")
    targets_cols = np.ascontiguousarray(targets.transpose(1, 2, 0)).reshape(
        n_rows * n_ro3, cfg.out_channels
    )
    engine = _Engine(x1_cols, targets_cols, cfg, n_rows, n_ro1)
    return engine.loss_and_grads(weights)


def adam_step(weights: RakiWeights, grads, state: AdamState, eta: float):
    """One Adam update per real weight component; mutates and returns both."""
    if eta <= 0:
        raise ValueError("learning rate must be > 0")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for w, g, m, v in zip(weights.arrays(), grads, state.m, state.v):
        g_f = g.view(np.float64).reshape(m.shape)
        m *= state.beta1
        m += (1.0 - state.beta1) * g_f
        v *= state.beta2
        v += (1.0 - state.beta2) * g_f**2
        w_f = w.view(np.float64).reshape(m.shape)
        w_f -= eta * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return weights, state


class TrainingProblem:
    """Cached full-batch training problem on one fully sampled block."""

    def __init__(self, block, cfg: NetworkConfig, scale: float | None = None):
        block = as_kspace(block)
        n_y = block.shape[1]
        min_rows = cfg.pe_extent
        if n_y < min_rows or block.shape[2] < cfg.ro_extent:
            raise InsufficientAcsError(
                f"training block {n_y}x{block.shape[2]} smaller than the "
                f"receptive field {min_rows}x{cfg.ro_extent}; "
                f"need at least {min_rows} rows",
                required_rows=min_rows,
            )
        if scale is None:
            scale = float(np.max(np.abs(block)))
            if scale == 0.0:
                scale = 1.0
        self.scale = scale
        self.cfg = cfg
        scaled = block / scale
        x1_cols, n_rows, n_ro1, n_ro3 = _layer1_cols(scaled, cfg)
        targets_cols = gather_targets(
            scaled, n_rows, n_ro3, cfg.rate, cfg.gap, cfg.ro_center
        )
        self.engine = _Engine(x1_cols, targets_cols, cfg, n_rows, n_ro1)

    def step(self, weights: RakiWeights, state: AdamState, eta: float) -> float:
        loss, grads = self.engine.loss_and_grads(weights)
        adam_step(weights, grads, state, eta)
        return loss

    def run(self, weights: RakiWeights, eta: float, steps: int) -> TrainReport:
        """Full-batch Adam from the given weights with a fresh optimizer state."""
        state = AdamState.for_weights(weights)
        history = np.empty(steps, dtype=np.float64)
        for k in range(steps):
            history[k] = self.step(weights, state, eta)
        final = float(history[-1]) if steps > 0 else float("nan")
        return TrainReport(history, final, steps)


def train(
    acs_block,
    pattern: SamplingPattern,
    cfg: NetworkConfig,
    eta: float = 5e-3,
    steps: int = 250,
    seed: int = 0,
):
    """Scan-specific training on a fully sampled block.

    The block is divided by its peak magnitude before training (positive
    homogeneity makes the trained network valid at any input scale; the
    normalization only stabilizes Adam). Deterministic for a fixed seed.
    """
    if pattern.rate != cfg.rate:
        raise ValueError("pattern rate and network rate disagree")
    problem = TrainingProblem(acs_block, cfg)
    weights = init_weights(cfg, seed)
    report = problem.run(weights, eta, steps)
    return weights, report


def raki_interpolate(
    ksp_zf, weights: RakiWeights, cfg: NetworkConfig, pattern: SamplingPattern
):
    """Fill every missing line with network predictions; acquired lines untouched.

    Anchors sit on acquired grid rows and wrap circularly along phase-encode;
    readout is zero-extended so the window center reaches every column.
    """
    ksp_zf = as_kspace(ksp_zf)
    n_c, n_y, n_x = ksp_zf.shape
    out = ksp_zf.copy()
    missing, anchors, anchor_of_missing, gap_index = missing_anchor_map(
        pattern, n_y, cfg.gap
    )
    if missing.size == 0:
        return out
    scale = float(np.max(np.abs(ksp_zf)))
    if scale == 0.0:
        return out
    ky, kx = cfg.layer1_kernel
    pad = cfg.ro_center
    padded = np.zeros((n_c, n_y, n_x + 2 * pad), dtype=np.complex128)
    padded[:, :, pad : pad + n_x] = ksp_zf / scale
    rows = source_rows(anchors, ky, cfg.rate, n_y)
    x1_cols = backend.gather_windows(padded, rows, kx)
    n_ro1 = (n_x + 2 * pad) - kx + 1
    z3 = _forward_cols(x1_cols, weights, cfg, anchors.size, n_ro1)
    pred = z3.reshape(anchors.size, n_x, cfg.out_channels) * scale
    scatter_predictions(out, pred, missing, anchor_of_missing, gap_index)
    return out


def raki_reconstruct(
    ksp_us,
    pattern: SamplingPattern,
    cfg: NetworkConfig | None = None,
    eta: float = 5e-3,
    steps: int = 250,
    seed: int = 0,
    acs_block=None,
):
    """Train on the in-line ACS (or a pre-scan block), then interpolate.

    Returns (reconstruction, weights, report). Acquired lines are preserved
    verbatim by construction.
    """
    ksp_us = as_kspace(ksp_us)
    if cfg is None:
        cfg = NetworkConfig(n_coils=ksp_us.shape[0], rate=pattern.rate)
    zf = zero_fill(ksp_us, pattern)
    if pattern.rate == 1:
        return zf, init_weights(cfg, seed), TrainReport(np.empty(0), float("nan"), 0)
    if acs_block is None:
        if pattern.acs_count == 0:
            raise InsufficientAcsError(
                "pattern has no ACS block and no pre-scan block was supplied",
                required_rows=cfg.pe_extent,
            )
        acs_block = zf[:, pattern.acs_start : pattern.acs_start + pattern.acs_count, :]
    weights, report = train(acs_block, pattern, cfg, eta, steps, seed)
    return raki_interpolate(zf, weights, cfg, pattern), weights, report


# ---------------------------------------------------------------------------
# Weight checkpoints.
#
# RKW1: magic "RKW1" | u32 x 7: n_coils, rate, layer1 pe taps, layer1 ro
# taps, layer1 channels, layer2 channels, layer3 ro taps | f64 leaky_slope |
# W1, W2, W3 as little-endian f64 (re, im) pairs in C-order.
# ---------------------------------------------------------------------------

_RKW_MAGIC = b"RKW1"


def save_weights(weights: RakiWeights, cfg: NetworkConfig, path):
    with open(path, "wb") as fh:
        fh.write(_RKW_MAGIC)
        fh.write(
            struct.pack(
                "<7I",
                cfg.n_coils,
                cfg.rate,
                cfg.layer1_kernel[0],
                cfg.layer1_kernel[1],
                cfg.layer1_channels,
                cfg.layer2_channels,
                cfg.layer3_ro_taps,
            )
        )
        fh.write(struct.pack("<d", cfg.leaky_slope))
        for w in weights.arrays():
            pairs = np.empty(w.shape + (2,), dtype="<f8")
            pairs[..., 0] = w.real
            pairs[..., 1] = w.imag
            fh.write(pairs.tobytes())


def load_weights(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _RKW_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {_RKW_MAGIC!r}", 0)
    header_end = 4 + 28 + 8
    if len(raw) < header_end:
        raise FormatError("truncated header", len(raw))
    ints = struct.unpack("<7I", raw[4:32])
    (slope,) = struct.unpack("<d", raw[32:40])
    cfg = NetworkConfig(
        n_coils=ints[0],
        rate=ints[1],
        layer1_kernel=(ints[2], ints[3]),
        layer1_channels=ints[4],
        layer2_channels=ints[5],
        layer3_ro_taps=ints[6],
        leaky_slope=slope,
    )
    shapes = _weight_shapes(cfg)
    total = sum(int(np.prod(s)) for s in shapes)
    expected = header_end + 16 * total
    if len(raw) != expected:
        raise FormatError(
            f"payload has {len(raw) - header_end} bytes, expected {16 * total}",
            min(len(raw), expected),
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=header_end)
    arrays = []
    pos = 0
    for shape in shapes:
        n = int(np.prod(shape))
        chunk = flat[2 * pos : 2 * (pos + n)]
        arrays.append((chunk[0::2] + 1j * chunk[1::2]).reshape(shape))
        pos += n
    return RakiWeights(*arrays), cfg
