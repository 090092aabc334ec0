"""Straight-line reference implementations of the pipeline.

Two ground truths live here, both free of the execution-model machinery:

* :func:`forward_float` -- plain float64 loop nests, no quantization.  This
  is the functional baseline every fixed-point result is measured against.
* :func:`forward_quantized` -- the same structure with fixed-point
  arithmetic inserted at every step: weights and the input are quantized,
  dot products accumulate exactly in integers, and each output element is
  narrowed once (round-to-nearest-even, saturating).  Because the integer
  accumulation is exact, this path is bit-for-bit what the device engine
  must produce.

Winner selection is argmax with lowest-index tie-break throughout.
"""

from __future__ import annotations

import numpy as np

from .netdef import MAX_POOL, STAGE_NAMES
from .tensors import (
    QFormat,
    check_accumulation_bound,
    div_round_even,
    narrow_array,
    quantize_array,
)
from .weights import WeightStore


def _check_layer(x: np.ndarray, taps: int, w: np.ndarray, b: np.ndarray, q: QFormat):
    check_accumulation_bound(taps, int(np.abs(x).max(initial=0)),
                             int(np.abs(w).max(initial=0)),
                             int(np.abs(b).max(initial=0)), q)


def conv_valid(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid (unpadded) stride-1 convolution: x (C,H,W), w (M,C,k,k), b (M,)."""
    c, h, wd = x.shape
    m, _, k, _ = w.shape
    out = np.zeros((m, h - k + 1, wd - k + 1))
    for f in range(m):
        for oy in range(out.shape[1]):
            for ox in range(out.shape[2]):
                out[f, oy, ox] = np.sum(x[:, oy:oy + k, ox:ox + k] * w[f]) + b[f]
    return out


def pool_2d(x: np.ndarray, window: int, stride: int, pool_op: str) -> np.ndarray:
    c, h, w = x.shape
    out = np.zeros((c, h // stride, w // stride))
    reduce = np.max if pool_op == MAX_POOL else np.mean
    for ch in range(c):
        for oy in range(out.shape[1]):
            for ox in range(out.shape[2]):
                block = x[ch, oy * stride:oy * stride + window,
                          ox * stride:ox * stride + window]
                out[ch, oy, ox] = reduce(block)
    return out


def forward_float(image: np.ndarray, store: WeightStore,
                  pool_op: str = MAX_POOL) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Float64 forward pass; returns (logits, per-stage outputs)."""
    if store.is_fixed:
        store = store.to_float()
    image = np.asarray(image, dtype=np.float64).reshape(1, 28, 28)
    out1 = pool_2d(conv_valid(image, store.conv1_w, store.conv1_b), 2, 2, pool_op)
    out2 = conv_valid(out1, store.conv2_w, store.conv2_b)
    out3 = pool_2d(out2, 2, 2, pool_op)
    out4 = np.maximum(0.0, store.ip1_w @ out3.ravel() + store.ip1_b)
    logits = store.ip2_w @ out4 + store.ip2_b
    stages = dict(zip(STAGE_NAMES, (out1, out2, out3, out4, logits)))
    return logits, stages


def winner_digit(logits: np.ndarray) -> int:
    return int(np.argmax(logits))  # np.argmax takes the lowest index on ties


# -- fixed-point reference ---------------------------------------------------


def _conv_fixed(x: np.ndarray, w: np.ndarray, b: np.ndarray, q: QFormat) -> np.ndarray:
    """Integer valid convolution; one narrowing per output element.

    Accumulators carry scale 2**(2*frac); biases are aligned by a left
    shift before narrowing.  Exact int64 arithmetic throughout (the
    headroom check has already ruled out overflow), so the vectorized
    reduction equals the canonical-order loop nest bit for bit.
    """
    k = w.shape[2]
    _check_layer(x, w.shape[1] * k * k, w, b, q)
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    acc = np.einsum("cyxij,fcij->fyx", windows, w, dtype=np.int64)
    acc += (b << q.frac_bits)[:, None, None]
    return narrow_array(acc, q)


def _pool_fixed(x: np.ndarray, window: int, stride: int, pool_op: str,
                q: QFormat) -> np.ndarray:
    c, h, w = x.shape
    if window != stride or h % window or w % window:
        raise ValueError("reference pooling expects non-overlapping exact windows")
    blocks = x.reshape(c, h // window, window, w // window, window)
    if pool_op == MAX_POOL:
        return blocks.max(axis=(2, 4))
    sums = blocks.sum(axis=(2, 4), dtype=np.int64)
    flat = np.array([div_round_even(int(v), window * window) for v in sums.ravel()],
                    dtype=np.int64)
    return np.clip(flat.reshape(sums.shape), q.raw_min, q.raw_max)


def _fc_fixed(x: np.ndarray, w: np.ndarray, b: np.ndarray, q: QFormat) -> np.ndarray:
    _check_layer(x, x.size, w, b, q)
    acc = w @ x + (b << q.frac_bits)
    return narrow_array(acc, q)


def forward_quantized(image: np.ndarray, store: WeightStore, q: QFormat | None = None,
                      pool_op: str = MAX_POOL) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Step-quantized forward pass; returns (raw logits, per-stage raws)."""
    if store.is_fixed:
        if q is not None and q != store.qformat:
            raise ValueError("requested QFormat differs from the store's")
        q = store.qformat
    else:
        if q is None:
            raise ValueError("a QFormat is required for a float store")
        store = store.quantize(q)
    image_raw = quantize_array(np.asarray(image).reshape(1, 28, 28), q)
    conv1 = _conv_fixed(image_raw, store.conv1_w, store.conv1_b, q)
    out1 = _pool_fixed(conv1, 2, 2, pool_op, q)
    out2 = _conv_fixed(out1, store.conv2_w, store.conv2_b, q)
    out3 = _pool_fixed(out2, 2, 2, pool_op, q)
    out4 = np.maximum(0, _fc_fixed(out3.ravel(), store.ip1_w, store.ip1_b, q))
    logits = _fc_fixed(out4, store.ip2_w, store.ip2_b, q)
    stages = dict(zip(STAGE_NAMES, (out1, out2, out3, out4, logits)))
    return logits, stages
