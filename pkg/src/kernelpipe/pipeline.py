"""The five pipeline stages as device kernels over the emulated OpenCL model.

Stage I/O always round-trips through global memory: the host transfers the
image and all weights in, each kernel reads global memory, computes, and
writes its outputs back, and consecutive stages are chained in-order through
completion events.  Fixed-point arithmetic matches
:mod:`kernelpipe.reference` bit for bit: exact integer accumulation, bias
aligned by a left shift, one round-to-nearest-even narrowing per output
element, saturation instead of wraparound.

Default launch geometry (all extents divide evenly; tunable, nothing in the
math depends on it): conv_pool1 (12,12,20)/(4,4,1), conv2 (8,8,50)/(4,4,1),
pool2 (4,4,50)/(4,4,1), ip1_relu (500)/(20), ip2 (10)/(10).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netdef import AVG_POOL, MAX_POOL, STAGE_NAMES
from .ocl import Buffer, CommandQueue, KernelDef, NdRange, ParallelMode
from .reference import winner_digit
from .tensors import (
    FixedPointOverflowError,
    QFormat,
    Shape,
    Tensor,
    accumulation_is_static_safe,
    accumulator_limit,
    dequantize_array,
    div_round_even,
    quantize_array,
    rshift_round_even,
)
from .weights import WeightStore

STAGE_NDRANGES = {
    "conv_pool1": NdRange((12, 12, 20), (4, 4, 1)),
    "conv2": NdRange((8, 8, 50), (4, 4, 1)),
    "pool2": NdRange((4, 4, 50), (4, 4, 1)),
    "ip1_relu": NdRange((500,), (20,)),
    "ip2": NdRange((10,), (10,)),
}

STAGE_OUTPUT_SHAPES = {
    "conv_pool1": (20, 12, 12),
    "conv2": (50, 8, 8),
    "pool2": (50, 4, 4),
    "ip1_relu": (500,),
    "ip2": (10,),
}


@dataclass(frozen=True)
class StageResult:
    """One kernel's output plus its measured global-memory footprint.

    Byte counts use the cached-global convention: first-touch unique bytes
    per kernel, matching the analytic footprints of the performance model.
    """

    name: str
    output: Tensor
    bytes_read: int
    bytes_written: int
    macs: int


@dataclass(frozen=True)
class ForwardResult:
    logits: np.ndarray        # float64 (dequantized when fixed)
    raw_logits: np.ndarray    # int64 raws, or float64 when running float
    winner: int
    stages: tuple[StageResult, ...]

    def stage(self, name: str) -> StageResult:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)


def _saturate_int(value: int, q: QFormat) -> int:
    return q.raw_max if value > q.raw_max else (q.raw_min if value < q.raw_min else value)


class _Guard:
    """Accumulator-overflow guard for one fixed-point stage.

    When the format and actual weight magnitudes prove overflow impossible
    the guard is a no-op; otherwise every work-item checks its own input
    magnitudes before accumulating and raises instead of wrapping.
    """

    __slots__ = ("active", "taps", "wmax", "bias_bound", "limit")

    def __init__(self, q: QFormat | None, taps: int, w, b):
        self.active = False
        if q is None:
            return
        self.taps = taps
        self.wmax = int(np.abs(w).max(initial=0))
        self.bias_bound = int(np.abs(b).max(initial=0)) << q.frac_bits
        self.limit = accumulator_limit(q)
        self.active = not accumulation_is_static_safe(
            taps, self.wmax, int(np.abs(b).max(initial=0)), q)

    def check(self, window):
        if self.active:
            amax = int(np.abs(window).max(initial=0))
            if self.taps * amax * self.wmax + self.bias_bound >= self.limit:
                raise FixedPointOverflowError(
                    f"accumulation of {self.taps} taps with |a|<={amax}, "
                    f"|w|<={self.wmax} can exceed the accumulator")


def _make_conv_pool1(q: QFormat | None, pool_op: str, guard: _Guard):
    frac = q.frac_bits if q else 0

    def body(ctx):
        ox, oy, m = ctx.global_id
        tile = ctx.regions["src"].read((0, slice(2 * oy, 2 * oy + 6),
                                        slice(2 * ox, 2 * ox + 6)))
        w = ctx.regions["wts"].read((m, 0))
        b = ctx.regions["bias"].read(m)
        vals = []
        if q is None:
            for dy in (0, 1):
                for dx in (0, 1):
                    vals.append(float((tile[dy:dy + 5, dx:dx + 5] * w).sum()) + b)
            out = max(vals) if pool_op == MAX_POOL else sum(vals) / 4.0
        else:
            guard.check(tile)
            bias = int(b) << frac
            for dy in (0, 1):
                for dx in (0, 1):
                    acc = int((tile[dy:dy + 5, dx:dx + 5] * w).sum()) + bias
                    vals.append(_saturate_int(rshift_round_even(acc, frac), q))
            if pool_op == MAX_POOL:
                out = max(vals)
            else:
                out = _saturate_int(div_round_even(sum(vals), 4), q)
        ctx.regions["dst"].write((m, oy, ox), out)
        ctx.count_macs(100)

    return body


def _make_conv2(q: QFormat | None, guard: _Guard):
    frac = q.frac_bits if q else 0

    def body(ctx):
        ox, oy, f = ctx.global_id
        window = ctx.regions["src"].read((slice(None), slice(oy, oy + 5),
                                          slice(ox, ox + 5)))
        w = ctx.regions["wts"].read(f)
        b = ctx.regions["bias"].read(f)
        if q is None:
            out = float((window * w).sum()) + b
        else:
            guard.check(window)
            acc = int((window * w).sum()) + (int(b) << frac)
            out = _saturate_int(rshift_round_even(acc, frac), q)
        ctx.regions["dst"].write((f, oy, ox), out)
        ctx.count_macs(500)

    return body


def _make_pool2(q: QFormat | None, pool_op: str):
    def body(ctx):
        ox, oy, c = ctx.global_id
        block = ctx.regions["src"].read((c, slice(2 * oy, 2 * oy + 2),
                                         slice(2 * ox, 2 * ox + 2)))
        if pool_op == MAX_POOL:
            out = block.max()
        elif q is None:
            out = float(block.sum()) / 4.0
        else:
            out = _saturate_int(div_round_even(int(block.sum()), 4), q)
        ctx.regions["dst"].write((c, oy, ox), out)

    return body


def _make_fc(q: QFormat | None, relu: bool, taps: int, guard: _Guard):
    frac = q.frac_bits if q else 0

    def body(ctx):
        (n,) = ctx.global_id
        x = ctx.regions["src"].read(Ellipsis).ravel()
        w = ctx.regions["wts"].read(n)
        b = ctx.regions["bias"].read(n)
        if q is None:
            out = float(np.dot(w, x)) + b
            if relu:
                out = max(0.0, out)
        else:
            guard.check(x)
            acc = int(np.dot(w, x)) + (int(b) << frac)
            out = _saturate_int(rshift_round_even(acc, frac), q)
            if relu and out < 0:
                out = 0
        ctx.regions["dst"].write(n, out)
        ctx.count_macs(taps)

    return body


def forward(image: np.ndarray, store: WeightStore, mode: ParallelMode | None = None,
            pool_op: str = MAX_POOL, lane_budget: int = 64) -> ForwardResult:
    """Run the five-stage pipeline on one 1x28x28 image.

    A fixed-point store runs the quantized engine; a float64 store runs the
    same kernels in float64.  ``mode`` widens the datapath / replicates CUs;
    it never changes the computed values.
    """
    if pool_op not in (MAX_POOL, AVG_POOL):
        raise ValueError(f"unknown pool_op {pool_op!r}")
    mode = mode or ParallelMode()
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (1, 28, 28):
        raise ValueError(f"image must have shape (1, 28, 28), got {image.shape}")

    q = store.qformat
    if q is None:
        dtype, ebytes = np.float64, 8
        image_dev = image
    else:
        dtype, ebytes = np.int64, q.element_bytes
        image_dev = quantize_array(image, q)

    def buf(name, shape):
        return Buffer(name, shape, dtype=dtype, element_bytes=ebytes)

    bufs = {
        "input": buf("input", (1, 28, 28)),
        "out_conv_pool1": buf("out_conv_pool1", STAGE_OUTPUT_SHAPES["conv_pool1"]),
        "out_conv2": buf("out_conv2", STAGE_OUTPUT_SHAPES["conv2"]),
        "out_pool2": buf("out_pool2", STAGE_OUTPUT_SHAPES["pool2"]),
        "out_ip1_relu": buf("out_ip1_relu", STAGE_OUTPUT_SHAPES["ip1_relu"]),
        "out_ip2": buf("out_ip2", STAGE_OUTPUT_SHAPES["ip2"]),
    }
    for wname, arr in store.arrays().items():
        bufs[wname] = buf(wname, arr.shape)

    guards = {
        "conv_pool1": _Guard(q, 25, store.conv1_w, store.conv1_b),
        "conv2": _Guard(q, 500, store.conv2_w, store.conv2_b),
        "ip1_relu": _Guard(q, 800, store.ip1_w, store.ip1_b),
        "ip2": _Guard(q, 500, store.ip2_w, store.ip2_b),
    }
    kernels = [
        KernelDef("conv_pool1", _make_conv_pool1(q, pool_op, guards["conv_pool1"]),
                  mode=mode, bindings={
            "src": bufs["input"], "wts": bufs["conv1_w"], "bias": bufs["conv1_b"],
            "dst": bufs["out_conv_pool1"]}),
        KernelDef("conv2", _make_conv2(q, guards["conv2"]), mode=mode, bindings={
            "src": bufs["out_conv_pool1"], "wts": bufs["conv2_w"],
            "bias": bufs["conv2_b"], "dst": bufs["out_conv2"]}),
        KernelDef("pool2", _make_pool2(q, pool_op), mode=mode, bindings={
            "src": bufs["out_conv2"], "dst": bufs["out_pool2"]}),
        KernelDef("ip1_relu", _make_fc(q, relu=True, taps=800, guard=guards["ip1_relu"]),
                  mode=mode, bindings={
            "src": bufs["out_pool2"], "wts": bufs["ip1_w"], "bias": bufs["ip1_b"],
            "dst": bufs["out_ip1_relu"]}),
        KernelDef("ip2", _make_fc(q, relu=False, taps=500, guard=guards["ip2"]),
                  mode=mode, bindings={
            "src": bufs["out_ip1_relu"], "wts": bufs["ip2_w"], "bias": bufs["ip2_b"],
            "dst": bufs["out_ip2"]}),
    ]

    queue = CommandQueue(lane_budget=lane_budget)
    write_events = [queue.enqueue_write(bufs["input"], image_dev)]
    for wname, arr in store.arrays().items():
        write_events.append(queue.enqueue_write(bufs[wname], arr))

    waits = write_events
    for kernel in kernels:
        ev = queue.enqueue_kernel(kernel, STAGE_NDRANGES[kernel.name], waits=waits)
        waits = [ev]
    queue.enqueue_read(bufs["out_ip2"], waits=waits)

    records = {rec.name: rec for rec in queue.run()}

    stages = []
    for name in STAGE_NAMES:
        rec = records[name]
        out = np.array(bufs[f"out_{name}"].array)
        shape = Shape(*STAGE_OUTPUT_SHAPES[name])
        stages.append(StageResult(
            name=name,
            output=Tensor(shape, out, q),
            bytes_read=rec.unique_bytes_read,
            bytes_written=rec.unique_bytes_written,
            macs=rec.macs,
        ))

    raw_logits = np.array(bufs["out_ip2"].array)
    logits = dequantize_array(raw_logits, q) if q else np.array(raw_logits)
    return ForwardResult(
        logits=logits,
        raw_logits=raw_logits,
        winner=winner_digit(raw_logits),
        stages=tuple(stages),
    )
