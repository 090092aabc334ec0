"""Declarative LeNet-5 network description with shape inference.

The network is a linear pipeline of conv / pool / fully-connected / relu
layers, partitioned into the five device kernels the engine actually runs:
conv_pool1, conv2, pool2, ip1_relu, ip2.  Nothing here depends on a backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .tensors import Shape

STAGE_NAMES = ("conv_pool1", "conv2", "pool2", "ip1_relu", "ip2")

MAX_POOL = "max"
AVG_POOL = "average"


class ShapeInferenceError(ValueError):
    """A layer's window does not fit its input."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | pool | fully_connected | relu
    out_maps: int = 0        # conv
    kernel: int = 0          # conv: square kernel edge
    stride: int = 1          # conv and pool
    window: int = 0          # pool: square window edge
    pool_op: str = MAX_POOL  # pool: max | average
    out_neurons: int = 0     # fully_connected

    def __post_init__(self):
        if self.kind == "conv":
            if self.out_maps < 1 or self.kernel < 1 or self.stride < 1:
                raise ValueError(f"invalid conv layer: {self}")
        elif self.kind == "pool":
            if self.window < 1 or self.stride < 1:
                raise ValueError(f"invalid pool layer: {self}")
            if self.pool_op not in (MAX_POOL, AVG_POOL):
                raise ValueError(f"unknown pool_op {self.pool_op!r}")
        elif self.kind == "fully_connected":
            if self.out_neurons < 1:
                raise ValueError(f"invalid fully_connected layer: {self}")
        elif self.kind != "relu":
            raise ValueError(f"unknown layer kind {self.kind!r}")


def conv(out_maps: int, kernel: int, stride: int = 1) -> LayerSpec:
    return LayerSpec(kind="conv", out_maps=out_maps, kernel=kernel, stride=stride)


def pool(window: int, stride: int, pool_op: str = MAX_POOL) -> LayerSpec:
    return LayerSpec(kind="pool", window=window, stride=stride, pool_op=pool_op)


def fully_connected(out_neurons: int) -> LayerSpec:
    return LayerSpec(kind="fully_connected", out_neurons=out_neurons)


def relu() -> LayerSpec:
    return LayerSpec(kind="relu")


@dataclass(frozen=True)
class NetworkSpec:
    """Layer list plus the partition of layers onto the five pipeline stages.

    ``stage_grouping`` maps each stage name to the contiguous span
    [start, end) of layer indices it executes; spans must tile the layer
    list in order.
    """

    input_shape: Shape
    layers: tuple[LayerSpec, ...]
    stage_grouping: tuple[tuple[str, int, int], ...] = field(default=())

    def __post_init__(self):
        if len(self.input_shape) != 3:
            raise ValueError("input shape must be (channels, height, width)")
        names = tuple(name for name, _, _ in self.stage_grouping)
        if names != STAGE_NAMES:
            raise ValueError(f"stage grouping must name {STAGE_NAMES} in order, got {names}")
        cursor = 0
        for name, start, end in self.stage_grouping:
            if start != cursor or end <= start:
                raise ValueError(f"stage {name} span [{start},{end}) is not contiguous")
            cursor = end
        if cursor != len(self.layers):
            raise ValueError("stage grouping does not cover all layers")

    def stage_layers(self, stage: str) -> tuple[LayerSpec, ...]:
        for name, start, end in self.stage_grouping:
            if name == stage:
                return self.layers[start:end]
        raise KeyError(stage)


def lenet5_spec(pool_op: str = MAX_POOL) -> NetworkSpec:
    """The canonical 28x28 digit classifier: two conv/pool pairs, then an
    800->500 fully-connected layer with ReLU and a 500->10 classifier.

    ``pool_op`` defaults to max (the behavior of the public Caffe model this
    pipeline ingests weights from); pass ``AVG_POOL`` for classic local
    averaging.
    """
    layers = (
        conv(out_maps=20, kernel=5, stride=1),
        pool(window=2, stride=2, pool_op=pool_op),
        conv(out_maps=50, kernel=5, stride=1),
        pool(window=2, stride=2, pool_op=pool_op),
        fully_connected(500),
        relu(),
        fully_connected(10),
    )
    grouping = (
        ("conv_pool1", 0, 2),
        ("conv2", 2, 3),
        ("pool2", 3, 4),
        ("ip1_relu", 4, 6),
        ("ip2", 6, 7),
    )
    return NetworkSpec(input_shape=Shape(1, 28, 28), layers=layers, stage_grouping=grouping)


def infer_shapes(spec: NetworkSpec) -> list[Shape]:
    """Per-layer output shapes.  Valid (unpadded) convolution geometry:
    conv out = (out_maps, (H-k)/stride+1, (W-k)/stride+1); pool divides the
    spatial extents by its stride; fully_connected flattens its input.
    """
    shapes: list[Shape] = []
    current = spec.input_shape
    for index, layer in enumerate(spec.layers):
        if layer.kind == "conv":
            c, h, w = current.dims
            if layer.kernel > h or layer.kernel > w:
                raise ShapeInferenceError(
                    f"layer {index} (conv {layer.kernel}x{layer.kernel}) "
                    f"exceeds input {h}x{w}"
                )
            out_h = (h - layer.kernel) // layer.stride + 1
            out_w = (w - layer.kernel) // layer.stride + 1
            current = Shape(layer.out_maps, out_h, out_w)
        elif layer.kind == "pool":
            c, h, w = current.dims
            if layer.window > h or layer.window > w:
                raise ShapeInferenceError(
                    f"layer {index} (pool {layer.window}x{layer.window}) "
                    f"exceeds input {h}x{w}"
                )
            current = Shape(c, h // layer.stride, w // layer.stride)
        elif layer.kind == "fully_connected":
            current = Shape(layer.out_neurons)
        else:  # relu preserves shape
            pass
        shapes.append(current)
    return shapes


def stage_io_shapes(spec: NetworkSpec) -> dict[str, tuple[Shape, Shape]]:
    """(input shape, output shape) for each of the five stages."""
    per_layer = infer_shapes(spec)
    result = {}
    for name, start, end in spec.stage_grouping:
        inp = spec.input_shape if start == 0 else per_layer[start - 1]
        result[name] = (inp, per_layer[end - 1])
    return result
