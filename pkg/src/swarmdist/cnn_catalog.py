"""Layer tables for the reference CNNs and their per-layer resource figures.

Every layer is reduced to three numbers the rest of the simulator cares
about: how many multiplications it costs, how many bytes of weights it
pins in memory, and how many bytes of activations it hands to the next
layer. Pooling and activation layers are folded into the layer before
them, so only convolutional and fully-connected layers appear.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .errors import ConfigError, ContractViolation

CONV = "convolutional"
FC = "fully-connected"

BITS_PER_WEIGHT = 32
ACTIVATION_BYTES = 4
# raw 8-bit RGB capture
INPUT_BYTES_PER_SAMPLE = 1

_KIND_ALIASES = {
    "conv": CONV,
    "convolutional": CONV,
    "fc": FC,
    "fully-connected": FC,
    "fully_connected": FC,
    "dense": FC,
}


@dataclass(frozen=True)
class LayerSpec:
    """Geometry of one conv or fully-connected layer.

    For fully-connected layers ``in_channels`` and ``out_channels`` are the
    neuron counts of the previous and current layer and the spatial fields
    stay ``None``.
    """

    kind: str
    in_channels: int
    out_channels: int
    filter_size: int | None = None
    output_spatial: int | None = None
    bits_per_weight: int = BITS_PER_WEIGHT
    name: str = ""

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind)
        if kind is None:
            raise ContractViolation(f"unknown layer kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        for field in ("in_channels", "out_channels", "bits_per_weight"):
            value = getattr(self, field)
            if not isinstance(value, int) or value < 1:
                raise ContractViolation(f"{field} must be a positive integer, got {value!r}")
        if kind == CONV:
            for field in ("filter_size", "output_spatial"):
                value = getattr(self, field)
                if not isinstance(value, int) or value < 1:
                    raise ContractViolation(f"conv layer needs positive {field}, got {value!r}")
        elif self.filter_size is not None or self.output_spatial is not None:
            raise ContractViolation("fully-connected layers carry no spatial fields")

    @property
    def is_conv(self) -> bool:
        return self.kind == CONV

    @property
    def weight_count(self) -> int:
        # weights only, biases excluded
        if self.is_conv:
            return self.in_channels * self.filter_size**2 * self.out_channels
        return self.in_channels * self.out_channels

    @property
    def compute_load(self) -> int:
        if self.is_conv:
            return conv_compute_load(self)
        return fc_compute_load(self)

    @property
    def memory(self) -> int:
        return layer_memory(self)

    @property
    def output_bytes(self) -> int:
        return intermediate_size(self)


def conv_compute_load(layer: LayerSpec) -> int:
    """Multiplications of a convolution: n_in * s^2 * n_out * z^2."""
    if layer.kind != CONV:
        raise ContractViolation(f"conv_compute_load needs a convolutional layer, got {layer.kind}")
    return layer.in_channels * layer.filter_size**2 * layer.out_channels * layer.output_spatial**2


def fc_compute_load(layer: LayerSpec) -> int:
    """Multiplications of a dense layer: n_in * n_out."""
    if layer.kind != FC:
        raise ContractViolation(f"fc_compute_load needs a fully-connected layer, got {layer.kind}")
    return layer.in_channels * layer.out_channels


def weight_bytes(weight_count: int, bits_per_weight: int = BITS_PER_WEIGHT) -> int:
    bits = weight_count * bits_per_weight
    if bits % 8:
        raise ContractViolation("weight storage must be a whole number of bytes")
    return bits // 8


def layer_memory(layer: LayerSpec) -> int:
    """Bytes needed to hold the layer's weights."""
    return weight_bytes(layer.weight_count, layer.bits_per_weight)


def intermediate_size(layer: LayerSpec) -> int:
    """Bytes of activations the layer emits (32-bit values)."""
    if layer.is_conv:
        return layer.output_spatial**2 * layer.out_channels * ACTIVATION_BYTES
    return layer.out_channels * ACTIVATION_BYTES


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple[LayerSpec, ...]
    input_bytes: int
    class_count: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError(f"network {self.name!r} has no layers")
        if self.input_bytes < 1 or self.class_count < 1:
            raise ConfigError("input_bytes and class_count must be positive")

    def __len__(self) -> int:
        return len(self.layers)

    @cached_property
    def compute(self) -> tuple[int, ...]:
        return tuple(layer.compute_load for layer in self.layers)

    @cached_property
    def memory(self) -> tuple[int, ...]:
        return tuple(layer.memory for layer in self.layers)

    @cached_property
    def output_bytes(self) -> tuple[int, ...]:
        return tuple(layer.output_bytes for layer in self.layers)

    @property
    def total_compute(self) -> int:
        return sum(self.compute)

    @property
    def total_memory(self) -> int:
        return sum(self.memory)

    def table(self) -> list[dict]:
        rows = []
        for j, layer in enumerate(self.layers):
            rows.append(
                {
                    "index": j,
                    "name": layer.name,
                    "kind": layer.kind,
                    "compute": self.compute[j],
                    "memory": self.memory[j],
                    "output_bytes": self.output_bytes[j],
                }
            )
        return rows


def _conv(name, n_in, n_out, size, spatial):
    return LayerSpec(CONV, n_in, n_out, size, spatial, name=name)


def _fc(name, n_in, n_out):
    return LayerSpec(FC, n_in, n_out, name=name)


def _rgb_bytes(height: int, width: int) -> int:
    return height * width * 3 * INPUT_BYTES_PER_SAMPLE


def _lenet() -> NetworkSpec:
    layers = [
        _conv("conv1", 3, 6, 5, 28),
        _conv("conv2", 6, 16, 5, 10),
        _fc("fc1", 16 * 5 * 5, 120),
        _fc("fc2", 120, 84),
        _fc("fc3", 84, 10),
    ]
    return NetworkSpec("LeNet", layers, _rgb_bytes(32, 32), 10)


def _alexnet() -> NetworkSpec:
    layers = [
        _conv("conv1", 3, 96, 11, 55),
        _conv("conv2", 96, 256, 5, 27),
        _conv("conv3", 256, 384, 3, 13),
        _conv("conv4", 384, 384, 3, 13),
        _conv("conv5", 384, 256, 3, 13),
        _fc("fc6", 256 * 6 * 6, 4096),
        _fc("fc7", 4096, 4096),
        _fc("fc8", 4096, 1000),
    ]
    return NetworkSpec("AlexNet", layers, _rgb_bytes(227, 227), 1000)


def _vgg16() -> NetworkSpec:
    blocks = [(64, 2, 224), (128, 2, 112), (256, 3, 56), (512, 3, 28), (512, 3, 14)]
    layers = []
    n_in = 3
    for b, (width, depth, spatial) in enumerate(blocks, start=1):
        for k in range(1, depth + 1):
            layers.append(_conv(f"conv{b}_{k}", n_in, width, 3, spatial))
            n_in = width
    layers += [
        _fc("fc6", 512 * 7 * 7, 4096),
        _fc("fc7", 4096, 4096),
        _fc("fc8", 4096, 1000),
    ]
    return NetworkSpec("VGG16", layers, _rgb_bytes(224, 224), 1000)


_BUILTINS = {"lenet": _lenet, "alexnet": _alexnet, "vgg16": _vgg16}

BUILTIN_NETWORKS = ("LeNet", "AlexNet", "VGG16")


def build_network(name: str) -> NetworkSpec:
    """Return one of the built-in networks (case-insensitive name)."""
    try:
        factory = _BUILTINS[str(name).lower()]
    except KeyError:
        raise ConfigError(
            f"unknown network {name!r}; choose one of {', '.join(BUILTIN_NETWORKS)}"
        ) from None
    return factory()


_LAYER_KEYS = {"kind", "in_channels", "out_channels", "filter_size", "output_spatial", "bits_per_weight", "name"}
_NETWORK_KEYS = {"name", "layers", "input_bytes", "input_shape", "class_count"}


def network_from_dict(doc: dict) -> NetworkSpec:
    unknown = set(doc) - _NETWORK_KEYS
    if unknown:
        raise ConfigError(f"unknown network keys: {sorted(unknown)}")
    try:
        layers = []
        for entry in doc["layers"]:
            extra = set(entry) - _LAYER_KEYS
            if extra:
                raise ConfigError(f"unknown layer keys: {sorted(extra)}")
            layers.append(LayerSpec(**entry))
        if "input_bytes" in doc:
            input_bytes = int(doc["input_bytes"])
        else:
            h, w, c = doc["input_shape"]
            input_bytes = int(h) * int(w) * int(c) * INPUT_BYTES_PER_SAMPLE
        class_count = int(doc.get("class_count", layers[-1].out_channels))
        return NetworkSpec(str(doc.get("name", "custom")), layers, input_bytes, class_count)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed network description: {exc}") from exc


def network_to_dict(net: NetworkSpec) -> dict:
    layers = []
    for layer in net.layers:
        entry = {
            "kind": layer.kind,
            "in_channels": layer.in_channels,
            "out_channels": layer.out_channels,
        }
        if layer.is_conv:
            entry["filter_size"] = layer.filter_size
            entry["output_spatial"] = layer.output_spatial
        if layer.bits_per_weight != BITS_PER_WEIGHT:
            entry["bits_per_weight"] = layer.bits_per_weight
        if layer.name:
            entry["name"] = layer.name
        layers.append(entry)
    return {
        "name": net.name,
        "input_bytes": net.input_bytes,
        "class_count": net.class_count,
        "layers": layers,
    }


def load_network(path: str | Path) -> NetworkSpec:
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def resolve_network(ref: str | dict | NetworkSpec) -> NetworkSpec:
    """Accept a built-in name, a path to a JSON table, or an inline dict."""
    if isinstance(ref, NetworkSpec):
        return ref
    if isinstance(ref, dict):
        return network_from_dict(ref)
    if str(ref).lower() in _BUILTINS:
        return build_network(ref)
    path = Path(ref)
    if path.suffix == ".json" and path.exists():
        return load_network(path)
    return build_network(ref)


def check_layer_counts(net: NetworkSpec) -> tuple[int, int]:
    conv = sum(1 for layer in net.layers if layer.is_conv)
    return conv, len(net.layers) - conv
