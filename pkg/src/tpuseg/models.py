"""Layered model IR and the synthetic FC / CONV sweep generators.

Every count here is an exact integer. Layers use int8 weights and activations
by default, so byte counts equal element counts unless ``bytes_per_weight``
says otherwise. Bias terms are not counted, neither as MACs nor as bytes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterator, Union


class ConfigurationError(ValueError):
    """Raised for malformed layers, models or sweep definitions."""


@dataclass(frozen=True)
class FullyConnected:
    inputs: int
    outputs: int

    def __post_init__(self):
        if self.inputs < 1 or self.outputs < 1:
            raise ConfigurationError(f"node counts must be >= 1: {self}")


@dataclass(frozen=True)
class Convolution:
    """Same-padded, stride-1 2D convolution."""

    in_channels: int
    filters: int
    kernel_h: int
    kernel_w: int
    in_h: int
    in_w: int
    stride: int = 1
    padding: str = "same"

    def __post_init__(self):
        counts = (self.in_channels, self.filters, self.kernel_h, self.kernel_w, self.in_h, self.in_w)
        if min(counts) < 1:
            raise ConfigurationError(f"all counts must be >= 1: {self}")
        if self.stride != 1 or self.padding != "same":
            raise ConfigurationError("only stride 1 with same padding is supported")


LayerSpec = Union[FullyConnected, Convolution]


def layer_macs(layer: LayerSpec) -> int:
    if isinstance(layer, FullyConnected):
        return layer.inputs * layer.outputs
    # same padding keeps in_h x in_w output positions per filter
    return layer.in_channels * layer.in_h * layer.in_w * layer.filters * layer.kernel_h * layer.kernel_w


def layer_weight_bytes(layer: LayerSpec, bytes_per_weight: int = 1) -> int:
    if isinstance(layer, FullyConnected):
        return layer.inputs * layer.outputs * bytes_per_weight
    return layer.in_channels * layer.filters * layer.kernel_h * layer.kernel_w * bytes_per_weight


def layer_input_bytes(layer: LayerSpec) -> int:
    if isinstance(layer, FullyConnected):
        return layer.inputs
    return layer.in_h * layer.in_w * layer.in_channels


def layer_output_bytes(layer: LayerSpec) -> int:
    if isinstance(layer, FullyConnected):
        return layer.outputs
    return layer.in_h * layer.in_w * layer.filters


def _compatible(a: LayerSpec, b: LayerSpec) -> bool:
    if isinstance(a, FullyConnected) and isinstance(b, FullyConnected):
        return a.outputs == b.inputs
    if isinstance(a, Convolution) and isinstance(b, Convolution):
        return a.filters == b.in_channels and (a.in_h, a.in_w) == (b.in_h, b.in_w)
    return False


@dataclass(frozen=True)
class ModelSpec:
    id: str
    layers: tuple
    bytes_per_weight: int = 1

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigurationError(f"model {self.id!r} has no layers")
        if self.bytes_per_weight < 1:
            raise ConfigurationError("bytes_per_weight must be >= 1")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if not _compatible(a, b):
                raise ConfigurationError(f"model {self.id!r}: layers {i} and {i + 1} are not shape-compatible")

    def __len__(self):
        return len(self.layers)

    def weight_bytes(self) -> list[int]:
        return [layer_weight_bytes(layer, self.bytes_per_weight) for layer in self.layers]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "layers": [_layer_to_dict(layer) for layer in self.layers],
            "bytes_per_weight": self.bytes_per_weight,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        return cls(
            id=doc["id"],
            layers=[_layer_from_dict(d) for d in doc["layers"]],
            bytes_per_weight=doc.get("bytes_per_weight", 1),
        )


def _layer_to_dict(layer: LayerSpec) -> dict:
    kind = "FullyConnected" if isinstance(layer, FullyConnected) else "Convolution"
    return {"type": kind, **asdict(layer)}


def _layer_from_dict(doc: dict) -> LayerSpec:
    doc = dict(doc)
    kind = doc.pop("type")
    if kind == "FullyConnected":
        return FullyConnected(**doc)
    if kind == "Convolution":
        return Convolution(**doc)
    raise ConfigurationError(f"unknown layer type {kind!r}")


def model_macs(model: ModelSpec) -> int:
    return sum(layer_macs(layer) for layer in model.layers)


def model_weight_bytes(model: ModelSpec) -> int:
    return sum(model.weight_bytes())


@dataclass(frozen=True)
class SweepConfig:
    """Parameter sweep over FC node counts (n) or CONV filter counts (f).

    Defaults are the standard FC sweep; use :meth:`conv_defaults` for the
    CONV one. For FC, ``layer_count`` counts weight matrices: I->n, then
    ``layer_count - 2`` matrices n->n, then n->O.
    """

    kind: str = "FC"
    layer_count: int = 5
    param_min: int = 100
    param_max: int = 2640
    param_step: int = 40
    input_size: int = 64
    output_size: int = 10
    in_channels: int = 3
    in_h: int = 64
    in_w: int = 64
    kernel_h: int = 3
    kernel_w: int = 3
    bytes_per_weight: int = 1

    def __post_init__(self):
        if self.kind not in ("FC", "CONV"):
            raise ConfigurationError(f"kind must be FC or CONV, got {self.kind!r}")
        if self.param_min > self.param_max:
            raise ConfigurationError("param_min must not exceed param_max")
        if self.param_step < 1 or self.param_min < 1 or self.layer_count < 1:
            raise ConfigurationError("param_min, param_step and layer_count must be >= 1")
        if self.kind == "FC" and self.layer_count < 2:
            raise ConfigurationError("FC sweeps need at least 2 layers")

    @classmethod
    def fc_defaults(cls, **overrides) -> "SweepConfig":
        return cls(**overrides)

    @classmethod
    def conv_defaults(cls, **overrides) -> "SweepConfig":
        params = dict(kind="CONV", layer_count=5, param_min=32, param_max=702, param_step=10)
        params.update(overrides)
        return cls(**params)

    def params(self) -> range:
        return range(self.param_min, self.param_max + 1, self.param_step)

    def model_id(self, param: int) -> str:
        return f"fc-n{param}" if self.kind == "FC" else f"conv-f{param}"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        return cls(**doc)


def build_fc_model(config: SweepConfig, n: int) -> ModelSpec:
    if config.kind != "FC":
        raise ConfigurationError(f"build_fc_model needs an FC sweep, got {config.kind}")
    if n < 1:
        raise ConfigurationError("n must be >= 1")
    layers = [FullyConnected(config.input_size, n)]
    layers += [FullyConnected(n, n) for _ in range(config.layer_count - 2)]
    layers.append(FullyConnected(n, config.output_size))
    return ModelSpec(config.model_id(n), layers, config.bytes_per_weight)


def build_conv_model(config: SweepConfig, f: int) -> ModelSpec:
    if config.kind != "CONV":
        raise ConfigurationError(f"build_conv_model needs a CONV sweep, got {config.kind}")
    if f < 1:
        raise ConfigurationError("f must be >= 1")
    layers = []
    channels = config.in_channels
    for _ in range(config.layer_count):
        layers.append(Convolution(channels, f, config.kernel_h, config.kernel_w, config.in_h, config.in_w))
        channels = f
    return ModelSpec(config.model_id(f), layers, config.bytes_per_weight)


def build_model(config: SweepConfig, param: int) -> ModelSpec:
    if config.kind == "FC":
        return build_fc_model(config, param)
    return build_conv_model(config, param)


def enumerate_sweep(config: SweepConfig) -> list[ModelSpec]:
    return [build_model(config, p) for p in config.params()]


def iter_sweep(config: SweepConfig) -> Iterator[tuple[int, ModelSpec]]:
    for p in config.params():
        yield p, build_model(config, p)
