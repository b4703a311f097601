"""Analytic single-accelerator cost model.

Weights are placed on chip one whole layer at a time; layers that do not fit
stay in host memory and are streamed over PCIe on every inference. Per-layer
compute time is a roofline: the larger of the MAC-limited time and the time
to move the layer's weights and activations through on-chip memory.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, replace
from typing import Sequence

from .models import (
    LayerSpec,
    ModelSpec,
    layer_input_bytes,
    layer_macs,
    layer_output_bytes,
    layer_weight_bytes,
    model_macs,
)

MIB = 1 << 20


class Location(enum.Enum):
    ON_CHIP = "OnChip"
    HOST = "HostResident"


@dataclass(frozen=True)
class AcceleratorProfile:
    """Device parameters, all in base units (bytes, seconds, MACs/s).

    Only the capacity and the peak rate come from the hardware description;
    the bandwidths, latency and reserve are calibration knobs.
    """

    on_chip_bytes: int = 8 * MIB
    reserved_bytes: int = 1 * MIB
    peak_macs_per_s: float = 1.96608e12
    effective_onchip_bw_bytes_per_s: float = 3.0e9
    pcie_bw_bytes_per_s: float = 4.0e8
    pcie_latency_s: float = 1.0e-4
    allocation_policy: str = "skip"

    def __post_init__(self):
        numeric = (
            self.on_chip_bytes,
            self.reserved_bytes,
            self.peak_macs_per_s,
            self.effective_onchip_bw_bytes_per_s,
            self.pcie_bw_bytes_per_s,
            self.pcie_latency_s,
        )
        if min(numeric) <= 0:
            raise ValueError("all profile parameters must be positive")
        if self.reserved_bytes >= self.on_chip_bytes:
            raise ValueError("reserved_bytes must be smaller than on_chip_bytes")
        if self.allocation_policy not in ("skip", "no_skip"):
            raise ValueError(f"unknown allocation policy {self.allocation_policy!r}")

    @property
    def capacity(self) -> int:
        return self.on_chip_bytes - self.reserved_bytes

    def with_(self, **changes) -> "AcceleratorProfile":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "AcceleratorProfile":
        return cls(**doc)


@dataclass(frozen=True)
class Placement:
    locations: tuple
    on_chip_used_bytes: int
    host_bytes: int

    @property
    def host_layers(self) -> int:
        return sum(loc is Location.HOST for loc in self.locations)

    @property
    def fully_on_chip(self) -> bool:
        return self.host_layers == 0


@dataclass(frozen=True)
class StageCost:
    compute_s: float
    weight_stream_s: float
    io_s: float

    @property
    def total_s(self) -> float:
        return self.compute_s + self.weight_stream_s + self.io_s


def allocate_layers(
    layers: Sequence[LayerSpec], profile: AcceleratorProfile, bytes_per_weight: int = 1
) -> Placement:
    """Assign each layer to on-chip memory or the host, in execution order.

    With the default ``skip`` policy a layer that does not fit is left on the
    host and later, smaller layers may still be placed on chip. ``no_skip``
    sends everything after the first misfit to the host.
    """
    if not layers:
        raise ValueError("cannot allocate an empty layer list")
    remaining = profile.capacity
    locations = []
    used = host = 0
    spilled = False
    for layer in layers:
        size = layer_weight_bytes(layer, bytes_per_weight)
        fits = size <= remaining and not (spilled and profile.allocation_policy == "no_skip")
        if fits:
            locations.append(Location.ON_CHIP)
            remaining -= size
            used += size
        else:
            locations.append(Location.HOST)
            host += size
            spilled = True
    return Placement(tuple(locations), used, host)


def stage_cost(
    layers: Sequence[LayerSpec],
    placement: Placement,
    profile: AcceleratorProfile,
    bytes_per_weight: int = 1,
) -> StageCost:
    if len(layers) != len(placement.locations):
        raise ValueError("placement does not match the layer list")
    compute = stream = 0.0
    for layer, loc in zip(layers, placement.locations):
        weights = layer_weight_bytes(layer, bytes_per_weight)
        traffic = weights + layer_input_bytes(layer) + layer_output_bytes(layer)
        compute += max(
            layer_macs(layer) / profile.peak_macs_per_s,
            traffic / profile.effective_onchip_bw_bytes_per_s,
        )
        if loc is Location.HOST:
            # re-streamed on every inference, no caching
            stream += weights / profile.pcie_bw_bytes_per_s + profile.pcie_latency_s
    boundary = layer_input_bytes(layers[0]) + layer_output_bytes(layers[-1])
    io = boundary / profile.pcie_bw_bytes_per_s + 2 * profile.pcie_latency_s
    return StageCost(compute, stream, io)


def single_device_time(model: ModelSpec, profile: AcceleratorProfile) -> StageCost:
    placement = allocate_layers(model.layers, profile, model.bytes_per_weight)
    return stage_cost(model.layers, placement, profile, model.bytes_per_weight)


def arithmetic_intensity(model: ModelSpec) -> float:
    traffic = sum(
        layer_weight_bytes(layer, model.bytes_per_weight) + layer_output_bytes(layer) for layer in model.layers
    )
    return model_macs(model) / traffic


def compute_terms(layer: LayerSpec, profile: AcceleratorProfile, bytes_per_weight: int = 1) -> tuple[float, float]:
    """(MAC-limited time, memory-limited time) for one layer."""
    traffic = layer_weight_bytes(layer, bytes_per_weight) + layer_input_bytes(layer) + layer_output_bytes(layer)
    return layer_macs(layer) / profile.peak_macs_per_s, traffic / profile.effective_onchip_bw_bytes_per_s
