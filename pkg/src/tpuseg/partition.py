"""Contiguous segmentation of a model across several devices.

A partition is a composition of the layer count: ``sizes[i]`` consecutive
layers go to device ``i``. Candidates are scored with the device cost model
and the analytic pipeline backend, standing in for on-hardware profiling.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Sequence

from .device import AcceleratorProfile, Placement, StageCost, allocate_layers, single_device_time, stage_cost
from .models import ModelSpec, layer_output_bytes
from .pipeline import PipelinePlan, analytic_makespan

DEFAULT_BUDGET = 10**6


class EnumerationBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class Partition:
    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or min(sizes) < 1:
            raise ValueError(f"partition sizes must be positive: {self.sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def layers(self) -> int:
        return sum(self.sizes)

    def __len__(self):
        return len(self.sizes)

    def bounds(self) -> list[tuple[int, int]]:
        out, start = [], 0
        for size in self.sizes:
            out.append((start, start + size))
            start += size
        return out

    def label(self) -> str:
        return "-".join(map(str, self.sizes))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        return cls(tuple(int(x) for x in text.split("-")))


def _check(l: int, s: int):
    if not 1 <= s <= l:
        raise ValueError(f"need 1 <= segments <= layers, got s={s}, l={l}")


def count_partitions(l: int, s: int) -> int:
    _check(l, s)
    return math.comb(l - 1, s - 1)


def enumerate_partitions(l: int, s: int) -> Iterator[Partition]:
    """All compositions of ``l`` into ``s`` positive parts, lexicographic by sizes.

    Choosing the s-1 cut points among the l-1 gaps in increasing order makes
    the first size grow slowest-last, which is lexicographic order.
    """
    _check(l, s)
    for cuts in combinations(range(1, l), s - 1):
        edges = (0, *cuts, l)
        yield Partition(tuple(b - a for a, b in zip(edges, edges[1:])))


def even_split(l: int, s: int) -> Partition:
    _check(l, s)
    base, extra = divmod(l, s)
    return Partition((base,) * (s - extra) + (base + 1,) * extra)


@dataclass(frozen=True)
class PartitionEvaluation:
    partition: Partition
    placements: tuple
    per_stage: tuple
    transfers_s: tuple
    batch: int
    batch_makespan_s: float

    @property
    def stage_latencies_s(self) -> list[float]:
        return [c.total_s for c in self.per_stage]

    @property
    def effective_latencies_s(self) -> list[float]:
        return [c.total_s + t for c, t in zip(self.per_stage, self.transfers_s)]

    @property
    def steady_state_per_inference_s(self) -> float:
        return max(self.effective_latencies_s)

    @property
    def per_inference_s(self) -> float:
        return self.batch_makespan_s / self.batch

    @property
    def fully_on_chip(self) -> bool:
        return all(p.fully_on_chip for p in self.placements)

    @property
    def host_layers(self) -> int:
        return sum(p.host_layers for p in self.placements)

    def plan(self) -> PipelinePlan:
        return PipelinePlan(tuple(zip(self.stage_latencies_s, self.transfers_s)))

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.partition.sizes),
            "batch": self.batch,
            "batch_makespan_s": self.batch_makespan_s,
            "per_inference_s": self.per_inference_s,
            "steady_state_per_inference_s": self.steady_state_per_inference_s,
            "fully_on_chip": self.fully_on_chip,
            "host_layers": self.host_layers,
            "stages": [
                {
                    "compute_s": c.compute_s,
                    "weight_stream_s": c.weight_stream_s,
                    "io_s": c.io_s,
                    "total_s": c.total_s,
                    "incoming_transfer_s": t,
                    "on_chip_used_bytes": p.on_chip_used_bytes,
                    "host_bytes": p.host_bytes,
                }
                for c, t, p in zip(self.per_stage, self.transfers_s, self.placements)
            ],
        }


def transfer_cost(boundary_bytes: int, profile: AcceleratorProfile) -> float:
    # device -> host -> device
    return 2 * (boundary_bytes / profile.pcie_bw_bytes_per_s + profile.pcie_latency_s)


def _profiles_for(partition: Partition, profiles) -> list[AcceleratorProfile]:
    if isinstance(profiles, AcceleratorProfile):
        return [profiles] * len(partition)
    profiles = list(profiles)
    if len(profiles) != len(partition):
        raise ValueError(f"{len(partition)} segments but {len(profiles)} profiles")
    return profiles


def evaluate_partition(model: ModelSpec, partition: Partition, profiles, batch: int = 1) -> PartitionEvaluation:
    """Cost every segment on its own device and pipeline them.

    ``profiles`` is one AcceleratorProfile per segment, or a single profile
    shared by all. The first segment has no incoming inter-device transfer:
    the model input upload is already part of its ``io_s``.
    """
    if partition.layers != len(model):
        raise ValueError(f"partition covers {partition.layers} layers, model has {len(model)}")
    profiles = _profiles_for(partition, profiles)
    placements: list[Placement] = []
    costs: list[StageCost] = []
    transfers: list[float] = []
    for k, ((lo, hi), prof) in enumerate(zip(partition.bounds(), profiles)):
        layers = model.layers[lo:hi]
        placement = allocate_layers(layers, prof, model.bytes_per_weight)
        placements.append(placement)
        costs.append(stage_cost(layers, placement, prof, model.bytes_per_weight))
        transfers.append(0.0 if k == 0 else transfer_cost(layer_output_bytes(model.layers[lo - 1]), prof))
    plan = PipelinePlan(tuple(zip((c.total_s for c in costs), transfers)))
    return PartitionEvaluation(
        partition=partition,
        placements=tuple(placements),
        per_stage=tuple(costs),
        transfers_s=tuple(transfers),
        batch=batch,
        batch_makespan_s=analytic_makespan(plan, batch),
    )


def _candidates(model: ModelSpec, s: int, budget: int) -> Iterator[Partition]:
    total = count_partitions(len(model), s)
    if total > budget:
        raise EnumerationBudgetError(
            f"{total} partitions of {len(model)} layers into {s} segments exceed the budget of {budget}; "
            "use threshold_partition instead"
        )
    return enumerate_partitions(len(model), s)


def evaluate_all(
    model: ModelSpec,
    s: int,
    profiles,
    batch: int = 1,
    budget: int = DEFAULT_BUDGET,
    executor: Executor | None = None,
) -> list[PartitionEvaluation]:
    """Evaluations of every partition, in lexicographic order."""
    candidates = list(_candidates(model, s, budget))
    if executor is None:
        return [evaluate_partition(model, p, profiles, batch) for p in candidates]
    futures = [executor.submit(evaluate_partition, model, p, profiles, batch) for p in candidates]
    return [f.result() for f in futures]


def exhaustive_best(
    model: ModelSpec,
    s: int,
    profiles,
    batch: int = 1,
    budget: int = DEFAULT_BUDGET,
    executor: Executor | None = None,
) -> PartitionEvaluation:
    evaluations = evaluate_all(model, s, profiles, batch, budget, executor)
    # min() keeps the first minimum, i.e. the lexicographically smallest sizes
    return min(evaluations, key=lambda ev: ev.batch_makespan_s)


def threshold_partition(
    model: ModelSpec,
    s: int,
    profiles,
    batch: int = 1,
    max_diff_s: float = 0.0,
) -> PartitionEvaluation:
    """First partition whose slowest and fastest segments differ by at most
    ``max_diff_s``; the last one tried when none qualifies.

    Segment latency here is the segment's own StageCost total, without the
    inter-device transfer feeding it.
    """
    _check(len(model), s)
    last = None
    for partition in enumerate_partitions(len(model), s):
        last = evaluate_partition(model, partition, profiles, batch)
        latencies = last.stage_latencies_s
        if max(latencies) - min(latencies) <= max_diff_s:
            return last
    return last


def single_segment(model: ModelSpec, profile: AcceleratorProfile, batch: int = 1) -> PartitionEvaluation:
    return evaluate_partition(model, Partition((len(model),)), profile, batch)


def choose(
    model: ModelSpec,
    s: int,
    profiles,
    batch: int,
    partitioner: str = "even",
    max_diff_s: float = 0.0,
    budget: int = DEFAULT_BUDGET,
) -> PartitionEvaluation:
    """Dispatch on partitioner name: ``even``, ``threshold`` or ``exhaustive``."""
    if partitioner == "even":
        return evaluate_partition(model, even_split(len(model), s), profiles, batch)
    if partitioner == "threshold":
        return threshold_partition(model, s, profiles, batch, max_diff_s)
    if partitioner == "exhaustive":
        return exhaustive_best(model, s, profiles, batch, budget)
    raise ValueError(f"unknown partitioner {partitioner!r}")


__all__ = [
    "DEFAULT_BUDGET",
    "EnumerationBudgetError",
    "Partition",
    "PartitionEvaluation",
    "choose",
    "count_partitions",
    "enumerate_partitions",
    "evaluate_all",
    "evaluate_partition",
    "even_split",
    "exhaustive_best",
    "single_segment",
    "threshold_partition",
    "transfer_cost",
]
