"""End-to-end experiment drivers behind the CLI subcommands.

Each ``cmd_*`` function returns plain rows / dicts; writing them to disk is
left to :func:`write_csv` and the CLI so the drivers stay easy to test.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibrate import CalibrationResult, calibrate, read_measurements
from .device import AcceleratorProfile, allocate_layers, single_device_time
from .models import ConfigurationError, SweepConfig, iter_sweep, model_macs, model_weight_bytes
from .partition import choose, evaluate_all, even_split, threshold_partition
from .pipeline import SimOptions, simulate, speedup_vs_single_device, speedup_vs_single_input
from .systolic import SystolicArrayConfig, peak_ops_per_second, simulate_matvec

SWEEP_COLUMNS = ["model_id", "param", "macs", "weight_bytes", "on_chip_bytes", "host_bytes", "host_layers", "time_s", "gops"]
SEGMENT_COLUMNS = [
    "model_id",
    "param",
    "s",
    "partition",
    "batch",
    "per_inference_s",
    "makespan_s",
    "fully_on_chip",
    "speedup_vs_b1",
    "speedup_vs_1tpu",
]
PARTITIONERS = ("even", "threshold", "exhaustive")


@dataclass
class ExperimentConfig:
    sweep: SweepConfig = field(default_factory=SweepConfig)
    profile: AcceleratorProfile = field(default_factory=AcceleratorProfile)
    segments: list = field(default_factory=lambda: [1, 2, 3, 4])
    batches: list = field(default_factory=lambda: [1, 50])
    partitioner: str = "even"
    max_diff_s: float = 0.0
    backend: str = "analytic"
    out_dir: str = "results"
    seed: int = 0

    def __post_init__(self):
        if self.partitioner not in PARTITIONERS:
            raise ConfigurationError(f"unknown partitioner {self.partitioner!r}")
        bad = [s for s in self.segments if not 1 <= s <= self.sweep.layer_count]
        if bad:
            raise ConfigurationError(f"segment counts {bad} outside [1, {self.sweep.layer_count}]")
        if not self.batches or min(self.batches) < 1:
            raise ConfigurationError("batch sizes must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        if "sweep" in doc:
            doc["sweep"] = SweepConfig.from_dict(doc["sweep"])
        if "profile" in doc:
            doc["profile"] = AcceleratorProfile.from_dict(doc["profile"])
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "sweep": self.sweep.to_dict(),
            "profile": self.profile.to_dict(),
            "segments": list(self.segments),
            "batches": list(self.batches),
            "partitioner": self.partitioner,
            "max_diff_s": self.max_diff_s,
            "backend": self.backend,
            "out_dir": self.out_dir,
            "seed": self.seed,
        }


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    return path


def cmd_sweep(config: ExperimentConfig) -> list[dict]:
    rows = []
    for param, model in iter_sweep(config.sweep):
        placement = allocate_layers(model.layers, config.profile, model.bytes_per_weight)
        cost = single_device_time(model, config.profile)
        macs = model_macs(model)
        rows.append(
            {
                "model_id": model.id,
                "param": param,
                "macs": macs,
                "weight_bytes": model_weight_bytes(model),
                "on_chip_bytes": placement.on_chip_used_bytes,
                "host_bytes": placement.host_bytes,
                "host_layers": placement.host_layers,
                "time_s": cost.total_s,
                "gops": macs / cost.total_s / 1e9,
            }
        )
    return rows


def cmd_segment(config: ExperimentConfig) -> list[dict]:
    rows = []
    for param, model in iter_sweep(config.sweep):
        single = single_device_time(model, config.profile)
        for s in config.segments:
            for batch in config.batches:
                ev = choose(model, s, config.profile, batch, config.partitioner, config.max_diff_s)
                plan = ev.plan()
                result = simulate(plan, SimOptions(batch=batch, backend=config.backend))
                result_1 = simulate(plan, SimOptions(batch=1, backend=config.backend))
                rows.append(
                    {
                        "model_id": model.id,
                        "param": param,
                        "s": s,
                        "partition": ev.partition.label(),
                        "batch": batch,
                        "per_inference_s": result.per_inference_s,
                        "makespan_s": result.makespan_s,
                        "fully_on_chip": ev.fully_on_chip,
                        "speedup_vs_b1": speedup_vs_single_input(result, result_1),
                        "speedup_vs_1tpu": speedup_vs_single_device(result, single),
                    }
                )
    rows.sort(key=lambda r: (r["param"], r["s"], r["batch"]))
    return rows


def find_model(config: ExperimentConfig, model_id: str):
    for _, model in iter_sweep(config.sweep):
        if model.id == model_id:
            return model
    raise ConfigurationError(f"model {model_id!r} is not part of the configured sweep")


def cmd_profile(config: ExperimentConfig, model_id: str, s: int) -> dict:
    """Every partition of one model, best first, at the largest configured batch."""
    model = find_model(config, model_id)
    batch = max(config.batches)
    evaluations = evaluate_all(model, s, config.profile, batch)
    even = even_split(len(model), s)
    picked = threshold_partition(model, s, config.profile, batch, config.max_diff_s).partition
    ranked = sorted(evaluations, key=lambda ev: ev.batch_makespan_s)
    entries = []
    for rank, ev in enumerate(ranked):
        entry = ev.to_dict()
        entry["partition"] = ev.partition.label()
        entry["rank"] = rank
        entry["even_split"] = ev.partition == even
        entry["threshold_pick"] = ev.partition == picked
        entries.append(entry)
    return {
        "model_id": model.id,
        "segments": s,
        "batch": batch,
        "max_diff_s": config.max_diff_s,
        "best": ranked[0].partition.label(),
        "entries": entries,
    }


def cmd_calibrate(measured_csv, config: ExperimentConfig, grid: dict | None = None) -> CalibrationResult:
    measurements = read_measurements(measured_csv)
    return calibrate(measurements, config.sweep, config.profile, grid)


def cmd_systolic(rows: int, cols: int, clock_hz: float, M: int, K: int, B: int, seed: int = 0) -> dict:
    config = SystolicArrayConfig(rows, cols, clock_hz)
    rng = np.random.default_rng(seed)
    weights = rng.integers(-128, 128, size=(M, K))
    inputs = rng.integers(-128, 128, size=(B, K))
    outputs, report = simulate_matvec(config, weights, inputs)
    expected = weights @ inputs.T
    return {
        "rows": rows,
        "cols": cols,
        "clock_hz": clock_hz,
        "M": M,
        "K": K,
        "B": B,
        "seed": seed,
        "total_cycles": report.total_cycles,
        "mac_ops": report.mac_ops,
        "utilization": report.utilization,
        "wall_time_s": report.wall_time_s,
        "peak_ops_per_s": peak_ops_per_second(config),
        "outputs_exact": bool(np.array_equal(outputs, expected)),
    }
