"""Grid-search fit of the device calibration knobs to measured sweep times."""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .device import MIB, AcceleratorProfile, single_device_time
from .models import SweepConfig, build_model


class CalibrationError(ValueError):
    pass


class MeasurementParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


AXES = ("effective_onchip_bw_bytes_per_s", "pcie_bw_bytes_per_s", "pcie_latency_s", "reserved_bytes")

DEFAULT_GRID = {
    "effective_onchip_bw_bytes_per_s": (1.0e9, 2.0e9, 3.0e9, 4.0e9, 6.0e9),
    "pcie_bw_bytes_per_s": (1.0e8, 2.0e8, 4.0e8, 8.0e8, 1.6e9),
    "pcie_latency_s": (2.5e-5, 5.0e-5, 1.0e-4, 2.0e-4, 4.0e-4),
    "reserved_bytes": (MIB // 4, MIB // 2, MIB, 2 * MIB),
}


@dataclass
class CalibrationResult:
    profile: AcceleratorProfile
    loss: float
    residuals: list  # (param, measured_s, predicted_s, log_error)
    degenerate: bool = False
    grid: dict = field(default_factory=dict)

    def grid_index(self, axis: str) -> int:
        return list(self.grid[axis]).index(getattr(self.profile, axis))


def read_measurements(path) -> list[tuple[int, float]]:
    """Parse a ``param,time_s`` CSV. Errors carry the offending line number."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MeasurementParseError("empty file", 1) from None
        header = [h.strip() for h in header]
        if "param" not in header or "time_s" not in header:
            raise MeasurementParseError("header must contain 'param' and 'time_s'", 1)
        ip, it = header.index("param"), header.index("time_s")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            try:
                param = int(row[ip])
                time_s = float(row[it])
            except (ValueError, IndexError):
                raise MeasurementParseError(f"cannot parse {row!r}", line) from None
            if not (math.isfinite(time_s) and time_s > 0):
                raise MeasurementParseError(f"time_s must be positive and finite, got {time_s}", line)
            rows.append((param, time_s))
    return rows


def calibrate(
    measurements,
    sweep: SweepConfig,
    base: AcceleratorProfile | None = None,
    grid: dict | None = None,
) -> CalibrationResult:
    """Pick the grid point minimising the summed squared log error.

    Ties go to the first grid point in axis order, so the fit is deterministic.
    """
    measurements = list(measurements)
    if len(measurements) < 2:
        raise CalibrationError("need at least two measurements to calibrate")
    base = base or AcceleratorProfile()
    grid = {axis: tuple((grid or {}).get(axis, DEFAULT_GRID[axis])) for axis in AXES}
    models = [build_model(sweep, p) for p, _ in measurements]
    measured = np.log([t for _, t in measurements])

    best = None
    for values in itertools.product(*(grid[a] for a in AXES)):
        changes = dict(zip(AXES, values))
        if changes["reserved_bytes"] >= base.on_chip_bytes:
            continue
        profile = base.with_(**changes)
        predicted = np.log([single_device_time(m, profile).total_s for m in models])
        loss = float(np.sum((predicted - measured) ** 2))
        if best is None or loss < best[0]:
            best = (loss, profile, predicted)
    if best is None:
        raise CalibrationError("no admissible grid point")
    loss, profile, predicted = best

    residuals = [
        (p, t, float(math.exp(pl)), float(pl - ml)) for (p, t), pl, ml in zip(measurements, predicted, measured)
    ]
    degenerate = bool(np.ptp(measured) == 0)
    if degenerate:
        warnings.warn("measured times are constant; the fit is not identifiable", RuntimeWarning, stacklevel=2)
    return CalibrationResult(profile, loss, residuals, degenerate, grid)


def synthesize_measurements(sweep: SweepConfig, profile: AcceleratorProfile) -> list[tuple[int, float]]:
    """Model-generated ``(param, time_s)`` pairs, for round-trip checks."""
    return [(p, single_device_time(build_model(sweep, p), profile).total_s) for p in sweep.params()]
