"""Cycle-level model of a weight-stationary systolic matrix.

The array has ``rows`` chains of ``cols`` multiply-sum cells. Chain ``r`` holds
the weights of one output neuron; partial sums move one cell to the right per
cycle and input elements move one chain down per cycle. Element ``k`` of the
``j``-th streamed vector enters chain 0 at cycle ``j + k``, so chain ``r``
emits the dot product for stream item ``j`` at the end of cycle
``j + cols - 1 + r``. A single full tile with one input therefore takes
``rows + cols - 1`` cycles, and every extra batched input adds one.

Vectors longer than a chain are cut into fragments that are streamed back to
back through the same chain; their partial sums are added at the chain
output at no modeled cost. Weight matrices taller than the array are handled
as sequential row tiles, each paying the full fill latency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INT8_MIN, INT8_MAX = -128, 127
INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1


class JobError(ValueError):
    pass


@dataclass(frozen=True)
class SystolicArrayConfig:
    rows: int = 64
    cols: int = 64
    clock_hz: float = 480e6

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array dimensions must be >= 1")
        if not self.clock_hz > 0:
            raise ValueError("clock_hz must be positive")


@dataclass(frozen=True)
class CycleReport:
    total_cycles: int
    mac_ops: int
    utilization: float
    wall_time_s: float


def peak_ops_per_second(config: SystolicArrayConfig):
    # one multiply and one add per cell per cycle; exact integer for integral clocks
    clock = config.clock_hz
    if float(clock).is_integer():
        clock = int(clock)
    return config.rows * config.cols * 2 * clock


def _check_job(weights: np.ndarray, inputs: np.ndarray):
    if weights.ndim != 2 or inputs.ndim != 2:
        raise JobError("weights must be M x K and inputs B x K")
    if min(weights.shape) < 1 or inputs.shape[0] < 1:
        raise JobError("M, K and B must all be >= 1")
    if weights.shape[1] != inputs.shape[1]:
        raise JobError(f"dimension mismatch: weights have K={weights.shape[1]}, inputs K={inputs.shape[1]}")
    for name, arr in (("weights", weights), ("inputs", inputs)):
        if arr.min() < INT8_MIN or arr.max() > INT8_MAX:
            raise JobError(f"{name} do not fit in signed 8 bits")


def _run_tile(w_tile: np.ndarray, stream: np.ndarray, frag: np.ndarray, rows: int, cols: int):
    """Clock one row tile until every stream item has left every chain.

    ``w_tile`` is ``(rows, n_frag, cols)``: the weights each cell uses for each
    fragment. ``stream`` is ``(items, cols)`` and ``frag[j]`` tells which
    fragment item ``j`` carries. Returns the per-chain outputs for every item
    and the number of cycles spent.
    """
    items = stream.shape[0]
    cycles = items + rows + cols - 2
    x = np.zeros((rows, cols), dtype=np.int64)  # input registers, flowing down
    xf = np.full((rows, cols), -1, dtype=np.int64)  # fragment tag of each input register
    p = np.zeros((rows, cols), dtype=np.int64)  # partial-sum registers, flowing right
    out = np.zeros((items, rows), dtype=np.int64)
    row_idx = np.arange(rows)[:, None]
    col_idx = np.arange(cols)[None, :]
    for t in range(cycles):
        # inject the skewed input wavefront into chain 0
        j = t - np.arange(cols)
        live = (j >= 0) & (j < items)
        top = np.zeros(cols, dtype=np.int64)
        top_tag = np.full(cols, -1, dtype=np.int64)
        top[live] = stream[j[live], np.nonzero(live)[0]]
        top_tag[live] = frag[j[live]]
        x_in = np.vstack([top[None, :], x[:-1]])
        tag_in = np.vstack([top_tag[None, :], xf[:-1]])
        p_in = np.hstack([np.zeros((rows, 1), dtype=np.int64), p[:, :-1]])
        w = np.where(tag_in >= 0, w_tile[row_idx, np.clip(tag_in, 0, None), col_idx], 0)
        p = p_in + w * x_in
        if p.min() < INT32_MIN or p.max() > INT32_MAX:
            raise JobError("32-bit accumulator overflow")
        x, xf = x_in, tag_in
        # chain r drains stream item t - (cols - 1) - r from its last cell
        k = t - (cols - 1) - np.arange(rows)
        done = (k >= 0) & (k < items)
        out[k[done], np.nonzero(done)[0]] = p[done, cols - 1]
    return out, cycles


def simulate_matvec(config: SystolicArrayConfig, weights, inputs):
    """Multiply a batch of int8 vectors by an int8 weight matrix, cycle by cycle.

    Returns ``(outputs, report)`` where ``outputs[m, b]`` is the exact dot
    product of weight row ``m`` with input vector ``b``.
    """
    weights = np.asarray(weights, dtype=np.int64)
    inputs = np.asarray(inputs, dtype=np.int64)
    if inputs.ndim == 1:
        inputs = inputs[None, :]
    _check_job(weights, inputs)
    M, K = weights.shape
    B = inputs.shape[0]
    R, C = config.rows, config.cols
    n_frag = math.ceil(K / C)

    # zero-pad K to whole fragments; stream item j = (vector j // n_frag, fragment j % n_frag)
    padded_w = np.zeros((M, n_frag * C), dtype=np.int64)
    padded_w[:, :K] = weights
    padded_x = np.zeros((B, n_frag * C), dtype=np.int64)
    padded_x[:, :K] = inputs
    stream = padded_x.reshape(B * n_frag, C)
    frag = np.tile(np.arange(n_frag), B)

    outputs = np.zeros((M, B), dtype=np.int64)
    total_cycles = 0
    for lo in range(0, M, R):
        hi = min(lo + R, M)
        w_tile = np.zeros((R, n_frag, C), dtype=np.int64)
        w_tile[: hi - lo] = padded_w[lo:hi].reshape(hi - lo, n_frag, C)
        partial, cycles = _run_tile(w_tile, stream, frag, R, C)
        total_cycles += cycles
        # fragment reduction at the chain output
        sums = partial.reshape(B, n_frag, R).sum(axis=1)
        if sums.min() < INT32_MIN or sums.max() > INT32_MAX:
            raise JobError("32-bit accumulator overflow")
        outputs[lo:hi] = sums[:, : hi - lo].T

    mac_ops = M * K * B
    report = CycleReport(
        total_cycles=total_cycles,
        mac_ops=mac_ops,
        utilization=mac_ops / (total_cycles * R * C),
        wall_time_s=total_cycles / config.clock_hz,
    )
    return outputs.astype(np.int32), report


def steady_state_throughput(config: SystolicArrayConfig, weights, inputs) -> float:
    """MACs per cycle achieved by the simulated schedule for this job."""
    _, report = simulate_matvec(config, weights, inputs)
    return report.mac_ops / report.total_cycles


def cycle_count(config: SystolicArrayConfig, M: int, K: int, B: int) -> int:
    """Closed-form cycle count of the schedule, without running it."""
    n_frag = math.ceil(K / config.cols)
    tiles = math.ceil(M / config.rows)
    return tiles * (B * n_frag + config.rows + config.cols - 2)
