"""Pipelined execution of a segmented model over a batch of inputs.

Three backends share one plan format:

* ``analytic``: closed form, fill time plus (B - 1) bottleneck periods.
* ``events``: a heap-driven discrete-event simulation with FIFO stages and
  optionally bounded queues (blocking after service).
* ``emulated``: one thread per stage connected by FIFO channels, the way a
  host drives one device per thread. Service is virtual-time delay, so the
  timeline does not depend on how the OS schedules the threads.

All backends do their time arithmetic on exact rationals and round to float
once at the end, which is what makes their makespans bit-identical.
"""

from __future__ import annotations

import csv
import heapq
import io
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

BACKENDS = ("analytic", "events", "emulated")


@dataclass(frozen=True)
class PipelinePlan:
    """Per stage: (service latency, incoming transfer latency), in seconds."""

    stages: tuple

    def __post_init__(self):
        stages = tuple((float(s), float(t)) for s, t in self.stages)
        if not stages:
            raise ValueError("a plan needs at least one stage")
        if any(s < 0 or t < 0 for s, t in stages):
            raise ValueError("latencies must be non-negative")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def from_latencies(cls, latencies: Iterable[float], transfers: Iterable[float] | None = None) -> "PipelinePlan":
        latencies = list(latencies)
        transfers = [0.0] * len(latencies) if transfers is None else list(transfers)
        return cls(tuple(zip(latencies, transfers)))

    def effective(self) -> list[float]:
        return [s + t for s, t in self.stages]

    def _exact(self) -> list[Fraction]:
        return [Fraction(s) + Fraction(t) for s, t in self.stages]

    def __len__(self):
        return len(self.stages)


@dataclass(frozen=True)
class SimOptions:
    batch: int = 1
    backend: str = "events"
    queue_capacity: int | None = None
    # emulated backend only: also sleep scale * service time per item (demo)
    wall_clock_scale: float = 0.0

    def __post_init__(self):
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.queue_capacity is not None and self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1 when bounded")
        if self.wall_clock_scale < 0:
            raise ValueError("wall_clock_scale must be >= 0")


@dataclass(frozen=True)
class TimelineEvent:
    stage: int
    input_index: int
    start_s: float
    end_s: float


@dataclass
class SimResult:
    makespan_s: float
    batch: int
    stage_busy_s: list
    bottleneck_stage: int
    timeline: list = field(default_factory=list)

    @property
    def per_inference_s(self) -> float:
        return self.makespan_s / self.batch

    def timeline_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["stage", "input_index", "start_s", "end_s"])
        for ev in self.timeline:
            writer.writerow([ev.stage, ev.input_index, repr(ev.start_s), repr(ev.end_s)])
        return buf.getvalue()


def _bottleneck(eff: Sequence[Fraction]) -> int:
    return max(range(len(eff)), key=lambda i: (eff[i], -i))


def _exact_makespan(eff: Sequence[Fraction], batch: int) -> Fraction:
    return sum(eff, Fraction(0)) + (batch - 1) * max(eff)


def analytic_makespan(plan: PipelinePlan, batch: int) -> float:
    if batch < 1:
        raise ValueError("batch must be >= 1")
    return float(_exact_makespan(plan._exact(), batch))


def simulate_analytic(plan: PipelinePlan, options: SimOptions) -> SimResult:
    if options.queue_capacity is not None:
        raise ValueError("the analytic backend only models unbounded queues")
    eff = plan._exact()
    return SimResult(
        makespan_s=float(_exact_makespan(eff, options.batch)),
        batch=options.batch,
        stage_busy_s=[float(e * options.batch) for e in eff],
        bottleneck_stage=_bottleneck(eff),
    )


def _result(eff, batch, records) -> SimResult:
    records.sort(key=lambda r: (r[2], r[0], r[1]))
    timeline = [TimelineEvent(st, b, float(s), float(e)) for st, b, s, e in records]
    makespan = max(e for _, _, _, e in records)
    return SimResult(
        makespan_s=float(makespan),
        batch=batch,
        stage_busy_s=[float(e * batch) for e in eff],
        bottleneck_stage=_bottleneck(eff),
        timeline=timeline,
    )


def simulate_events(plan: PipelinePlan, options: SimOptions) -> SimResult:
    """Discrete-event run of the plan.

    Stage ``i`` owns an input queue; for ``i >= 1`` it holds at most
    ``queue_capacity`` waiting items. A stage that finishes an item while the
    next queue is full keeps the item (and stays blocked) until space frees up.
    """
    eff = plan._exact()
    n = len(eff)
    cap = options.queue_capacity
    queues = [deque(range(options.batch))] + [deque() for _ in range(n - 1)]
    busy: list = [None] * n
    blocked: list = [None] * n
    started: dict = {}
    records = []
    events: list = []
    seq = 0

    def schedule(t, stage, item):
        nonlocal seq
        heapq.heappush(events, (t, seq, stage, item))
        seq += 1

    def has_room(i):
        return i == 0 or cap is None or len(queues[i]) < cap

    def try_start(i, t):
        if busy[i] is not None or blocked[i] is not None or not queues[i]:
            return
        item = queues[i].popleft()
        busy[i] = item
        started[i, item] = t
        schedule(t + eff[i], i, item)
        # a slot opened in queue i: let a blocked upstream stage hand over
        if i > 0 and blocked[i - 1] is not None:
            queues[i].append(blocked[i - 1])
            blocked[i - 1] = None
            try_start(i, t)
            try_start(i - 1, t)

    try_start(0, Fraction(0))
    while events:
        t, _, i, item = heapq.heappop(events)
        busy[i] = None
        records.append((i, item, started[i, item], t))
        if i + 1 < n:
            if has_room(i + 1):
                queues[i + 1].append(item)
                try_start(i + 1, t)
            else:
                blocked[i] = item
        try_start(i, t)

    return _result(eff, options.batch, records)


_DONE = object()


def emulate_concurrent(plan: PipelinePlan, options: SimOptions) -> SimResult:
    """Thread-per-stage emulation with virtual timestamps.

    Items travel between workers as ``(index, ready_time)``. With a bounded
    capacity ``K`` an item may leave stage ``i`` only once item ``index - K``
    has started at stage ``i + 1``; workers learn those start times over a
    back channel.
    """
    eff = plan._exact()
    n = len(eff)
    cap = options.queue_capacity
    channels = [queue.Queue() for _ in range(n + 1)]
    starts_back = [queue.Queue() for _ in range(n)]
    records: list = []
    lock = threading.Lock()
    errors: list = []

    def worker(i):
        try:
            free_at = Fraction(0)
            downstream_starts: list = []
            local = []
            while True:
                msg = channels[i].get()
                if msg is _DONE:
                    break
                index, ready = msg
                start = max(ready, free_at)
                if i > 0:
                    starts_back[i - 1].put(start)
                done = start + eff[i]
                if options.wall_clock_scale:
                    time.sleep(float(eff[i]) * options.wall_clock_scale)
                depart = done
                if cap is not None and i + 1 < n and index >= cap:
                    while len(downstream_starts) <= index - cap:
                        downstream_starts.append(starts_back[i].get())
                    depart = max(done, downstream_starts[index - cap])
                free_at = depart
                local.append((i, index, start, done))
                channels[i + 1].put((index, depart))
            channels[i + 1].put(_DONE)
            with lock:
                records.extend(local)
        except Exception as exc:  # pragma: no cover - surfaced below
            errors.append(exc)
            channels[i + 1].put(_DONE)

    threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(n)]
    for th in threads:
        th.start()
    for b in range(options.batch):
        channels[0].put((b, Fraction(0)))
    channels[0].put(_DONE)
    for th in threads:
        th.join()
    if errors:
        raise errors[0]
    return _result(eff, options.batch, records)


def simulate(plan: PipelinePlan, options: SimOptions) -> SimResult:
    if options.backend == "analytic":
        return simulate_analytic(plan, options)
    if options.backend == "events":
        return simulate_events(plan, options)
    return emulate_concurrent(plan, options)


def speedup_vs_single_input(result_b: SimResult, result_1: SimResult) -> float:
    return result_1.makespan_s / result_b.per_inference_s


def speedup_vs_single_device(result: SimResult, single) -> float:
    """``single`` is the one-device StageCost of the same model."""
    return single.total_s / result.per_inference_s
