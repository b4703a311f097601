import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from tpuseg.systolic import (
    JobError,
    SystolicArrayConfig,
    cycle_count,
    peak_ops_per_second,
    simulate_matvec,
    steady_state_throughput,
)


def matmul_oracle(weights, inputs):
    M, K = len(weights), len(weights[0])
    return [[sum(int(weights[m][k]) * int(inputs[b][k]) for k in range(K)) for b in range(len(inputs))] for m in range(M)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_identity():
    out, _ = simulate_matvec(SystolicArrayConfig(3, 3, 1), np.eye(3, dtype=int), [1, 2, 3])
    assert out[:, 0].tolist() == [1, 2, 3]


def test_random_small_job(rng):
    w = rng.integers(-128, 128, (5, 7))
    x = rng.integers(-128, 128, (4, 7))
    out, _ = simulate_matvec(SystolicArrayConfig(3, 3, 1), w, x)
    assert out.tolist() == matmul_oracle(w, x)


def test_hand_traced_cycle_count():
    # hand trace: element k of the single input reaches chain r at cycle k + r,
    # chain 2 emits at the end of cycle 2 + 2, i.e. after 5 cycles
    _, report = simulate_matvec(SystolicArrayConfig(3, 3, 1), np.ones((3, 3), dtype=int), [[1, 1, 1]])
    assert report.total_cycles == 5
    assert report.mac_ops == 9
    assert report.utilization == pytest.approx(9 / 45)
    assert report.wall_time_s == 5.0


@settings(max_examples=60, deadline=None)
@given(
    R=st.integers(1, 6),
    C=st.integers(1, 6),
    M=st.integers(1, 16),
    K=st.integers(1, 16),
    B=st.integers(1, 8),
    seed=st.integers(0, 2**32 - 1),
)
def test_exact_and_bounded(R, C, M, K, B, seed):
    rng = np.random.default_rng(seed)
    w = rng.integers(-128, 128, (M, K))
    x = rng.integers(-128, 128, (B, K))
    cfg = SystolicArrayConfig(R, C, 1e6)
    out, report = simulate_matvec(cfg, w, x)
    assert np.array_equal(out, w @ x.T)
    assert report.utilization <= 1
    assert report.total_cycles == cycle_count(cfg, M, K, B)


def test_one_extra_cycle_per_batched_input(rng):
    cfg = SystolicArrayConfig(4, 5, 1)
    w = rng.integers(-128, 128, (4, 5))
    cycles = [simulate_matvec(cfg, w, rng.integers(-128, 128, (b, 5)))[1].total_cycles for b in range(1, 8)]
    assert np.diff(cycles).tolist() == [1] * 6


def test_tiling_costs():
    cfg = SystolicArrayConfig(2, 2, 1)
    # M=5 -> 3 row tiles, K=5 -> 3 fragments streamed per vector
    _, report = simulate_matvec(cfg, np.ones((5, 5), dtype=int), np.ones((2, 5), dtype=int))
    assert report.total_cycles == 3 * (2 * 3 + 2 + 2 - 2)


def test_throughput_limits():
    cfg = SystolicArrayConfig(3, 3, 1)
    w = np.ones((3, 3), dtype=int)
    assert steady_state_throughput(cfg, w, np.ones((1, 3), dtype=int)) == pytest.approx(9 / 5)
    big = steady_state_throughput(cfg, w, np.ones((5000, 3), dtype=int))
    assert big == pytest.approx(45000 / 5004)
    assert 8.99 < big < 9
    assert steady_state_throughput(SystolicArrayConfig(4, 4, 1), np.ones((2, 3), dtype=int), np.ones((500, 3), dtype=int)) < 6


@pytest.mark.parametrize(
    "cfg, expected",
    [
        (SystolicArrayConfig(64, 64, 480_000_000), 3_932_160_000_000),
        (SystolicArrayConfig(1, 1, 1), 2),
        (SystolicArrayConfig(3, 3, 100), 1_800),
    ],
)
def test_peak_ops(cfg, expected):
    assert peak_ops_per_second(cfg) == expected


def test_job_errors():
    cfg = SystolicArrayConfig(2, 2, 1)
    with pytest.raises(JobError):
        simulate_matvec(cfg, np.ones((2, 3), dtype=int), np.ones((1, 4), dtype=int))
    with pytest.raises(JobError):
        simulate_matvec(cfg, np.full((2, 2), 300), np.ones((1, 2), dtype=int))


def test_accumulator_overflow_is_an_error():
    cfg = SystolicArrayConfig(1, 64, 1)
    K = 140_000  # 140000 * 128 * 128 > 2**31
    with pytest.raises(JobError):
        simulate_matvec(cfg, np.full((1, K), -128), np.full((1, K), -128))


def test_deterministic(rng):
    cfg = SystolicArrayConfig(4, 3, 10)
    w = rng.integers(-128, 128, (6, 7))
    x = rng.integers(-128, 128, (3, 7))
    a = simulate_matvec(cfg, w, x)
    b = simulate_matvec(cfg, w, x)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_bad_config():
    with pytest.raises(ValueError):
        SystolicArrayConfig(0, 3, 1)
    with pytest.raises(ValueError):
        SystolicArrayConfig(3, 3, 0)
