#!/usr/bin/env python3
"""
蒙特卡洛测试脚本

覆盖二分搜索的终止、确定性种子（与线程数无关）、分布统计、
丢失率扫描的端点以及分位数耦合的嵌套性。
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.lattice import Color, build_lattice  # noqa: E402
from src.montecarlo import (  # noqa: E402
    QuantileCoupling,
    ThresholdDistribution,
    TrialResult,
    remaining_fraction_stats,
    run_trials,
    sample_critical_rate,
    summarize,
    sweep_probability,
)
from src.tools import binomial_error, make_rng, run_parallel, trial_seed  # noqa: E402


def always_survives(lattice, record, color):
    return True


def never_survives(lattice, record, color):
    return False


def test_trial_seed_is_stable():
    print("🧪 测试: 试验种子")
    assert trial_seed(7, 0) == trial_seed(7, 0)
    assert trial_seed(7, 0) != trial_seed(7, 1)
    assert trial_seed(7, 0) != trial_seed(8, 0)
    assert trial_seed(7, 2, 3) != trial_seed(7, 3, 2)
    assert make_rng(trial_seed(1, 5)).random() == make_rng(trial_seed(1, 5)).random()
    print("✅ 种子只由 (主种子, 下标) 决定")


def test_run_parallel_keeps_order():
    items = list(range(50))
    assert run_parallel(lambda x: x * x, items, threads=8) == [x * x for x in items]


def test_quantile_coupling_is_nested():
    coupling = QuantileCoupling.draw(200, make_rng(4))
    previous = set()
    for p in np.linspace(0.0, 1.0, 21):
        current = set(coupling.losses(p))
        assert previous <= current
        assert coupling.count(p) == len(current)
        previous = current
    assert coupling.losses(0.0) == []
    assert len(coupling.losses(1.0)) == 200


def test_bisection_moves_up_when_always_surviving():
    print("🧪 测试: 总是存活的检查")
    lattice = build_lattice("6.6.6", "triangular", 5)
    result = sample_critical_rate(lattice, always_survives, Color.R, make_rng(0))
    assert result.p_critical > 0.5
    assert result.non_monotone == 0
    assert 2 <= result.rounds <= 64
    assert result.lost == QuantileCoupling.draw(lattice.n_qubits, make_rng(0)).count(result.p_critical)
    print(f"✅ p*={result.p_critical:.4f}, 丢失 {result.lost}")


def test_bisection_moves_down_when_never_surviving():
    lattice = build_lattice("6.6.6", "triangular", 5)
    result = sample_critical_rate(lattice, never_survives, Color.R, make_rng(0))
    assert result.p_critical < 0.5
    assert result.non_monotone == 0
    assert result.fraction_remaining >= (lattice.n_qubits - 2 * result.lost) / lattice.n_qubits


def test_bisection_stops_when_losses_stop_changing():
    """每一轮的丢失数都不同，直到某轮与上一轮相同"""
    lattice = build_lattice("4.8.8", "square", 4)
    seen = []

    def record_losses(lattice, record, color):
        seen.append(len(record.losses))
        return len(record.losses) < 6

    result = sample_critical_rate(lattice, record_losses, Color.R, make_rng(11))
    assert len(seen) == result.rounds - 1
    assert all(a != b for a, b in zip(seen, seen[1:]))
    assert result.lost == seen[-1]


@pytest.mark.parametrize("threads", [1, 4, 8])
def test_trials_independent_of_threads(threads):
    print(f"🧪 测试: threads={threads} 的确定性")
    lattice = build_lattice("4.8.8", "square", 4)
    reference = run_trials(lattice, "algebraic", Color.R, trials=6, master_seed=99, threads=1)
    parallel = run_trials(lattice, "algebraic", Color.R, trials=6, master_seed=99, threads=threads)
    assert parallel.rows() == reference.rows()
    assert parallel.seeds == [trial_seed(99, i) for i in range(6)]
    print("✅ 结果与线程数无关")


def test_frozen_twin_redraw_is_deterministic():
    lattice = build_lattice("4.8.8", "square", 4)
    a = run_trials(lattice, "string", Color.B, trials=3, master_seed=5, twin_redraw="frozen")
    b = run_trials(lattice, "string", Color.B, trials=3, master_seed=5, twin_redraw="frozen")
    assert a.rows() == b.rows()


def test_single_trial_statistics():
    lattice = build_lattice("6.6.6", "triangular", 3)
    dist = run_trials(lattice, "algebraic", Color.G, trials=1, master_seed=0)
    assert len(dist.samples) == 1
    assert dist.std == 0.0
    assert dist.mean == dist.samples[0].p_critical
    with pytest.raises(ValueError):
        run_trials(lattice, "algebraic", Color.G, trials=0, master_seed=0)


def test_distribution_mean_and_std():
    samples = [
        TrialResult(trial=i, seed=i, p_critical=p, fraction_remaining=0.5, lost=1, rounds=3)
        for i, p in enumerate([0.2, 0.3, 0.4])
    ]
    lattice = build_lattice("6.6.6", "triangular", 3)
    dist = ThresholdDistribution.from_samples(lattice, "algebraic", Color.R, samples)
    assert dist.mean == pytest.approx(0.3)
    assert dist.std == pytest.approx(0.1)
    assert dist.rows()[1]["p_critical"] == 0.3
    assert summarize([dist]) == {"3": {"mean": dist.mean, "std": dist.std, "trials": 3}}
    stats = remaining_fraction_stats([dist])
    assert stats[0].mean == pytest.approx(0.5)
    assert stats[0].err == 0.0


def test_sweep_endpoints():
    print("🧪 测试: 丢失率扫描端点")
    lattice = build_lattice("4.8.8", "square", 4)
    points = sweep_probability(lattice, "algebraic", Color.R, [0.0, 1.0], trials=5, seed=3, threads=2)
    assert [p.p for p in points] == [0.0, 1.0]
    assert points[0].survival == 1.0 and points[0].err == 0.0
    assert points[1].survival == 0.0
    assert all(p.trials == 5 for p in points)
    with pytest.raises(ValueError):
        sweep_probability(lattice, "algebraic", Color.R, [1.2], trials=1, seed=0)
    print("✅ p=0 存活率为 1，p=1 存活率为 0")


def test_binomial_error():
    rate, err = binomial_error(3, 4)
    assert rate == 0.75
    assert err == pytest.approx(np.sqrt(0.75 * 0.25 / 4))
    assert binomial_error(0, 0) == (0.0, 0.0)


if __name__ == "__main__":
    print("=" * 60)
    print("📌 蒙特卡洛测试")
    print("=" * 60)
    test_trial_seed_is_stable()
    test_run_parallel_keeps_order()
    test_quantile_coupling_is_nested()
    test_bisection_moves_up_when_always_surviving()
    test_bisection_moves_down_when_never_surviving()
    test_bisection_stops_when_losses_stop_changing()
    for threads in (1, 4, 8):
        test_trials_independent_of_threads(threads)
    test_frozen_twin_redraw_is_deterministic()
    test_single_trial_statistics()
    test_distribution_mean_and_std()
    test_sweep_endpoints()
    test_binomial_error()
    print("=" * 60)
    print("✅ 全部通过")
