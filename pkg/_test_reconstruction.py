#!/usr/bin/env python3
"""
孪生比特重构测试脚本

覆盖：无丢失、单个丢失、体内一般二聚体的拓扑不变量、生成元对易与秩、
逐步校验、修正链奇偶性、孪生比特跳过与孤立丢失。
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.errors import AlreadyExcisedError, IsolatedLossError, ProtocolError  # noqa: E402
from src.gf2 import gf2_rank  # noqa: E402
from src.lattice import Color, build_lattice, code_parameters, euler_characteristic  # noqa: E402
from src.reconstruction import (  # noqa: E402
    CodeState,
    LossSet,
    correction_chain,
    excise_dimer,
    reconstruct,
    record_euler_characteristic,
    record_to_json,
    sample_losses,
    select_twin,
    updated_generators,
    validate_record,
)
from src.tools import make_rng  # noqa: E402

CASES = int(os.getenv("TWINPERC_PROPERTY_CASES", "30"))


def _bulk_dimer(lattice, color=Color.R):
    """找一对体内比特：两者都是三价且属于三个 plaquette，并由给定颜色的边相连。"""
    for u, v, c in lattice.edges:
        if c is not color:
            continue
        if all(len(lattice.adjacency[q]) == 3 and (lattice.plaquette_of[q] >= 0).all() for q in (u, v)):
            return u, v
    raise AssertionError("没有找到体内二聚体")


def _pick(twin):
    def policy(state, q0, candidates, rng):
        assert twin in candidates
        return twin
    return policy


def _generator_matrix(record):
    n = record.lattice.n_qubits
    matrix = np.zeros((len(record.plaquettes), n), dtype=np.uint8)
    for i, p in enumerate(record.plaquettes):
        matrix[i, p.qubits] = 1
    return matrix


def test_no_losses_keeps_lattice():
    print("🧪 测试: 无丢失")
    lattice = build_lattice("4.8.8", "square", 6)
    record = reconstruct(lattice, [], make_rng(1))
    assert record.remaining_fraction == 1.0
    assert not record.dimers and not record.isolated and not record.skipped
    assert sum(record.mask) == 0
    assert [sorted(p.qubits) for p in lattice.plaquettes] == [p.qubits for p in record.plaquettes]
    assert record.edges == sorted(lattice.edges, key=lambda e: (e[0], e[1], e[2].idx))
    assert record_euler_characteristic(record) == euler_characteristic(lattice)
    print("✅ 无丢失时晶格保持不变")


def test_single_loss_removes_two_qubits():
    print("🧪 测试: 单个丢失")
    lattice = build_lattice("4.8.8", "square", 6)
    q = lattice.n_qubits // 2
    record = reconstruct(lattice, LossSet(lost=[q], rate=0.01), make_rng(3))
    assert len(record.dimers) == 1
    dimer = record.dimers[0]
    assert dimer.q0 == q and dimer.q1 in lattice.adjacency[q]
    assert record.rate == 0.01
    assert record.remaining_fraction == pytest.approx((lattice.n_qubits - 2) / lattice.n_qubits)
    assert np.flatnonzero(record.mask_array()).tolist() == sorted((dimer.q0, dimer.q1))
    print(f"✅ 移除二聚体 ({dimer.q0}, {dimer.q1})")


def test_seven_qubit_center_loss():
    """七比特码中心比特丢失：红色 plaquette 被并入边界，另外两个各缩成两个比特"""
    print("🧪 测试: 七比特码中心丢失")
    lattice = build_lattice("6.6.6", "triangular", 3)
    center = next(q for q in range(7) if (lattice.plaquette_of[q] >= 0).all())
    twin = next(
        r for r in lattice.adjacency[center]
        if any(c is Color.R and {u, v} == {center, r} for u, v, c in lattice.edges)
    )
    record = reconstruct(lattice, [center], make_rng(0), policy=_pick(twin))
    dimer = record.dimers[0]
    assert dimer.color is Color.R
    assert not dimer.generic
    assert len(dimer.absorbed) == 1
    assert lattice.plaquettes[dimer.absorbed[0]].color is Color.R
    assert sorted(p.color.value for p in record.plaquettes) == ["B", "G"]
    assert all(len(p.qubits) == 2 for p in record.plaquettes)
    assert record.remaining_fraction == pytest.approx(5 / 7)
    assert dimer.chi_before == dimer.chi_after == 1
    print("✅ 剩余 5/7 个比特，两个权重为 2 的生成元")


@pytest.mark.parametrize("geometry,distance", [("4.8.8", 6), ("6.6.6", 6)])
def test_generic_dimer_topology(geometry, distance):
    """体内一般二聚体：V-2, E-3, F-1，欧拉示性数不变，生成元秩满足 2·rank = N' - k"""
    print(f"🧪 测试: {geometry} 体内二聚体")
    lattice = build_lattice(geometry, "square", distance)
    q0, q1 = _bulk_dimer(lattice)
    record = reconstruct(lattice, [q0], make_rng(0), policy=_pick(q1))
    dimer = record.dimers[0]
    assert dimer.generic
    assert dimer.chi_before == dimer.chi_after
    assert len(dimer.redefined) == 3 and not dimer.absorbed
    assert len(record.plaquettes) == len(lattice.plaquettes) - 1
    assert len(record.edges) == len(lattice.edges) - 3
    assert record_euler_characteristic(record) == euler_characteristic(lattice)
    remaining = lattice.n_qubits - 2
    k = code_parameters(lattice).k
    assert 2 * gf2_rank(_generator_matrix(record)) == remaining - k
    print(f"✅ 二聚体 ({q0}, {q1}) 保持拓扑")


def test_generators_commute_after_random_losses():
    """任意丢失后，X 型与 Z 型生成元两两重叠为偶数，且不碰被移除的比特"""
    print("🧪 测试: 生成元对易")
    lattice = build_lattice("4.8.8", "square", 8)
    rng = make_rng(42)
    for _ in range(CASES):
        losses = sample_losses(lattice, 0.1, rng)
        record = reconstruct(lattice, losses, rng)
        mask = record.mask_array()
        generators = updated_generators(record)
        x = np.zeros((len(generators["X"]), lattice.n_qubits), dtype=np.int64)
        for i, support in enumerate(generators["X"]):
            x[i, support] = 1
        assert not (x @ mask).any()
        assert ((x @ x.T) % 2 == 0).all()
        for dimer in record.dimers:
            if dimer.generic:
                assert dimer.chi_before == dimer.chi_after
    print(f"✅ {CASES} 组随机丢失全部通过")


def _assert_rank_preserved(lattice, record):
    remaining = lattice.n_qubits - int(record.mask_array().sum())
    k = code_parameters(lattice).k
    assert 2 * gf2_rank(_generator_matrix(record)) == remaining - k, (record.losses, record.dimers)


@pytest.mark.parametrize("geometry", ["4.8.8", "6.6.6"])
def test_rank_after_several_losses(geometry):
    """多个丢失之后仍有 2·rank = N_rem - k；边界上的二聚体算符是逻辑算符时不能被测量"""
    print(f"🧪 测试: {geometry} 多个丢失后的生成元秩")
    lattice = build_lattice(geometry, "square", 6)
    losses = [q for q in (1, 11, 26, 30, 45) if q < lattice.n_qubits]
    checked = 0
    for seed in range(CASES):
        record = reconstruct(lattice, losses, make_rng(seed))
        if record.isolated or record.degenerate:
            continue
        _assert_rank_preserved(lattice, record)
        checked += 1
    rng = make_rng(17)
    for _ in range(CASES):
        record = reconstruct(lattice, sample_losses(lattice, 0.08, rng), rng)
        if record.isolated or record.degenerate:
            continue
        _assert_rank_preserved(lattice, record)
        checked += 1
    assert checked
    print(f"✅ {checked} 个记录的秩都满足 2·rank = N_rem - k")


def test_validate_after_each_excision():
    """同一随机数流下依次重放丢失列表的前缀，每一步的码都通过校验"""
    print("🧪 测试: 逐步校验")
    lattice = build_lattice("4.8.8", "square", 8)
    rng = make_rng(64)
    for trial in range(max(1, CASES // 10)):
        lost = sample_losses(lattice, 0.1, rng).lost
        for i in range(len(lost) + 1):
            record = reconstruct(lattice, lost[:i], make_rng(1000 + trial))
            report = validate_record(record)
            assert report.ok, (lost[:i], report.rules())
    print("✅ 每一步都通过校验")


def test_validate_record_reports_broken_code():
    lattice = build_lattice("4.8.8", "square", 6)
    record = reconstruct(lattice, [lattice.n_qubits // 2], make_rng(0))
    assert validate_record(record).ok
    bad = record.model_copy(update={"mask": [0] * lattice.n_qubits})
    assert "mask" in validate_record(bad).rules()
    first = record.plaquettes[0]
    odd = first.model_copy(update={"qubits": first.qubits[1:]})
    broken = record.model_copy(update={"plaquettes": [odd, *record.plaquettes[1:]]})
    assert "even plaquette weight" in validate_record(broken).rules()


def test_shared_flanking_plaquette_shrinks_by_four():
    """同一个八边形两条对边上的二聚体各让它缩小两个比特"""
    print("🧪 测试: 共享的 plaquette 缩小 4 个比特")
    lattice = build_lattice("4.8.8", "square", 8)
    pid, ring = next(
        (p, pl.qubits) for p, pl in enumerate(lattice.plaquettes)
        if len(pl.qubits) == 8
        and all(len(lattice.adjacency[q]) == 3 and (lattice.plaquette_of[q] >= 0).all() for q in pl.qubits)
    )
    twins = {ring[0]: ring[1], ring[4]: ring[5]}

    def policy(state, q0, candidates, rng):
        assert twins[q0] in candidates
        return twins[q0]

    record = reconstruct(lattice, list(twins), make_rng(0), policy=policy)
    assert len(record.dimers) == 2
    assert all(pid in d.redefined for d in record.dimers)
    final = next(p for p in record.plaquettes if p.id == pid)
    assert final.qubits == sorted(set(ring) - {ring[0], ring[1], ring[4], ring[5]})
    assert validate_record(record).ok
    print(f"✅ plaquette {pid} 从 8 个比特缩成 4 个")


def test_remaining_fraction_at_low_rate():
    """p = 0.05 时几乎每个丢失都带走一个孪生比特，剩余比例约为 1 - 2p"""
    lattice = build_lattice("4.8.8", "square", 16)
    rng = make_rng(2025)
    p = 0.05
    fractions = [reconstruct(lattice, sample_losses(lattice, p, rng), rng).remaining_fraction for _ in range(50)]
    mean = float(np.mean(fractions))
    assert 0.885 < mean < 0.92, mean
    print(f"✅ 平均剩余比例 {mean:.4f}")


def test_adding_skipped_twins_changes_nothing():
    """把后处理的孪生比特也加进丢失集合，只多出跳过记录，其余结果不变"""
    lattice = build_lattice("4.8.8", "square", 8)
    rng = make_rng(12)
    for trial in range(CASES):
        lost = sample_losses(lattice, 0.06, rng).lost
        base = reconstruct(lattice, lost, make_rng(trial))
        extra = {d.q1 for d in base.dimers if d.q1 > d.q0} - set(lost)
        again = reconstruct(lattice, sorted(set(lost) | extra), make_rng(trial))
        assert again.dimers == base.dimers
        assert again.mask == base.mask
        assert again.plaquettes == base.plaquettes
        assert again.edges == base.edges
        assert set(again.skipped) == set(base.skipped) | extra


def test_correction_chain_parity():
    print("🧪 测试: 修正链奇偶性")
    lattice = build_lattice("4.8.8", "square", 6)
    q0, q1 = _bulk_dimer(lattice)
    record = reconstruct(lattice, [q0], make_rng(0), policy=_pick(q1))
    chain = correction_chain(record, 0, "X")
    assert len(chain.targets) == 3
    assert chain.support
    support = set(chain.support)
    assert not support & {q0, q1}
    for p in record.plaquettes:
        overlap = len(support & set(p.qubits)) % 2
        assert overlap == (1 if p.id in chain.targets else 0)
    assert correction_chain(record, record.dimers[0], "Z").support == chain.support
    print(f"✅ 修正链 {chain.support}")


def test_twin_of_later_loss_is_skipped():
    print("🧪 测试: 孪生比特同时丢失")
    lattice = build_lattice("4.8.8", "square", 6)
    q0 = 0
    q1 = max(lattice.adjacency[q0])
    record = reconstruct(lattice, [q1, q0], make_rng(0), policy=_pick(q1))
    assert record.losses == [q0, q1]
    assert [(d.q0, d.q1) for d in record.dimers] == [(q0, q1)]
    assert record.skipped == [q1]
    assert sum(record.mask) == 2
    print("✅ 已移除的丢失比特被跳过")


def test_losing_everything():
    """全部丢失时每个比特要么是二聚体成员要么是孤立丢失"""
    lattice = build_lattice("6.6.6", "triangular", 3)
    record = reconstruct(lattice, list(range(7)), make_rng(5))
    assert record.remaining_fraction == 0.0
    assert 2 * len(record.dimers) + len(record.isolated) == 7
    assert len(record.dimers) + len(record.isolated) + len(record.skipped) == 7
    assert not record.plaquettes


def test_select_twin_errors():
    lattice = build_lattice("6.6.6", "triangular", 3)
    state = CodeState(lattice)
    state.present[0] = False
    with pytest.raises(AlreadyExcisedError):
        select_twin(state, 0, make_rng(0))
    state = CodeState(lattice)
    for r in lattice.adjacency[0]:
        state.present[r] = False
    with pytest.raises(IsolatedLossError):
        select_twin(state, 0, make_rng(0))
    with pytest.raises(ProtocolError):
        excise_dimer(CodeState(lattice), 0, 6)


def test_uniform_twin_frequencies():
    """体内比特的三个邻居被选中的频率都接近 1/3"""
    print("🧪 测试: 孪生比特均匀选择")
    lattice = build_lattice("4.8.8", "square", 6)
    q0, _ = _bulk_dimer(lattice)
    state = CodeState(lattice)
    rng = make_rng(9)
    draws = 3000
    counts = {r: 0 for r in lattice.adjacency[q0]}
    for _ in range(draws):
        counts[select_twin(state, q0, rng)] += 1
    sigma = np.sqrt((1 / 3) * (2 / 3) / draws)
    for r, count in counts.items():
        assert abs(count / draws - 1 / 3) < 4 * sigma, counts
    print(f"✅ 频率 {counts}")


def test_sample_losses_rate():
    lattice = build_lattice("4.8.8", "square", 36)
    rng = make_rng(2)
    p = 0.1
    draws = 200
    mean = np.mean([len(sample_losses(lattice, p, rng).lost) for _ in range(draws)])
    sigma = np.sqrt(lattice.n_qubits * p * (1 - p) / draws)
    assert abs(mean - lattice.n_qubits * p) < 4 * sigma
    with pytest.raises(ValueError):
        sample_losses(lattice, 1.5, rng)


def test_record_json_excludes_lattice():
    lattice = build_lattice("6.6.6", "triangular", 3)
    text = record_to_json(reconstruct(lattice, [3], make_rng(0)))
    assert '"lattice"' not in text
    assert '"remaining_fraction"' in text


if __name__ == "__main__":
    print("=" * 60)
    print("📌 孪生比特重构测试")
    print("=" * 60)
    test_no_losses_keeps_lattice()
    test_single_loss_removes_two_qubits()
    test_seven_qubit_center_loss()
    test_generic_dimer_topology("4.8.8", 6)
    test_generic_dimer_topology("6.6.6", 6)
    test_generators_commute_after_random_losses()
    test_rank_after_several_losses("4.8.8")
    test_rank_after_several_losses("6.6.6")
    test_validate_after_each_excision()
    test_validate_record_reports_broken_code()
    test_shared_flanking_plaquette_shrinks_by_four()
    test_remaining_fraction_at_low_rate()
    test_adding_skipped_twins_changes_nothing()
    test_correction_chain_parity()
    test_twin_of_later_loss_is_skipped()
    test_losing_everything()
    test_select_twin_errors()
    test_uniform_twin_frequencies()
    test_sample_losses_rate()
    test_record_json_excludes_lattice()
    print("=" * 60)
    print("✅ 全部通过")
