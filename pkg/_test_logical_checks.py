#!/usr/bin/env python3
"""
逻辑算符存活检查测试脚本

覆盖三种方法的边界情形、七比特码上的穷举对照、方法之间的蕴含关系、
掩码单调性以及见证校验。
"""

import itertools
import os
import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.gf2 import gf2_matvec, in_column_space  # noqa: E402
from src.lattice import COLORS, Color, build_lattice, code_parameters  # noqa: E402
from src.logical_checks import (  # noqa: E402
    CheckMethod,
    UnionFind,
    brute_force_survival,
    check_algebraic,
    check_branching,
    check_logical,
    check_string_percolation,
    logical_survives,
    reference_vector,
    verify_witness,
)
from src.reconstruction import reconstruct, sample_losses  # noqa: E402
from src.tools import make_rng  # noqa: E402

CASES = int(os.getenv("TWINPERC_PROPERTY_CASES", "30"))

SMALL = [("4.8.8", "square", 4), ("6.6.6", "square", 4), ("4.8.8", "triangular", 5)]


def _random_mask(n, p, rng):
    return (rng.random(n) < p).astype(np.uint8)


def test_union_find():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    assert uf.is_same(0, 1) and uf.is_same(3, 4)
    assert not uf.is_same(1, 3)
    uf.union(1, 4)
    assert uf.is_same(0, 3)


@pytest.mark.parametrize("geometry,variant,distance", SMALL)
def test_empty_and_full_masks(geometry, variant, distance):
    print(f"🧪 测试: {geometry} {variant} d={distance} 空/满掩码")
    lattice = build_lattice(geometry, variant, distance)
    empty = np.zeros(lattice.n_qubits, dtype=np.uint8)
    full = np.ones(lattice.n_qubits, dtype=np.uint8)
    for method in CheckMethod:
        for color in COLORS:
            outcome = check_logical(method, lattice, empty, color)
            assert outcome.survives
            assert verify_witness(outcome, lattice, empty)
            assert not check_logical(method, lattice, full, color).survives
    # 无丢失时代数检查直接返回参考路径
    outcome = check_algebraic(lattice, empty, COLORS[0])
    assert outcome.solution == []
    assert outcome.support == lattice.logical_paths[COLORS[0]][0]
    print("✅ 空掩码全部存活，满掩码全部失败")


def test_seven_qubit_code_exhaustive():
    """七比特码的全部 2^7 个掩码：代数检查与穷举一致，且 I ⇒ II ⇒ III"""
    print("🧪 测试: 七比特码穷举")
    lattice = build_lattice("6.6.6", "triangular", 3)
    for bits in itertools.product((0, 1), repeat=7):
        mask = np.asarray(bits, dtype=np.uint8)
        for color in COLORS:
            algebraic = check_algebraic(lattice, mask, color)
            assert algebraic.survives == brute_force_survival(lattice, mask, color)
            string = check_string_percolation(lattice, mask, color)
            branching = check_branching(lattice, mask, color)
            assert not string.survives or branching.survives
            assert not branching.survives or algebraic.survives
            for outcome in (string, branching, algebraic):
                if outcome.survives:
                    assert verify_witness(outcome, lattice, mask), (bits, outcome)
    print("✅ 128 个掩码 × 3 种颜色全部一致")


def test_seven_qubit_single_losses():
    """七比特码距离为 3：丢失任意一个比特后逻辑算符仍可绕开"""
    lattice = build_lattice("6.6.6", "triangular", 3)
    for q in range(7):
        mask = np.zeros(7, dtype=np.uint8)
        mask[q] = 1
        for color in COLORS:
            assert check_algebraic(lattice, mask, color).survives


@pytest.mark.parametrize("geometry,variant,distance", SMALL)
def test_method_hierarchy(geometry, variant, distance):
    print(f"🧪 测试: {geometry} {variant} 方法蕴含关系")
    lattice = build_lattice(geometry, variant, distance)
    rng = make_rng(123)
    counts = {m: 0 for m in CheckMethod}
    for _ in range(CASES):
        mask = _random_mask(lattice.n_qubits, 0.25, rng)
        for color in COLORS:
            results = {m: check_logical(m, lattice, mask, color) for m in CheckMethod}
            if results[CheckMethod.STRING].survives:
                assert results[CheckMethod.BRANCHING].survives
            if results[CheckMethod.BRANCHING].survives:
                assert results[CheckMethod.ALGEBRAIC].survives
            for method, outcome in results.items():
                counts[method] += outcome.survives
                if outcome.survives:
                    assert verify_witness(outcome, lattice, mask)
    assert counts[CheckMethod.STRING] <= counts[CheckMethod.BRANCHING] <= counts[CheckMethod.ALGEBRAIC]
    print(f"✅ 存活次数 {({m.value: c for m, c in counts.items()})}")


def test_branching_levels_nested():
    """I ⇒ II(0) ⇒ II(1) ⇒ II(2)，各级见证都能通过校验"""
    lattice = build_lattice("4.8.8", "square", 6)
    rng = make_rng(5)
    for _ in range(CASES):
        mask = _random_mask(lattice.n_qubits, 0.15, rng)
        for color in COLORS:
            previous = check_string_percolation(lattice, mask, color, witness=False).survives
            for level in range(3):
                outcome = check_branching(lattice, mask, color, max_level=level)
                assert not previous or outcome.survives
                if outcome.survives:
                    assert verify_witness(outcome, lattice, mask)
                previous = outcome.survives
    with pytest.raises(ValueError):
        check_branching(lattice, np.zeros(lattice.n_qubits), COLORS[0], max_level=3)


def test_seven_qubit_branching_around_corner():
    """丢掉 B 角后 B 弦断开，但分叉出的 R 弦 {0,3,4} 仍是同一逻辑类"""
    print("🧪 测试: 七比特码绕开 B 角")
    lattice = build_lattice("6.6.6", "triangular", 3)
    assert [2] in [sorted(side) for side in lattice.borders[Color.B]]
    mask = np.zeros(7, dtype=np.uint8)
    mask[2] = 1
    assert not check_string_percolation(lattice, mask, Color.B).survives
    assert not check_branching(lattice, mask, Color.B, max_level=0).survives
    outcome = check_branching(lattice, mask, Color.B, max_level=1)
    assert outcome.survives
    assert 2 not in outcome.support
    assert verify_witness(outcome, lattice, mask)
    assert check_branching(lattice, mask, Color.B).survives
    assert check_algebraic(lattice, mask, Color.B).survives
    print(f"✅ 见证支撑 {outcome.support}")


def test_branching_uses_equivalent_color():
    """R 边界整条丢失时，与 Q_R 等价的 G 弦让 R 在分叉搜索下存活"""
    print("🧪 测试: 4.8.8 square d=8 借用 G 弦")
    lattice = build_lattice("4.8.8", "square", 8)
    mask = np.zeros(lattice.n_qubits, dtype=np.uint8)
    mask[lattice.borders[Color.R][0]] = 1
    assert not check_string_percolation(lattice, mask, Color.R).survives
    assert check_string_percolation(lattice, mask, Color.G).survives
    q_r = reference_vector(lattice, Color.R)
    q_g = reference_vector(lattice, Color.G)
    assert in_column_space(lattice.incidence, q_r ^ q_g)
    outcome = check_branching(lattice, mask, Color.R, max_level=1)
    assert outcome.survives
    assert verify_witness(outcome, lattice, mask)
    assert check_algebraic(lattice, mask, Color.R).survives
    print("✅ II(R) 存活且见证通过校验")


def test_logical_basis_pairs_with_reference_paths():
    """logical_basis 有 k 行、都与全部 plaquette 对易，参考路径至少与其中一行奇重叠"""
    for geometry, variant, distance in SMALL:
        lattice = build_lattice(geometry, variant, distance)
        basis = lattice.logical_basis
        assert basis.shape == (code_parameters(lattice).k, lattice.n_qubits)
        for row in basis:
            assert not gf2_matvec(lattice.incidence.T, row).any()
        for color in COLORS:
            path = reference_vector(lattice, color)
            assert gf2_matvec(basis, path).any()


@pytest.mark.parametrize("method", list(CheckMethod))
def test_monotone_in_mask(method):
    """M ⊆ M' 时 M' 存活蕴含 M 存活"""
    lattice = build_lattice("4.8.8", "square", 6)
    rng = make_rng(77)
    for _ in range(CASES):
        larger = _random_mask(lattice.n_qubits, 0.3, rng)
        smaller = larger & _random_mask(lattice.n_qubits, 0.5, rng)
        for color in COLORS:
            if check_logical(method, lattice, larger, color).survives:
                assert check_logical(method, lattice, smaller, color).survives


def test_witness_rejects_masked_qubit():
    print("🧪 测试: 见证校验")
    lattice = build_lattice("4.8.8", "square", 6)
    empty = np.zeros(lattice.n_qubits, dtype=np.uint8)
    outcome = check_algebraic(lattice, empty, COLORS[1])
    assert verify_witness(outcome, lattice, empty)
    mask = empty.copy()
    mask[outcome.support[0]] = 1
    assert not verify_witness(outcome, lattice, mask)
    broken = outcome.model_copy(update={"support": outcome.support[1:]})
    assert not verify_witness(broken, lattice, empty)
    print("✅ 碰到掩码或破坏奇偶的见证被拒绝")


def test_checks_on_reconstruction_records():
    """记录与掩码两种输入等价，且见证与重构后的生成元对易"""
    lattice = build_lattice("4.8.8", "square", 8)
    rng = make_rng(31)
    for _ in range(CASES):
        record = reconstruct(lattice, sample_losses(lattice, 0.08, rng), rng)
        for color in COLORS:
            by_record = check_algebraic(lattice, record, color)
            by_mask = check_algebraic(lattice, record.mask_array(), color)
            assert by_record.survives == by_mask.survives
            if by_record.survives:
                assert verify_witness(by_record, lattice, record)


def test_all_colors_criterion():
    lattice = build_lattice("4.8.8", "square", 6)
    rng = make_rng(8)
    for _ in range(CASES):
        mask = _random_mask(lattice.n_qubits, 0.2, rng)
        every = all(check_algebraic(lattice, mask, c).survives for c in COLORS)
        assert logical_survives("algebraic", lattice, mask, COLORS[0], "all-colors") == every
        assert logical_survives("algebraic", lattice, mask, COLORS[0], "per-color") == \
            check_algebraic(lattice, mask, COLORS[0]).survives


def test_mask_length_checked():
    lattice = build_lattice("6.6.6", "triangular", 3)
    with pytest.raises(ValueError):
        check_algebraic(lattice, np.zeros(5, dtype=np.uint8), COLORS[0])


if __name__ == "__main__":
    print("=" * 60)
    print("📌 逻辑算符存活检查测试")
    print("=" * 60)
    test_union_find()
    for case in SMALL:
        test_empty_and_full_masks(*case)
    test_seven_qubit_code_exhaustive()
    test_seven_qubit_single_losses()
    for case in SMALL:
        test_method_hierarchy(*case)
    test_branching_levels_nested()
    test_seven_qubit_branching_around_corner()
    test_branching_uses_equivalent_color()
    test_logical_basis_pairs_with_reference_paths()
    for method in CheckMethod:
        test_monotone_in_mask(method)
    test_witness_rejects_masked_qubit()
    test_checks_on_reconstruction_records()
    test_all_colors_criterion()
    test_mask_length_checked()
    print("=" * 60)
    print("✅ 全部通过")
