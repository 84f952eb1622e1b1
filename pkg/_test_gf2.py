#!/usr/bin/env python3
"""
GF(2) 求解器测试脚本

覆盖打包/解包、秩、求解（含无解情形）、零空间和植入解系统。
"""

import os
import sys
from pathlib import Path

import numpy as np

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.gf2 import (  # noqa: E402
    gf2_matvec,
    gf2_rank,
    gf2_solve,
    in_column_space,
    nullspace_basis,
    pack_rows,
    unpack_rows,
)

CASES = int(os.getenv("TWINPERC_PROPERTY_CASES", "30"))


def test_pack_unpack_wide_rows():
    """超过一个机器字的行打包后能原样还原"""
    print("🧪 测试: 打包与解包")
    rng = np.random.default_rng(7)
    dense = rng.integers(0, 2, size=(5, 130), dtype=np.uint8)
    packed = pack_rows(dense)
    assert packed.dtype == np.dtype("<u8")
    assert packed.shape == (5, 3)
    assert np.array_equal(unpack_rows(packed, 130), dense)
    print("✅ 打包/解包一致")


def test_rank_of_known_matrices():
    print("🧪 测试: GF(2) 秩")
    assert gf2_rank(np.eye(6, dtype=np.uint8)) == 6
    assert gf2_rank(np.zeros((4, 9), dtype=np.uint8)) == 0
    # 三行之和为零
    m = np.array([[1, 1, 0, 0], [0, 1, 1, 0], [1, 0, 1, 0]], dtype=np.uint8)
    assert gf2_rank(m) == 2
    assert gf2_rank(m.T) == 2
    print("✅ 秩正确")


def test_solve_empty_constraints():
    """没有约束行时 x = 0 是解"""
    print("🧪 测试: 空约束")
    x = gf2_solve(np.zeros((0, 5), dtype=np.uint8), np.zeros(0, dtype=np.uint8))
    assert x is not None and x.shape == (5,) and not x.any()
    print("✅ 空约束返回零解")


def test_solve_inconsistent_system():
    print("🧪 测试: 无解系统")
    a = np.array([[1, 1], [1, 1]], dtype=np.uint8)
    assert gf2_solve(a, np.array([1, 0], dtype=np.uint8)) is None
    assert not in_column_space(a, np.array([1, 0], dtype=np.uint8))
    assert in_column_space(a, np.array([1, 1], dtype=np.uint8))
    print("✅ 不一致系统返回 None")


def test_planted_systems():
    """随机 50×30 系统植入解 x*，返回的 x 满足方程（不一定等于 x*）"""
    print("🧪 测试: 植入解系统")
    rng = np.random.default_rng(2024)
    for _ in range(CASES):
        a = rng.integers(0, 2, size=(50, 30), dtype=np.uint8)
        planted = rng.integers(0, 2, size=30, dtype=np.uint8)
        rhs = gf2_matvec(a, planted)
        x = gf2_solve(a, rhs)
        assert x is not None
        assert np.array_equal(gf2_matvec(a, x), rhs)
    print(f"✅ {CASES} 个植入系统全部求解正确")


def test_nullspace_basis():
    print("🧪 测试: 零空间")
    rng = np.random.default_rng(11)
    a = rng.integers(0, 2, size=(8, 20), dtype=np.uint8)
    basis = nullspace_basis(a)
    assert basis.shape[0] == 20 - gf2_rank(a)
    for vec in basis:
        assert not gf2_matvec(a, vec).any()
    assert gf2_rank(basis) == basis.shape[0]
    print(f"✅ 零空间维数 {basis.shape[0]}")


if __name__ == "__main__":
    tests = [
        test_pack_unpack_wide_rows,
        test_rank_of_known_matrices,
        test_solve_empty_constraints,
        test_solve_inconsistent_system,
        test_planted_systems,
        test_nullspace_basis,
    ]
    failed = 0
    for test in tests:
        try:
            test()
        except AssertionError as e:
            failed += 1
            print(f"❌ {test.__name__} 失败: {e}")
    print("=" * 60)
    print(f"📊 {len(tests) - failed}/{len(tests)} 通过")
    sys.exit(1 if failed else 0)
