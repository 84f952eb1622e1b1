#!/usr/bin/env python3
"""
晶格构造测试脚本

验证四个族的比特数、码参数、校验规则、收缩晶格划分和 JSON 往返。
"""

import sys
from pathlib import Path

import pytest

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.errors import LatticeError  # noqa: E402
from src.lattice import (  # noqa: E402
    BORDER_A,
    BORDER_B,
    COLORS,
    Color,
    ColorLattice,
    build_lattice,
    code_parameters,
    euler_characteristic,
    lattice_document,
    lattice_from_json,
    lattice_to_json,
    validate,
)

FAMILIES = [
    ("4.8.8", "square", 4, 2),
    ("4.8.8", "square", 6, 2),
    ("4.8.8", "triangular", 3, 1),
    ("4.8.8", "triangular", 5, 1),
    ("6.6.6", "square", 4, 2),
    ("6.6.6", "square", 6, 2),
    ("6.6.6", "triangular", 3, 1),
    ("6.6.6", "triangular", 5, 1),
]


def test_qubit_counts():
    """每个族的比特数与闭式公式一致"""
    print("🧪 测试: 比特数")
    assert build_lattice("4.8.8", "square", 4).n_qubits == 20
    assert build_lattice("4.8.8", "square", 36).n_qubits == 2 * 36 * 36 - 4 * 36 + 4
    for d in (3, 5, 7):
        assert build_lattice("4.8.8", "triangular", d).n_qubits == d * d - d + 1
        assert build_lattice("6.6.6", "triangular", d).n_qubits == (3 * d * d + 1) // 4
    for d in (4, 6):
        m = d // 2 - 1
        assert build_lattice("6.6.6", "square", d).n_qubits == 6 * m * m + 8 * m + 4
    print("✅ 比特数正确 (d=36 方形 4.8.8: 2452)")


@pytest.mark.parametrize("geometry,variant,distance,k", FAMILIES)
def test_families_validate(geometry, variant, distance, k):
    print(f"🧪 测试: {geometry} {variant} d={distance}")
    lattice = build_lattice(geometry, variant, distance)
    report = validate(lattice)
    assert report.ok, report.rules()
    assert code_parameters(lattice).k == k
    assert euler_characteristic(lattice) == 1
    for color in COLORS:
        assert lattice.logical_paths[color], f"颜色 {color.value} 没有参考路径"
    print(f"✅ N={lattice.n_qubits}, k={k}")


def test_smallest_triangular_code():
    """6.6.6 d=3 是七比特码：三个四比特 plaquette，每种颜色一个"""
    print("🧪 测试: 七比特码")
    lattice = build_lattice("6.6.6", "triangular", 3)
    params = code_parameters(lattice)
    assert (params.n_qubits, params.n_plaquettes, params.rank, params.k) == (7, 3, 3, 1)
    assert len(lattice.edges) == 9
    assert lattice.incidence.shape == (7, 3)
    assert sorted(p.color.value for p in lattice.plaquettes) == ["B", "G", "R"]
    assert all(len(p.qubits) == 4 for p in lattice.plaquettes)
    # 中心比特属于全部三个 plaquette
    assert sum(1 for q in range(7) if (lattice.plaquette_of[q] >= 0).all()) == 1
    print("✅ [[7,1,3]] 参数正确")


def test_plaquettes_are_cycles():
    """plaquette 的比特按环序排列：相邻两个比特之间有边"""
    print("🧪 测试: plaquette 环序")
    lattice = build_lattice("4.8.8", "square", 6)
    pairs = {(u, v) for u, v, _ in lattice.edges} | {(v, u) for u, v, _ in lattice.edges}
    for plaquette in lattice.plaquettes:
        ring = plaquette.qubits
        for a, b in zip(ring, ring[1:] + ring[:1]):
            assert (a, b) in pairs
    print("✅ 所有 plaquette 都是闭合的环")


def test_shrunk_lattices_partition_edges():
    print("🧪 测试: 收缩晶格划分")
    for geometry, variant, distance, _ in FAMILIES[:6:2]:
        lattice = build_lattice(geometry, variant, distance)
        total = sum(len(lattice.shrunk_lattices[c].links) for c in COLORS)
        assert total == len(lattice.edges)
        for color in COLORS:
            shrunk = lattice.shrunk_lattices[color]
            for link in shrunk.links:
                for node in link.nodes:
                    assert node in (BORDER_A, BORDER_B) or lattice.plaquettes[node].color is color
    print("✅ 每条边恰好属于一个收缩晶格")


def test_square_border_labels():
    lattice = build_lattice("4.8.8", "square", 6)
    assert lattice.border_labels[Color.B] == (["left"], ["right"])
    assert lattice.border_labels[Color.G] == (["top"], ["bottom"])
    # 红色边界各是一个角比特
    assert len(lattice.borders[Color.R][0]) == 1
    assert len(lattice.borders[Color.R][1]) == 1


def test_validate_detects_recolored_edge():
    print("🧪 测试: 边颜色互补规则")
    lattice = build_lattice("6.6.6", "triangular", 3)
    data = lattice.model_dump()
    u, v, _ = data["edges"][0]
    shared = set(lattice.plaquette_of[u]) & set(lattice.plaquette_of[v]) - {-1}
    wrong = lattice.plaquettes[int(shared.pop())].color
    data["edges"][0] = (u, v, wrong)
    report = validate(ColorLattice.model_validate(data))
    assert not report.ok
    assert "edge-color complement" in report.rules()
    print(f"✅ 发现违规: {report.rules()}")


def test_validate_detects_odd_plaquette():
    print("🧪 测试: plaquette 偶数权重规则")
    lattice = build_lattice("4.8.8", "square", 4)
    data = lattice.model_dump()
    data["plaquettes"][0]["qubits"] = data["plaquettes"][0]["qubits"][:-1]
    report = validate(ColorLattice.model_validate(data))
    assert "even plaquette weight" in report.rules()
    print("✅ 奇数权重被发现")


def test_json_round_trip():
    print("🧪 测试: JSON 往返")
    lattice = build_lattice("6.6.6", "square", 4)
    text = lattice_to_json(lattice)
    assert '"qubits": 18' in text
    restored = lattice_from_json(text)
    assert restored.model_dump() == lattice.model_dump()
    assert validate(restored).ok
    print("✅ 反序列化后与原晶格一致")


def test_lattice_document_contains_k():
    document = lattice_document(build_lattice("4.8.8", "square", 6))
    assert document["k"] == 2
    assert document["qubits"] == 52


def test_bad_json_raises():
    with pytest.raises(LatticeError):
        lattice_from_json("{not json")


@pytest.mark.parametrize("geometry,variant,distance", [
    ("4.8.8", "square", 5),
    ("4.8.8", "square", 2),
    ("6.6.6", "triangular", 4),
    ("4.8.8", "triangular", 1),
    ("5.5.5", "square", 6),
])
def test_invalid_distance_rejected(geometry, variant, distance):
    with pytest.raises(LatticeError):
        build_lattice(geometry, variant, distance)


if __name__ == "__main__":
    print("=" * 60)
    print("📌 晶格构造测试")
    print("=" * 60)
    test_qubit_counts()
    for family in FAMILIES:
        test_families_validate(*family)
    test_smallest_triangular_code()
    test_plaquettes_are_cycles()
    test_shrunk_lattices_partition_edges()
    test_square_border_labels()
    test_validate_detects_recolored_edge()
    test_validate_detects_odd_plaquette()
    test_json_round_trip()
    test_lattice_document_contains_k()
    print("=" * 60)
    print("✅ 全部通过")
