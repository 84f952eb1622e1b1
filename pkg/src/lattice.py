"""
色码晶格的构造、校验与收缩晶格。

四个族（4.8.8 / 6.6.6 × square / triangular）都先生成对偶三角剖分：
实顶点是染色的 plaquette，每条边界合并成一个带颜色的虚顶点，每个三角形
对应一个量子比特。公共的组装步骤从三角形推出边（共享两个顶点且不全为虚顶点
的三角形对）、plaquette 的环序、边界和参考逻辑路径。

量子比特编号：按位置 (y, x) 四舍五入到 6 位后排序，最下面一行优先。
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations, pairwise
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import LatticeError
from .gf2 import gf2_rank, in_column_space, nullspace_basis

logger = logging.getLogger(__name__)

BORDER_A = -1
BORDER_B = -2


class Color(str, Enum):
    R = "R"
    G = "G"
    B = "B"

    @property
    def idx(self) -> int:
        return COLOR_ORDER[self.value]

    def complement(self) -> Tuple["Color", "Color"]:
        return tuple(c for c in COLORS if c is not self)


COLOR_ORDER = {"R": 0, "G": 1, "B": 2}
COLORS = (Color.R, Color.G, Color.B)


def third_color(a: Color, b: Color) -> Color:
    if a is b:
        raise LatticeError(f"两个颜色相同，无法取补色: {a.value}")
    return next(c for c in COLORS if c is not a and c is not b)


class Geometry(str, Enum):
    FOUR_EIGHT_EIGHT = "4.8.8"
    SIX_SIX_SIX = "6.6.6"


class Variant(str, Enum):
    SQUARE = "square"
    TRIANGULAR = "triangular"


class Plaquette(BaseModel):
    """一个面：颜色 + 按环序排列的量子比特。"""
    model_config = ConfigDict(frozen=True)

    color: Color
    qubits: List[int]


class ColorLattice(BaseModel):
    """
    不可变的色码晶格，可在并发试验间共享。

    Attributes:
        geometry (Geometry): 4.8.8 或 6.6.6。
        variant (Variant): square 或 triangular。
        distance (int): 码距 d。
        n_qubits (int): 量子比特数 N（JSON 中的键为 "qubits"）。
        edges (List[Tuple[int, int, Color]]): 带颜色的边，允许平行边。
        plaquettes (List[Plaquette]): 面列表。
        borders (Dict[Color, Tuple[List[int], List[int]]]): 每种颜色的两条边界。
        border_labels (Dict[Color, Tuple[List[str], List[str]]]): 组成边界的边/角名称。
        logical_paths (Dict[Color, List[List[int]]]): 每种颜色的参考逻辑路径，下标即 μ。
        positions (List[Tuple[float, float]]): 量子比特的平面坐标。
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    geometry: Geometry
    variant: Variant
    distance: int
    n_qubits: int = Field(alias="qubits")
    edges: List[Tuple[int, int, Color]]
    plaquettes: List[Plaquette]
    borders: Dict[Color, Tuple[List[int], List[int]]]
    border_labels: Dict[Color, Tuple[List[str], List[str]]] = Field(default_factory=dict)
    logical_paths: Dict[Color, List[List[int]]] = Field(default_factory=dict)
    positions: List[Tuple[float, float]] = Field(default_factory=list)

    @cached_property
    def plaquette_of(self) -> np.ndarray:
        """(N, 3) 数组：每个量子比特在每种颜色下所属的 plaquette 下标，没有为 -1。"""
        table = np.full((self.n_qubits, 3), -1, dtype=np.int64)
        for p, plaquette in enumerate(self.plaquettes):
            column = plaquette.color.idx
            for q in plaquette.qubits:
                if table[q, column] == -1:
                    table[q, column] = p
        return table

    @cached_property
    def edge_of(self) -> np.ndarray:
        """(N, 3) 数组：每个量子比特在每种颜色下的边下标，没有为 -1。"""
        table = np.full((self.n_qubits, 3), -1, dtype=np.int64)
        for e, (u, v, color) in enumerate(self.edges):
            for q in (u, v):
                if table[q, color.idx] == -1:
                    table[q, color.idx] = e
        return table

    @cached_property
    def incidence(self) -> np.ndarray:
        """N × n 的 0/1 矩阵，第 j 列是第 j 个 plaquette 的支撑。"""
        matrix = np.zeros((self.n_qubits, len(self.plaquettes)), dtype=np.uint8)
        for p, plaquette in enumerate(self.plaquettes):
            matrix[plaquette.qubits, p] = 1
        return matrix

    @cached_property
    def logical_basis(self) -> np.ndarray:
        """
        (k, N) 数组：模稳定子群互不等价的 k 个逻辑算符支撑。

        先取各颜色的参考路径，不够时从 A^T 的零空间补齐。两个与全部 plaquette
        对易的算符属于同一逻辑类，当且仅当它们与这组基的重叠奇偶性相同。
        """
        k = self.n_qubits - 2 * gf2_rank(self.incidence)
        candidates = []
        for color in COLORS:
            for path in self.logical_paths.get(color, []):
                vector = np.zeros(self.n_qubits, dtype=np.uint8)
                vector[path] = 1
                candidates.append(vector)
        candidates.extend(nullspace_basis(self.incidence.T))
        chosen: List[np.ndarray] = []
        span = self.incidence
        for vector in candidates:
            if len(chosen) == k:
                break
            if not in_column_space(span, vector):
                chosen.append(vector)
                span = np.column_stack([span, vector])
        if not chosen:
            return np.zeros((0, self.n_qubits), dtype=np.uint8)
        return np.vstack(chosen).astype(np.uint8)

    @cached_property
    def adjacency(self) -> List[List[int]]:
        neighbors: List[List[int]] = [[] for _ in range(self.n_qubits)]
        for u, v, _ in self.edges:
            neighbors[u].append(v)
            neighbors[v].append(u)
        return neighbors

    @cached_property
    def shrunk_lattices(self) -> Dict[Color, "ShrunkLattice"]:
        return {color: shrunk_lattice(self, color) for color in COLORS}

    def border_of(self, color: Color, qubit: int) -> int | None:
        side_a, side_b = self.borders[color]
        if qubit in side_a:
            return BORDER_A
        if qubit in side_b:
            return BORDER_B
        return None


class CodeParameters(BaseModel):
    n_qubits: int
    n_plaquettes: int
    rank: int
    k: int


class Violation(BaseModel):
    rule: str
    elements: List[int]


class ValidationReport(BaseModel):
    violations: List[Violation] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]


class ShrunkLink(BaseModel):
    model_config = ConfigDict(frozen=True)

    edge: int
    qubits: Tuple[int, int]
    nodes: Tuple[int, int]


class Terminal(BaseModel):
    """单比特边界（角）：一个没有该颜色边的量子比特，挂在它所属的 plaquette 上。"""
    model_config = ConfigDict(frozen=True)

    qubit: int
    node: int
    border: int


class ShrunkLattice(BaseModel):
    """
    颜色 c 的收缩晶格：节点是 c 色 plaquette（用 plaquette 下标表示）加上
    BORDER_A / BORDER_B 两个边界节点，每条 c 色边对应一条链接。
    """
    model_config = ConfigDict(frozen=True)

    color: Color
    plaquette_nodes: List[int]
    links: List[ShrunkLink]
    terminals: List[Terminal]

    def graph(self, usable=None) -> nx.MultiGraph:
        """
        构造 networkx 多重图，边的 key 为链接序号（终端排在链接之后）。

        Args:
            usable: 可选的谓词，输入链接或终端涉及的量子比特元组，返回是否保留。
        """
        g = nx.MultiGraph()
        g.add_nodes_from([BORDER_A, BORDER_B, *self.plaquette_nodes])
        for i, link in enumerate(self.links):
            if usable is None or usable(link.qubits):
                g.add_edge(*link.nodes, key=i, qubits=link.qubits)
        offset = len(self.links)
        for t, terminal in enumerate(self.terminals):
            if usable is None or usable((terminal.qubit,)):
                g.add_edge(terminal.node, terminal.border, key=offset + t, qubits=(terminal.qubit,))
        return g


# --- 模板 ---

Key = Tuple


@dataclass
class _Template:
    """一个族在给定 d 下的对偶三角剖分。"""
    real: Dict[Key, Tuple[Color, Tuple[float, float]]] = field(default_factory=dict)
    sides: Dict[str, Color] = field(default_factory=dict)
    triangles: List[Tuple[Key, Key, Key]] = field(default_factory=list)
    positions: List[Tuple[float, float]] = field(default_factory=list)
    border_groups: Dict[Color, Tuple[frozenset, frozenset]] = field(default_factory=dict)

    def color_of(self, key: Key) -> Color:
        if key[0] == "side":
            return self.sides[key[1]]
        return self.real[key][0]


def _side(name: str) -> Key:
    return ("side", name)


def _is_virtual(key: Key) -> bool:
    return key[0] == "side"


_SQUARE_GROUPS = {
    Color.B: (frozenset({"left"}), frozenset({"right"})),
    Color.G: (frozenset({"top"}), frozenset({"bottom"})),
    Color.R: (frozenset({"left+top"}), frozenset({"bottom+left"})),
}


def _color_488(x: int, y: int) -> Color:
    if (x + y) % 2 == 0:
        return Color.R
    return Color.G if x % 2 == 1 else Color.B


def _four_eight_eight_square(d: int) -> _Template:
    # 局部坐标中 x+y 为偶数的点是正方形（R），其余是八边形（x 奇为 G，x 偶为 B）；
    # 直线 x=0, x=d 是 B 边界，y=0, y=d 是 G 边界。
    template = _Template(
        sides={"left": Color.B, "right": Color.B, "bottom": Color.G, "top": Color.G},
        border_groups=_SQUARE_GROUPS,
    )

    def key(x: int, y: int) -> Key:
        if 0 < x < d and 0 < y < d:
            return ("v", x, y)
        if x == 0:
            return _side("left")
        if x == d:
            return _side("right")
        return _side("bottom") if y == 0 else _side("top")

    for x in range(1, d):
        for y in range(1, d):
            template.real[("v", x, y)] = (_color_488(x, y), (float(x), float(y)))
    for x in range(1, d):
        for y in range(1, d):
            if (x + y) % 2:
                continue
            for a in (-1, 1):
                for b in (-1, 1):
                    template.triangles.append((key(x, y), key(x + a, y), key(x, y + b)))
                    template.positions.append((x + a / 3, y + b / 3))
    return template


def _four_eight_eight_triangular(d: int) -> _Template:
    # 区域 x>0, y>0, x+y<H（H=d+1）；斜边上的 R 点是虚顶点，每个只贡献一个向内的三角形。
    h = d + 1
    template = _Template(
        sides={"left": Color.B, "bottom": Color.G, "hyp": Color.R},
        border_groups={
            Color.B: (frozenset({"left"}), frozenset({"bottom+hyp"})),
            Color.G: (frozenset({"bottom"}), frozenset({"hyp+left"})),
            Color.R: (frozenset({"hyp"}), frozenset({"bottom+left"})),
        },
    )

    def key(x: int, y: int) -> Key:
        if x > 0 and y > 0 and x + y < h:
            return ("v", x, y)
        if x == 0:
            return _side("left")
        if y == 0:
            return _side("bottom")
        return _side("hyp")

    for x in range(1, h):
        for y in range(1, h - x):
            template.real[("v", x, y)] = (_color_488(x, y), (float(x), float(y)))
    for (_, x, y), (color, _) in list(template.real.items()):
        if color is not Color.R:
            continue
        for a in (-1, 1):
            for b in (-1, 1):
                template.triangles.append((key(x, y), key(x + a, y), key(x, y + b)))
                template.positions.append((x + a / 3, y + b / 3))
    for x in range(1, h):
        y = h - x
        template.triangles.append((_side("hyp"), key(x - 1, y), key(x, y - 1)))
        template.positions.append((x - 1 / 3, y - 1 / 3))
    return template


# 6.6.6 在细三角格子（轴坐标 i, j）上构造：i-j ≡ 2 (mod 3) 的格点是 plaquette，
# 颜色由 j mod 3 决定，其余格点是数据比特，每个数据比特恰有三个 plaquette 邻居。
_HEX_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))
_HEX_COLORS = {0: Color.B, 1: Color.R, 2: Color.G}
_SQRT3 = math.sqrt(3.0)


def _is_plaquette_site(i: int, j: int) -> bool:
    return (i - j) % 3 == 2


def _hex_position(i: int, j: int) -> Tuple[float, float]:
    return (i + j / 2, j * _SQRT3 / 2)


def _six_six_six(inside, outside_sides, border_groups) -> _Template:
    template = _Template(border_groups=border_groups)
    sites = [s for s in inside]
    for i, j in sites:
        if _is_plaquette_site(i, j):
            template.real[("v", i, j)] = (_HEX_COLORS[j % 3], _hex_position(i, j))
    inside_set = set(sites)
    for i, j in sites:
        if _is_plaquette_site(i, j):
            continue
        keys = []
        for di, dj in _HEX_OFFSETS:
            ni, nj = i + di, j + dj
            if not _is_plaquette_site(ni, nj):
                continue
            if (ni, nj) in inside_set:
                keys.append(("v", ni, nj))
                continue
            names = outside_sides(ni, nj)
            if len(names) != 1:
                raise LatticeError(f"虚 plaquette ({ni}, {nj}) 同时越过了边界 {names}")
            name = names[0]
            color = _HEX_COLORS[nj % 3]
            known = template.sides.setdefault(name, color)
            if known is not color:
                raise LatticeError(f"边界 {name} 的颜色不一致: {known.value} / {color.value}")
            keys.append(_side(name))
        if len(keys) != 3:
            raise LatticeError(f"数据比特 ({i}, {j}) 有 {len(keys)} 个 plaquette 邻居")
        template.triangles.append(tuple(keys))
        template.positions.append(_hex_position(i, j))
    return template


def _six_six_six_triangular(d: int) -> _Template:
    top = 3 * (d - 1) // 2
    inside = [(i, j) for j in range(top + 1) for i in range(top + 1 - j)]

    def outside(i: int, j: int) -> List[str]:
        names = []
        if j < 0:
            names.append("bottom")
        if i < 0:
            names.append("left")
        if i + j > top:
            names.append("right")
        return names

    groups = {
        Color.R: (frozenset({"right"}), frozenset({"bottom+left"})),
        Color.B: (frozenset({"left"}), frozenset({"bottom+right"})),
        Color.G: (frozenset({"bottom"}), frozenset({"left+right"})),
    }
    return _six_six_six(inside, outside, groups)


def _six_six_six_square(d: int) -> _Template:
    # 平行四边形 0 ≤ i, j ≤ 3d/2 - 2；左上角缺少的角比特由组装时的补角步骤补上。
    top = 3 * d // 2 - 2
    inside = [(i, j) for j in range(top + 1) for i in range(top + 1)]

    def outside(i: int, j: int) -> List[str]:
        names = []
        if j < 0:
            names.append("bottom")
        if j > top:
            names.append("top")
        if i < 0:
            names.append("left")
        if i > top:
            names.append("right")
        return names

    return _six_six_six(inside, outside, _SQUARE_GROUPS)


_BUILDERS = {
    (Geometry.FOUR_EIGHT_EIGHT, Variant.SQUARE): (_four_eight_eight_square, 0, 4),
    (Geometry.FOUR_EIGHT_EIGHT, Variant.TRIANGULAR): (_four_eight_eight_triangular, 1, 3),
    (Geometry.SIX_SIX_SIX, Variant.SQUARE): (_six_six_six_square, 0, 4),
    (Geometry.SIX_SIX_SIX, Variant.TRIANGULAR): (_six_six_six_triangular, 1, 3),
}


def check_distance(geometry: Geometry, variant: Variant, distance: int) -> None:
    """square 族要求偶数 d ≥ 4，triangular 族要求奇数 d ≥ 3。"""
    _, parity, minimum = _BUILDERS[(Geometry(geometry), Variant(variant))]
    if distance < minimum or distance % 2 != parity:
        kind = "偶数" if parity == 0 else "奇数"
        raise LatticeError(
            f"{Geometry(geometry).value} {Variant(variant).value} 晶格要求 d 为 ≥ {minimum} 的{kind}，收到 d={distance}"
        )


# --- 组装 ---

def _close_corners(template: _Template) -> None:
    """为扇形在两条不同边界之间断开的实顶点补上角三角形。"""
    counts: Counter = Counter()
    for tri in template.triangles:
        for a, b in combinations(tri, 2):
            counts[frozenset((a, b))] += 1
    open_ends: Dict[Key, List[Key]] = defaultdict(list)
    for pair, count in counts.items():
        if count > 2:
            raise LatticeError(f"顶点对 {sorted(pair)} 被 {count} 个三角形共享")
        if count == 1:
            a, b = tuple(pair)
            for v, w in ((a, b), (b, a)):
                if not _is_virtual(v):
                    open_ends[v].append(w)
    for v in sorted(open_ends):
        ends = open_ends[v]
        if len(ends) != 2 or not all(_is_virtual(w) for w in ends) or ends[0] == ends[1]:
            raise LatticeError(f"顶点 {v} 的扇形无法闭合: {ends}")
        colors = {template.color_of(v), template.color_of(ends[0]), template.color_of(ends[1])}
        if len(colors) != 3:
            raise LatticeError(f"顶点 {v} 的补角三角形颜色重复")
        members = [pos for tri, pos in zip(template.triangles, template.positions) if v in tri]
        vx, vy = template.real[v][1]
        cx = sum(p[0] for p in members) / len(members)
        cy = sum(p[1] for p in members) / len(members)
        template.triangles.append((v, *sorted(ends)))
        template.positions.append((vx + 0.5 * (vx - cx), vy + 0.5 * (vy - cy)))
        logger.debug(f"在顶点 {v} 处补充角比特，连接边界 {ends}")


def _position_key(position: Tuple[float, float]) -> Tuple[float, float]:
    return (round(position[1], 6), round(position[0], 6))


def _fan_order(v: Key, members: List[int], pair_members: Dict[frozenset, List[int]], keys_of) -> List[int]:
    neighbors: Dict[int, List[int]] = {q: [] for q in members}
    for q in members:
        for w in keys_of[q]:
            if w == v:
                continue
            shared = pair_members.get(frozenset((v, w)), [])
            for r in shared:
                if r != q:
                    neighbors[q].append(r)
    for q, adjacent in neighbors.items():
        if len(adjacent) != 2:
            raise LatticeError(f"plaquette {v} 的扇形在比特 {q} 处不闭合")
    start = min(members)
    order = [start]
    previous, current = start, min(neighbors[start])
    while current != start:
        order.append(current)
        a, b = neighbors[current]
        previous, current = current, (b if a == previous else a)
    if len(order) != len(members):
        raise LatticeError(f"plaquette {v} 的扇形不是单个环")
    return order


def _assemble(template: _Template, geometry: Geometry, variant: Variant, distance: int) -> ColorLattice:
    _close_corners(template)

    order = sorted(range(len(template.triangles)), key=lambda t: _position_key(template.positions[t]))
    triangles = [template.triangles[t] for t in order]
    positions = [template.positions[t] for t in order]
    if len({_position_key(p) for p in positions}) != len(positions):
        raise LatticeError("存在位置重合的量子比特")
    n = len(triangles)

    pair_members: Dict[frozenset, List[int]] = defaultdict(list)
    for q, tri in enumerate(triangles):
        for a, b in combinations(tri, 2):
            pair_members[frozenset((a, b))].append(q)

    edges = []
    for pair, members in pair_members.items():
        a, b = tuple(pair)
        if _is_virtual(a) and _is_virtual(b):
            continue
        if len(members) != 2:
            raise LatticeError(f"顶点对 {sorted(pair)} 只出现在 {len(members)} 个三角形中")
        color = third_color(template.color_of(a), template.color_of(b))
        u, v = sorted(members)
        edges.append((u, v, color))
    edges.sort(key=lambda e: (e[0], e[1], e[2].idx))

    members_of: Dict[Key, List[int]] = defaultdict(list)
    for q, tri in enumerate(triangles):
        for key in tri:
            if not _is_virtual(key):
                members_of[key].append(q)
    plaquettes = []
    for key in sorted(members_of, key=lambda k: _position_key(template.real[k][1])):
        qubits = _fan_order(key, members_of[key], pair_members, triangles)
        plaquettes.append(Plaquette(color=template.real[key][0], qubits=qubits))
    dropped = len(template.real) - len(members_of)
    if dropped:
        logger.debug(f"丢弃了 {dropped} 个不属于任何三角形的实顶点")

    borders = {}
    labels = {}
    for color in COLORS:
        groups = template.border_groups[color]
        sides: Tuple[List[int], List[int]] = ([], [])
        for q, tri in enumerate(triangles):
            virtual = sorted(k[1] for k in tri if _is_virtual(k))
            own = next(k for k in tri if template.color_of(k) is color)
            if _is_virtual(own):
                label = own[1]
            elif len(virtual) == 2:
                label = "+".join(virtual)
            else:
                continue
            if label in groups[0]:
                sides[0].append(q)
            elif label in groups[1]:
                sides[1].append(q)
            elif _is_virtual(own):
                raise LatticeError(f"颜色 {color.value} 的边界标签 {label} 没有归属")
            # 不在任何一组里的角比特不属于该颜色的边界
        borders[color] = sides
        labels[color] = (sorted(groups[0]), sorted(groups[1]))

    bare = ColorLattice(
        geometry=geometry,
        variant=variant,
        distance=distance,
        n_qubits=n,
        edges=edges,
        plaquettes=plaquettes,
        borders=borders,
        border_labels=labels,
        positions=positions,
    )
    paths = {}
    for color in COLORS:
        path = reference_path(bare, color)
        if path is not None:
            paths[color] = [path]
        else:
            logger.warning(f"颜色 {color.value} 没有连接两条边界的参考路径")
    return ColorLattice.model_validate({**bare.model_dump(), "logical_paths": paths})


def build_lattice(geometry: Geometry | str, variant: Variant | str, distance: int) -> ColorLattice:
    """
    按 (几何, 变体, 码距) 构造并校验色码晶格。

    Args:
        geometry: "4.8.8" 或 "6.6.6"。
        variant: "square" 或 "triangular"。
        distance: 码距 d，奇偶性见 check_distance。

    Returns:
        ColorLattice: 通过 validate() 的晶格，带边界和每种颜色的参考逻辑路径。

    Raises:
        LatticeError: 几何/距离组合非法或构造出的晶格未通过校验。
    """
    try:
        geometry = Geometry(geometry)
        variant = Variant(variant)
    except ValueError as e:
        raise LatticeError(f"未知的几何或变体: {e}") from e
    check_distance(geometry, variant, distance)
    builder = _BUILDERS[(geometry, variant)][0]
    logger.info(f"正在构造 {geometry.value} {variant.value} 晶格, d={distance}")
    lattice = _assemble(builder(distance), geometry, variant, distance)
    report = validate(lattice)
    if not report.ok:
        raise LatticeError(f"构造出的晶格未通过校验: {report.rules()}")
    logger.info(
        f"晶格构造完成: N={lattice.n_qubits}, E={len(lattice.edges)}, F={len(lattice.plaquettes)}"
    )
    return lattice


# --- 收缩晶格与参考路径 ---

def shrunk_lattice(lattice: ColorLattice, color: Color) -> ShrunkLattice:
    """
    构造颜色 c 的收缩晶格。

    链接端点是包含该端点比特的 c 色 plaquette；若比特没有 c 色 plaquette，
    端点是它所在的边界节点。没有 c 色边的边界比特（角）作为终端单独列出。
    """
    color = Color(color)
    column = color.idx
    plaquette_of = lattice.plaquette_of

    def node(q: int) -> int:
        p = int(plaquette_of[q, column])
        if p >= 0:
            return p
        border = lattice.border_of(color, q)
        if border is None:
            raise LatticeError(f"比特 {q} 既没有 {color.value} 色 plaquette 也不在边界上")
        return border

    links = []
    for e, (u, v, edge_color) in enumerate(lattice.edges):
        if edge_color is color:
            links.append(ShrunkLink(edge=e, qubits=(u, v), nodes=(node(u), node(v))))
    terminals = []
    for border, side in ((BORDER_A, lattice.borders[color][0]), (BORDER_B, lattice.borders[color][1])):
        for q in side:
            if lattice.edge_of[q, column] == -1 and plaquette_of[q, column] >= 0:
                terminals.append(Terminal(qubit=q, node=int(plaquette_of[q, column]), border=border))
    nodes = [p for p, plaquette in enumerate(lattice.plaquettes) if plaquette.color is color]
    return ShrunkLattice(color=color, plaquette_nodes=nodes, links=links, terminals=terminals)


def path_support(g: nx.MultiGraph, nodes: List[int]) -> List[int]:
    """沿节点路径取每一步 key 最小的链接，返回其端点比特的对称差。"""
    support: set = set()
    for a, b in pairwise(nodes):
        data = g.get_edge_data(a, b)
        key = min(data)
        support ^= set(data[key]["qubits"])
    return sorted(support)


def reference_path(lattice: ColorLattice, color: Color) -> List[int] | None:
    shrunk = shrunk_lattice(lattice, color)
    g = shrunk.graph()
    try:
        nodes = nx.shortest_path(g, BORDER_A, BORDER_B)
    except nx.NetworkXNoPath:
        return None
    return path_support(g, nodes)


# --- 校验与统计 ---

def validate(lattice: ColorLattice) -> ValidationReport:
    """
    检查 ColorLattice 的全部不变量，返回违规列表（不抛异常）。

    规则名："self-loop", "trivalence", "edge colors at qubit", "edge-color complement",
    "adjacent plaquette colors", "even plaquette weight", "plaquette overlap",
    "plaquette color uniqueness", "logical path overlap", "logical path nontrivial"。
    """
    n = lattice.n_qubits
    violations: List[Violation] = []

    def report(rule: str, elements) -> None:
        elements = sorted(set(int(x) for x in elements))
        if elements:
            violations.append(Violation(rule=rule, elements=elements))

    incident: List[List[int]] = [[] for _ in range(n)]
    report("self-loop", [e for e, (u, v, _) in enumerate(lattice.edges) if u == v])
    for e, (u, v, _) in enumerate(lattice.edges):
        if u != v:
            incident[u].append(e)
            incident[v].append(e)

    membership: List[List[int]] = [[] for _ in range(n)]
    for p, plaquette in enumerate(lattice.plaquettes):
        for q in plaquette.qubits:
            membership[q].append(p)

    report(
        "trivalence",
        [q for q in range(n)
         if len(incident[q]) not in (2, 3) or (len(membership[q]) == 3 and len(incident[q]) != 3)],
    )
    report(
        "edge colors at qubit",
        [q for q in range(n) if len({lattice.edges[e][2] for e in incident[q]}) != len(incident[q])],
    )

    complement_bad, adjacent_bad = [], []
    for e, (u, v, color) in enumerate(lattice.edges):
        shared = set(membership[u]) & set(membership[v])
        colors = [lattice.plaquettes[p].color for p in shared]
        if len(shared) > 2 or color in colors:
            complement_bad.append(e)
        if len(set(colors)) != len(colors):
            adjacent_bad.extend(shared)
    report("edge-color complement", complement_bad)
    report("adjacent plaquette colors", adjacent_bad)

    report("even plaquette weight", [p for p, pl in enumerate(lattice.plaquettes) if len(pl.qubits) % 2])
    report(
        "plaquette color uniqueness",
        [q for q in range(n)
         if len({lattice.plaquettes[p].color for p in membership[q]}) != len(membership[q])],
    )

    incidence = np.zeros((n, len(lattice.plaquettes)), dtype=np.uint8)
    for p, plaquette in enumerate(lattice.plaquettes):
        incidence[plaquette.qubits, p] = 1
    overlap = incidence.T.astype(np.int32) @ incidence.astype(np.int32)
    np.fill_diagonal(overlap, 0)
    bad = np.argwhere((overlap != 0) & (overlap != 2))
    report("plaquette overlap", bad.reshape(-1))

    odd_paths, trivial_paths = [], []
    for color, paths in lattice.logical_paths.items():
        for path in paths:
            vector = np.zeros(n, dtype=np.uint8)
            vector[path] = 1
            parity = (incidence.T.astype(np.int32) @ vector) % 2
            odd_paths.extend(np.flatnonzero(parity))
            if in_column_space(incidence, vector):
                trivial_paths.append(color.idx)
    report("logical path overlap", odd_paths)
    report("logical path nontrivial", trivial_paths)

    if violations:
        logger.warning(f"晶格校验发现 {len(violations)} 类违规: {[v.rule for v in violations]}")
    return ValidationReport(violations=violations)


def euler_characteristic(lattice: ColorLattice) -> int:
    """V - E + F，F 只数 plaquette（不含外部面）。"""
    return lattice.n_qubits - len(lattice.edges) + len(lattice.plaquettes)


def code_parameters(lattice: ColorLattice) -> CodeParameters:
    """k = N - 2·rank：X 与 Z 两类生成元支撑相同，各贡献一份秩。"""
    rank = gf2_rank(lattice.incidence)
    return CodeParameters(
        n_qubits=lattice.n_qubits,
        n_plaquettes=len(lattice.plaquettes),
        rank=rank,
        k=lattice.n_qubits - 2 * rank,
    )


# --- JSON ---

def lattice_to_json(lattice: ColorLattice) -> str:
    return lattice.model_dump_json(by_alias=True, indent=2)


def lattice_from_json(text: str) -> ColorLattice:
    try:
        return ColorLattice.model_validate_json(text)
    except ValueError as e:
        raise LatticeError(f"无法解析晶格 JSON: {e}") from e


def lattice_summary(lattice: ColorLattice) -> dict:
    params = code_parameters(lattice)
    return {
        "geometry": lattice.geometry.value,
        "variant": lattice.variant.value,
        "distance": lattice.distance,
        "qubits": lattice.n_qubits,
        "edges": len(lattice.edges),
        "plaquettes": len(lattice.plaquettes),
        "k": params.k,
        "euler_characteristic": euler_characteristic(lattice),
    }


def lattice_document(lattice: ColorLattice) -> dict:
    """lattice 子命令输出的文档：序列化的晶格加上码参数。"""
    document = json.loads(lattice_to_json(lattice))
    document["k"] = code_parameters(lattice).k
    return document
