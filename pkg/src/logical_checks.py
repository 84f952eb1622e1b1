"""
判断丢失之后逻辑算符是否仍然存在的三种方法。

    I   string：颜色 c 的收缩晶格中，只保留两端比特都在场的链接，两条边界是否连通。
    II  branching：弦网搜索。c 弦可以在某个比特处分叉成另外两种颜色的弦，
        分出的弦还能再分叉（最多两级），各段落在各自缺 plaquette 的边界上或重新汇合。
    III algebraic：解 GF(2) 方程 (M∘A)x = M∘Q_c。

所有方法都作用在原始晶格和掩码 M 上；X 型与 Z 型支撑相同，只需算一种。
对任意 (晶格, 掩码)，I 存活 ⇒ II 存活 ⇒ III 存活。
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from .gf2 import gf2_matvec, gf2_solve, in_column_space
from .lattice import BORDER_A, BORDER_B, COLORS, Color, ColorLattice, path_support
from .reconstruction import ReconstructionRecord

logger = logging.getLogger(__name__)

__all__ = [
    "CheckMethod",
    "CheckOutcome",
    "FailureCriterion",
    "Gf2System",
    "UnionFind",
    "brute_force_survival",
    "build_system",
    "check_algebraic",
    "check_branching",
    "check_logical",
    "check_string_percolation",
    "gf2_solve",
    "logical_survives",
    "reference_vector",
    "verify_witness",
]

BRUTE_FORCE_LIMIT = 20


class CheckMethod(str, Enum):
    STRING = "string"
    BRANCHING = "branching"
    ALGEBRAIC = "algebraic"


class FailureCriterion(str, Enum):
    PER_COLOR = "per-color"
    ALL_COLORS = "all-colors"


class CheckOutcome(BaseModel):
    """
    一次检查的结果。

    Attributes:
        method (CheckMethod): 使用的方法。
        color (Color): 逻辑算符的颜色。
        mu (int): 逻辑算符下标。
        survives (bool): 是否仍存在等价的逻辑算符。
        support (Optional[List[int]]): 见证算符的比特支撑，不与掩码相交。
        nodes (Optional[List[int]]): 方法 I 的收缩晶格节点路径（边界为负数）。
        solution (Optional[List[int]]): 方法 III 中 x=1 的 plaquette 下标。
        branches (List[int]): 方法 II 中弦网分叉的比特。
    """
    method: CheckMethod
    color: Color
    mu: int = 0
    survives: bool
    support: Optional[List[int]] = None
    nodes: Optional[List[int]] = None
    solution: Optional[List[int]] = None
    branches: List[int] = Field(default_factory=list)


@dataclass(frozen=True)
class Gf2System:
    """(M∘A)x = M∘Q_c 的三个输入：A 的列是 plaquette 支撑。"""
    a: np.ndarray
    mask: np.ndarray
    path: np.ndarray

    @property
    def masked_rows(self) -> np.ndarray:
        return np.flatnonzero(self.mask)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def _find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        x_root = self._find(x)
        y_root = self._find(y)
        if x_root == y_root:
            return
        if self.rank[x_root] < self.rank[y_root]:
            self.parent[x_root] = y_root
        elif self.rank[x_root] > self.rank[y_root]:
            self.parent[y_root] = x_root
        else:
            self.parent[y_root] = x_root
            self.rank[x_root] += 1

    def is_same(self, x: int, y: int) -> bool:
        return self._find(x) == self._find(y)

    def __repr__(self) -> str:
        return f"UnionFind({self.parent})"


def as_mask(lattice: ColorLattice, mask) -> np.ndarray:
    """接受 ReconstructionRecord 或长度为 N 的 0/1 序列。"""
    if isinstance(mask, ReconstructionRecord):
        array = mask.mask_array()
    else:
        array = np.asarray(mask, dtype=np.uint8).reshape(-1)
    if array.shape[0] != lattice.n_qubits:
        raise ValueError(f"掩码长度 {array.shape[0]} 与比特数 {lattice.n_qubits} 不一致")
    return array & 1


def reference_vector(lattice: ColorLattice, color: Color, mu: int = 0) -> np.ndarray:
    paths = lattice.logical_paths.get(Color(color), [])
    if mu >= len(paths):
        raise ValueError(f"颜色 {Color(color).value} 没有下标为 {mu} 的参考逻辑路径")
    vector = np.zeros(lattice.n_qubits, dtype=np.uint8)
    vector[paths[mu]] = 1
    return vector


# --- 方法 I ---

def _border_slot(node: int, n_plaquettes: int) -> int:
    return node if node >= 0 else n_plaquettes + (-node - 1)


def check_string_percolation(lattice: ColorLattice, mask, color: Color, witness: bool = True) -> CheckOutcome:
    """
    方法 I：用并查集判断收缩晶格在去掉受损链接后是否仍连通两条边界。

    Args:
        witness: 为 True 时在存活情况下额外用 networkx 求一条最短的边界到边界路径。
    """
    color = Color(color)
    m = as_mask(lattice, mask)
    shrunk = lattice.shrunk_lattices[color]
    n_plaquettes = len(lattice.plaquettes)
    uf = UnionFind(n_plaquettes + 2)
    for link in shrunk.links:
        q1, q2 = link.qubits
        if not m[q1] and not m[q2]:
            uf.union(_border_slot(link.nodes[0], n_plaquettes), _border_slot(link.nodes[1], n_plaquettes))
    for terminal in shrunk.terminals:
        if not m[terminal.qubit]:
            uf.union(_border_slot(terminal.node, n_plaquettes), _border_slot(terminal.border, n_plaquettes))
    survives = uf.is_same(_border_slot(BORDER_A, n_plaquettes), _border_slot(BORDER_B, n_plaquettes))
    outcome = CheckOutcome(method=CheckMethod.STRING, color=color, survives=survives)
    if survives and witness:
        g = shrunk.graph(usable=lambda qubits: not any(m[q] for q in qubits))
        nodes = nx.shortest_path(g, BORDER_A, BORDER_B)
        outcome = outcome.model_copy(update={"nodes": list(nodes), "support": path_support(g, nodes)})
    return outcome


# --- 方法 II ---

@dataclass(frozen=True)
class _Net:
    """
    一段弦网：label 是与 logical_basis 各行重叠的奇偶位，support 与 branches
    都是以比特编号为位的整数位集，branches 记录作为分叉点的比特。
    """
    label: int = 0
    support: int = 0
    branches: int = 0

    def __xor__(self, other: "_Net") -> "_Net":
        return _Net(self.label ^ other.label, self.support ^ other.support, self.branches ^ other.branches)


_EMPTY = _Net()


class _NetForest:
    """
    带权并查集：offset[x] 是从 x 走到 parent[x] 的一段弦网。
    同一连通分量内再连一条边时得到一个闭合弦网，按 label 的最高位存入异或基。
    """

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.offset: List[_Net] = [_EMPTY] * size
        self.cycles: Dict[int, _Net] = {}

    def find(self, x: int) -> Tuple[int, _Net]:
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        acc = _EMPTY
        for node in reversed(path):
            acc = self.offset[node] ^ acc
            self.offset[node] = acc
            self.parent[node] = x
        return x, (self.offset[path[0]] if path else _EMPTY)

    def union(self, x: int, y: int, net: _Net) -> None:
        x_root, x_offset = self.find(x)
        y_root, y_offset = self.find(y)
        if x_root == y_root:
            self.add_cycle(x_offset ^ net ^ y_offset)
            return
        if self.rank[x_root] > self.rank[y_root]:
            x_root, y_root = y_root, x_root
        self.parent[x_root] = y_root
        self.offset[x_root] = x_offset ^ net ^ y_offset
        if self.rank[x_root] == self.rank[y_root]:
            self.rank[y_root] += 1

    def add_cycle(self, net: _Net) -> None:
        while net.label:
            top = net.label.bit_length() - 1
            basis = self.cycles.get(top)
            if basis is None:
                self.cycles[top] = net
                return
            net = net ^ basis

    def reach(self, target: int) -> Optional[_Net]:
        """由闭合弦网凑出 label 为 target 的组合，凑不出时返回 None。"""
        acc = _EMPTY
        residual = target
        while residual:
            basis = self.cycles.get(residual.bit_length() - 1)
            if basis is None:
                return None
            acc = acc ^ basis
            residual ^= basis.label
        return acc


class _StringNet:
    """
    一个掩码下各颜色、各级别的弦网森林。

    森林 (x, 0) 只含两端都在场的 x 色链接和终端；森林 (x, k) 另外导入
    三种颜色第 k-1 级森林的闭合弦网，并允许 x 弦在比特 v 处分叉成 y 弦和 z 弦：
    y、z 两端都落在同一对第 k-1 级连通分量里的两个分叉点，可以用一段
    x 方向的片段连起来。所有 plaquette 缺失的位置合并成一个接地节点。
    """

    def __init__(self, lattice: ColorLattice, mask: np.ndarray):
        self.lattice = lattice
        self.mask = mask
        basis = lattice.logical_basis
        self.qubit_label = [
            sum(1 << int(j) for j in np.flatnonzero(basis[:, q])) for q in range(lattice.n_qubits)
        ]
        self.ground = len(lattice.plaquettes)
        self._forests: Dict[Tuple[Color, int], _NetForest] = {}

    def label(self, qubits) -> int:
        value = 0
        for q in qubits:
            value ^= self.qubit_label[q]
        return value

    def piece(self, qubits) -> _Net:
        support = 0
        for q in qubits:
            support ^= 1 << q
        return _Net(self.label(qubits), support, 0)

    def slot(self, node: int) -> int:
        return node if node >= 0 else self.ground

    def node(self, color: Color, q: int) -> int:
        return self.slot(int(self.lattice.plaquette_of[q, color.idx]))

    def forest(self, color: Color, level: int) -> _NetForest:
        key = (color, level)
        if key in self._forests:
            return self._forests[key]
        m = self.mask
        forest = _NetForest(self.ground + 1)
        shrunk = self.lattice.shrunk_lattices[color]
        for link in shrunk.links:
            u, w = link.qubits
            if not m[u] and not m[w]:
                forest.union(self.slot(link.nodes[0]), self.slot(link.nodes[1]), self.piece(link.qubits))
        for terminal in shrunk.terminals:
            if not m[terminal.qubit]:
                forest.union(self.slot(terminal.node), self.ground, self.piece((terminal.qubit,)))
        if level:
            lower = {c: self.forest(c, level - 1) for c in COLORS}
            for c in COLORS:
                for net in list(lower[c].cycles.values()):
                    forest.add_cycle(net)
            y, z = color.complement()
            y_root, y_offset = lower[y].find(self.ground)
            z_root, z_offset = lower[z].find(self.ground)
            groups: Dict[Tuple[int, int], Tuple[int, _Net]] = {
                (y_root, z_root): (self.ground, y_offset ^ z_offset),
            }
            for v in map(int, np.flatnonzero(m == 0)):
                y_root, y_offset = lower[y].find(self.node(y, v))
                z_root, z_offset = lower[z].find(self.node(z, v))
                fork = _Net(self.qubit_label[v], 1 << v, 1 << v)
                value = (self.node(color, v), fork ^ y_offset ^ z_offset)
                first = groups.setdefault((y_root, z_root), value)
                if first is not value:
                    forest.union(first[0], value[0], first[1] ^ value[1])
        self._forests[key] = forest
        return forest


def _bits(value: int) -> List[int]:
    out = []
    while value:
        low = value & -value
        out.append(low.bit_length() - 1)
        value ^= low
    return out


def check_branching(lattice: ColorLattice, mask, color: Color, max_level: int = 2, mu: int = 0) -> CheckOutcome:
    """
    方法 II：允许最多 max_level 级嵌套分叉的弦网搜索。

    max_level=0 只用 c 色链接（方法 I 的连通性加上落在同侧边界的闭合弦）；
    每升一级，c 弦可以在一个比特处分叉成另外两种颜色的上一级弦网。
    存活当且仅当某个避开掩码的闭合弦网与参考路径属于同一逻辑类，
    逻辑类由与 logical_basis 的重叠奇偶性判定。
    """
    if not 0 <= max_level <= 2:
        raise ValueError(f"max_level 只能是 0、1 或 2，收到 {max_level}")
    color = Color(color)
    m = as_mask(lattice, mask)
    nets = _StringNet(lattice, m)
    target = nets.label(np.flatnonzero(reference_vector(lattice, color, mu)))
    found = nets.forest(color, max_level).reach(target)
    if found is None:
        return CheckOutcome(method=CheckMethod.BRANCHING, color=color, mu=mu, survives=False)
    branches = _bits(found.branches)
    if branches:
        logger.debug(f"颜色 {color.value} 的弦网在比特 {branches} 处分叉")
    return CheckOutcome(
        method=CheckMethod.BRANCHING,
        color=color,
        mu=mu,
        survives=True,
        support=_bits(found.support),
        branches=branches,
    )


# --- 方法 III ---

def build_system(lattice: ColorLattice, record, color: Color, mu: int = 0) -> Gf2System:
    return Gf2System(
        a=lattice.incidence,
        mask=as_mask(lattice, record),
        path=reference_vector(lattice, color, mu),
    )


def check_algebraic(lattice: ColorLattice, record, color: Color, mu: int = 0) -> CheckOutcome:
    """
    方法 III：只保留被掩码的行与碰到它们的列求解 (M∘A)x = M∘Q_c。

    存活时见证为 Q̃_c = A·x ⊕ Q_c，返回前检查它确实避开所有被掩码的比特。
    """
    color = Color(color)
    system = build_system(lattice, record, color, mu)
    rows = system.masked_rows
    n_plaquettes = system.a.shape[1]
    x = np.zeros(n_plaquettes, dtype=np.uint8)
    if rows.size:
        sub = system.a[rows]
        columns = np.flatnonzero(sub.any(axis=0))
        solved = gf2_solve(sub[:, columns], system.path[rows])
        if solved is None:
            return CheckOutcome(method=CheckMethod.ALGEBRAIC, color=color, mu=mu, survives=False)
        x[columns] = solved
    modified = gf2_matvec(system.a, x) ^ system.path
    if (modified & system.mask).any():
        logger.error(f"颜色 {color.value} 的代数解未能避开丢失比特")
        return CheckOutcome(method=CheckMethod.ALGEBRAIC, color=color, mu=mu, survives=False)
    return CheckOutcome(
        method=CheckMethod.ALGEBRAIC,
        color=color,
        mu=mu,
        survives=True,
        support=[int(q) for q in np.flatnonzero(modified)],
        solution=[int(p) for p in np.flatnonzero(x)],
    )


def brute_force_survival(lattice: ColorLattice, mask, color: Color, mu: int = 0) -> bool:
    """穷举全部 2^n 个 plaquette 子集的参照实现，只用于小码。"""
    n_plaquettes = len(lattice.plaquettes)
    if n_plaquettes > BRUTE_FORCE_LIMIT:
        raise ValueError(f"plaquette 数 {n_plaquettes} 超过穷举上限 {BRUTE_FORCE_LIMIT}")
    m = as_mask(lattice, mask).astype(bool)
    path = reference_vector(lattice, color, mu)
    a = lattice.incidence.astype(np.int64)
    for bits in itertools.product((0, 1), repeat=n_plaquettes):
        candidate = (a @ np.asarray(bits, dtype=np.int64) + path) % 2
        if not candidate[m].any():
            return True
    return False


# --- 调度与见证校验 ---

def check_logical(method: CheckMethod | str, lattice: ColorLattice, mask, color: Color, mu: int = 0) -> CheckOutcome:
    method = CheckMethod(method)
    if method is CheckMethod.STRING:
        return check_string_percolation(lattice, mask, color)
    if method is CheckMethod.BRANCHING:
        return check_branching(lattice, mask, color, mu=mu)
    return check_algebraic(lattice, mask, color, mu)


def logical_survives(
    method: CheckMethod | str,
    lattice: ColorLattice,
    mask,
    color: Color,
    criterion: FailureCriterion | str = FailureCriterion.PER_COLOR,
) -> bool:
    """
    试验是否成功。per-color 只看给定颜色的第一个逻辑算符；
    all-colors 要求每种颜色的每个参考逻辑算符都存活。
    """
    method = CheckMethod(method)
    m = as_mask(lattice, mask)
    if FailureCriterion(criterion) is FailureCriterion.PER_COLOR:
        if method is CheckMethod.STRING:
            return check_string_percolation(lattice, m, color, witness=False).survives
        return check_logical(method, lattice, m, color).survives
    for c in COLORS:
        for mu in range(len(lattice.logical_paths.get(c, []))):
            if method is CheckMethod.ALGEBRAIC:
                outcome = check_algebraic(lattice, m, c, mu)
            elif method is CheckMethod.BRANCHING:
                outcome = check_branching(lattice, m, c, mu=mu)
            else:
                outcome = check_string_percolation(lattice, m, c, witness=False)
            if not outcome.survives:
                return False
    return True


def verify_witness(outcome: CheckOutcome, lattice: ColorLattice, record) -> bool:
    """
    独立检查见证：避开掩码，与每个 plaquette 重叠为偶数，与参考路径只差若干 plaquette；
    方法 I 还要求节点路径从 BORDER_A 走到 BORDER_B，方法 III 还要求 x 重新算出同一支撑。
    传入 ReconstructionRecord 时再检查与重构后生成元的重叠为偶数。
    """
    if not outcome.survives or outcome.support is None:
        return False
    m = as_mask(lattice, record)
    support = np.zeros(lattice.n_qubits, dtype=np.uint8)
    support[outcome.support] = 1
    if (support & m).any():
        return False
    if gf2_matvec(lattice.incidence.T, support).any():
        return False
    path = reference_vector(lattice, outcome.color, outcome.mu)
    if not in_column_space(lattice.incidence, support ^ path):
        return False
    if outcome.method is CheckMethod.ALGEBRAIC:
        if outcome.solution is None:
            return False
        x = np.zeros(len(lattice.plaquettes), dtype=np.uint8)
        x[outcome.solution] = 1
        if not np.array_equal(gf2_matvec(lattice.incidence, x) ^ path, support):
            return False
    elif outcome.method is CheckMethod.STRING:
        if not outcome.nodes or outcome.nodes[0] != BORDER_A or outcome.nodes[-1] != BORDER_B:
            return False
    if isinstance(record, ReconstructionRecord):
        for plaquette in record.plaquettes:
            if int(support[plaquette.qubits].sum()) % 2:
                return False
    return True

