"""
孪生比特丢失恢复协议。

对每个丢失比特 q0（按下标升序）随机选一个仍在晶格中的邻居 q1 作为孪生比特，
把二聚体 (q0, q1) 连同它的链接一起移除：两侧释放出的同色链接重新相连，
链接两端的同色 plaquette 合并，夹着二聚体的两个 plaquette 各缩小两个比特。
二聚体算符与全部生成元对易却不在稳定子群里时（只会出现在边界上），它是逻辑算符，
不测量它，改为删除夹着它的生成元。
"""
from __future__ import annotations

import itertools
import logging
from collections import defaultdict, deque
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .errors import AlreadyExcisedError, IsolatedLossError, ProtocolError, ReconstructionError
from .gf2 import gf2_solve, in_column_space, nullspace_basis
from .lattice import COLORS, Color, ColorLattice, ValidationReport, Violation, euler_characteristic

logger = logging.getLogger(__name__)

# 零空间维数不超过该值时，枚举全部解取最小权重的修正链
MAX_ENUMERATED_NULLITY = 12


class LossSet(BaseModel):
    lost: List[int]
    rate: Optional[float] = None


class Dimer(BaseModel):
    """
    一次二聚体移除的记录。

    Attributes:
        q0 (int): 丢失比特。
        q1 (int): 孪生比特。
        color (Color): 连接 q0、q1 的链接颜色。
        redefined (List[int]): 被合并或缩小的 plaquette 编号（移除当时的编号）。
        absorbed (List[int]): 因一侧是边界而被删除的 plaquette 编号。
        chi_before (int): 移除前的欧拉示性数。
        chi_after (int): 移除后的欧拉示性数。
        generic (bool): 是否是体内的一般情形（三种颜色的链接与 plaquette 都齐全）。
        operators (List[int]): 测量的二聚体算符 X⊗X 与 Z⊗Z 的支撑。
    """
    q0: int
    q1: int
    color: Color
    redefined: List[int] = Field(default_factory=list)
    absorbed: List[int] = Field(default_factory=list)
    chi_before: int
    chi_after: int
    generic: bool
    operators: List[int] = Field(default_factory=list)


class FinalPlaquette(BaseModel):
    id: int
    color: Color
    qubits: List[int]


class ReconstructionRecord(BaseModel):
    """重构的完整结果；构造完成后不再修改，可在线程间安全汇总。"""
    lattice: ColorLattice = Field(exclude=True)
    losses: List[int]
    rate: Optional[float] = None
    dimers: List[Dimer] = Field(default_factory=list)
    isolated: List[int] = Field(default_factory=list)
    skipped: List[int] = Field(default_factory=list)
    plaquettes: List[FinalPlaquette] = Field(default_factory=list)
    edges: List[Tuple[int, int, Color]] = Field(default_factory=list)
    mask: List[int]
    remaining_fraction: float
    degenerate: int = 0
    merged_into: Dict[int, int] = Field(default_factory=dict)

    def mask_array(self) -> np.ndarray:
        return np.asarray(self.mask, dtype=np.uint8)

    def resolve(self, pid: int) -> Optional[int]:
        """沿合并链找到最终的 plaquette 编号，已删除的返回 None。"""
        while pid in self.merged_into:
            pid = self.merged_into[pid]
        return pid if any(p.id == pid for p in self.plaquettes) else None


class CorrectionChain(BaseModel):
    dimer: int
    pauli_type: str
    support: List[int]
    targets: List[int]


class CodeState:
    """
    部分重构的码：在场比特、当前链接和当前生成元。

    链接与 plaquette 都用稳定的整数编号；每个比特在每种颜色下最多一条链接、
    最多一个 plaquette，分别记录在 edge_at / plaq_at 中。
    """

    def __init__(self, lattice: ColorLattice):
        self.lattice = lattice
        self.present = np.ones(lattice.n_qubits, dtype=bool)
        self.edges: Dict[int, Tuple[int, int, Color]] = dict(enumerate(lattice.edges))
        self.edge_at = lattice.edge_of.copy()
        self.plaquettes: Dict[int, Tuple[Color, Set[int]]] = {
            p: (pl.color, set(pl.qubits)) for p, pl in enumerate(lattice.plaquettes)
        }
        self.plaq_at = lattice.plaquette_of.copy()
        self.merged_into: Dict[int, int] = {}
        self.degenerate = 0
        self._next_edge = len(lattice.edges)

    def euler_characteristic(self) -> int:
        return int(self.present.sum()) - len(self.edges) + len(self.plaquettes)

    def neighbors(self, q: int) -> List[int]:
        found = set()
        for e in self.edge_at[q]:
            if e >= 0:
                u, v, _ = self.edges[int(e)]
                other = v if u == q else u
                if self.present[other]:
                    found.add(other)
        return sorted(found)

    def links_between(self, a: int, b: int) -> List[int]:
        return [int(e) for e in self.edge_at[a] if e >= 0 and b in self.edges[int(e)][:2]]

    def remove_edge(self, e: int) -> None:
        u, v, color = self.edges.pop(e)
        for q in (u, v):
            if self.edge_at[q, color.idx] == e:
                self.edge_at[q, color.idx] = -1

    def add_edge(self, u: int, v: int, color: Color) -> int:
        e = self._next_edge
        self._next_edge += 1
        self.edges[e] = (min(u, v), max(u, v), color)
        self.edge_at[u, color.idx] = e
        self.edge_at[v, color.idx] = e
        return e

    def delete_plaquette(self, pid: int) -> None:
        color, qubits = self.plaquettes.pop(pid)
        for q in qubits:
            if self.plaq_at[q, color.idx] == pid:
                self.plaq_at[q, color.idx] = -1

    def merge_plaquettes(self, a: int, b: int) -> int:
        """把较小的 plaquette 并入较大的，返回保留的编号。"""
        if len(self.plaquettes[a][1]) < len(self.plaquettes[b][1]):
            a, b = b, a
        color, big = self.plaquettes[a]
        _, small = self.plaquettes.pop(b)
        for q in small:
            self.plaq_at[q, color.idx] = a
        big ^= small
        self.merged_into[b] = a
        return a

    def drop_qubits(self, qubits: Sequence[int]) -> None:
        for q in qubits:
            self.present[q] = False
            for k in range(3):
                pid = int(self.plaq_at[q, k])
                if pid >= 0 and pid in self.plaquettes:
                    self.plaquettes[pid][1].discard(q)
                self.plaq_at[q, k] = -1


TwinPolicy = Callable[[CodeState, int, List[int], np.random.Generator], int]


def uniform_twin(state: CodeState, q0: int, candidates: List[int], rng: np.random.Generator) -> int:
    return candidates[int(rng.integers(len(candidates)))]


def sample_losses(
    lattice: ColorLattice,
    rate: float,
    rng: np.random.Generator | None = None,
    uniforms: np.ndarray | None = None,
) -> LossSet:
    """
    每个比特以概率 rate 独立丢失。

    传入 uniforms 时不再抽样，丢失集合为 {i : u_i < rate}（用于同一试验内的分位数耦合）。
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"丢失率必须在 [0, 1] 内，收到 {rate}")
    if uniforms is None:
        if rng is None:
            raise ValueError("sample_losses 需要 rng 或预先抽取的 uniforms")
        uniforms = rng.random(lattice.n_qubits)
    lost = np.flatnonzero(np.asarray(uniforms) < rate)
    return LossSet(lost=[int(q) for q in lost], rate=rate)


def select_twin(
    state: CodeState,
    q0: int,
    rng: np.random.Generator,
    policy: TwinPolicy | None = None,
) -> int:
    """
    在 q0 当前仍在场的邻居中选孪生比特；丢失但尚未处理的邻居同样可选。

    Raises:
        AlreadyExcisedError: q0 已经作为别的丢失比特的孪生比特被移除。
        IsolatedLossError: q0 没有任何在场的邻居。
    """
    if not state.present[q0]:
        raise AlreadyExcisedError(f"比特 {q0} 已被移除")
    candidates = state.neighbors(q0)
    if not candidates:
        raise IsolatedLossError(f"比特 {q0} 没有在场的邻居")
    return (policy or uniform_twin)(state, q0, candidates, rng)


def _odd_plaquettes(state: CodeState, q0: int, q1: int) -> List[Tuple[Color, int]]:
    """只包含 q0、q1 之一的生成元，即与二聚体算符反对易的那些。"""
    odd = []
    for k in COLORS:
        p0 = int(state.plaq_at[q0, k.idx])
        p1 = int(state.plaq_at[q1, k.idx])
        if p0 == p1:
            continue
        odd.extend((k, p) for p in (p0, p1) if p >= 0)
    return odd


def _pair_in_group(state: CodeState, q0: int, q1: int) -> bool:
    pids = sorted(state.plaquettes)
    matrix = np.zeros((state.lattice.n_qubits, len(pids)), dtype=np.uint8)
    for j, pid in enumerate(pids):
        matrix[sorted(state.plaquettes[pid][1]), j] = 1
    pair = np.zeros(state.lattice.n_qubits, dtype=np.uint8)
    pair[[q0, q1]] = 1
    return in_column_space(matrix, pair)


def _drop_flanking(state: CodeState, q0: int, q1: int, absorbed: List[int]) -> None:
    """
    二聚体算符是逻辑算符时的处理：同时包含 q0、q1 的生成元只有一个就删除，
    两个就换成它们的乘积（颜色取前者，会造成同色冲突时两个都删）。
    """
    flanking = [int(p) for p in state.plaq_at[q0] if p >= 0]
    if len(flanking) == 1:
        absorbed.append(flanking[0])
        state.delete_plaquette(flanking[0])
    elif len(flanking) == 2:
        a, b = flanking
        color, support_a = state.plaquettes[a]
        _, support_b = state.plaquettes[b]
        product = (support_a ^ support_b) - {q0, q1}
        clash = any(int(state.plaq_at[q, color.idx]) not in (-1, a) for q in support_b - support_a)
        state.delete_plaquette(a)
        state.delete_plaquette(b)
        if product and not clash:
            state.plaquettes[a] = (color, product)
            for q in product:
                state.plaq_at[q, color.idx] = a
            state.merged_into[b] = a
        else:
            absorbed.extend((a, b))
            state.degenerate += 1
            logger.warning(f"二聚体 ({q0}, {q1}) 两侧生成元的乘积有同色冲突，两个都删除")
    else:
        absorbed.extend(flanking)
        for pid in flanking:
            state.delete_plaquette(pid)
        state.degenerate += 1
    logger.warning(f"二聚体 ({q0}, {q1}) 的算符是逻辑算符，未作为稳定子测量")


def excise_dimer(state: CodeState, q0: int, q1: int) -> Dimer:
    """
    移除二聚体 (q0, q1) 并就地更新 state。

    每种颜色 k 的链接：若 q0、q1 的 k 链接是同一条（二聚体链接）直接删除；
    否则删除两条并把两个外侧端点 x、y 用新的 k 链接相连（x == y 时不连，记为退化）。
    每种颜色 k 的 plaquette：同一个则去掉两个比特，两个不同的则合并，
    只有一侧存在则删除（并入边界）。
    """
    links = state.links_between(q0, q1)
    if not links:
        raise ProtocolError(f"比特 {q0} 与 {q1} 之间没有链接")
    link_color = min((state.edges[e][2] for e in links), key=lambda c: c.idx)
    chi_before = state.euler_characteristic()
    generic = len(links) == 1

    for k in COLORS:
        e0 = int(state.edge_at[q0, k.idx])
        e1 = int(state.edge_at[q1, k.idx])
        if e0 >= 0 and e0 == e1:
            state.remove_edge(e0)
            continue
        x = y = None
        if e0 >= 0:
            u, v, _ = state.edges[e0]
            x = v if u == q0 else u
            state.remove_edge(e0)
        if e1 >= 0:
            u, v, _ = state.edges[e1]
            y = v if u == q1 else u
            state.remove_edge(e1)
        if x is None or y is None:
            generic = False
            continue
        if x == y:
            state.degenerate += 1
            generic = False
            logger.warning(f"二聚体 ({q0}, {q1}) 的 {k.value} 链接重连会形成自环，改为删除两端链接")
            continue
        state.add_edge(x, y, k)

    redefined: List[int] = []
    absorbed: List[int] = []
    odd = _odd_plaquettes(state, q0, q1)
    if not odd and not _pair_in_group(state, q0, q1):
        # 二聚体算符与所有生成元对易却不在稳定子群里，即它本身是逻辑算符：
        # 不能把它当作稳定子，只保留不碰 q0、q1 的生成元组合
        generic = False
        _drop_flanking(state, q0, q1, absorbed)
    else:
        if len({k for k, _ in odd}) > 1:
            # 各颜色分别合并或删除，丢掉了跨颜色的乘积
            state.degenerate += 1
            logger.warning(f"二聚体 ({q0}, {q1}) 与多种颜色的生成元反对易，生成元秩少于预期")
        for k in COLORS:
            p0 = int(state.plaq_at[q0, k.idx])
            p1 = int(state.plaq_at[q1, k.idx])
            if p0 >= 0 and p0 == p1:
                redefined.append(p0)
                if k is link_color:
                    generic = False
            elif p0 >= 0 and p1 >= 0:
                redefined.append(state.merge_plaquettes(p0, p1))
                if k is not link_color:
                    generic = False
            elif p0 >= 0 or p1 >= 0:
                pid = p0 if p0 >= 0 else p1
                absorbed.append(pid)
                state.delete_plaquette(pid)
                generic = False
            else:
                generic = False

    state.drop_qubits((q0, q1))
    for pid in list(redefined):
        if pid in state.plaquettes and not state.plaquettes[pid][1]:
            state.delete_plaquette(pid)
            generic = False

    chi_after = state.euler_characteristic()
    if generic and chi_after != chi_before:
        raise ReconstructionError(f"一般二聚体 ({q0}, {q1}) 改变了欧拉示性数: {chi_before} -> {chi_after}")
    logger.debug(f"移除二聚体 ({q0}, {q1}) 颜色 {link_color.value}, χ: {chi_before} -> {chi_after}")
    return Dimer(
        q0=q0,
        q1=q1,
        color=link_color,
        redefined=redefined,
        absorbed=absorbed,
        chi_before=chi_before,
        chi_after=chi_after,
        generic=generic,
        operators=[q0, q1],
    )


def remove_isolated(state: CodeState, q0: int) -> None:
    """
    孤立丢失：只移除 q0 本身。

    包含 q0 的前两个 plaquette 相乘成一个生成元（颜色取前者）；如果乘积会让某个比特
    拥有两个同色 plaquette，或者只有一个 plaquette 包含 q0，则直接删除。
    """
    for e in state.edge_at[q0]:
        if e >= 0:
            state.remove_edge(int(e))
    containing = [int(p) for p in state.plaq_at[q0] if p >= 0]
    if len(containing) >= 2:
        a, b = containing[0], containing[1]
        color, support_a = state.plaquettes[a]
        _, support_b = state.plaquettes[b]
        product = support_a ^ support_b
        clash = any(int(state.plaq_at[q, color.idx]) not in (-1, a) for q in support_b - support_a)
        state.delete_plaquette(a)
        state.delete_plaquette(b)
        if product and not clash:
            state.plaquettes[a] = (color, product)
            for q in product:
                state.plaq_at[q, color.idx] = a
            state.merged_into[b] = a
        for extra in containing[2:]:
            state.delete_plaquette(extra)
    elif containing:
        state.delete_plaquette(containing[0])
    state.drop_qubits((q0,))
    logger.warning(f"比特 {q0} 是孤立丢失，已单独移除")


def reconstruct(
    lattice: ColorLattice,
    losses: LossSet | Sequence[int],
    rng: np.random.Generator,
    policy: TwinPolicy | None = None,
) -> ReconstructionRecord:
    """
    对所有丢失比特按下标升序执行孪生比特协议。

    Args:
        lattice: 原始晶格，不会被修改。
        losses: LossSet 或丢失比特下标序列。
        rng: 孪生比特选择使用的随机数流。
        policy: 可注入的孪生比特选择策略，默认在候选中均匀选择。

    Returns:
        ReconstructionRecord: 包含二聚体、最终生成元与掩码 M。
    """
    if isinstance(losses, LossSet):
        lost, rate = sorted(set(losses.lost)), losses.rate
    else:
        lost, rate = sorted(set(int(q) for q in losses)), None
    state = CodeState(lattice)
    dimers: List[Dimer] = []
    isolated: List[int] = []
    skipped: List[int] = []
    mask = np.zeros(lattice.n_qubits, dtype=np.uint8)

    for q0 in lost:
        try:
            q1 = select_twin(state, q0, rng, policy)
        except AlreadyExcisedError:
            skipped.append(q0)
            continue
        except IsolatedLossError:
            remove_isolated(state, q0)
            isolated.append(q0)
            mask[q0] = 1
            continue
        dimers.append(excise_dimer(state, q0, q1))
        mask[[q0, q1]] = 1

    n = lattice.n_qubits
    plaquettes = [
        FinalPlaquette(id=pid, color=color, qubits=sorted(qubits))
        for pid, (color, qubits) in sorted(state.plaquettes.items())
    ]
    edges = sorted(state.edges.values(), key=lambda e: (e[0], e[1], e[2].idx))
    record = ReconstructionRecord(
        lattice=lattice,
        losses=lost,
        rate=rate,
        dimers=dimers,
        isolated=isolated,
        skipped=skipped,
        plaquettes=plaquettes,
        edges=edges,
        mask=[int(m) for m in mask],
        remaining_fraction=(n - int(mask.sum())) / n if n else 0.0,
        degenerate=state.degenerate,
        merged_into=dict(state.merged_into),
    )
    report = validate_record(record)
    if not report.ok:
        logger.warning(f"重构后的码未通过校验: {report.rules()}")
    return record


def validate_record(record: ReconstructionRecord) -> ValidationReport:
    """
    检查重构后的码，返回违规列表（不抛异常）。

    规则名："mask", "masked qubit", "self-loop", "edge colors at qubit",
    "plaquette color uniqueness", "even plaquette weight", "plaquette overlap"。
    """
    n = record.lattice.n_qubits
    violations: List[Violation] = []

    def report(rule: str, elements) -> None:
        elements = sorted(set(int(x) for x in elements))
        if elements:
            violations.append(Violation(rule=rule, elements=elements))

    expected = np.zeros(n, dtype=np.uint8)
    for dimer in record.dimers:
        expected[[dimer.q0, dimer.q1]] = 1
    expected[record.isolated] = 1
    report("mask", np.flatnonzero(expected != record.mask_array()))

    mask = record.mask_array().astype(bool)
    report("masked qubit", [p.id for p in record.plaquettes if mask[p.qubits].any()])
    report("masked qubit", [q for u, v, _ in record.edges for q in (u, v) if mask[q]])
    report("self-loop", [u for u, v, _ in record.edges if u == v])

    colors_at: List[List[Color]] = [[] for _ in range(n)]
    for u, v, color in record.edges:
        for q in {u, v}:
            colors_at[q].append(color)
    report("edge colors at qubit", [q for q in range(n) if len(set(colors_at[q])) != len(colors_at[q])])

    membership: List[List[Color]] = [[] for _ in range(n)]
    for p in record.plaquettes:
        for q in p.qubits:
            membership[q].append(p.color)
    report("plaquette color uniqueness", [q for q in range(n) if len(set(membership[q])) != len(membership[q])])
    report("even plaquette weight", [p.id for p in record.plaquettes if len(p.qubits) % 2])

    shared: Dict[Tuple[int, int], int] = defaultdict(int)
    holders: List[List[int]] = [[] for _ in range(n)]
    for p in record.plaquettes:
        for q in p.qubits:
            holders[q].append(p.id)
    for ids in holders:
        for pair in itertools.combinations(sorted(ids), 2):
            shared[pair] += 1
    report("plaquette overlap", [a for (a, _), count in shared.items() if count % 2])
    return ValidationReport(violations=violations)


def updated_generators(record: ReconstructionRecord) -> Dict[str, List[List[int]]]:
    """重构后的生成元支撑；X 型与 Z 型支撑相同。"""
    supports = [list(p.qubits) for p in record.plaquettes]
    return {"X": supports, "Z": [list(s) for s in supports]}


def record_to_json(record: ReconstructionRecord) -> str:
    return record.model_dump_json(indent=2)


def record_euler_characteristic(record: ReconstructionRecord) -> int:
    """重构后码的 V - E + F；无丢失时与 euler_characteristic(lattice) 相同。"""
    if not record.dimers and not record.isolated:
        return euler_characteristic(record.lattice)
    remaining = len(record.mask) - sum(record.mask)
    return remaining - len(record.edges) + len(record.plaquettes)


def _chain_targets(record: ReconstructionRecord, dimer: Dimer) -> List[int]:
    parity: Dict[int, int] = {}
    for pid in dimer.redefined:
        final = record.resolve(pid)
        if final is not None:
            parity[final] = parity.get(final, 0) ^ 1
    return sorted(pid for pid, bit in parity.items() if bit)


def correction_chain(record: ReconstructionRecord, dimer: int | Dimer, pauli_type: str = "X") -> CorrectionChain:
    """
    为一个二聚体生成确定性的修正链。

    从目标 plaquette 的支撑出发，在在场比特上按最终链接做广度优先扩张，
    每扩张一层就解一次奇偶方程：与目标 plaquette 重叠为奇，与其余生成元重叠为偶。
    零空间不大时取最小权重解。

    Raises:
        ReconstructionError: 扩张到整个连通分量仍无解。
    """
    if isinstance(dimer, Dimer):
        index = record.dimers.index(dimer)
    else:
        index = int(dimer)
    current = record.dimers[index]
    if pauli_type not in ("X", "Z"):
        raise ValueError(f"未知的 Pauli 类型: {pauli_type}")
    targets = _chain_targets(record, current)
    if not targets:
        return CorrectionChain(dimer=index, pauli_type=pauli_type, support=[], targets=[])

    present = record.mask_array() == 0
    by_id = {p.id: p for p in record.plaquettes}
    neighbors: Dict[int, List[int]] = {}
    for u, v, _ in record.edges:
        neighbors.setdefault(u, []).append(v)
        neighbors.setdefault(v, []).append(u)

    ball = sorted({q for pid in targets for q in by_id[pid].qubits if present[q]})
    frontier = deque(ball)
    seen = set(ball)
    target_set = set(targets)
    while True:
        columns = sorted(seen)
        column_of = {q: j for j, q in enumerate(columns)}
        rows = [p for p in record.plaquettes if any(q in column_of for q in p.qubits)]
        matrix = np.zeros((len(rows), len(columns)), dtype=np.uint8)
        rhs = np.zeros(len(rows), dtype=np.uint8)
        for i, p in enumerate(rows):
            for q in p.qubits:
                if q in column_of:
                    matrix[i, column_of[q]] = 1
            rhs[i] = 1 if p.id in target_set else 0
        x = gf2_solve(matrix, rhs)
        if x is not None:
            x = _lightest_solution(matrix, x)
            support = [columns[j] for j in np.flatnonzero(x)]
            logger.debug(f"二聚体 {index} 的修正链: {support}")
            return CorrectionChain(dimer=index, pauli_type=pauli_type, support=support, targets=targets)
        grown = []
        for _ in range(len(frontier)):
            q = frontier.popleft()
            for r in neighbors.get(q, []):
                if r not in seen and present[r]:
                    seen.add(r)
                    grown.append(r)
        if not grown:
            raise ReconstructionError(f"二聚体 {index} 不存在满足奇偶条件的修正链")
        frontier.extend(sorted(grown))


def _lightest_solution(matrix: np.ndarray, x: np.ndarray) -> np.ndarray:
    basis = nullspace_basis(matrix)
    if basis.shape[0] == 0 or basis.shape[0] > MAX_ENUMERATED_NULLITY:
        return x
    best = x
    for bits in itertools.product((0, 1), repeat=basis.shape[0]):
        candidate = x ^ (np.asarray(bits, dtype=np.uint8) @ basis % 2).astype(np.uint8)
        if candidate.sum() < best.sum():
            best = candidate
    return best
