"""
GF(2) 线性代数：按 64 位机器字打包的行约简与求解。

行以 little-endian 位序打包：第 j 列位于第 j // 64 个字的第 j % 64 位。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

logger = logging.getLogger(__name__)

WORD_BITS = 64


def to_gf2(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix, dtype=np.uint8) & 1


def words_for(n_cols: int) -> int:
    return max(1, -(-n_cols // WORD_BITS))


def pack_rows(dense: np.ndarray) -> np.ndarray:
    """
    将稠密 0/1 矩阵打包为 uint64 字矩阵。

    Args:
        dense: 形状为 (m, n) 的 0/1 矩阵。

    Returns:
        np.ndarray: 形状为 (m, ceil(n/64)) 的 uint64 矩阵。
    """
    mat = to_gf2(np.atleast_2d(dense))
    m, n = mat.shape
    width = words_for(n) * 8
    packed = np.zeros((m, width), dtype=np.uint8)
    if n:
        raw = np.packbits(mat, axis=1, bitorder="little")
        packed[:, : raw.shape[1]] = raw
    return np.ascontiguousarray(packed).view("<u8")


def unpack_rows(packed: np.ndarray, n_cols: int) -> np.ndarray:
    raw = np.ascontiguousarray(packed).view(np.uint8)
    return np.unpackbits(raw, axis=1, count=n_cols, bitorder="little")


def column_bits(packed: np.ndarray, col: int) -> np.ndarray:
    word, bit = divmod(col, WORD_BITS)
    flag = np.uint64(1) << np.uint64(bit)
    return (packed[:, word] & flag) != 0


@dataclass(frozen=True)
class RowReduceResult:
    matrix: np.ndarray
    rank: int
    pivots: Tuple[int, ...]


def row_reduce(packed: np.ndarray, n_cols: int) -> RowReduceResult:
    """
    对打包矩阵的前 n_cols 列做约简行阶梯化（部分行交换，无容差）。

    每个主元列只做一次向量化的异或消元，代价为 O(m·n·w) 次字操作。

    Args:
        packed: pack_rows 的输出，不会被修改。
        n_cols: 参与选主元的列数（增广列放在其后即可不参与选主元）。

    Returns:
        RowReduceResult: 约简后的矩阵、秩以及主元列。
    """
    mat = packed.copy()
    m = mat.shape[0]
    pivots = []
    row = 0
    for col in range(n_cols):
        if row == m:
            break
        word = col // WORD_BITS
        column = column_bits(mat, col)
        candidates = np.flatnonzero(column[row:])
        if candidates.size == 0:
            continue
        pivot = row + int(candidates[0])
        if pivot != row:
            mat[[row, pivot]] = mat[[pivot, row]]
            column[[row, pivot]] = column[[pivot, row]]
        column[row] = False
        targets = np.flatnonzero(column)
        if targets.size:
            mat[targets, word:] ^= mat[row, word:]
        pivots.append(col)
        row += 1
    return RowReduceResult(matrix=mat, rank=len(pivots), pivots=tuple(pivots))


def gf2_rank(matrix: np.ndarray) -> int:
    """计算 GF(2) 秩，自动选择较短的一维作为主元循环。"""
    mat = to_gf2(np.atleast_2d(matrix))
    if mat.size == 0:
        return 0
    if mat.shape[1] > mat.shape[0]:
        mat = mat.T
    return row_reduce(pack_rows(mat), mat.shape[1]).rank


def gf2_matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    mat = to_gf2(matrix).astype(np.int64)
    vec = to_gf2(vector).astype(np.int64)
    return ((mat @ vec) % 2).astype(np.uint8)


def gf2_solve(a_masked: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """
    求解 GF(2) 线性方程组 A x = b。

    Args:
        a_masked: 形状为 (m, n) 的 0/1 矩阵（通常已按掩码选取行）。
        rhs: 长度为 m 的 0/1 向量。

    Returns:
        任意一个解（自由变量取 0），无解时返回 None。
    """
    a = to_gf2(np.atleast_2d(a_masked))
    b = to_gf2(rhs).reshape(-1)
    m, n = a.shape
    if b.shape[0] != m:
        raise ValueError(f"维度不匹配: A 有 {m} 行, rhs 长度为 {b.shape[0]}")
    if m == 0:
        return np.zeros(n, dtype=np.uint8)
    augmented = np.concatenate([a, b.reshape(-1, 1)], axis=1)
    reduced = row_reduce(pack_rows(augmented), n)
    rhs_bits = column_bits(reduced.matrix, n)
    if rhs_bits[reduced.rank:].any():
        return None
    x = np.zeros(n, dtype=np.uint8)
    if reduced.rank:
        x[list(reduced.pivots)] = rhs_bits[: reduced.rank].astype(np.uint8)
    return x


def nullspace_basis(matrix: np.ndarray) -> np.ndarray:
    """返回 GF(2) 零空间的一组基，每行一个基向量。"""
    mat = to_gf2(np.atleast_2d(matrix))
    m, n = mat.shape
    if m == 0:
        return np.eye(n, dtype=np.uint8)
    reduced = row_reduce(pack_rows(mat), n)
    dense = unpack_rows(reduced.matrix[: reduced.rank], n)
    pivot_set = set(reduced.pivots)
    basis = []
    for free in range(n):
        if free in pivot_set:
            continue
        vec = np.zeros(n, dtype=np.uint8)
        vec[free] = 1
        for row, col in enumerate(reduced.pivots):
            if dense[row, free]:
                vec[col] = 1
        basis.append(vec)
    if not basis:
        return np.zeros((0, n), dtype=np.uint8)
    return np.vstack(basis)


def in_column_space(matrix: np.ndarray, vector: np.ndarray) -> bool:
    return gf2_solve(matrix, vector) is not None
