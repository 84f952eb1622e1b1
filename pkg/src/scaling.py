"""
有限尺寸标度拟合：p_c(d) = p_∞ + b·d^(-1/ν)。
"""
from __future__ import annotations

import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .errors import FitError

logger = logging.getLogger(__name__)

# 串渗流 / 分支检查用渗流指数 ν = 4/3，代数检查用 ν = 1
DEFAULT_INV_NU = {"string": 0.75, "branching": 0.75, "algebraic": 1.0}


class ScalingFit(BaseModel):
    p_inf: float
    p_inf_err: float
    b: float
    b_err: float = 0.0
    inv_nu: float
    chi2: float
    n_points: int
    residuals: List[float] = Field(default_factory=list)

    def summary(self) -> Dict[str, float]:
        return {
            "p_inf": self.p_inf,
            "p_inf_err": self.p_inf_err,
            "b": self.b,
            "inv_nu": self.inv_nu,
            "chi2": self.chi2,
            "n_points": self.n_points,
        }


class ExponentFit(BaseModel):
    inv_nu: float
    inv_nu_err: float
    intercept: float
    n_points: int
    residuals: List[float] = Field(default_factory=list)


def default_inv_nu(method: str) -> float:
    return DEFAULT_INV_NU.get(method, 1.0)


def _linear_fit(x: np.ndarray, y: np.ndarray, sigma: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """返回 (参数 [截距, 斜率], 标准误差, 残差, χ²)。"""
    design = np.column_stack([np.ones_like(x), x])
    if sigma is not None:
        weights = 1.0 / sigma
        coef, *_ = np.linalg.lstsq(design * weights[:, None], y * weights, rcond=None)
    else:
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    dof = len(x) - 2
    if sigma is not None:
        chi2 = float(np.sum((residuals / sigma) ** 2))
        covariance = np.linalg.inv(design.T @ (design / sigma[:, None] ** 2))
    else:
        chi2 = float(np.sum(residuals ** 2))
        scale = chi2 / dof if dof > 0 else 0.0
        covariance = scale * np.linalg.inv(design.T @ design)
    errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    return coef, errors, residuals, chi2


def fit_threshold(
    points: Sequence[Sequence[float]],
    inv_nu: Optional[float] = None,
    method: str = "algebraic",
    minimum: int = 3,
) -> ScalingFit:
    """
    对 x = d^(-1/ν) 做线性最小二乘，截距即 p_∞。

    Args:
        points: (d, p_c) 或 (d, p_c, σ) 序列；全部点都给出 σ > 0 时做逆方差加权。
        inv_nu: 固定的 1/ν，缺省时按 method 取默认值。
        method: 检查方法名，只用于选择默认 1/ν。

    Raises:
        FitError: 点数不足或 x 全部相同。
    """
    if inv_nu is None:
        inv_nu = default_inv_nu(method)
    if len(points) < minimum:
        raise FitError(f"拟合至少需要 {minimum} 个点，收到 {len(points)}")
    d = np.asarray([float(p[0]) for p in points])
    y = np.asarray([float(p[1]) for p in points])
    sigmas = [p[2] if len(p) > 2 else None for p in points]
    sigma = None
    if all(s is not None and float(s) > 0 for s in sigmas):
        sigma = np.asarray([float(s) for s in sigmas])
    if np.any(d <= 0):
        raise FitError("码距必须为正数")
    x = d ** (-inv_nu)
    if np.allclose(x, x[0]):
        raise FitError("所有 x = d^(-1/ν) 相同，无法拟合")
    coef, errors, residuals, chi2 = _linear_fit(x, y, sigma)
    fit = ScalingFit(
        p_inf=float(coef[0]),
        p_inf_err=float(errors[0]),
        b=float(coef[1]),
        b_err=float(errors[1]),
        inv_nu=float(inv_nu),
        chi2=chi2,
        n_points=len(points),
        residuals=[float(r) for r in residuals],
    )
    logger.info(f"拟合 p_∞ = {fit.p_inf:.4f} ± {fit.p_inf_err:.4f} (1/ν = {inv_nu})")
    return fit


def fit_exponent(points: Sequence[Sequence[float]]) -> ExponentFit:
    """
    log Δ 对 log(1/d) 的最小二乘斜率即 1/ν；两个点时恰好插值。

    Raises:
        FitError: 少于两个点、Δ 非正或码距全部相同。
    """
    if len(points) < 2:
        raise FitError(f"指数拟合至少需要 2 个点，收到 {len(points)}")
    d = np.asarray([float(p[0]) for p in points])
    delta = np.asarray([float(p[1]) for p in points])
    if np.any(delta <= 0) or np.any(d <= 0):
        raise FitError("Δ 与码距都必须为正数")
    x = np.log(1.0 / d)
    if np.allclose(x, x[0]):
        raise FitError("码距全部相同，无法拟合指数")
    coef, errors, residuals, _ = _linear_fit(x, np.log(delta), None)
    return ExponentFit(
        inv_nu=float(coef[1]),
        inv_nu_err=float(errors[1]),
        intercept=float(coef[0]),
        n_points=len(points),
        residuals=[float(r) for r in residuals],
    )


def fit_fraction(points: Sequence[Sequence[float]]) -> ScalingFit:
    """剩余比例对 1/d 的线性外推，截距是 d → ∞ 的极限。"""
    return fit_threshold(points, inv_nu=1.0)


def distance_statistics(rows: Iterable[dict]) -> Dict[Tuple[str, str, str, str], Dict[int, Dict[str, float]]]:
    """
    把逐试验的 CSV 行按 (geometry, variant, method, color) 与码距分组，
    计算 p_critical 的均值、标准差以及剩余比例的均值。
    """
    grouped: Dict[Tuple[str, str, str, str], Dict[int, List[Tuple[float, float]]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        key = (row["geometry"], row["variant"], row["method"], row["color"])
        grouped[key][int(row["distance"])].append((float(row["p_critical"]), float(row["fraction_remaining"])))
    stats = {}
    for key, by_distance in grouped.items():
        stats[key] = {}
        for distance, values in sorted(by_distance.items()):
            p = np.asarray([v[0] for v in values])
            f = np.asarray([v[1] for v in values])
            stats[key][distance] = {
                "mean": float(p.mean()),
                "std": float(p.std(ddof=1)) if p.size > 1 else 0.0,
                "fraction": float(f.mean()),
                "trials": int(p.size),
            }
    return stats


def fit_rows(rows: Iterable[dict], inv_nu: Optional[float] = None, weighted: bool = False) -> Dict[str, dict]:
    """
    对每个分组做阈值、指数和剩余比例三种拟合。

    weighted=True 时用 Δ(d)/√T 作为每个点的 σ。指数与比例拟合条件不满足时跳过并记录警告。
    """
    results = {}
    for (geometry, variant, method, color), by_distance in sorted(distance_statistics(rows).items()):
        name = f"{geometry}/{variant}/{method}/{color}"
        points = []
        for d, s in by_distance.items():
            sigma = s["std"] / np.sqrt(s["trials"]) if weighted and s["trials"] > 1 else None
            points.append((d, s["mean"], sigma) if sigma else (d, s["mean"]))
        entry = {"threshold": fit_threshold(points, inv_nu=inv_nu, method=method).summary()}
        try:
            entry["exponent"] = fit_exponent([(d, s["std"]) for d, s in by_distance.items()]).model_dump(exclude={"residuals"})
        except FitError as e:
            logger.warning(f"{name} 跳过指数拟合: {e}")
        try:
            fraction = fit_fraction([(d, s["fraction"]) for d, s in by_distance.items()])
            entry["fraction"] = fraction.summary()
            # 被移除的比特比例（丢失加孪生），可直接与按擦除比例报告的阈值比较
            entry["erased"] = {"p_inf": 1.0 - fraction.p_inf, "p_inf_err": fraction.p_inf_err}
        except FitError as e:
            logger.warning(f"{name} 跳过剩余比例拟合: {e}")
        results[name] = entry
    return results
