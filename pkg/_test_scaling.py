#!/usr/bin/env python3
"""
有限尺寸标度拟合测试脚本
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.errors import FitError  # noqa: E402
from src.scaling import fit_exponent, fit_fraction, fit_rows, fit_threshold  # noqa: E402

DISTANCES = [8, 12, 16, 20, 24]


def test_exact_threshold_recovered():
    print("🧪 测试: 精确数据的阈值拟合")
    points = [(d, 0.4 + 0.3 / d) for d in DISTANCES]
    fit = fit_threshold(points, inv_nu=1.0)
    assert fit.p_inf == pytest.approx(0.4, abs=1e-12)
    assert fit.b == pytest.approx(0.3, abs=1e-10)
    assert fit.chi2 == pytest.approx(0.0, abs=1e-20)
    assert fit.n_points == 5
    print(f"✅ p_∞ = {fit.p_inf:.6f}")


def test_default_exponent_per_method():
    points = [(d, 0.25 - 0.2 * d ** -0.75) for d in DISTANCES]
    fit = fit_threshold(points, method="string")
    assert fit.inv_nu == 0.75
    assert fit.p_inf == pytest.approx(0.25, abs=1e-10)
    assert fit_threshold([(d, 0.4) for d in DISTANCES]).inv_nu == 1.0


def test_weighted_fit():
    points = [(d, 0.4 + 0.3 / d, 0.01) for d in DISTANCES]
    fit = fit_threshold(points, inv_nu=1.0)
    assert fit.p_inf == pytest.approx(0.4, abs=1e-10)
    assert fit.p_inf_err > 0


def test_constant_data():
    fit = fit_threshold([(d, 0.4) for d in DISTANCES], inv_nu=1.0)
    assert fit.p_inf == pytest.approx(0.4)
    assert fit.b == pytest.approx(0.0, abs=1e-12)


def test_exponent_recovered():
    print("🧪 测试: 标准差的幂律指数")
    points = [(d, 2.0 * d ** -0.75) for d in DISTANCES]
    fit = fit_exponent(points)
    assert fit.inv_nu == pytest.approx(0.75, abs=1e-10)
    assert np.exp(fit.intercept) == pytest.approx(2.0)
    two = fit_exponent(points[:2])
    assert two.inv_nu == pytest.approx(0.75, abs=1e-10)
    print(f"✅ 1/ν = {fit.inv_nu:.6f}")


def test_fraction_intercept():
    fit = fit_fraction([(d, 0.5 + 1.0 / d) for d in DISTANCES])
    assert fit.p_inf == pytest.approx(0.5, abs=1e-12)


def test_fit_errors():
    with pytest.raises(FitError):
        fit_threshold([(8, 0.4), (12, 0.41)])
    with pytest.raises(FitError):
        fit_threshold([(8, 0.4), (8, 0.41), (8, 0.42)])
    with pytest.raises(FitError):
        fit_exponent([(8, 0.1)])
    with pytest.raises(FitError):
        fit_exponent([(8, 0.1), (12, 0.0)])


def test_fit_rows_groups():
    rows = []
    for d in DISTANCES:
        for trial, offset in enumerate((-0.01, 0.0, 0.01)):
            rows.append({
                "geometry": "4.8.8", "variant": "square", "distance": d,
                "method": "algebraic", "color": "R", "trial": trial, "seed": trial,
                "p_critical": 0.4 + 0.3 / d + offset * 8 / d,
                "fraction_remaining": 0.28 + 1.0 / d,
            })
    fits = fit_rows(rows)
    entry = fits["4.8.8/square/algebraic/R"]
    assert entry["threshold"]["p_inf"] == pytest.approx(0.4, abs=1e-10)
    assert entry["exponent"]["inv_nu"] == pytest.approx(1.0, abs=1e-10)
    assert entry["fraction"]["p_inf"] == pytest.approx(0.28, abs=1e-10)
    assert entry["erased"]["p_inf"] == pytest.approx(0.72, abs=1e-10)
    with pytest.raises(FitError):
        fit_rows(rows[:6])


if __name__ == "__main__":
    print("=" * 60)
    print("📌 标度拟合测试")
    print("=" * 60)
    test_exact_threshold_recovered()
    test_default_exponent_per_method()
    test_weighted_fit()
    test_constant_data()
    test_exponent_recovered()
    test_fraction_intercept()
    test_fit_errors()
    test_fit_rows_groups()
    print("=" * 60)
    print("✅ 全部通过")
