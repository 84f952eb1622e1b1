"""
临界丢失率的逐试验二分搜索、试验调度与汇总。

同一个试验内所有轮次共用一组分位数 u_i：丢失率 p 下的丢失集合为 {i : u_i < p}，
因此不同 p 的丢失集合是嵌套的，二分搜索才有意义。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from .lattice import Color, ColorLattice
from .logical_checks import CheckMethod, FailureCriterion, logical_survives
from .reconstruction import ReconstructionRecord, TwinPolicy, reconstruct, sample_losses
from .tools import binomial_error, make_rng, run_parallel, trial_seed

logger = logging.getLogger(__name__)

MAX_ROUNDS = 64

CSV_COLUMNS = [
    "geometry",
    "variant",
    "distance",
    "method",
    "color",
    "trial",
    "seed",
    "p_critical",
    "fraction_remaining",
]

CheckFunction = Callable[[ColorLattice, ReconstructionRecord, Color], bool]


class TwinRedraw(str, Enum):
    PER_ROUND = "per-round"
    FROZEN = "frozen"


@dataclass(frozen=True)
class QuantileCoupling:
    uniforms: np.ndarray

    @classmethod
    def draw(cls, n_qubits: int, rng: np.random.Generator) -> "QuantileCoupling":
        return cls(uniforms=rng.random(n_qubits))

    def losses(self, rate: float) -> List[int]:
        return [int(q) for q in np.flatnonzero(self.uniforms < rate)]

    def count(self, rate: float) -> int:
        return int(np.count_nonzero(self.uniforms < rate))


class CriticalRate(BaseModel):
    p_critical: float
    fraction_remaining: float
    lost: int
    rounds: int
    non_monotone: int = 0


class TrialResult(CriticalRate):
    trial: int
    seed: int


class ThresholdDistribution(BaseModel):
    """
    一个 (几何, 变体, 码距, 方法, 颜色) 组合下全部试验的临界丢失率分布。
    """
    geometry: str
    variant: str
    distance: int
    method: str
    color: str
    samples: List[TrialResult] = Field(default_factory=list)
    mean: float = 0.0
    std: float = 0.0

    @property
    def seeds(self) -> List[int]:
        return [s.seed for s in self.samples]

    @property
    def p_values(self) -> np.ndarray:
        return np.asarray([s.p_critical for s in self.samples], dtype=float)

    @classmethod
    def from_samples(cls, lattice: ColorLattice, method: str, color: Color, samples: List[TrialResult]):
        values = np.asarray([s.p_critical for s in samples], dtype=float)
        return cls(
            geometry=lattice.geometry.value,
            variant=lattice.variant.value,
            distance=lattice.distance,
            method=method,
            color=Color(color).value,
            samples=samples,
            mean=float(values.mean()) if values.size else 0.0,
            std=float(values.std(ddof=1)) if values.size > 1 else 0.0,
        )

    def rows(self) -> List[dict]:
        return [
            {
                "geometry": self.geometry,
                "variant": self.variant,
                "distance": self.distance,
                "method": self.method,
                "color": self.color,
                "trial": s.trial,
                "seed": s.seed,
                "p_critical": s.p_critical,
                "fraction_remaining": s.fraction_remaining,
            }
            for s in self.samples
        ]


class SweepPoint(BaseModel):
    p: float
    survival: float
    err: float
    trials: int


class FractionStat(BaseModel):
    distance: int
    method: str
    color: str
    mean: float
    err: float
    trials: int


def method_name(method: Union[CheckMethod, str, CheckFunction]) -> str:
    if callable(method) and not isinstance(method, (str, CheckMethod)):
        return getattr(method, "__name__", "custom")
    return CheckMethod(method).value


def _check_function(
    method: Union[CheckMethod, str, CheckFunction],
    criterion: FailureCriterion | str,
) -> CheckFunction:
    if callable(method) and not isinstance(method, (str, CheckMethod)):
        return method
    method = CheckMethod(method)

    def check(lattice: ColorLattice, record: ReconstructionRecord, color: Color) -> bool:
        return logical_survives(method, lattice, record.mask_array(), color, criterion)

    return check


def sample_critical_rate(
    lattice: ColorLattice,
    method: Union[CheckMethod, str, CheckFunction],
    color: Color,
    rng: np.random.Generator,
    twin_redraw: TwinRedraw | str = TwinRedraw.PER_ROUND,
    criterion: FailureCriterion | str = FailureCriterion.PER_COLOR,
    policy: Optional[TwinPolicy] = None,
    max_rounds: int = MAX_ROUNDS,
) -> CriticalRate:
    """
    单个试验的二分搜索。

    从 p=1/2、步长 1/4 开始，每轮用耦合后的丢失集合重构晶格并检查：存活则升高 p，
    否则降低，步长每轮减半。某一轮实际丢失数与上一轮相同时停止，返回该轮的 p，
    剩余比例取自该轮的丢失集合。

    Args:
        method: CheckMethod 或自定义检查函数 (lattice, record, color) -> bool。
        twin_redraw: per-round 每轮继续使用试验随机流；frozen 每轮从同一个子流重新开始。
    """
    check = _check_function(method, criterion)
    coupling = QuantileCoupling.draw(lattice.n_qubits, rng)
    frozen = TwinRedraw(twin_redraw) is TwinRedraw.FROZEN
    twin_seed = int(rng.integers(0, 2**63 - 1)) if frozen else 0

    p, step = 0.5, 0.25
    previous: Optional[int] = None
    max_surviving = -1
    min_failing = lattice.n_qubits + 1
    non_monotone = 0
    record: Optional[ReconstructionRecord] = None
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        lost = coupling.losses(p)
        twin_rng = make_rng(twin_seed) if frozen else rng
        record = reconstruct(lattice, lost, twin_rng, policy)
        if previous is not None and len(lost) == previous:
            break
        survives = check(lattice, record, color)
        if (survives and len(lost) >= min_failing) or (not survives and len(lost) <= max_surviving):
            non_monotone += 1
            logger.warning(f"第 {rounds} 轮结果不单调: p={p}, 丢失 {len(lost)}, 存活={survives}")
        if survives:
            max_surviving = max(max_surviving, len(lost))
        else:
            min_failing = min(min_failing, len(lost))
        logger.debug(f"第 {rounds} 轮: p={p:.6f}, 丢失 {len(lost)}, 存活={survives}")
        previous = len(lost)
        p = p + step if survives else p - step
        step /= 2
    else:
        logger.warning(f"二分搜索达到 {max_rounds} 轮上限，p={p}")
        lost = coupling.losses(p)
        record = reconstruct(lattice, lost, make_rng(twin_seed) if frozen else rng, policy)

    return CriticalRate(
        p_critical=float(min(max(p, 0.0), 1.0)),
        fraction_remaining=record.remaining_fraction,
        lost=len(record.losses),
        rounds=rounds,
        non_monotone=non_monotone,
    )


def run_trials(
    lattice: ColorLattice,
    method: Union[CheckMethod, str, CheckFunction],
    color: Color,
    trials: int,
    master_seed: int,
    threads: int = 1,
    twin_redraw: TwinRedraw | str = TwinRedraw.PER_ROUND,
    criterion: FailureCriterion | str = FailureCriterion.PER_COLOR,
) -> ThresholdDistribution:
    """
    执行 T 个独立试验；第 i 个试验的随机流只由 (master_seed, i) 决定。

    Raises:
        ValueError: trials < 1。
    """
    if trials < 1:
        raise ValueError(f"trials 必须 ≥ 1，收到 {trials}")

    def one(index: int) -> TrialResult:
        seed = trial_seed(master_seed, index)
        result = sample_critical_rate(lattice, method, color, make_rng(seed), twin_redraw, criterion)
        logger.debug(f"试验 {index}: p*={result.p_critical:.6f}")
        return TrialResult(trial=index, seed=seed, **result.model_dump())

    samples = run_parallel(one, list(range(trials)), threads)
    distribution = ThresholdDistribution.from_samples(lattice, method_name(method), color, samples)
    logger.info(
        f"d={lattice.distance} {distribution.method}/{distribution.color}: "
        f"p_c={distribution.mean:.4f} ± {distribution.std:.4f} ({trials} 次试验)"
    )
    return distribution


def sweep_probability(
    lattice: ColorLattice,
    method: Union[CheckMethod, str, CheckFunction],
    color: Color,
    grid: Sequence[float],
    trials: int,
    seed: int,
    threads: int = 1,
    criterion: FailureCriterion | str = FailureCriterion.PER_COLOR,
) -> List[SweepPoint]:
    """每个网格点独立抽取丢失，返回存活频率及其二项误差。"""
    if trials < 1:
        raise ValueError(f"trials 必须 ≥ 1，收到 {trials}")
    for p in grid:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"网格点 {p} 不在 [0, 1] 内")
    check = _check_function(method, criterion)
    jobs = [(g, t) for g in range(len(grid)) for t in range(trials)]

    def one(job) -> bool:
        g, t = job
        rng = make_rng(trial_seed(seed, g, t))
        losses = sample_losses(lattice, grid[g], rng)
        return check(lattice, reconstruct(lattice, losses, rng), color)

    outcomes = run_parallel(one, jobs, threads)
    points = []
    for g, p in enumerate(grid):
        successes = sum(outcomes[g * trials:(g + 1) * trials])
        survival, err = binomial_error(successes, trials)
        points.append(SweepPoint(p=float(p), survival=survival, err=err, trials=trials))
        logger.info(f"p={p:.4f}: 存活率 {survival:.4f} ± {err:.4f}")
    return points


def remaining_fraction_stats(distributions: Sequence[ThresholdDistribution]) -> List[FractionStat]:
    """每个码距、方法、颜色在临界点处剩余比特比例的均值与标准误差。"""
    stats = []
    for dist in distributions:
        values = np.asarray([s.fraction_remaining for s in dist.samples], dtype=float)
        err = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
        stats.append(
            FractionStat(
                distance=dist.distance,
                method=dist.method,
                color=dist.color,
                mean=float(values.mean()) if values.size else 0.0,
                err=err,
                trials=int(values.size),
            )
        )
    return sorted(stats, key=lambda s: (s.method, s.color, s.distance))


def summarize(distributions: Sequence[ThresholdDistribution]) -> Dict[str, Dict[str, float]]:
    """{distance: {mean, std, trials}}，按码距升序。"""
    ordered = sorted(distributions, key=lambda d: d.distance)
    return {
        str(d.distance): {"mean": d.mean, "std": d.std, "trials": len(d.samples)}
        for d in ordered
    }
