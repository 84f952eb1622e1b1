"""
试验用的随机数流和线程池。

每个试验的种子只由 (主种子, 试验下标) 推出，与执行顺序和线程数无关。
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def trial_seed(master_seed: int, *key: int) -> int:
    """
    由主种子和计数器下标推出一个 64 位种子。

    Args:
        master_seed (int): 主种子。
        *key (int): 计数器下标，例如 (trial,) 或 (grid_point, trial)。

    Returns:
        int: 可以写入结果文件的 64 位无符号整数。
    """
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """基于计数器的 Philox 生成器，同一个种子总是给出同一个流。"""
    return np.random.Generator(np.random.Philox(seed))


def run_parallel(func: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    并发执行 func，结果按输入顺序放回。

    threads <= 1 时直接顺序执行，方便调试。
    """
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    results: List[R] = [None] * len(items)  # type: ignore[list-item]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(func, item): index for index, item in enumerate(items)}
        for future in as_completed(futures):
            index = futures[future]
            try:
                results[index] = future.result()
            except Exception as e:
                logger.error(f"第 {index} 个任务失败: {e}")
                raise
    return results


def binomial_error(successes: int, trials: int) -> Tuple[float, float]:
    """返回 (频率, sqrt(s(1-s)/T))。"""
    if trials <= 0:
        return 0.0, 0.0
    rate = successes / trials
    return rate, float(np.sqrt(rate * (1.0 - rate) / trials))
