import logging
import os
from typing import Dict, List

from .config import RunConfig, config_metadata
from .errors import FitError
from .lattice import build_lattice, code_parameters
from .montecarlo import ThresholdDistribution, remaining_fraction_stats, run_trials, summarize
from .scaling import fit_rows
from .state import ThresholdPipelineState
from .storage import trials_csv, write_json, write_text

# --- 日志配置 ---
logger = logging.getLogger(__name__)


def output_paths(config: RunConfig) -> Dict[str, str]:
    """
    根据配置决定输出文件路径。

    给出 --output 时以它为逐试验文件，汇总和拟合文件与它同名加后缀；
    否则写到 output_dir 下按几何/变体/方法命名的文件。
    """
    if config.output:
        stem, _ = os.path.splitext(config.output)
        samples = config.output
    else:
        stem = os.path.join(
            config.output_dir,
            f"threshold_{config.geometry.value}_{config.variant.value}_{config.method.value}",
        )
        samples = f"{stem}.{config.output_format}"
    return {"samples": samples, "summary": f"{stem}_summary.json", "fit": f"{stem}_fit.json"}


# --- 节点函数 ---

def prepare_run(state: ThresholdPipelineState) -> dict:
    """
    整理码距序列并生成元数据。

    Args:
        state (ThresholdPipelineState): 当前的图状态。

    Returns:
        dict: 包含待模拟码距与元数据的状态字典。
    """
    logger.info("\n" + "=" * 80)
    logger.info(">>> 进入节点: prepare_run (准备运行)")
    logger.info("=" * 80)
    config = state["config"]
    pending = sorted(set(config.distances))
    logger.info(f"[prepare_run] 码距: {pending}, 方法: {config.method.value}, 颜色: {[c.value for c in config.colors]}")
    result = {"pending": pending, "metadata": config_metadata(config), "distributions": []}
    logger.info("<<< 退出节点: prepare_run")
    logger.info("=" * 80)
    return result


def simulate_distance(state: ThresholdPipelineState) -> dict:
    """
    对队列中的第一个码距构造晶格，并对每种颜色执行全部试验。

    Args:
        state (ThresholdPipelineState): 当前的图状态。

    Returns:
        dict: 新增的分布以及剩余的码距。
    """
    logger.info("\n" + "=" * 80)
    logger.info(">>> 进入节点: simulate_distance (模拟单个码距)")
    logger.info("=" * 80)
    config = state["config"]
    distance, rest = state["pending"][0], state["pending"][1:]
    lattice = build_lattice(config.geometry, config.variant, distance)
    params = code_parameters(lattice)
    logger.info(f"[simulate_distance] d={distance}: N={params.n_qubits}, k={params.k}")

    distributions: List[ThresholdDistribution] = []
    # 各颜色共用 seed（公共随机数）：同一试验的丢失与孪生比特对所有颜色相同
    for color in config.colors:
        distributions.append(
            run_trials(
                lattice,
                config.method,
                color,
                config.trials,
                config.seed,
                threads=config.threads,
                twin_redraw=config.twin_redraw,
                criterion=config.criterion,
            )
        )
    logger.info(f"[simulate_distance] 剩余码距: {rest}")
    logger.info("<<< 退出节点: simulate_distance")
    logger.info("=" * 80)
    return {"pending": rest, "current_distance": distance, "distributions": distributions}


def persist_results(state: ThresholdPipelineState) -> dict:
    """
    写出逐试验结果和 JSON 汇总。

    Args:
        state (ThresholdPipelineState): 当前的图状态。

    Returns:
        dict: 输出文件路径。
    """
    logger.info("\n" + "=" * 80)
    logger.info(">>> 进入节点: persist_results (保存结果)")
    logger.info("=" * 80)
    config = state["config"]
    metadata = state["metadata"]
    distributions = state.get("distributions", [])
    paths = output_paths(config)

    if config.output_format == "csv" and not paths["samples"].endswith(".json"):
        write_text(paths["samples"], trials_csv(distributions, metadata))
    else:
        write_json(paths["samples"], {
            "metadata": metadata,
            "samples": [row for dist in distributions for row in dist.rows()],
        })

    summaries = {}
    for color in config.colors:
        summaries[color.value] = summarize([d for d in distributions if d.color == color.value])
    write_json(paths["summary"], {
        "metadata": metadata,
        "summary": summaries,
        "remaining_fraction": [s.model_dump() for s in remaining_fraction_stats(distributions)],
    })
    logger.info(f"[persist_results] 逐试验结果: {paths['samples']}, 汇总: {paths['summary']}")
    logger.info("<<< 退出节点: persist_results")
    logger.info("=" * 80)
    return {"samples_path": paths["samples"], "summary_path": paths["summary"]}


def fit_results(state: ThresholdPipelineState) -> dict:
    """
    码距足够时做有限尺寸标度拟合并写出结果。

    Args:
        state (ThresholdPipelineState): 当前的图状态。

    Returns:
        dict: 拟合结果与文件路径，码距不足时为空。
    """
    logger.info("\n" + "=" * 80)
    logger.info(">>> 进入节点: fit_results (标度拟合)")
    logger.info("=" * 80)
    config = state["config"]
    rows = [row for dist in state.get("distributions", []) for row in dist.rows()]
    result = {"fit": {}, "fit_path": ""}
    if len(set(config.distances)) < 3:
        logger.info(f"[fit_results] 只有 {len(set(config.distances))} 个码距，跳过拟合")
    else:
        try:
            fit = fit_rows(rows, inv_nu=config.inv_nu, weighted=config.weighted)
            path = output_paths(config)["fit"]
            write_json(path, {"metadata": state["metadata"], "fits": fit})
            result = {"fit": fit, "fit_path": path}
        except FitError as e:
            logger.error(f"[fit_results] 拟合失败: {e}")
    logger.info("<<< 退出节点: fit_results")
    logger.info("=" * 80)
    return result
