from langgraph.graph import END, StateGraph

from .config import RunConfig
from .nodes import fit_results, persist_results, prepare_run, simulate_distance
from .state import ThresholdPipelineState

# --- 日志配置 ---
import logging
logger = logging.getLogger(__name__)


def route_more_distances(state: ThresholdPipelineState) -> str:
    """
    还有未模拟的码距时回到 simulate_distance，否则进入保存流程。

    Args:
        state (ThresholdPipelineState): 当前的图状态。

    Returns:
        str: 下一个节点的名称。
    """
    logger.info("=" * 80)
    logger.info("--- 正在进行路由决策: 码距循环 ---")
    pending = state.get("pending", [])
    logger.info(f"[路由决策] 已完成 d={state.get('current_distance')}, 剩余码距: {pending}")
    if pending:
        logger.info(f"✓ 路由决策结果: 继续模拟 d={pending[0]} -> 'simulate_distance'")
        logger.info("=" * 80)
        return "simulate_distance"
    logger.info("✓ 路由决策结果: 全部码距完成 -> 'persist_results'")
    logger.info("=" * 80)
    return "persist_results"


def create_graph():
    """
    创建并编译阈值计算流程图。

    prepare_run -> simulate_distance (按码距循环) -> persist_results -> fit_results -> END
    """
    workflow = StateGraph(ThresholdPipelineState)

    workflow.add_node("prepare_run", prepare_run)
    workflow.add_node("simulate_distance", simulate_distance)
    workflow.add_node("persist_results", persist_results)
    workflow.add_node("fit_results", fit_results)

    workflow.set_entry_point("prepare_run")
    workflow.add_edge("prepare_run", "simulate_distance")
    workflow.add_conditional_edges(
        "simulate_distance",
        route_more_distances,
        {
            "simulate_distance": "simulate_distance",
            "persist_results": "persist_results",
        },
    )
    workflow.add_edge("persist_results", "fit_results")
    workflow.add_edge("fit_results", END)

    return workflow.compile()


def run_threshold_pipeline(config: RunConfig) -> ThresholdPipelineState:
    """执行整条流程并返回最终状态；每个码距占用一步，递归上限随码距数增长。"""
    app = create_graph()
    limit = 10 + 2 * len(set(config.distances))
    return app.invoke({"config": config}, config={"recursion_limit": limit})
