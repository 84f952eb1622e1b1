import operator
from typing import Annotated, Dict, List, TypedDict

from .config import RunConfig
from .montecarlo import ThresholdDistribution


class ThresholdPipelineState(TypedDict, total=False):
    """
    定义了阈值计算流程的状态。

    Attributes:
        config (RunConfig): 校验后的运行配置.
        metadata (Dict): 写入输出文件的元数据（配置 + 版本）.
        pending (List[int]): 尚未模拟的码距，升序.
        current_distance (int): 最近一次模拟的码距.
        distributions (Annotated[List[ThresholdDistribution], operator.add]): 累积的临界丢失率分布.
        samples_path (str): 逐试验结果文件路径.
        summary_path (str): JSON 汇总文件路径.
        fit (Dict): 各分组的标度拟合结果，码距不足时为空.
        fit_path (str): 拟合结果文件路径，未拟合时为空字符串.
    """
    # 输入信息
    config: RunConfig
    metadata: Dict

    # 模拟进度
    pending: List[int]
    current_distance: int
    distributions: Annotated[List[ThresholdDistribution], operator.add]

    # 输出
    samples_path: str
    summary_path: str
    fit: Dict
    fit_path: str
