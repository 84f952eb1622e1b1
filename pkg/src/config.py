"""
运行配置：内置默认值 < 环境变量（.env）< 命令行参数 < --config JSON 文件。
"""
import json
import logging
import os
from typing import Dict, List, Literal, Mapping, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError, LatticeError, StorageError
from .lattice import Color, Geometry, Variant, check_distance
from .logical_checks import CheckMethod, FailureCriterion
from .montecarlo import TwinRedraw

logger = logging.getLogger(__name__)

VERSION = "0.1.0"

ENV_PREFIX = "TWINPERC_"
ENV_FIELDS = {
    "TRIALS": "trials",
    "SEED": "seed",
    "THREADS": "threads",
    "LOG_LEVEL": "log_level",
    "OUTPUT_DIR": "output_dir",
}


class RunConfig(BaseModel):
    """
    一次运行的全部参数，校验通过后原样写入输出文件的元数据。

    Attributes:
        geometry (Geometry): 晶格几何。
        variant (Variant): square 或 triangular。
        distances (List[int]): 码距序列。
        method (CheckMethod): 逻辑算符检查方法。
        colors (List[Color]): 检查的颜色。
        trials (int): 每个码距（或每个网格点）的试验次数。
        seed (int): 主种子。
        threads (int): 工作线程数，不影响结果。
        twin_redraw (TwinRedraw): 二分搜索中孪生比特的重抽策略。
        criterion (FailureCriterion): 试验失败的判据。
        output (Optional[str]): 输出文件路径，缺省时写到 output_dir。
        output_dir (str): 默认输出目录。
        output_format (str): csv 或 json。
        grid (List[float]): sweep 的丢失率网格。
        inv_nu (Optional[float]): 拟合用的 1/ν，缺省按方法取值。
        weighted (bool): 拟合时是否按 Δ/√T 加权。
        log_level (str): 日志级别。
    """
    geometry: Geometry = Geometry.FOUR_EIGHT_EIGHT
    variant: Variant = Variant.SQUARE
    distances: List[int] = Field(default_factory=lambda: [8, 12, 16, 20, 24])
    method: CheckMethod = CheckMethod.ALGEBRAIC
    colors: List[Color] = Field(default_factory=lambda: [Color.R])
    trials: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    twin_redraw: TwinRedraw = TwinRedraw.PER_ROUND
    criterion: FailureCriterion = FailureCriterion.PER_COLOR
    output: Optional[str] = None
    output_dir: str = "results"
    output_format: Literal["csv", "json"] = "csv"
    grid: List[float] = Field(default_factory=lambda: [i / 20 for i in range(21)])
    inv_nu: Optional[float] = None
    weighted: bool = False
    log_level: str = "INFO"

    @field_validator("grid")
    @classmethod
    def _grid_in_unit_interval(cls, grid: List[float]) -> List[float]:
        for p in grid:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"丢失率 {p} 不在 [0, 1] 内")
        return grid

    @field_validator("colors")
    @classmethod
    def _colors_not_empty(cls, colors: List[Color]) -> List[Color]:
        if not colors:
            raise ValueError("至少需要一种颜色")
        return colors

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, level: str) -> str:
        level = level.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"未知的日志级别: {level}")
        return level

    @model_validator(mode="after")
    def _distances_match_family(self) -> "RunConfig":
        if not self.distances:
            raise ValueError("至少需要一个码距")
        for d in self.distances:
            try:
                check_distance(self.geometry, self.variant, d)
            except LatticeError as e:
                raise ValueError(str(e)) from e
        return self


def env_overrides(environ: Mapping[str, str] | None = None) -> Dict[str, str]:
    environ = os.environ if environ is None else environ
    found = {}
    for suffix, name in ENV_FIELDS.items():
        value = environ.get(ENV_PREFIX + suffix)
        if value not in (None, ""):
            found[name] = value
    return found


def read_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        logger.error(f"读取配置文件失败: {e}")
        raise StorageError("无法读取配置文件", path) from e
    except json.JSONDecodeError as e:
        logger.error(f"配置文件不是合法的 JSON: {e}")
        raise ConfigError(f"配置文件 {path} 不是合法的 JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"配置文件 {path} 的顶层必须是对象")
    return data


def build_config(
    flags: Mapping[str, object] | None = None,
    config_file: str | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """
    按优先级合并配置并校验。

    Args:
        flags: 命令行参数，值为 None 的项视为未给出。
        config_file: JSON 配置文件路径，优先级最高。
        environ: 环境变量映射，默认 os.environ。

    Raises:
        ConfigError: 合并后的配置未通过校验。
        StorageError: 配置文件无法读取。
    """
    merged: Dict[str, object] = {}
    merged.update(env_overrides(environ))
    merged.update({k: v for k, v in (flags or {}).items() if v is not None})
    if config_file:
        merged.update(read_config_file(config_file))
    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as e:
        logger.error(f"配置校验失败: {e}")
        raise ConfigError(f"配置校验失败: {e}") from e
    logger.info(f"运行配置: {config.model_dump(mode='json')}")
    return config


def config_metadata(config: RunConfig) -> dict:
    """写入输出文件的元数据：完整配置和程序版本。"""
    return {"config": config.model_dump(mode="json"), "version": VERSION}
