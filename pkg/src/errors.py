"""
项目统一的异常类型。

CLI 根据异常类型决定退出码（见 src/cli.py）。
"""


class TwinPercError(Exception):
    """所有领域异常的基类。"""


class LatticeError(TwinPercError):
    """晶格构造失败或几何/距离组合非法。"""


class ConfigError(TwinPercError):
    """运行配置校验失败。"""


class ReconstructionError(TwinPercError):
    """重构协议执行失败。"""


class AlreadyExcisedError(ReconstructionError):
    """丢失的量子比特已经作为孪生比特被移除，调用方应跳过它。"""


class IsolatedLossError(ReconstructionError):
    """丢失的量子比特在当前晶格中已没有任何邻居。"""


class ProtocolError(ReconstructionError):
    """二聚体在当前晶格中不存在连接边等协议层错误。"""


class FitError(TwinPercError):
    """拟合输入不满足要求（点数不足、x 值退化、非正数据）。"""


class StorageError(TwinPercError):
    """读写结果文件失败。"""

    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path


class CsvFormatError(StorageError):
    """CSV 文件格式错误，携带出错的行号。"""

    def __init__(self, message: str, path: str, line: int):
        super().__init__(f"{message} (第 {line} 行)", path)
        self.line = line
