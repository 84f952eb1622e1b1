"""
结果文件的读写。

CSV 文件以 "# metadata: {...}" 注释行开头，随后是表头和数据行；
读取时跳过注释行，报错时给出文件中的实际行号。
"""
import csv
import io
import json
import logging
import os
from typing import Dict, Iterable, List, Sequence

from .errors import CsvFormatError, StorageError
from .montecarlo import CSV_COLUMNS, SweepPoint, ThresholdDistribution

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["p", "survival", "err", "trials"]
METADATA_PREFIX = "# metadata: "

_INT_COLUMNS = {"distance", "trial", "seed"}
_FLOAT_COLUMNS = {"p_critical", "fraction_remaining"}


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_text(path: str, text: str) -> None:
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        logger.error(f"写入文件失败: {e}")
        raise StorageError("无法写入文件", path) from e
    logger.info(f"已写入 {path}")


def read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        logger.error(f"读取文件失败: {e}")
        raise StorageError("无法读取文件", path) from e


def render_csv(columns: Sequence[str], rows: Iterable[Dict], metadata: Dict | None = None) -> str:
    buffer = io.StringIO()
    if metadata is not None:
        buffer.write(METADATA_PREFIX + json.dumps(metadata, sort_keys=True) + "\n")
    writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in columns})
    return buffer.getvalue()


def trials_csv(distributions: Sequence[ThresholdDistribution], metadata: Dict | None = None) -> str:
    rows = [row for dist in distributions for row in dist.rows()]
    return render_csv(CSV_COLUMNS, rows, metadata)


def sweep_csv(points: Sequence[SweepPoint], metadata: Dict | None = None) -> str:
    return render_csv(SWEEP_COLUMNS, [p.model_dump() for p in points], metadata)


def render_json(document: Dict) -> str:
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def write_json(path: str, document: Dict) -> None:
    write_text(path, render_json(document))


def read_json(path: str) -> Dict:
    text = read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"JSON 解析失败: {e}")
        raise StorageError(f"不是合法的 JSON ({e})", path) from e


def read_metadata(path: str) -> Dict | None:
    for line in read_text(path).splitlines():
        if line.startswith(METADATA_PREFIX):
            return json.loads(line[len(METADATA_PREFIX):])
        if not line.startswith("#"):
            break
    return None


def read_trials_csv(path: str) -> List[Dict]:
    """
    读取逐试验 CSV，并把数值列转换为 int / float。

    Raises:
        StorageError: 文件无法读取。
        CsvFormatError: 缺少列、列数不符或数值无法解析。
    """
    text = read_text(path)
    header: List[str] | None = None
    rows: List[Dict] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = next(csv.reader([line]))
        if header is None:
            missing = [c for c in CSV_COLUMNS if c not in fields]
            if missing:
                raise CsvFormatError(f"缺少列 {missing}", path, line_no)
            header = fields
            continue
        if len(fields) != len(header):
            raise CsvFormatError(f"应有 {len(header)} 列，实际 {len(fields)} 列", path, line_no)
        row: Dict = dict(zip(header, fields))
        try:
            for column in _INT_COLUMNS:
                row[column] = int(row[column])
            for column in _FLOAT_COLUMNS:
                row[column] = float(row[column])
        except ValueError as e:
            raise CsvFormatError(f"数值无法解析: {e}", path, line_no) from e
        rows.append(row)
    if header is None:
        raise CsvFormatError("文件没有表头", path, 1)
    logger.info(f"从 {path} 读取了 {len(rows)} 行试验数据")
    return rows
