import tempfile
from pathlib import Path

import pytest
from dotenv import load_dotenv

# 必须在导入任何自定义模块之前首先加载环境变量
load_dotenv()

from src.config import build_config  # noqa: E402
from src.errors import StorageError  # noqa: E402
from src.graph import create_graph, route_more_distances, run_threshold_pipeline  # noqa: E402
from src.nodes import output_paths  # noqa: E402
from src.storage import read_json, read_metadata, read_trials_csv  # noqa: E402


def _config(tmp_path, **overrides):
    flags = {
        "geometry": "4.8.8",
        "variant": "square",
        "distances": [8, 4, 6],
        "method": "algebraic",
        "colors": ["R", "B"],
        "trials": 2,
        "seed": 17,
        "output_dir": str(tmp_path),
    }
    flags.update(overrides)
    return build_config(flags, environ={})


def test_route_more_distances():
    assert route_more_distances({"pending": [6, 8], "current_distance": 4}) == "simulate_distance"
    assert route_more_distances({"pending": [], "current_distance": 8}) == "persist_results"


def test_graph_nodes():
    graph = create_graph().get_graph()
    for name in ("prepare_run", "simulate_distance", "persist_results", "fit_results"):
        assert name in graph.nodes


def test_pipeline_writes_all_outputs(tmp_path):
    """
    在本地完整运行阈值流程：三个码距、两种颜色，检查逐试验 CSV、汇总与拟合文件。
    """
    print("--- 测试开始 ---")
    config = _config(tmp_path)
    final = run_threshold_pipeline(config)

    paths = output_paths(config)
    assert final["samples_path"] == paths["samples"]
    rows = read_trials_csv(final["samples_path"])
    assert len(rows) == 3 * 2 * 2
    assert sorted({row["distance"] for row in rows}) == [4, 6, 8]
    assert read_metadata(final["samples_path"])["config"]["seed"] == 17
    # 两种颜色的同一次试验用同一个子种子
    seeds = {}
    for row in rows:
        seeds.setdefault((row["distance"], row["trial"]), set()).add(row["seed"])
    assert all(len(s) == 1 for s in seeds.values())
    print(f"[流程]: 写出 {len(rows)} 行试验数据")

    summary = read_json(final["summary_path"])
    assert set(summary["summary"]) == {"R", "B"}
    assert list(summary["summary"]["R"]) == ["4", "6", "8"]
    assert len(summary["remaining_fraction"]) == 6

    assert final["fit_path"]
    fit = read_json(final["fit_path"])
    assert "4.8.8/square/algebraic/R" in fit["fits"]
    print("--- 测试结束 ---")


def test_pipeline_skips_fit_with_two_distances(tmp_path):
    final = run_threshold_pipeline(_config(tmp_path, distances=[4, 6], colors=["G"], trials=1))
    assert final["fit"] == {}
    assert final["fit_path"] == ""


def test_pipeline_json_output(tmp_path):
    config = _config(tmp_path, distances=[4], colors=["R"], trials=1, output_format="json")
    final = run_threshold_pipeline(config)
    document = read_json(final["samples_path"])
    assert document["metadata"]["version"]
    assert len(document["samples"]) == 1


def test_read_json_rejects_broken_file(tmp_path):
    broken = Path(tmp_path) / "broken.json"
    broken.parent.mkdir(parents=True, exist_ok=True)
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(StorageError):
        read_json(str(broken))


if __name__ == "__main__":
    workdir = Path(tempfile.mkdtemp())
    test_route_more_distances()
    test_graph_nodes()
    test_pipeline_writes_all_outputs(workdir / "full")
    test_pipeline_skips_fit_with_two_distances(workdir / "two")
    test_pipeline_json_output(workdir / "json")
    test_read_json_rejects_broken_file(workdir / "broken")
    print("✅ 流程测试全部通过")
