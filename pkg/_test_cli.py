#!/usr/bin/env python3
"""
命令行测试脚本

覆盖退出码约定（0 成功、1 用法错误、2 校验失败、3 读写失败）和结果文件的可复现性。
"""

import json
import sys
import tempfile
from pathlib import Path

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main  # noqa: E402


def test_lattice_subcommand(tmp_path):
    print("🧪 测试: lattice 子命令")
    out = tmp_path / "lattice.json"
    code = main(["lattice", "--geometry", "4.8.8", "--variant", "square", "--distance", "6", "--output", str(out)])
    assert code == EXIT_OK
    document = json.loads(out.read_text(encoding="utf-8"))
    assert document["k"] == 2
    assert document["qubits"] == 52
    assert document["geometry"] == "4.8.8"
    print("✅ 输出 k=2 的晶格")


def test_lattice_bad_distance():
    assert main(["lattice", "--geometry", "4.8.8", "--variant", "square", "--distance", "5"]) == EXIT_VALIDATION


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["threshold", "--method", "magic"]) == EXIT_USAGE
    assert main(["fit"]) == EXIT_USAGE


def test_fit_rejects_malformed_csv(tmp_path):
    print("🧪 测试: 格式错误的 CSV")
    bad = tmp_path / "bad.csv"
    bad.write_text("# metadata: {}\ngeometry,variant,distance\n4.8.8,square,8\n", encoding="utf-8")
    assert main(["fit", "--input", str(bad)]) == EXIT_IO
    assert main(["fit", "--input", str(tmp_path / "missing.csv")]) == EXIT_IO
    print("✅ 退出码为 3")


def test_fit_needs_three_distances(tmp_path):
    csv_path = tmp_path / "two.csv"
    lines = ["geometry,variant,distance,method,color,trial,seed,p_critical,fraction_remaining"]
    for d in (8, 12):
        lines.append(f"4.8.8,square,{d},algebraic,R,0,1,0.4,0.6")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["fit", "--input", str(csv_path)]) == EXIT_VALIDATION


def test_threshold_is_reproducible(tmp_path):
    """同一配置运行两次，逐试验 CSV 字节级一致"""
    print("🧪 测试: threshold 可复现")
    out = tmp_path / "run.csv"
    argv = [
        "threshold", "--geometry", "4.8.8", "--variant", "square", "--distances", "4",
        "--method", "string", "--color", "B", "--trials", "2", "--seed", "3", "--output", str(out),
    ]
    assert main(argv) == EXIT_OK
    first = out.read_bytes()
    assert main(argv + ["--threads", "2"]) == EXIT_OK
    second = out.read_bytes()
    header = [line for line in first.decode("utf-8").splitlines() if not line.startswith("#")]
    assert header[0].split(",")[0] == "geometry"
    assert len(header) == 3
    # 元数据里记录了线程数，只比较数据行
    assert header == [line for line in second.decode("utf-8").splitlines() if not line.startswith("#")]
    assert main(argv) == EXIT_OK
    assert out.read_bytes() == first
    print("✅ 两次运行结果一致")


def test_sweep_and_fit_roundtrip(tmp_path):
    sweep_out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--geometry", "6.6.6", "--variant", "triangular", "--distance", "3",
        "--grid", "0", "1", "--trials", "2", "--output", str(sweep_out),
    ])
    assert code == EXIT_OK
    lines = [line for line in sweep_out.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    assert lines[0] == "p,survival,err,trials"
    assert lines[1].startswith("0.0,1.0")
    assert lines[2].startswith("1.0,0.0")


def test_config_file_overrides_flags(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"distances": [5]}), encoding="utf-8")
    assert main(["lattice", "--geometry", "4.8.8", "--variant", "square", "--distance", "6",
                 "--config", str(config)]) == EXIT_VALIDATION
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    assert main(["lattice", "--config", str(broken)]) == EXIT_VALIDATION


if __name__ == "__main__":
    print("=" * 60)
    print("📌 命令行测试")
    print("=" * 60)
    workdir = Path(tempfile.mkdtemp())
    for i, test in enumerate([
        test_lattice_subcommand,
        test_fit_rejects_malformed_csv,
        test_fit_needs_three_distances,
        test_threshold_is_reproducible,
        test_sweep_and_fit_roundtrip,
        test_config_file_overrides_flags,
    ]):
        path = workdir / str(i)
        path.mkdir()
        test(path)
    test_lattice_bad_distance()
    test_usage_errors()
    print("=" * 60)
    print("✅ 全部通过")
