import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "benchmarks"))
import bench_kernels  # noqa: E402


def test_benchmark_runs(capsys):
    bench_kernels.main(["--n", "200", "--repeat", "1"])
    out = capsys.readouterr().out
    assert "linear_gaussian_loglik" in out and "forward+backward" in out
