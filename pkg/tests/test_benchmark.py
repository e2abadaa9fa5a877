import importlib.util
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_structure.py"


def test_benchmark_runs_and_backends_agree(capsys):
    found = importlib.util.spec_from_file_location("bench_structure", BENCH)
    mod = importlib.util.module_from_spec(found)
    found.loader.exec_module(mod)
    mod.main(["--sizes", "200", "--repeat", "1"])
    out = capsys.readouterr().out
    assert "agree=False" not in out
    assert out.count("agree=True") >= 3
