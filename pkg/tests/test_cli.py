import json

import pytest
from typer.testing import CliRunner

from qubobench import __version__
from qubobench.cli import app
from qubobench.harness.store import ExperimentStore
from qubobench.problem.sampleset import SampleSet
from qubobench.utils import canonical_json


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_lattice(runner, tmp_path):
    result = runner.invoke(app, ["lattice", "--dim", "2"])
    assert result.exit_code == 0
    assert "N 8" in result.output
    output = tmp_path / "lattice.txt"
    assert runner.invoke(app, ["lattice", "--dim", "3", "-o", str(output)]).exit_code == 0
    assert output.read_text(encoding="utf-8").splitlines()[0] == "N 18"


def test_degenerate_lattice_exits_with_guard_code(runner):
    assert runner.invoke(app, ["lattice", "--dim", "1"]).exit_code == 2


def test_qubo(runner, tmp_path):
    output = tmp_path / "qubo.json"
    result = runner.invoke(app, ["qubo", "--dim", "3", "--lambda", "3", "-o", str(output)])
    assert result.exit_code == 0
    assert "E_min = -20" in result.output
    assert "54 ground states" in result.output
    assert json.loads(output.read_text(encoding="utf-8"))["n_vars"] == 18


def test_solve_writes_the_store(runner, tmp_path):
    store = tmp_path / "store.jsonl"
    args = ["solve", "--method", "brute", "--dim", "2", "--lambda", "5", "-e", "1"]
    result = runner.invoke(app, args + ["-o", str(store)])
    assert result.exit_code == 0
    lines = store.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["method"] == "brute"


def test_solve_from_a_qubo_file(runner, tmp_path):
    output = tmp_path / "qubo.json"
    build = ["qubo", "--dim", "2", "--lambda", "5", "-o", str(output)]
    assert runner.invoke(app, build).exit_code == 0
    result = runner.invoke(app, ["solve", "-m", "random", "-q", str(output), "-e", "2"])
    assert result.exit_code == 0


@pytest.mark.parametrize(
    "args, code",
    [
        (["--method", "nope"], 4),
        (["--method", "sa", "-p", "bogus=1"], 4),
        (["--method", "sa", "-p", "reads"], 4),
        (["--method", "brute", "--dim", "4"], 2),
    ],
)
def test_solve_exit_codes(runner, args, code):
    result = runner.invoke(app, ["solve"] + args + ["-e", "1"])
    assert result.exit_code == code


def test_embed(runner, tmp_path):
    output = tmp_path / "embedding.json"
    result = runner.invoke(app, ["embed", "--dim", "3", "-o", str(output)])
    assert result.exit_code == 0
    assert "18 chains" in result.output
    assert len(json.loads(output.read_text(encoding="utf-8"))["chains"]) == 18


def test_embed_without_capacity(runner):
    assert runner.invoke(app, ["embed", "--dim", "3", "-g", "chimera:2,4"]).exit_code == 3


def test_verify(runner):
    result = runner.invoke(app, ["verify"])
    assert result.exit_code == 0
    assert "FAILED" not in result.output


def test_config_file_defaults(runner, tmp_path):
    config = tmp_path / "bench.toml"
    config.write_text("[lattice]\ndim = 2\n", encoding="utf-8")
    result = runner.invoke(app, ["--config", str(config), "lattice"])
    assert result.exit_code == 0
    assert "N 8" in result.output


def test_missing_config(runner, tmp_path):
    result = runner.invoke(app, ["--config", str(tmp_path / "missing.toml"), "lattice"])
    assert result.exit_code == 4


def test_report(runner, tmp_path):
    store = tmp_path / "store.jsonl"
    solve = ["solve", "-m", "random", "--dim", "2", "-e", "2", "-p", "samples=100"]
    assert runner.invoke(app, solve + ["-o", str(store)]).exit_code == 0
    output_dir = tmp_path / "report"
    result = runner.invoke(app, ["report", str(store), "-o", str(output_dir)])
    assert result.exit_code == 0
    assert sorted(path.name for path in output_dir.iterdir()) == [
        "convergence.csv",
        "distribution.csv",
        "summary.csv",
    ]
    summary = (output_dir / "summary.csv").read_text(encoding="utf-8").splitlines()
    assert summary[1].startswith("random,2,")


def test_sweep_and_scale(runner, tmp_path):
    surface = tmp_path / "surface.csv"
    sweep = ["sweep", "-m", "brute", "--dim", "2", "-a", "lambda=3,5", "-o", str(surface)]
    assert runner.invoke(app, sweep).exit_code == 0
    assert len(surface.read_text(encoding="utf-8").splitlines()) == 3
    table = tmp_path / "scaling.csv"
    scale = ["scale", "-m", "brute", "--dims", "2,3", "-r", "1", "-o", str(table)]
    assert runner.invoke(app, scale).exit_code == 0
    assert len(table.read_text(encoding="utf-8").splitlines()) == 3


def test_repeated_solve_gives_identical_records(runner, tmp_path):
    lines = []
    for name in ("first.jsonl", "second.jsonl"):
        store = tmp_path / name
        args = ["solve", "-m", "sa", "--dim", "2", "-e", "3", "-s", "11", "-o", str(store)]
        result = runner.invoke(app, args + ["-p", "reads=20", "-p", "sweeps=50"])
        assert result.exit_code == 0
        records = ExperimentStore(store).load()
        lines.append([canonical_json(record.masked()) for record in records])
    assert lines[0] == lines[1]
    assert len(lines[0]) == 3


def test_usage_errors_use_the_config_exit_code(runner):
    assert runner.invoke(app, ["solve", "--no-such-flag"]).exit_code == 4
    assert runner.invoke(app, ["solve", "--reads", "many"]).exit_code == 4
    assert runner.invoke(app, ["no-such-command"]).exit_code == 4


def test_solve_accepts_dedicated_solver_flags(runner, tmp_path):
    store = tmp_path / "store.jsonl"
    samples = tmp_path / "samples.jsonl"
    args = ["solve", "--method", "sa", "--dim", "2", "--repeats", "2", "--seed", "3"]
    args += ["--reads", "16", "--sweeps", "40", "--beta-min", "0.2", "--beta-max", "5"]
    result = runner.invoke(app, args + ["--out", str(store), "--samples-out", str(samples)])
    assert result.exit_code == 0
    records = ExperimentStore(store).load()
    assert len(records) == 2
    assert records[0].hyperparams["reads"] == 16
    assert records[0].hyperparams["beta_max"] == 5.0
    pooled = SampleSet.from_jsonl(samples.read_text(encoding="utf-8"), n_vars=8)
    assert pooled.n_shots_total == 32


def test_solver_flags_of_another_method_are_rejected(runner):
    result = runner.invoke(app, ["solve", "-m", "random", "--dim", "2", "--sweeps", "5"])
    assert result.exit_code == 4


def test_short_output_and_topology_aliases(runner, tmp_path):
    output = tmp_path / "lattice.txt"
    assert runner.invoke(app, ["lattice", "--dim", "2", "--out", str(output)]).exit_code == 0
    assert output.read_text(encoding="utf-8").startswith("N 8")
    result = runner.invoke(app, ["embed", "--dim", "2", "--topo", "chimera:2,4"])
    assert result.exit_code == 0
    assert "8 chains" in result.output
