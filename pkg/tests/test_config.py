import pytest

from qubobench.config import SUBCOMMANDS, load_config, parse_value
from qubobench.errors import ConfigError


@pytest.mark.parametrize(
    "text, expected",
    [
        ("3", 3),
        ("2.5", 2.5),
        ("1e-3", 1e-3),
        ("true", True),
        ("false", False),
        ('"qaoa"', "qaoa"),
        ("qaoa", "qaoa"),
        ("[1, 2]", [1, 2]),
        (" chimera:2,4 ", "chimera:2,4"),
    ],
)
def test_parse_value(text, expected):
    assert parse_value(text) == expected


def test_load_config(tmp_path):
    path = tmp_path / "bench.toml"
    path.write_text(
        "\n".join(
            [
                "seed = 7",
                "dim = 2",
                "[solve]",
                'method = "sa"',
                "lambda = 4.0",
                "experiments = 3",
                "[solve.params]",
                "reads = 20",
                "random-order = false",
                "[sweep.axis]",
                "sweeps = [10, 20]",
                "record_best = [true, false]",
                "[lattice]",
                "dim = 3",
            ]
        ),
        encoding="utf-8",
    )
    default_map = load_config(path)
    assert set(default_map) == set(SUBCOMMANDS)
    assert default_map["solve"] == {
        "seed": 7,
        "supercell_dim": 2,
        "method": "sa",
        "lambda_coeff": 4.0,
        "experiments": 3,
        "param": ["reads=20", "random-order=false"],
    }
    assert default_map["sweep"]["axis"] == ["sweeps=10,20", "record_best=true,false"]
    assert default_map["lattice"]["supercell_dim"] == 3
    assert default_map["verify"] == {"seed": 7, "supercell_dim": 2}


def test_params_read_back_as_values(tmp_path):
    path = tmp_path / "bench.toml"
    path.write_text("[solve.params]\nrecord_best = false\nbeta_max = 2.5\n", encoding="utf-8")
    params = dict(item.split("=", 1) for item in load_config(path)["solve"]["param"])
    assert parse_value(params["record_best"]) is False
    assert parse_value(params["beta_max"]) == 2.5


@pytest.mark.parametrize(
    "content",
    ["[plot]\nwidth = 3\n", "[solve]\nmethod = \n", "[solve.extra]\nkey = 1\n"],
)
def test_load_config_errors(tmp_path, content):
    path = tmp_path / "bench.toml"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "missing.toml")
