import logging
import tomllib
from pathlib import Path
from typing import Any, Dict, Union

from qubobench.errors import ConfigError

logger = logging.getLogger(__name__)

SUBCOMMANDS = ["lattice", "qubo", "solve", "embed", "sweep", "scale", "report", "verify"]
# Config keys whose option parameter has a different python name
KEY_ALIASES = {"lambda": "lambda_coeff", "vacancies": "n_vacancies", "dim": "supercell_dim"}


def _option_name(key: str) -> str:
    name = key.strip().replace("-", "_")
    return KEY_ALIASES.get(name, name)


def parse_value(text: str) -> Any:
    """
    Reads a command line value as TOML (int, float, bool, quoted string or array), falling
    back to the raw text.
    """
    text = text.strip()
    try:
        return tomllib.loads(f"value = {text}")["value"]
    except tomllib.TOMLDecodeError:
        return text


def _literal(value: Any) -> str:
    # Booleans must read back through parse_value
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _as_param_list(table: Dict[str, Any]) -> list:
    return [f"{key}={_literal(value)}" for key, value in table.items()]


def _section(table: Dict[str, Any], where: str) -> Dict[str, Any]:
    section: Dict[str, Any] = {}
    for key, value in table.items():
        name = _option_name(key)
        if name in ("param", "params") and isinstance(value, dict):
            section["param"] = _as_param_list(value)
        elif name == "axis" and isinstance(value, dict):
            section["axis"] = [
                f"{axis}={','.join(_literal(item) for item in items)}"
                for axis, items in value.items()
            ]
        elif isinstance(value, dict):
            raise ConfigError(f"Unexpected table '{key}' in {where}.")
        else:
            section[name] = value
    return section


def load_config(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Reads a TOML config file into a click `default_map`.

    Top-level keys apply to every subcommand; a `[solve]`, `[sweep]`, ... table applies to
    that subcommand only and wins over the top level. `[solve.params]` style tables become
    `key=value` hyperparameter options and `[sweep.axis]` tables become grid axes.

    Args:
        path (Union[str, Path]): The TOML file.

    Returns:
        Dict[str, Any]: Mapping from subcommand name to option defaults.

    Raises:
        ConfigError: On a missing file, invalid TOML or an unknown table.
    """
    path = Path(path)
    try:
        with open(path, "rb") as file:
            payload = tomllib.load(file)
    except FileNotFoundError as error:
        raise ConfigError(f"Config file {path} does not exist.") from error
    except tomllib.TOMLDecodeError as error:
        raise ConfigError(f"Config file {path} is not valid TOML: {error}") from error

    shared = {key: value for key, value in payload.items() if not isinstance(value, dict)}
    tables = {key: value for key, value in payload.items() if isinstance(value, dict)}
    unknown = sorted(set(tables) - set(SUBCOMMANDS))
    if unknown:
        raise ConfigError(f"Unknown config tables {unknown}. Known: {SUBCOMMANDS}.")

    top = _section(shared, "the top level")
    default_map: Dict[str, Any] = {}
    for command in SUBCOMMANDS:
        section = dict(top)
        section.update(_section(tables.get(command, {}), f"[{command}]"))
        default_map[command] = section
    logger.debug("Loaded config %s: %s", path, default_map)
    return default_map
