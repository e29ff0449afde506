"""
Scenario files: a ScenarioConfig plus the run metadata the command line needs
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from default_contagion.config import BASE_DIR, OUTPUT_DIR, OUTPUT_SETTINGS, SCENARIOS_DIR
from default_contagion.errors import MalformedConfig
from default_contagion.model import from_dict
from default_contagion.utils.logger import logger

SCENARIO_KEYS = ("label", "description", "output_dir", "bins", "n_list", "theta", "matrix", "scenario")


@dataclass(frozen=True)
class ScenarioFile:
    label: str
    config: object
    output_dir: Path
    bins: int = OUTPUT_SETTINGS["histogram_bins"]
    n_list: Tuple[int, ...] = (250, 500, 1000, 2000)
    theta: Optional[int] = None
    matrix: Optional[Path] = None
    description: str = ""
    path: Optional[Path] = None


def resolve_scenario(name_or_path):
    """A path to an existing file, or the name of a bundled scenario"""
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = SCENARIOS_DIR / (path.name if path.suffix == ".json" else f"{path.name}.json")
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"scenario not found: {name_or_path}")


def _resolve_data_path(value, scenario_path):
    """Relative paths are tried against the scenario's folder, then the project root"""
    path = Path(value)
    if path.is_absolute():
        return path
    for root in (scenario_path.parent, BASE_DIR):
        if (root / path).exists():
            return root / path
    return BASE_DIR / path


def load_scenario(name_or_path):
    """
    Parse a scenario file

    Args:
        name_or_path: File path or bundled scenario name (e.g. "one_cluster")

    Returns:
        ScenarioFile

    Raises:
        OSError: if the file cannot be read
        MalformedConfig: on unknown keys or an unusable config
    """
    path = resolve_scenario(name_or_path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise MalformedConfig(f"{path}: invalid JSON ({e})")

    if not isinstance(data, dict):
        raise MalformedConfig(f"{path}: expected a JSON object")
    unknown = sorted(set(data) - set(SCENARIO_KEYS))
    if unknown:
        raise MalformedConfig(f"{path}: unknown keys {unknown}")
    if "scenario" not in data:
        raise MalformedConfig(f"{path}: missing 'scenario' block")

    label = str(data.get("label", path.stem))
    config = from_dict(data["scenario"])
    n_list = tuple(int(n) for n in data.get("n_list", ScenarioFile.n_list))
    output_dir = Path(data["output_dir"]) if "output_dir" in data else OUTPUT_DIR / label
    matrix = _resolve_data_path(data["matrix"], path) if data.get("matrix") else None

    logger.debug(f"Loaded scenario {label} from {path}: {config.n_types} types, rank {config.rank}")
    return ScenarioFile(
        label=label,
        config=config,
        output_dir=output_dir,
        bins=int(data.get("bins", OUTPUT_SETTINGS["histogram_bins"])),
        n_list=n_list,
        theta=int(data["theta"]) if data.get("theta") is not None else None,
        matrix=matrix,
        description=str(data.get("description", "")),
        path=path,
    )


def list_scenarios():
    """
    Bundled scenarios

    Returns:
        List of (name, description) sorted by name
    """
    scenarios = []
    for path in sorted(SCENARIOS_DIR.glob("*.json")):
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        scenarios.append((path.stem, data.get("description", "")))
    return scenarios
