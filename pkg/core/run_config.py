"""
Verdoorn Toolkit - Run Configuration
------------------------------------
Builds the immutable RunConfig shared by the fit, unitroot and scatter
commands from config.yml defaults, command-line flags and an optional
YAML file that overrides both.
"""

import copy
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from core.errors import ConfigError
from core.estimators import METHODS, UNTRUNCATED_LAGS
from core.panel_data import GROWTH_METHODS, PanelSchema
from core.unit_root import LagPolicy

logger = logging.getLogger("verdoorn.run_config")

OUTPUT_FORMATS = ("text", "csv", "jsonl")
PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = PROJECT_ROOT / "config.yml"


@dataclass(frozen=True)
class RunConfig:
    input_path: Optional[Path]
    schema: PanelSchema = field(default_factory=PanelSchema)
    industries: Tuple[str, ...] = ()
    period_windows: Tuple[Tuple[int, int], ...] = ()
    estimators: Tuple[str, ...] = ("FE", "RE", "OLS", "DPD")
    dpd_max_instrument_lags: int = UNTRUNCATED_LAGS
    lagged_dependent: bool = True
    lag_policy: LagPolicy = field(default_factory=LagPolicy)
    growth_method: str = "log"
    output_dir: Path = Path("out")
    output_formats: Tuple[str, ...] = OUTPUT_FORMATS
    workers: int = 1

    def __post_init__(self):
        if not self.estimators:
            raise ConfigError("at least one estimator must be selected")
        unknown = [m for m in self.estimators if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}, expected a subset of {METHODS}")
        for start, end in self.period_windows:
            if start > end:
                raise ConfigError(f"period window {start}-{end} is empty")
        if self.dpd_max_instrument_lags < 1:
            raise ConfigError("dpd max_instrument_lags must be at least 1")
        if self.growth_method not in GROWTH_METHODS:
            raise ConfigError(f"unknown growth method {self.growth_method!r}, expected one of {GROWTH_METHODS}")
        bad_formats = [f for f in self.output_formats if f not in OUTPUT_FORMATS]
        if bad_formats or not self.output_formats:
            raise ConfigError(f"output formats must be a non-empty subset of {OUTPUT_FORMATS}, got {list(self.output_formats)}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML mapping; an empty file gives {}."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping at the top level")
    return data


def load_defaults(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Load config.yml, or the file named by VERDOORN_CONFIG when set."""
    chosen = path or os.environ.get("VERDOORN_CONFIG") or DEFAULT_CONFIG
    return load_yaml(chosen)


def merge_layers(*layers: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """Deep-merge mappings left to right; None values never override."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        for key, value in (layer or {}).items():
            if value is None:
                continue
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = merge_layers(merged[key], value)
            else:
                merged[key] = copy.deepcopy(value)
    return merged


def parse_window(value: Any) -> Tuple[int, int]:
    """Accept '1986-1994', '1986:1994', [1986, 1994] or {'start':..., 'end':...}."""
    if isinstance(value, dict):
        parts = [value.get("start"), value.get("end")]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = re.split(r"\s*[-:]\s*", str(value).strip())
    try:
        start, end = (int(part) for part in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot read period window {value!r}; expected START-END") from None
    if start > end:
        raise ConfigError(f"period window {start}-{end} is empty")
    return start, end


def _as_list(value: Any) -> List[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return [str(part).strip() for part in value]


def _as_int(section: str, value: Any) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section} must be an integer, got {value!r}") from None


def build_run_config(
    defaults: Optional[Dict[str, Any]] = None,
    cli_overrides: Optional[Dict[str, Any]] = None,
    config_path: Optional[Union[str, Path]] = None,
) -> RunConfig:
    """
    Layer the configuration sources into a RunConfig.

    Precedence, lowest first: ``defaults`` (config.yml), ``cli_overrides``
    (nested like config.yml, None entries ignored), then the YAML file at
    ``config_path``.

    Raises:
        ConfigError: On unreadable files or invalid values.
    """
    file_layer = load_yaml(config_path) if config_path else {}
    merged = merge_layers(defaults, cli_overrides, file_layer)

    run = merged.get("run", {})
    fit = merged.get("fit", {})
    unitroot = merged.get("unitroot", {})
    output = merged.get("output", {})

    windows = run.get("periods") or []
    if not isinstance(windows, list):
        windows = [windows]
    input_path = run.get("input")
    policy = unitroot.get("lag_policy", "fixed:1")
    try:
        lag_policy = policy if isinstance(policy, LagPolicy) else LagPolicy.parse(policy)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid lag policy {policy!r}: {exc}") from exc

    config = RunConfig(
        input_path=Path(input_path) if input_path else None,
        schema=PanelSchema.from_mapping(merged.get("schema")),
        industries=tuple(_as_list(run.get("industries"))),
        period_windows=tuple(parse_window(w) for w in windows),
        estimators=tuple(m.upper() for m in _as_list(fit.get("estimators", list(METHODS)))),
        dpd_max_instrument_lags=_as_int("fit.max_instrument_lags", fit.get("max_instrument_lags", UNTRUNCATED_LAGS)),
        lagged_dependent=bool(fit.get("lagged_dependent", True)),
        lag_policy=lag_policy,
        growth_method=str(run.get("growth_method", "log")),
        output_dir=Path(output.get("dir", "out")),
        output_formats=tuple(f.lower() for f in _as_list(output.get("formats", list(OUTPUT_FORMATS)))),
        workers=_as_int("run.workers", run.get("workers", 1)),
    )
    logger.debug(f"Run configuration: {config}")
    return config
