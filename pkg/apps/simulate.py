"""
Verdoorn Toolkit - Simulate Controller
--------------------------------------
Runs a Monte Carlo study and writes its summary to simulate.csv.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

from core.montecarlo import read_study_mapping, run_study, study_from_mapping, write_summary_csv
from core.run_config import PROJECT_ROOT, merge_layers


class SimulateController:
    """
    Controller for the ``simulate`` subcommand.

    Study settings are layered as config.yml ``simulate.study`` defaults,
    then the study file, then command-line flags.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger("verdoorn.apps.simulate")
        self.config = config or {}

    def _study_path(self, parameters: Dict[str, Any]) -> Optional[Path]:
        name = parameters.get("study") or self.config.get("study_file")
        if not name:
            return None
        path = Path(name)
        if not path.is_file() and not path.is_absolute() and (PROJECT_ROOT / path).is_file():
            return PROJECT_ROOT / path
        return path

    def run(self, parameters: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
        """
        Args:
            parameters: ``study`` (path), ``study_overrides`` (DgpSpec keys,
                estimator, replications, workers) and ``out``.
            defaults: Full configuration from config.yml.
        """
        study_path = self._study_path(parameters)
        file_layer = read_study_mapping(study_path) if study_path else {}
        spec, estimator, replications, workers = study_from_mapping(
            merge_layers(self.config.get("study"), file_layer, parameters.get("study_overrides"))
        )

        summary = run_study(spec, estimator, replications, workers)
        out_dir = Path(parameters.get("out") or self.config.get("dir") or "out")
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "simulate.csv"
        write_summary_csv([summary], path)
        self.logger.info(f"Wrote {path}")
        return {
            "success": True,
            "message": (
                f"{estimator}: {summary.successes}/{summary.replications} replications succeeded, "
                f"rejection rate {summary.rejection_rate}"
            ),
            "outputs": [path],
            "skipped": [],
            "summary": summary,
        }
