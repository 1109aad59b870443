"""
Verdoorn Toolkit - Fit Controller
---------------------------------
Estimates the Verdoorn equation per industry and period window with the
FE, RE, OLS and DPD estimators and writes the estimation tables.
"""

import logging
from functools import partial
from typing import Any, Dict, Optional

from core.pipeline import analyse_fit, map_ordered, prepare_panels
from core.report_renderer import ReportRenderer, SkippedRun
from core.run_config import build_run_config


class FitController:
    """Controller for the ``fit`` subcommand."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger("verdoorn.apps.fit")
        self.config = config or {}

    def run(self, parameters: Dict[str, Any], defaults: Dict[str, Any]) -> Dict[str, Any]:
        """
        Run the estimators and write fit.txt, fit.csv and fit.jsonl.

        Args:
            parameters: ``overrides`` (nested like config.yml) and ``config_path``.
            defaults: Full configuration from config.yml.

        Returns:
            A dictionary with the written files, skips and a message.
        """
        config = build_run_config(defaults, parameters.get("overrides"), parameters.get("config_path"))
        panels, skipped = prepare_panels(config)
        blocks = map_ordered(partial(analyse_fit, config=config), panels, config.workers)

        for block in blocks:
            for method, reason in block.failures.items():
                skipped.append(SkippedRun(block.industry, block.window, f"{method} not estimated: {reason}"))

        renderer = ReportRenderer(defaults.get("output"))
        text = renderer.render_fit_report(blocks, skipped)
        outputs = renderer.write_outputs("fit", text, renderer.fit_records(blocks), config.output_dir, config.output_formats)
        self.logger.info(f"Fitted {len(blocks)} panels with {', '.join(config.estimators)}")
        return {
            "success": True,
            "message": f"Estimated {len(blocks)} panel(s); {len(skipped)} skipped",
            "outputs": outputs,
            "skipped": skipped,
            "blocks": blocks,
        }
