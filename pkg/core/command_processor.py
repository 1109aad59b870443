"""
Verdoorn Toolkit - Command Processor
------------------------------------
Routes CLI subcommands to the controllers in apps/ and turns library
exceptions into result dictionaries with exit codes.
"""

import importlib
import logging
import os
from typing import Any, Dict, Optional

import pandas as pd

from core.errors import ConfigError, PanelDataError, VerdoornError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SKIPS = 4


def failure(error: Exception, exit_code: int, message: str) -> Dict[str, Any]:
    return {"success": False, "error": str(error), "message": message, "exit_code": exit_code}


class CommandProcessor:
    """
    Holds one controller per subcommand.

    Controllers are discovered in the apps directory: module ``fit`` must
    define ``FitController``, ``unitroot`` defines ``UnitrootController``
    and so on. Each controller receives its own config.yml section and,
    on ``run``, the full configuration as defaults.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Args:
            config: Parsed config.yml.
        """
        self.logger = logging.getLogger("verdoorn.command_processor")
        self.config = config or {}
        self.app_controllers: Dict[str, Any] = {}
        self._load_app_controllers()
        self.logger.debug(f"Controllers available: {sorted(self.app_controllers)}")

    def _load_app_controllers(self):
        apps_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "apps")
        for filename in sorted(os.listdir(apps_dir)):
            if not filename.endswith(".py") or filename.startswith("__"):
                continue
            module_name = filename[:-3]
            try:
                module = importlib.import_module(f"apps.{module_name}")
            except ImportError as e:
                self.logger.error(f"Error loading controller {module_name}: {e}")
                continue
            class_name = "".join(word.capitalize() for word in module_name.split("_")) + "Controller"
            if hasattr(module, class_name):
                controller_class = getattr(module, class_name)
                self.app_controllers[module_name] = controller_class(self.config.get(module_name, {}))
                self.logger.debug(f"Loaded controller for {module_name}")

    @property
    def commands(self):
        return sorted(self.app_controllers)

    def execute(self, command: str, parameters: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Run one subcommand.

        Args:
            command: Subcommand name (fit, unitroot, simulate, scatter).
            parameters: Controller parameters, typically ``overrides`` and
                ``config_path``.

        Returns:
            A dictionary with ``success``, ``message``, ``exit_code`` and,
            on success, ``outputs`` (written files) and ``skipped``.
        """
        parameters = parameters or {}
        controller = self.app_controllers.get(command)
        if controller is None:
            return failure(ConfigError(f"unknown command {command!r}"), EXIT_CONFIG, f"I don't know how to run {command}")

        self.logger.info(f"Executing {command}")
        try:
            result = controller.run(parameters, self.config)
        except ConfigError as e:
            self.logger.error(f"Configuration error in {command}: {e}")
            return failure(e, EXIT_CONFIG, f"Invalid configuration for {command}")
        except (PanelDataError, OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            self.logger.error(f"Data error in {command}: {e}")
            return failure(e, EXIT_DATA, f"Could not read the data for {command}")
        except VerdoornError as e:
            self.logger.error(f"Error executing {command}: {e}")
            return failure(e, EXIT_DATA, f"Failed to execute {command}")
        except Exception as e:
            self.logger.exception(f"Unexpected error executing {command}: {e}")
            return failure(e, EXIT_FAILURE, f"Failed to execute {command}")

        skipped = result.get("skipped", [])
        result.setdefault("success", True)
        result.setdefault("exit_code", EXIT_SKIPS if skipped else EXIT_OK)
        return result
