"""
Critical Threshold Lab - Main Entry Point

This is the main entry point for the command-line front-end. It sets up
logging and configuration, then hands the arguments to the command runner.

Usage:
    python main.py classify --scenario config/scenarios/ea_subcritical.yaml --out out/ea
    python main.py simulate --scenario config/scenarios/eap_attractive.yaml
    python main.py sweep --scenario config/scenarios/eap_repulsive_sweep.yaml --eps-lo -2 --eps-hi 0.5
    python main.py verify invariants
"""
import sys
from typing import List, Optional

from app.cli.commands import run
from app.utils.config import load_config
from app.utils.logger import setup_logger


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name; defaults to sys.argv[1:]

    Returns:
        Process exit code
    """
    config = load_config()
    app_config = config.get("app", {}) or {}
    setup_logger(app_config.get("log_dir", "logs"), app_config.get("log_level", "INFO"))
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
