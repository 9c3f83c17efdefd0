#!/usr/bin/env python
"""
Run the full generate -> train-predictor -> train-corrector -> evaluate chain
for one preset. Extra arguments are passed to every command.

    python scripts/reproduce.py --preset fhn-100 --output-dir runs/fhn
"""

import sys
import logging
import argparse
from pathlib import Path

# Add the project root to the Python path
root_dir = str(Path(__file__).parent.parent.absolute())
sys.path.insert(0, root_dir)

from src.cli.main import main as cli_main
from src.config.logging_config import setup_logging

COMMANDS = ("generate", "train-predictor", "train-corrector", "evaluate")


def main():
    parser = argparse.ArgumentParser(description="Reproduce one predictor-corrector setting end to end")
    parser.add_argument("--preset", default="fhn-100", help="preset name (default: fhn-100)")
    parser.add_argument("--skip-generate", action="store_true", help="reuse the data already in the run directory")
    args, extra = parser.parse_known_args()

    setup_logging()
    logger = logging.getLogger(__name__)

    commands = COMMANDS[1:] if args.skip_generate else COMMANDS
    for command in commands:
        if command == "generate" and any(a.startswith("--csv") for a in extra):
            continue
        logger.info(f"=== {command} ({args.preset}) ===")
        code = cli_main([command, "--preset", args.preset, *extra])
        if code != 0:
            logger.error(f"{command} failed with exit code {code}")
            sys.exit(code)
    logger.info("Reproduction finished")


if __name__ == "__main__":
    main()
