"""Main entry point for chromate flow-rate optimization runs."""

import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

from src.config import build_config, parse_args, print_config
from src.errors import EXIT_FAILURE, ChromateControlError, ConfigError
from src.pipeline import ScenarioRunner


def setup_output_directory(output_path: Optional[Path] = None):
    """Setup output directory, timestamped unless one is given.

    Returns:
        Tuple of (output_dir, log_file_path)
    """
    timestamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    if output_path is None:
        outputs_root = Path("./outputs")
        outputs_root.mkdir(exist_ok=True)
        output_dir = outputs_root / timestamp
    else:
        output_dir = Path(output_path)
    output_dir.mkdir(parents=True, exist_ok=True)

    log_file = output_dir / f"{timestamp}.log"

    return output_dir, log_file


def setup_logging(log_file: Optional[Path] = None):
    """Setup logging to the console and, if given, a file.

    Args:
        log_file: Path to log file
    """
    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_file is not None:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function."""
    args = parse_args(argv)

    try:
        config = build_config(args)
    except ConfigError as exc:
        setup_logging()
        logger = logging.getLogger(__name__)
        logger.error("Invalid configuration:")
        for message in exc.errors:
            logger.error(f"  {message}")
        return exc.exit_code

    logger = logging.getLogger(__name__)
    try:
        output_dir, log_file = setup_output_directory(config.output_path)
        setup_logging(log_file)

        logger.info("=" * 60)
        logger.info("Chromate Ion-Exchange Flow-Rate Control")
        logger.info("=" * 60)
        logger.info(f"Output directory: {output_dir}")
        logger.info(f"Log file: {log_file}")
        logger.info("=" * 60)

        config.output_path = output_dir
        print_config(config)

        runner = ScenarioRunner(config, output_dir)
        outcome = runner.run()

        logger.info("=" * 60)
        logger.info(f"Run finished with exit code {outcome.exit_code}")
        logger.info(f"Artifacts: {len(outcome.artifacts)} files in {output_dir}")
        logger.info("=" * 60)
        return outcome.exit_code

    except ChromateControlError as exc:
        logger.error(f"Run aborted: {exc}")
        diagnostics = getattr(exc, "diagnostics", None)
        if diagnostics:
            logger.error(f"Diagnostics: {diagnostics}")
        return exc.exit_code

    except Exception as exc:
        logger.error(f"Run failed: {exc}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
