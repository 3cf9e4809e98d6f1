import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.api import cdf, detection, moments, roc, threshold, validate
from app.core.config import settings
from app.core.errors import (
    EXIT_CONVERGENCE,
    EXIT_USAGE,
    EXIT_VALIDATION,
    ConvergenceError,
    DomainError,
    ValidationFailure,
)
from app.core.metrics import export_metrics

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="st-sensing",
        description=f"{settings.APP_NAME} {settings.APP_VERSION}: spherical-test spectrum sensing",
    )
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="logging level (default: %(default)s)")
    parser.add_argument("--metrics-file", default=settings.METRICS_FILE,
                        help="write Prometheus text metrics here after the command")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    threshold.add_parsers(subparsers)
    moments.add_parsers(subparsers)
    roc.add_parsers(subparsers)
    cdf.add_parsers(subparsers)
    detection.add_parsers(subparsers)
    validate.add_parsers(subparsers)
    return parser


def _configure_logging(level: str):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version and 2 for usage errors
        return int(e.code or 0)

    _configure_logging(args.log_level)

    try:
        code = args.func(args)
    except (DomainError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValidationFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        # Global exception handler
        logger.error(f"Unexpected failure in {args.command}: {e}", exc_info=True)
        return EXIT_VALIDATION
    finally:
        export_metrics(args.metrics_file)
    return code


if __name__ == "__main__":
    sys.exit(main())
