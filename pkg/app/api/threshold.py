import argparse
import logging

from app.core.errors import EXIT_OK
from app.models.analytic import pfa, threshold_for_pfa

logger = logging.getLogger(__name__)


def add_parsers(subparsers):
    threshold = subparsers.add_parser("threshold", help="ST threshold for a target false-alarm probability")
    threshold.add_argument("--k", type=int, required=True, help="number of sensors K")
    threshold.add_argument("--n", type=int, required=True, help="samples per sensor N")
    threshold.add_argument("--pfa", type=float, required=True, help="target false-alarm probability")
    threshold.add_argument("--round-params", action="store_true", default=None)
    threshold.set_defaults(func=run_threshold)

    forward = subparsers.add_parser("pfa", help="false-alarm probability of an ST threshold")
    forward.add_argument("--k", type=int, required=True, help="number of sensors K")
    forward.add_argument("--n", type=int, required=True, help="samples per sensor N")
    forward.add_argument("--zeta", type=float, required=True, help="threshold in [0, 1]")
    forward.add_argument("--round-params", action="store_true", default=None)
    forward.set_defaults(func=run_pfa)


def run_threshold(args: argparse.Namespace) -> int:
    """Print ζ with F(ζ) = pfa under the H0 Beta approximation."""
    zeta = threshold_for_pfa(args.pfa, args.k, args.n, args.round_params)
    logger.info(f"Threshold for K={args.k}, N={args.n}, pfa={args.pfa}: {zeta:.12g}")
    print(f"{zeta:.12g}")
    return EXIT_OK


def run_pfa(args: argparse.Namespace) -> int:
    """Print F(ζ) under the H0 Beta approximation."""
    value = pfa(args.zeta, args.k, args.n, args.round_params)
    print(f"{value:.12g}")
    return EXIT_OK
