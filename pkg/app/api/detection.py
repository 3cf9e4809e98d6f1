import argparse
import logging

from app.api.experiment import add_scenario_arguments, config_from_args, write_frame
from app.core.errors import EXIT_OK
from app.models.detectors import DetectorKind
from app.models.simulate import pd_vs_snr

logger = logging.getLogger(__name__)

TABLE_DETECTORS = [DetectorKind.ST, DetectorKind.JOHN]


def add_parsers(subparsers):
    parser = subparsers.add_parser("pd", help="detection probability against SNR at a fixed false-alarm rate")
    add_scenario_arguments(parser)
    parser.add_argument("--snr1-db", type=float, action="append", dest="snr1_db",
                        help="first user's SNR in dB (repeatable)")
    parser.add_argument("--snr-offset-db", type=float, help="second user's SNR relative to the first")
    parser.add_argument("--pfa-target", type=float, help="false-alarm rate fixing the empirical thresholds")
    parser.add_argument("--channel-draws", type=int, help="independent channel realisations to average")
    parser.add_argument("--n-jobs", type=int, help="joblib workers")
    parser.set_defaults(func=run_pd)


def run_pd(args: argparse.Namespace) -> int:
    config = config_from_args(args, default_detectors=TABLE_DETECTORS)
    table = pd_vs_snr(
        config.scenario,
        config.snr1_db,
        config.snr_offset_db,
        config.pfa_target,
        config.channel_draws,
        n_jobs=args.n_jobs,
    )
    write_frame(table, config.out, config.format)
    return EXIT_OK
