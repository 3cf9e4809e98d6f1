import argparse
import logging

from app.core.config import settings
from app.core.errors import EXIT_OK
from app.models.analytic import (
    MAX_MOMENT_ORDER,
    h0_beta_params,
    h0_moments,
    h1_beta_params,
    h1_moments,
)
from app.models.matrix import ChannelMode, CovarianceModel, build_covariance
from app.models.simulate import channel_generator

logger = logging.getLogger(__name__)


def add_parsers(subparsers):
    parser = subparsers.add_parser("moments", help="ST moments and matched Beta parameters")
    parser.add_argument("--k", type=int, required=True, help="number of sensors K")
    parser.add_argument("--n", type=int, required=True, help="samples per sensor N")
    parser.add_argument("--orders", type=int, default=MAX_MOMENT_ORDER, help="highest moment order")
    parser.add_argument("--sigma-eigs", type=float, nargs="+", help="population eigenvalues of Σ (H1)")
    parser.add_argument("--snr-db", type=float, action="append", dest="snr_db",
                        help="primary-user SNR in dB, channels drawn from --seed (H1, repeatable)")
    parser.add_argument("--sigma2", type=float, default=1.0, help="noise power for --snr-db")
    parser.add_argument("--seed", type=int, default=settings.DEFAULT_SEED, help="channel seed for --snr-db")
    parser.add_argument("--channel-index", type=int, default=0, help="channel realisation for --snr-db")
    parser.add_argument("--channel-mode", choices=[m.value for m in ChannelMode], default=ChannelMode.RAYLEIGH.value,
                        help="channel model for --snr-db")
    parser.add_argument("--round-params", action="store_true", default=None)
    parser.set_defaults(func=run_moments)


def _h1_model(args: argparse.Namespace):
    if args.sigma_eigs:
        return CovarianceModel.from_eigenvalues(args.sigma_eigs)
    if args.snr_db:
        return build_covariance(args.k, args.sigma2, args.snr_db, channel_generator(args.seed, args.channel_index),
                                ChannelMode(args.channel_mode))
    return None


def run_moments(args: argparse.Namespace) -> int:
    """Print M_n (and N_n when Σ is given) with the matched Beta parameters."""
    moments = h0_moments(args.k, args.n, args.orders)
    params = h0_beta_params(args.k, args.n, args.round_params)
    for n, value in enumerate(moments.values, start=1):
        print(f"M{n} = {value:.7g}")
    print(f"alpha = {params.alpha:.7g}")
    print(f"beta = {params.beta:.7g}")

    model = _h1_model(args)
    if model is not None:
        if model.K != args.k:
            logger.warning(f"Σ has {model.K} eigenvalues, using K={model.K} for H1")
        h1 = h1_moments(model, args.n, args.orders)
        h1_params = h1_beta_params(model, args.n, args.round_params)
        print("sigma_eigs = " + " ".join(f"{v:.7g}" for v in model.sigma_eigs))
        for n, value in enumerate(h1.values, start=1):
            print(f"N{n} = {value:.7g}")
        print(f"alpha1 = {h1_params.alpha:.7g}")
        print(f"beta1 = {h1_params.beta:.7g}")
    return EXIT_OK
