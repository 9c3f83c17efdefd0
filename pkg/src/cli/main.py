"""``pc-corrector`` entry point.

Config resolution order: ``--config`` JSON (or defaults), then ``--preset``,
then individual flags. Exit codes: 0 success, 2 invalid input, 3 numerical
failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import torch

from src.cli.ablations import SWEEP_KEYS, cmd_ablate
from src.cli.commands import cmd_evaluate, cmd_generate, cmd_train_corrector, cmd_train_predictor
from src.config.logging_config import setup_logging
from src.config.presets import apply_preset
from src.config.run_config import RunConfig
from src.config.settings import settings
from src.core.errors import NumericalError, ValidationError
from src.monitoring.metrics import metrics_collector

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

# flag dest -> config path
FLAG_KEYS = {
    "seed": ("seed",),
    "output_dir": ("output_dir",),
    "system": ("system", "name"),
    "csv": ("system", "csv_path"),
    "n_trajectories": ("system", "n_trajectories"),
    "timesteps": ("system", "timesteps"),
    "dt": ("system", "dt"),
    "mask_fraction": ("system", "point_mask_fraction"),
    "lookback": ("system", "lookback"),
    "horizon": ("system", "horizon"),
    "predictor": ("predictor", "kind"),
    "corrector": ("corrector", "kind"),
    "hidden": ("corrector", "hidden"),
    "decoder": ("corrector", "decoder"),
    "interpolation": ("corrector", "interpolation"),
    "solver": ("corrector", "solver", "solver"),
    "rtol": ("corrector", "solver", "rtol"),
    "atol": ("corrector", "solver", "atol"),
    "h0": ("corrector", "solver", "h0"),
    "kappa": ("regularization", "kappa"),
    "eta": ("regularization", "eta"),
    "observed_fraction": ("regularization", "observed_fraction"),
    "train_horizon": ("corrector_training", "train_horizon"),
    "epochs": ("corrector_training", "epochs"),
    "batch_size": ("corrector_training", "batch_size"),
    "lr": ("corrector_training", "lr"),
    "predictor_epochs": ("predictor_training", "epochs"),
    "stress": ("evaluation", "stress_cutoff"),
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config; flags override its values")
    common.add_argument("--preset", help="named regularization preset, e.g. fhn-100")
    common.add_argument("--seed", type=int)
    common.add_argument("--output-dir", help=f"run directory (default: {settings.output_dir})")
    common.add_argument("--no-plots", action="store_true", help="skip SVG plots")

    data = common.add_argument_group("data")
    data.add_argument("--system", help="synthetic system: lorenz, lotka_volterra, fhn, glycolytic, linear2/3/4")
    data.add_argument("--csv", help="CSV series (time column + features) instead of a synthetic system")
    data.add_argument("--n-trajectories", type=int)
    data.add_argument("--timesteps", type=int)
    data.add_argument("--dt", type=float)
    data.add_argument("--mask-fraction", type=float, help="fraction of (point, feature) values masked")
    data.add_argument("--lookback", type=int)
    data.add_argument("--horizon", type=int, help="DLinear forecast horizon")

    models = common.add_argument_group("models")
    models.add_argument("--predictor", choices=["node", "dlinear", "rnn"])
    models.add_argument("--corrector", choices=["ncde", "mlp"])
    models.add_argument("--hidden", type=int, help="corrector hidden size C")
    models.add_argument("--decoder", choices=["fc20_1", "fc100_1", "fc400_4"])
    models.add_argument("--interpolation", choices=["hermite", "linear"])
    models.add_argument("--solver", choices=["euler", "heun", "dopri5", "tsit5"])
    models.add_argument("--rtol", type=float)
    models.add_argument("--atol", type=float)
    models.add_argument("--h0", type=float)

    training = common.add_argument_group("corrector training")
    training.add_argument("--kappa", type=float, help="fraction of forecast points kept per pass")
    training.add_argument("--eta", type=int, help="maximum tail drop per pass")
    training.add_argument("--observed-fraction", type=float)
    training.add_argument("--train-horizon", type=int)
    training.add_argument("--epochs", type=int)
    training.add_argument("--batch-size", type=int)
    training.add_argument("--lr", type=float)
    training.add_argument("--predictor-epochs", type=int)

    common.add_argument("--stress", type=int, metavar="N", help="add the long-horizon stress curve up to N")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="pc-corrector", description="Predictor-corrector forecasting runs")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="generate a synthetic dataset")
    sub.add_parser("train-predictor", parents=[common], help="train the predictor")
    train_corrector = sub.add_parser("train-corrector", parents=[common], help="train the corrector")
    train_corrector.add_argument("--predictor-checkpoint", type=Path)
    evaluate = sub.add_parser("evaluate", parents=[common], help="score corrected vs uncorrected forecasts")
    evaluate.add_argument("--predictor-checkpoint", type=Path)
    evaluate.add_argument("--corrector-checkpoint", type=Path)
    ablate = sub.add_parser("ablate", parents=[common], help="sweep one setting")
    ablate.add_argument("--sweep", nargs="+", required=True, metavar=("PARAM", "VALUES"),
                        help=f"one of {', '.join(SWEEP_KEYS)}, optionally followed by start:stop:step or a,b,c")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    for dest, path in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        section = overrides
        for key in path[:-1]:
            section = section.setdefault(key, {})
        section[path[-1]] = value
    if args.csv is not None and args.system is None:
        overrides["system"]["name"] = None
    if args.no_plots:
        overrides.setdefault("evaluation", {})["plots"] = False
    return overrides


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_json(args.config) if args.config is not None else RunConfig()
    if args.preset:
        config = apply_preset(config, args.preset)
    return config.merged(overrides_from_args(args))


def run(args: argparse.Namespace, config: RunConfig) -> dict:
    logger.info(f"Running {args.command} (seed={config.seed}, output_dir={config.output_dir})")
    if args.command == "generate":
        return cmd_generate(config)
    if args.command == "train-predictor":
        return cmd_train_predictor(config)
    if args.command == "train-corrector":
        return cmd_train_corrector(config, args.predictor_checkpoint)
    if args.command == "evaluate":
        return cmd_evaluate(config, args.predictor_checkpoint, args.corrector_checkpoint)
    if len(args.sweep) > 2:
        raise ValidationError("--sweep takes a parameter and at most one value list")
    return cmd_ablate(config, args.sweep[0], args.sweep[1] if len(args.sweep) > 1 else None)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging()
    if settings.torch_threads > 0:
        torch.set_num_threads(settings.torch_threads)

    try:
        config = resolve_config(args)
        written = run(args, config)
    except ValidationError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL

    metrics_collector.write(config.output_path / settings.metrics_file)
    for name, path in written.items():
        logger.info(f"  {name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
