"""Corrector training on forecast/error trajectory pairs.

Each forward pass draws, per bundle member and afresh every time:

1. a tail drop ``k ~ Uniform{0..eta}`` on the training horizon,
2. the stage-1 irregular subsample (``observed_fraction``),
3. the ``kappa`` sparsification of what is left.

The member is then integrated on its own knots and the loss is the squared
error against the true residuals at the retained knots after the first,
restricted to observed features.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from src.config.run_config import CorrectorConfig, RegularizationConfig, TrainingConfig
from src.core.errors import ValidationError
from src.core.tensor import as_tensor, check_finite, mse_loss
from src.data.sampling import Seed, as_rng, subsample_indices
from src.models.bundles import ForecastBundle, stack_bundles
from src.models.checkpoints import build_corrector
from src.models.corrector import (
    MIN_PATH_KNOTS,
    CorrectorModel,
    corrector_pass,
    predict_errors,
    sample_tail_drop,
    sparsify_indices,
)
from src.models.mlp_corrector import MlpCorrectorModel, mlp_correct
from src.training.loop import Trainer, TrainingLog, validation_split

logger = logging.getLogger(__name__)


def retained_indices(length: int, reg: RegularizationConfig, seed: Seed) -> np.ndarray:
    """Knot indices for one forward pass after tail drop, stage-1 subsampling and sparsification"""
    rng = as_rng(seed)
    k = sample_tail_drop(reg.eta, length, rng)
    idx = subsample_indices(length - k, reg.observed_fraction, rng, minimum=MIN_PATH_KNOTS)
    return idx[sparsify_indices(len(idx), reg.kappa, rng)]


def member_loss(model: CorrectorModel, bundle: ForecastBundle, horizon: int, reg: RegularizationConfig,
                seed: Seed) -> Tuple[torch.Tensor, torch.Tensor, int]:
    """Weighted squared-error sum, weight total and NFE for one regularized pass"""
    n = min(horizon, len(bundle))
    idx = retained_indices(n, reg, seed)
    predicted, nfe = corrector_pass(model, bundle.times[idx], bundle.forecast[idx])
    target = as_tensor(bundle.errors[idx])
    weights = as_tensor(bundle.observed[idx].astype(np.float64))
    sq = (predicted[1:] - target[1:]) ** 2 * weights[1:]
    return sq.sum(), weights[1:].sum(), nfe


def corrector_batch_loss(model: CorrectorModel, batch: Sequence[ForecastBundle], horizon: int,
                         reg: RegularizationConfig, seed: Seed) -> Tuple[torch.Tensor, float]:
    """Mean over retained, observed entries of the batch; NFE averaged over members"""
    rng = as_rng(seed)
    total, count, nfes = 0.0, 0.0, []
    for bundle in batch:
        sq, w, nfe = member_loss(model, bundle, horizon, reg, rng)
        total = total + sq
        count = count + w
        nfes.append(nfe)
    if float(count) <= 0:
        raise ValidationError("no observed entries in the batch")
    return check_finite(total / count, "corrector loss"), float(np.mean(nfes))


def corrector_eval_loss(model: nn.Module, bundles: Sequence[ForecastBundle], horizon: int) -> float:
    """Unregularized loss over the full horizon, every member corrected jointly per time grid"""
    predicted = predict_errors(model, bundles, length=horizon)
    n = min(horizon, min(len(b) for b in bundles))
    start = 1 if isinstance(model, CorrectorModel) else 0
    pred = np.stack([p[start:n] for p in predicted])
    target = stack_bundles(bundles, "errors", n)[:, start:]
    weights = stack_bundles(bundles, "observed", n)[:, start:].astype(np.float64)
    return float(mse_loss(pred, target, weights))


def train_corrector(bundles: Sequence[ForecastBundle], config: CorrectorConfig, reg: RegularizationConfig,
                    training: TrainingConfig, seed: int = 0,
                    model: Optional[nn.Module] = None) -> Tuple[nn.Module, TrainingLog]:
    if not bundles:
        raise ValidationError("cannot train a corrector without forecast bundles")
    horizon = training.train_horizon
    shortest = min(len(b) for b in bundles)
    if horizon > shortest:
        raise ValidationError(f"corrector training horizon {horizon} exceeds bundle length {shortest}")
    if reg.eta > horizon - MIN_PATH_KNOTS:
        raise ValidationError(f"eta={reg.eta} outside [0, {horizon - MIN_PATH_KNOTS}] for horizon {horizon}")

    if model is None:
        model = build_corrector(bundles[0].dim, config, seed=seed)
    if isinstance(model, MlpCorrectorModel):
        return model, _train_mlp(model, bundles, training, seed)

    fit_idx, val_idx = validation_split(len(bundles), training.val_fraction, seed)
    fit = [bundles[i] for i in fit_idx]
    val = [bundles[i] for i in val_idx]
    logger.info(f"Training corrector on {len(fit)} bundles ({len(val)} held out), horizon {horizon}, "
                f"kappa={reg.kappa}, eta={reg.eta}, observed_fraction={reg.observed_fraction}")

    def batch_loss(batch, rng):
        return corrector_batch_loss(model, batch, horizon, reg, rng)

    trainer = Trainer(model, training, "corrector", seed)
    log = trainer.fit(fit, batch_loss, (lambda: corrector_eval_loss(model, val, horizon)) if val else None)
    return model, log


def mlp_batch_loss(model: MlpCorrectorModel, batch: Sequence[ForecastBundle], horizon: int) -> Tuple[torch.Tensor, float]:
    n = min(horizon, min(len(b) for b in batch))
    predicted = torch.stack([mlp_correct(model, b.times[:n], b.forecast[:n]) for b in batch])
    target = stack_bundles(batch, "errors", n)
    weights = stack_bundles(batch, "observed", n).astype(np.float64)
    return mse_loss(predicted, target, weights), 0.0


def _train_mlp(model: MlpCorrectorModel, bundles: Sequence[ForecastBundle], training: TrainingConfig,
               seed: int) -> TrainingLog:
    horizon = training.train_horizon
    fit_idx, val_idx = validation_split(len(bundles), training.val_fraction, seed)
    fit = [bundles[i] for i in fit_idx]
    val = [bundles[i] for i in val_idx]
    logger.info(f"Training MLP corrector on {len(fit)} bundles ({len(val)} held out), horizon {horizon}")
    trainer = Trainer(model, training, "corrector", seed)
    return trainer.fit(fit, lambda batch, rng: mlp_batch_loss(model, batch, horizon),
                       (lambda: corrector_eval_loss(model, val, horizon)) if val else None)


def train_mlp_corrector(bundles: Sequence[ForecastBundle], training: TrainingConfig, width: int = 100,
                        depth: int = 2, seed: int = 0) -> Tuple[MlpCorrectorModel, TrainingLog]:
    config = CorrectorConfig(kind="mlp", mlp_width=width, mlp_depth=depth)
    model, log = train_corrector(bundles, config, RegularizationConfig(), training, seed)
    return model, log


def per_pass_nfe(model: CorrectorModel, bundles: Sequence[ForecastBundle], horizon: int,
                 reg: RegularizationConfig, passes: int, seed: int = 0) -> List[int]:
    """NFE of ``passes`` regularized forward passes, cycling over ``bundles``"""
    rng = np.random.default_rng(seed)
    out = []
    with torch.no_grad():
        for i in range(passes):
            _, _, nfe = member_loss(model, bundles[i % len(bundles)], horizon, reg, rng)
            out.append(nfe)
    return out
