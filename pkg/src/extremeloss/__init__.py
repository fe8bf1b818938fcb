"""Extreme-aware regression toolkit for greenhouse temperature forecasting."""
from .loss import (Band, GradHess, ImprovedLoss, LossConfig, SquaredError, classify_band,
                   compute_extreme_weights, sample_grad_hess, sample_loss, total_loss)

__version__ = "0.1.0"

__all__ = [
    "Band", "GradHess", "ImprovedLoss", "LossConfig", "SquaredError", "classify_band",
    "compute_extreme_weights", "sample_grad_hess", "sample_loss", "total_loss",
]
