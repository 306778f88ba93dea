"""Map-quality metrics: cell-wise error rates and degradation ratios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mapping import Bitmap


class UndefinedRatioError(ValueError):
    """Raised when a degradation ratio is requested against a zero baseline."""


@dataclass(frozen=True)
class MapErrorReport:
    """Cell-wise occupancy mismatch between an estimated and a true bitmap."""

    error_rate: float
    false_occupied: int
    false_free: int
    total_cells: int

    def to_dict(self) -> dict:
        return {
            "error_rate": self.error_rate,
            "false_occupied": self.false_occupied,
            "false_free": self.false_free,
            "total_cells": self.total_cells,
        }


def map_error(estimate: Bitmap, truth: Bitmap) -> MapErrorReport:
    """Fraction of cells with the wrong occupancy value, split by error kind."""
    if (estimate.width, estimate.height) != (truth.width, truth.height):
        raise ValueError(
            f"dimension mismatch: estimate {estimate.width}x{estimate.height} "
            f"vs truth {truth.width}x{truth.height}"
        )
    est = estimate.occupied
    tru = truth.occupied
    false_occupied = int(np.count_nonzero(est & ~tru))
    false_free = int(np.count_nonzero(~est & tru))
    total = est.size
    return MapErrorReport(
        error_rate=(false_occupied + false_free) / total,
        false_occupied=false_occupied,
        false_free=false_free,
        total_cells=total,
    )


def degradation_ratio(baseline: MapErrorReport, perturbed: MapErrorReport) -> float:
    """Relative error-rate increase of ``perturbed`` over ``baseline``."""
    if baseline.error_rate == 0.0:
        raise UndefinedRatioError("degradation ratio is undefined for a zero baseline error rate")
    return (perturbed.error_rate - baseline.error_rate) / baseline.error_rate
