"""The z-threshold detector viewed as a single-photon detector.

A click is reported when z > T. For a single photon z ~ Gamma(2, 1) and for
vacuum z ~ Exp(1), which gives efficiency (1 + T) e^-T, dark-count
probability e^-T and their ratio 1 + T.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from photonz.errors import InvalidArgumentError


@dataclass(frozen=True)
class ThresholdCurvePoint:
    threshold: float
    efficiency: float
    dark_count: float
    ratio: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_threshold(threshold):
    if not (np.isfinite(threshold) and threshold >= 0):
        raise InvalidArgumentError(f"threshold must be finite and >= 0, got {threshold!r}")
    return float(threshold)


def spd_point(threshold: float) -> ThresholdCurvePoint:
    t = _check_threshold(threshold)
    dark = math.exp(-t)
    return ThresholdCurvePoint(
        threshold=t,
        efficiency=(1.0 + t) * dark,
        dark_count=dark,
        ratio=1.0 + t,
    )


def spd_curve(t_min: float, t_max: float, points: int) -> list[ThresholdCurvePoint]:
    """Evenly spaced thresholds from ``t_min`` to ``t_max`` inclusive."""
    t_min = _check_threshold(t_min)
    if not (np.isfinite(t_max) and t_max > t_min):
        raise InvalidArgumentError(f"need t_min < t_max, got {t_min!r} and {t_max!r}")
    if isinstance(points, bool) or int(points) != points or points < 2:
        raise InvalidArgumentError(f"points must be an integer >= 2, got {points!r}")
    return [spd_point(t) for t in np.linspace(t_min, t_max, int(points))]
