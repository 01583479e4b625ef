"""Input checks for the estimator layer."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .levy_model import InvalidTripletError, LevyTriplet, validate_triplet


def check_levels(X) -> np.ndarray:
    """Levels as a finite 1-D float array; a single column is accepted too."""
    arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected one column of levels, got shape {arr.shape}")
        arr = arr[:, 0]
    return arr


def check_triplet(t) -> LevyTriplet:
    if not isinstance(t, LevyTriplet):
        raise TypeError(f"expected a LevyTriplet, got {type(t).__name__}")
    report = validate_triplet(t)
    if not report.ok:
        raise InvalidTripletError(report.violations)
    return t
