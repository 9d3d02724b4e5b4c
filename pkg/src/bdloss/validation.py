"""Input checks shared by the estimator wrappers and the CLI."""
import numpy as np
from sklearn.utils import check_array

from .exceptions import InvalidBoxError


def check_boxes(X):
    """Validate an ``(n, 5)`` array of ``(cx, cy, w, h, theta)`` rows."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 5:
        raise InvalidBoxError(f"expected 5 columns (cx, cy, w, h, theta), got {X.shape[1]}")
    if np.any(X[:, 2:4] <= 0):
        raise InvalidBoxError("box widths and heights must be positive")
    return X


def check_ratios(X, lower=1.0):
    """Validate aspect ratios given as a 1-d array or a single column."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    X = check_array(X.reshape(-1, 1), dtype=np.float64, ensure_min_samples=0)[:, 0]
    if np.any(X < lower):
        raise ValueError(f"aspect ratios must be >= {lower}")
    return X
