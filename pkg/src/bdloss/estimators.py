"""scikit-learn compatible wrappers.

:class:`GaussianBoxEncoder` turns box rows into Gaussian parameters so the
representation can sit inside a ``Pipeline``; :class:`AspectRatioKDE` is the
density estimator behind the aspect-ratio statistics.
"""
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InsufficientDataError
from .gaussian import SquareLikePolicy, boxes_to_gaussians
from .validation import check_boxes, check_ratios

_SQRT_2PI = math.sqrt(2 * math.pi)
RELATIVE_BW_FLOOR = 1e-3


class GaussianBoxEncoder(TransformerMixin, BaseEstimator):
    """Encode ``(cx, cy, w, h, theta)`` rows as ``(mx, my, sxx, sxy, syy)``.

    With ``anisotropic=True`` each square-like row (long/short <= ``tau``)
    uses the anisotropic representation with divisor ``delta``.
    """

    def __init__(self, anisotropic=True, tau=1.1, delta=5.0):
        self.anisotropic = anisotropic
        self.tau = tau
        self.delta = delta

    def fit(self, X, y=None):
        X = check_boxes(X)
        self.policy_ = SquareLikePolicy(self.tau, self.delta) if self.anisotropic else None
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "policy_")
        X = check_boxes(X)
        g = boxes_to_gaussians(X, self.policy_)
        return np.column_stack(g.entries())

    def get_feature_names_out(self, input_features=None):
        return np.array(["mean_x", "mean_y", "var_xx", "cov_xy", "var_yy"], dtype=object)


def scott_bandwidth(x):
    """Scott's rule ``std * n^(-1/5)`` for one-dimensional data."""
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1)) * len(x) ** (-0.2)


class AspectRatioKDE(BaseEstimator):
    """Gaussian-kernel density of aspect ratios on ``[lower, inf)``.

    Kernels are reflected at ``lower`` so no mass leaks below the support;
    without it a corpus rich in squares would lose up to half its density at
    ratio 1. After ``fit`` the density is tabulated on a uniform grid from
    ``lower`` to ``max(ratio) + tail * bandwidth``.
    """

    def __init__(self, bandwidth=None, lower=1.0, tail=4.0, min_grid=512, max_grid=2_000_000,
                 steps_per_bandwidth=10):
        self.bandwidth = bandwidth
        self.lower = lower
        self.tail = tail
        self.min_grid = min_grid
        self.max_grid = max_grid
        self.steps_per_bandwidth = steps_per_bandwidth

    def fit(self, X, y=None):
        x = check_ratios(X, self.lower)
        if len(x) < 2:
            raise InsufficientDataError(f"need at least 2 ratios, got {len(x)}")
        if self.bandwidth is not None:
            if not self.bandwidth > 0:
                raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
            bw = float(self.bandwidth)
        else:
            # identical (or roundoff-identical) samples would give a vanishing
            # bandwidth; keep a narrow but resolvable peak instead
            bw = max(scott_bandwidth(x), RELATIVE_BW_FLOOR * max(float(x.mean()), 1.0))
        self.ratios_ = x
        self.bandwidth_ = bw
        hi = float(x.max()) + self.tail * bw
        n = max(self.min_grid, int(math.ceil((hi - self.lower) / bw * self.steps_per_bandwidth)))
        if n > self.max_grid:
            raise ValueError(f"bandwidth {bw:g} needs {n} grid points, above max_grid={self.max_grid}")
        self.grid_ = np.linspace(self.lower, hi, n + 1)
        self.density_ = self._density(self.grid_)
        return self

    def _density(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        mirrored = 2 * self.lower - self.ratios_
        # chunk to bound memory on large grids
        flat = t.reshape(-1)
        res = out.reshape(-1)
        step = max(1, 2_000_000 // len(self.ratios_))
        for s in range(0, len(flat), step):
            u = flat[s:s + step, None]
            z1 = (u - self.ratios_) / self.bandwidth_
            z2 = (u - mirrored) / self.bandwidth_
            res[s:s + step] = (np.exp(-0.5 * z1 * z1) + np.exp(-0.5 * z2 * z2)).sum(1)
        out = res.reshape(t.shape) / (len(self.ratios_) * self.bandwidth_ * _SQRT_2PI)
        return np.where(t >= self.lower, out, 0.0)

    def density(self, X):
        check_is_fitted(self, "ratios_")
        return self._density(X)

    def score_samples(self, X):
        """Log density at each ratio."""
        with np.errstate(divide="ignore"):
            return np.log(self.density(X))

    def mode(self):
        check_is_fitted(self, "density_")
        return float(self.grid_[int(np.argmax(self.density_))])
