"""Divergences between bivariate Gaussians and the losses built on them.

All divergences accept single or batched :class:`~bdloss.gaussian.Gaussian2`
values and broadcast over the batch. Losses share the bounded map
``d -> 1 - 1 / (1 + sqrt(d))``.
"""
from dataclasses import astuple, dataclass

import numpy as np

from ._dual import Dual
from .exceptions import SingularCovarianceError
from .gaussian import (SquareLikePolicy, anisotropic_cov_entries, is_square_like,
                       plain_cov_entries)

EPS_DET = 1e-24
# results within this many ulps of the cancelling terms are roundoff, not signal
ROUNDOFF_ULPS = 64


@dataclass(frozen=True)
class DivergenceConfig:
    """``alpha`` scales the Mahalanobis term of the Bhattacharyya distance;
    ``grad_step`` is the relative step used by finite-difference checks."""

    alpha: float = 3.0
    grad_step: float = 1e-5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.grad_step < 1e-2:
            raise ValueError(f"grad_step must lie in (0, 1e-2), got {self.grad_step}")


@dataclass(frozen=True)
class LossGradient:
    d_cx: float
    d_cy: float
    d_w: float
    d_h: float
    d_theta: float

    def as_array(self):
        return np.array(astuple(self))


def _val(x):
    return x.val if isinstance(x, Dual) else x


def _check_det(det, what):
    v = np.asarray(_val(det))
    if np.any(~(v > EPS_DET)):
        raise SingularCovarianceError(f"{what} determinant <= {EPS_DET:g}")


def _clamp0(x):
    if isinstance(x, Dual):
        return x if x.val > 0 else Dual(0.0, np.zeros_like(x.der))
    return np.maximum(x, 0.0)


def _snap(x, scale):
    """Zero out a difference that is below the roundoff of its own terms."""
    if isinstance(x, Dual):
        return x
    eps = ROUNDOFF_ULPS * np.finfo(float).eps
    return np.where(np.abs(x) <= eps * np.abs(scale), 0.0, x)


def _scalarize(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def bhattacharyya_entries(mp, sp, mt, st, alpha=3.0):
    """Bhattacharyya distance from raw entries.

    ``mp``/``mt`` are ``(mx, my)`` and ``sp``/``st`` are ``(sxx, sxy, syy)``.
    Generic over floats, arrays and duals.
    """
    dx = mp[0] - mt[0]
    dy = mp[1] - mt[1]
    a = (sp[0] + st[0]) / 2
    b = (sp[1] + st[1]) / 2
    c = (sp[2] + st[2]) / 2
    det = a * c - b * b
    det_p = sp[0] * sp[2] - sp[1] * sp[1]
    det_t = st[0] * st[2] - st[1] * st[1]
    _check_det(det, "average covariance")
    _check_det(det_p, "first covariance")
    _check_det(det_t, "second covariance")
    maha = (c * dx * dx - 2 * b * dx * dy + a * dy * dy) / det
    shape_term = 0.5 * np.log(det) - 0.25 * np.log(det_p) - 0.25 * np.log(det_t)
    return _clamp0(alpha / 8 * maha + shape_term)


def kld_entries(mp, sp, mt, st):
    dx = mp[0] - mt[0]
    dy = mp[1] - mt[1]
    det_p = sp[0] * sp[2] - sp[1] * sp[1]
    det_t = st[0] * st[2] - st[1] * st[1]
    _check_det(det_t, "target covariance")
    _check_det(det_p, "source covariance")
    maha = (st[2] * dx * dx - 2 * st[1] * dx * dy + st[0] * dy * dy) / det_t
    trace = (st[2] * sp[0] - 2 * st[1] * sp[1] + st[0] * sp[2]) / det_t
    log_ratio = np.log(det_p / det_t)
    shape = _snap(0.5 * trace - 0.5 * log_ratio - 1, 1 + 0.5 * trace + 0.5 * np.abs(log_ratio))
    return _clamp0(0.5 * maha + shape)


def gwd_entries(mp, sp, mt, st):
    """Squared 2-Wasserstein distance.

    For 2x2 SPD matrices ``tr sqrt(M) = sqrt(tr M + 2 sqrt(det M))``; with
    ``M = Sp^1/2 St Sp^1/2`` this needs only ``tr(Sp St)`` and the two
    determinants.
    """
    dx = mp[0] - mt[0]
    dy = mp[1] - mt[1]
    det_p = sp[0] * sp[2] - sp[1] * sp[1]
    det_t = st[0] * st[2] - st[1] * st[1]
    _check_det(det_p, "first covariance")
    _check_det(det_t, "second covariance")
    tr_pt = sp[0] * st[0] + 2 * sp[1] * st[1] + sp[2] * st[2]
    cross = np.sqrt(_clamp0(tr_pt + 2 * np.sqrt(det_p * det_t)))
    traces = sp[0] + sp[2] + st[0] + st[2]
    return _clamp0(dx * dx + dy * dy + _snap(traces - 2 * cross, traces))


def _unpack(g):
    mx, my, sxx, sxy, syy = g.entries()
    return (mx, my), (sxx, sxy, syy)


def bhattacharyya_distance(p, t, cfg=DivergenceConfig()):
    return _scalarize(bhattacharyya_entries(*_unpack(p), *_unpack(t), alpha=cfg.alpha))


def kld(p, t):
    """``KL(p || t)``; asymmetric."""
    return _scalarize(kld_entries(*_unpack(p), *_unpack(t)))


def gwd(p, t):
    return _scalarize(gwd_entries(*_unpack(p), *_unpack(t)))


def bounded_loss(d):
    """Map a nonnegative distance into ``[0, 1)`` as ``1 - 1/(1 + sqrt(d))``."""
    if isinstance(d, Dual):
        return 1 - 1 / (1 + np.sqrt(d))
    return _scalarize(1.0 - 1.0 / (1.0 + np.sqrt(np.maximum(d, 0.0))))


def bd_loss(p, t, cfg=DivergenceConfig()):
    return bounded_loss(bhattacharyya_distance(p, t, cfg))


def kld_loss(p, t):
    return bounded_loss(kld(p, t))


def gwd_loss(p, t):
    return bounded_loss(gwd(p, t))


def _pair_entries(pred_params, gt, policy):
    """Entries of the pair representation with the prediction given as raw
    (possibly dual) parameters; the ground truth picks the branch."""
    cx, cy, w, h, theta = pred_params
    if policy is not None and is_square_like(gt, policy):
        sp = anisotropic_cov_entries(w, h, theta, policy.delta)
        st = anisotropic_cov_entries(gt.w, gt.h, gt.theta, policy.delta)
    else:
        sp = plain_cov_entries(w, h, theta)
        st = plain_cov_entries(gt.w, gt.h, gt.theta)
    return (cx, cy), sp, (gt.cx, gt.cy), st


def bd_loss_grad(pred, gt, policy=SquareLikePolicy(), cfg=DivergenceConfig()):
    """Box-pair Bhattacharyya loss and its gradient w.r.t. the prediction.

    Forward-mode differentiation through box -> Gaussian -> distance -> loss.
    The representation branch depends only on ``gt`` and is held fixed. At an
    exact minimum (zero distance) the zero subgradient is returned.
    """
    params = Dual.variables([pred.cx, pred.cy, pred.w, pred.h, pred.theta])
    mp, sp, mt, st = _pair_entries(params, gt, policy)
    loss = bounded_loss(bhattacharyya_entries(mp, sp, mt, st, alpha=cfg.alpha))
    return loss.val, LossGradient(*(float(g) for g in loss.der))


def box_pair_bd_loss(pred, gt, policy=SquareLikePolicy(), cfg=DivergenceConfig()):
    """``bd_loss`` composed with :func:`~bdloss.gaussian.gaussian_for_pair`."""
    mp, sp, mt, st = _pair_entries((pred.cx, pred.cy, pred.w, pred.h, pred.theta), gt, policy)
    return bounded_loss(float(bhattacharyya_entries(mp, sp, mt, st, alpha=cfg.alpha)))
