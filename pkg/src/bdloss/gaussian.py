"""Gaussian representations of oriented boxes.

A box ``(cx, cy, w, h, theta)`` maps to ``N(mu, Sigma)`` with ``mu`` the
center and ``Sigma = R(theta) diag(w^2/4, h^2/4) R(theta)^T``. Square-like
boxes get an anisotropic variant whose rotation is ``R(4 theta)`` and whose
half-axes are modulated by ``cos(4 theta) / delta``, so that rotating a
square by a non-multiple of pi/2 changes its representation.

The ``*_entries`` helpers return the covariance as ``(s_xx, s_xy, s_yy)`` and
are written with numpy ufuncs only, so they accept floats, arrays or
:class:`~bdloss._dual.Dual` values alike.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidPolicyError
from .geometry import normalize_obb

SYMMETRY_TOL = 1e-12
PD_REL_FLOOR = 1e-12


@dataclass(frozen=True)
class SquareLikePolicy:
    """When and how strongly to apply the anisotropic correction.

    A box is square-like when ``long / short <= tau``; ``delta`` divides the
    ``cos(4 theta)`` modulation of the half-axes.
    """

    tau: float = 1.1
    delta: float = 5.0

    def __post_init__(self):
        if not self.tau >= 1.0:
            raise InvalidPolicyError(f"tau must be >= 1, got {self.tau}")
        _check_delta(self.delta)


def _check_delta(delta):
    if not delta > 1.0:
        raise InvalidPolicyError(
            f"delta must be > 1 so both scaled half-axes stay positive, got {delta}")


class Gaussian2:
    """Bivariate Gaussian, or a batch of them.

    ``mean`` has shape ``(..., 2)`` and ``cov`` shape ``(..., 2, 2)``.
    """

    __slots__ = ("mean", "cov")

    def __init__(self, mean, cov, validate=True):
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        if mean.shape[-1:] != (2,) or cov.shape[-2:] != (2, 2) or cov.shape[:-2] != mean.shape[:-1]:
            raise ValueError(f"incompatible shapes mean{mean.shape} cov{cov.shape}")
        if validate:
            _validate_cov(cov)
        self.mean = mean
        self.cov = cov

    @classmethod
    def from_entries(cls, mx, my, sxx, sxy, syy, validate=True):
        mean = np.stack(np.broadcast_arrays(mx, my), axis=-1)
        sxx, sxy, syy = np.broadcast_arrays(sxx, sxy, syy)
        cov = np.stack([np.stack([sxx, sxy], -1), np.stack([sxy, syy], -1)], -2)
        return cls(mean, cov, validate=validate)

    def entries(self):
        """``(mx, my, sxx, sxy, syy)`` views."""
        return (self.mean[..., 0], self.mean[..., 1],
                self.cov[..., 0, 0], self.cov[..., 0, 1], self.cov[..., 1, 1])

    @property
    def batch_shape(self):
        return self.mean.shape[:-1]

    def __len__(self):
        return len(self.mean)

    def __getitem__(self, idx):
        return Gaussian2(self.mean[idx], self.cov[idx], validate=False)

    def __repr__(self):
        return f"Gaussian2(mean={self.mean.tolist()}, cov={self.cov.tolist()})"

    def transformed(self, m, shift=(0.0, 0.0)):
        """Push through the affine map ``x -> m x + shift``."""
        m = np.asarray(m, dtype=float)
        mean = np.einsum("...ij,...j->...i", m, self.mean) + shift
        cov = m @ self.cov @ np.swapaxes(m, -1, -2)
        cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
        return Gaussian2(mean, cov, validate=False)


def _validate_cov(cov):
    asym = np.abs(cov[..., 0, 1] - cov[..., 1, 0])
    scale = np.maximum(np.abs(cov[..., 0, 0]), np.abs(cov[..., 1, 1]))
    if np.any(asym > SYMMETRY_TOL * np.maximum(scale, 1.0)):
        raise ValueError("covariance is not symmetric")
    a, b, c = cov[..., 0, 0], cov[..., 0, 1], cov[..., 1, 1]
    tr = a + c
    det = a * c - b * b
    # smallest eigenvalue against a floor relative to the largest
    disc = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    lmax = 0.5 * tr + disc
    if np.any(~np.isfinite(cov)) or np.any(a <= 0) or np.any(det <= 0) \
            or np.any(det / np.maximum(lmax, 1e-300) <= PD_REL_FLOOR * lmax):
        raise ValueError("covariance is not positive definite")


def _rotated_diag_entries(d1, d2, cos, sin):
    """Entries of ``R diag(d1, d2) R^T``."""
    sxx = d1 * cos * cos + d2 * sin * sin
    sxy = (d1 - d2) * cos * sin
    syy = d1 * sin * sin + d2 * cos * cos
    return sxx, sxy, syy


def plain_cov_entries(w, h, theta):
    return _rotated_diag_entries(w * w / 4, h * h / 4, np.cos(theta), np.sin(theta))


def anisotropic_cov_entries(w, h, theta, delta):
    """Covariance entries of the anisotropic square-like representation.

    The square root of the covariance is ``R(4 theta) diag(h'/2, w'/2)
    R(4 theta)^T`` with ``h' = h (1 + cos 4theta / delta)`` and
    ``w' = w (1 - cos 4theta / delta)``; the covariance squares the diagonal.
    """
    c4 = np.cos(4 * theta)
    s4 = np.sin(4 * theta)
    hp = h * (1 + c4 / delta)
    wp = w * (1 - c4 / delta)
    return _rotated_diag_entries(hp * hp / 4, wp * wp / 4, c4, s4)


def _stack_cov(sxx, sxy, syy):
    sxx, sxy, syy = np.broadcast_arrays(sxx, sxy, syy)
    return np.stack([np.stack([sxx, sxy], -1), np.stack([sxy, syy], -1)], -2)


def gaussian_covariance(w, h, theta):
    """``Sigma(w, h, theta)`` as a ``(..., 2, 2)`` array, without normalizing."""
    return _stack_cov(*plain_cov_entries(np.asarray(w, float), np.asarray(h, float),
                                         np.asarray(theta, float)))


def anisotropic_covariance(w, h, theta, delta=5.0):
    """``Sigma'(w, h, theta)`` as a ``(..., 2, 2)`` array, without normalizing."""
    _check_delta(delta)
    return _stack_cov(*anisotropic_cov_entries(np.asarray(w, float), np.asarray(h, float),
                                               np.asarray(theta, float), delta))


def obb_to_gaussian(box):
    return Gaussian2.from_entries(box.cx, box.cy, *plain_cov_entries(box.w, box.h, box.theta))


def is_square_like(box, policy=SquareLikePolicy()):
    return max(box.w, box.h) / min(box.w, box.h) <= policy.tau


def obb_to_anisotropic_gaussian(box, policy=SquareLikePolicy()):
    _check_delta(policy.delta)
    return Gaussian2.from_entries(
        box.cx, box.cy, *anisotropic_cov_entries(box.w, box.h, box.theta, policy.delta))


def gaussian_for_pair(pred, gt, policy=SquareLikePolicy()):
    """Represent a (prediction, ground truth) pair.

    The ground truth decides: if it is square-like both boxes use the
    anisotropic form, otherwise both use the plain one. ``policy=None``
    always uses the plain form.
    """
    if policy is not None and is_square_like(gt, policy):
        return (obb_to_anisotropic_gaussian(pred, policy),
                obb_to_anisotropic_gaussian(gt, policy))
    return obb_to_gaussian(pred), obb_to_gaussian(gt)


# batched counterparts ------------------------------------------------------

def _split_boxes(boxes, normalize=True):
    boxes = np.asarray(boxes, dtype=float)
    if boxes.shape[-1] != 5:
        raise ValueError(f"expected (..., 5) box array, got {boxes.shape}")
    cx, cy, w, h, t = np.moveaxis(boxes, -1, 0)
    if normalize:
        w, h, t = normalize_obb(w, h, t)
    return cx, cy, w, h, t


def square_like_mask(boxes, policy=SquareLikePolicy()):
    _, _, w, h, _ = _split_boxes(boxes)
    return np.maximum(w, h) / np.minimum(w, h) <= policy.tau


def boxes_to_gaussians(boxes, policy=None, anisotropic=None):
    """Convert an ``(..., 5)`` box array to a batched :class:`Gaussian2`.

    ``anisotropic`` is a boolean mask selecting the anisotropic form; when
    omitted it is derived from ``policy`` (each box judged on its own) or
    all-False when ``policy`` is None.
    """
    cx, cy, w, h, t = _split_boxes(boxes)
    sxx, sxy, syy = plain_cov_entries(w, h, t)
    if anisotropic is None:
        anisotropic = (np.maximum(w, h) / np.minimum(w, h) <= policy.tau
                       if policy is not None else np.zeros(np.shape(w), bool))
    if np.any(anisotropic):
        if policy is None:
            raise InvalidPolicyError("anisotropic conversion needs a policy")
        _check_delta(policy.delta)
        axx, axy, ayy = anisotropic_cov_entries(w, h, t, policy.delta)
        sxx = np.where(anisotropic, axx, sxx)
        sxy = np.where(anisotropic, axy, sxy)
        syy = np.where(anisotropic, ayy, syy)
    return Gaussian2.from_entries(cx, cy, sxx, sxy, syy, validate=False)


def pair_to_gaussians(pred, gt, policy=SquareLikePolicy()):
    """Batched :func:`gaussian_for_pair` over aligned ``(N, 5)`` arrays."""
    if policy is None:
        return boxes_to_gaussians(pred), boxes_to_gaussians(gt)
    mask = square_like_mask(gt, policy)
    return (boxes_to_gaussians(pred, policy, anisotropic=mask),
            boxes_to_gaussians(gt, policy, anisotropic=mask))
