"""Gaussian representations of rotated boxes and the Bhattacharyya box loss."""
from .detector import (AnchorBatch, GroundTruthSet, TotalLossConfig, focal_loss, match_anchors,
                       total_loss)
from .divergences import (DivergenceConfig, LossGradient, bd_loss, bd_loss_grad,
                          bhattacharyya_distance, bounded_loss, box_pair_bd_loss, gwd, gwd_loss,
                          kld, kld_loss)
from .estimators import AspectRatioKDE, GaussianBoxEncoder
from .exceptions import (BDLossError, DegenerateQuadError, InsufficientDataError,
                         InvalidBoxError, InvalidPolicyError, MalformedLineError,
                         SingularCovarianceError)
from .gaussian import (Gaussian2, SquareLikePolicy, anisotropic_covariance, boxes_to_gaussians,
                       gaussian_covariance, gaussian_for_pair, is_square_like,
                       obb_to_anisotropic_gaussian, obb_to_gaussian, pair_to_gaussians)
from .geometry import (ConvexPolygon, Hbb, ObbBox, ciou_loss, hbb_iou, min_area_rect,
                       obb_to_polygon, polygon_area, polygon_clip, rotated_iou)

__version__ = "0.1.0"
