"""Desk-scale studies behind the CLI.

Each ``run_*`` function returns a summary dict with the fields ``command``,
``seed``, ``trials``, ``verdict`` and ``metrics``, plus optional CSV tables
under ``"tables"`` (name -> (header, rows)) for the CLI to write out.
"""
import math

import numpy as np

from .dataset import (KDE_HEADER, SCATTER_HEADER, aspect_ratio_kde, load_dota_labels,
                      squareness_report)
from .divergences import (DivergenceConfig, bd_loss_grad, bhattacharyya_distance,
                          bounded_loss, box_pair_bd_loss, gwd, kld)
from .gaussian import (SquareLikePolicy, boxes_to_gaussians, gaussian_for_pair,
                       is_square_like, obb_to_gaussian)
from .exceptions import InsufficientDataError
from .geometry import Hbb, ObbBox, ciou_loss, hbb_iou, monte_carlo_iou, rotated_iou
from .sampling import ExperimentConfig, map_chunks, sample_boxes, substream

SYMMETRY_TOL = 1e-12
IDENTITY_TOL = 1e-12
SCALE_REL_TOL = 1e-9
GWD_SCALE_CHANGE = 1e-3
GRAD_REL_TOL = 1e-5
GRAD_ABS_FLOOR = 1e-8
TRIANGLE_SCATTER_ROWS = 10_000
LOSSES = ("bd", "gwd", "kld")
PROPERTIES = ("non_negativity", "identity", "symmetry", "triangle", "scale_invariance")

# stream ids keep the sub-experiments of one seed independent
_TRIPLES, _NEAR, _SCALE, _PAIRS, _GRAD = range(5)


def _distance_fns(dcfg):
    return {
        "bd": lambda p, t: bhattacharyya_distance(p, t, dcfg),
        "gwd": gwd,
        "kld": kld,
    }


def _summary(command, cfg, verdict, metrics, tables=None):
    out = {
        "command": command,
        "seed": None if cfg is None else cfg.seed,
        "trials": None if cfg is None else cfg.trials,
        "verdict": "pass" if verdict else "fail",
        "metrics": metrics,
    }
    if tables:
        out["tables"] = tables
    return out


# --- metric properties -----------------------------------------------------

def _triple_chunk(cfg, dfns):
    def run(chunk, n):
        rng = substream(cfg.seed, _TRIPLES, chunk)
        g = [boxes_to_gaussians(sample_boxes(rng, n, cfg)) for _ in range(3)]
        res = {}
        for name, dist in dfns.items():
            d12 = np.atleast_1d(bounded_loss(dist(g[0], g[1])))
            d21 = np.atleast_1d(bounded_loss(dist(g[1], g[0])))
            d23 = np.atleast_1d(bounded_loss(dist(g[1], g[2])))
            d13 = np.atleast_1d(bounded_loss(dist(g[0], g[2])))
            # raw self-distance: the sqrt in the bounded map would blow
            # roundoff of order 1e-16 up to 1e-8
            d11 = np.atleast_1d(dist(g[0], g[0]))
            self_scale = 1 + np.trace(g[0].cov, axis1=-2, axis2=-1)
            vals = np.stack([d12, d23, d13])
            largest = vals.max(0)
            rest = vals.sum(0) - largest
            res[name] = {
                "negative": int(np.count_nonzero(vals < 0)),
                "self_nonzero": int(np.count_nonzero(d11 > IDENTITY_TOL * self_scale)),
                "distinct_zero": int(np.count_nonzero(d12 <= 0)),
                "asymmetric": int(np.count_nonzero(np.abs(d12 - d21) > SYMMETRY_TOL)),
                "max_asymmetry": float(np.abs(d12 - d21).max()),
                "triangle": int(np.count_nonzero(largest > rest)),
                "scatter": (largest[:TRIANGLE_SCATTER_ROWS], rest[:TRIANGLE_SCATTER_ROWS]),
            }
        return res
    return run


def _near_pair_violations(cfg, dfns, n):
    """Pairs whose loss is tiny must be close in mean and covariance."""
    rng = substream(cfg.seed, _NEAR, 0)
    boxes = sample_boxes(rng, n, cfg)
    eps = 10.0 ** rng.uniform(-10, -2, size=(n, 1))
    jitter = boxes * (1 + eps * rng.uniform(-1, 1, size=boxes.shape))
    p = boxes_to_gaussians(boxes)
    t = boxes_to_gaussians(jitter)
    dmu = np.linalg.norm(p.mean - t.mean, axis=-1)
    dcov = np.linalg.norm(p.cov - t.cov, axis=(-2, -1))
    far = (dmu > 1e-4) | (dcov > 1e-4 * np.linalg.norm(t.cov, axis=(-2, -1)))
    out = {}
    for name, dist in dfns.items():
        small = np.atleast_1d(bounded_loss(dist(p, t))) <= 1e-9
        out[name] = {"near_pairs": int(small.sum()), "violations": int(np.count_nonzero(small & far))}
    return out


def random_invertible(rng, n, max_cond=1e3, min_abs_det=1e-2):
    """``n`` random 2x2 matrices with bounded conditioning."""
    out = np.empty((n, 2, 2))
    filled = 0
    while filled < n:
        m = rng.normal(size=(2 * (n - filled), 2, 2))
        ok = (np.abs(np.linalg.det(m)) > min_abs_det) & (np.linalg.cond(m) < max_cond)
        m = m[ok][: n - filled]
        out[filled:filled + len(m)] = m
        filled += len(m)
    return out


def _scale_suite(cfg, dfns, n):
    rng = substream(cfg.seed, _SCALE, 0)
    p = boxes_to_gaussians(sample_boxes(rng, n, cfg))
    t = boxes_to_gaussians(sample_boxes(rng, n, cfg))
    m = random_invertible(rng, n)
    pm, tm = p.transformed(m), t.transformed(m)
    s2 = 2.0 * np.eye(2)
    ps, ts = p.transformed(s2), t.transformed(s2)
    out = {}
    for name, dist in dfns.items():
        d = np.atleast_1d(dist(p, t))
        dm = np.atleast_1d(dist(pm, tm))
        ds = np.atleast_1d(dist(ps, ts))
        rel = np.abs(dm - d) / (1 + np.abs(d))
        out[name] = {
            "pairs": n,
            "violations": int(np.count_nonzero(rel > SCALE_REL_TOL)),
            "max_rel_change": float(rel.max()),
            "uniform_scale2_changed": int(np.count_nonzero(
                np.abs(ds - d) > GWD_SCALE_CHANGE * np.abs(d))),
        }
    return out


def run_verify_properties(cfg=ExperimentConfig(trials=10**6), policy=None,
                          dcfg=None, scale_pairs=10**4, near_pairs=10**4):
    """Metric-property suite for the bounded BD, GWD and KLD losses.

    Boxes are drawn from ``cfg`` and represented with the plain Gaussian
    form. The verdict passes iff the Bhattacharyya loss shows no violation of
    any property.
    """
    dcfg = dcfg or DivergenceConfig(alpha=cfg.alpha)
    dfns = _distance_fns(dcfg)
    parts = map_chunks(_triple_chunk(cfg, dfns), cfg)
    near = _near_pair_violations(cfg, dfns, near_pairs)
    scale = _scale_suite(cfg, dfns, min(cfg.trials, scale_pairs) if scale_pairs else 0)

    losses = {}
    table = {}
    scatter_rows = []
    for name in LOSSES:
        tot = {k: sum(p[name][k] for p in parts)
               for k in ("negative", "self_nonzero", "distinct_zero", "asymmetric", "triangle")}
        counts = {
            "non_negativity": tot["negative"],
            "identity": tot["self_nonzero"] + tot["distinct_zero"] + near[name]["violations"],
            "symmetry": tot["asymmetric"],
            "triangle": tot["triangle"],
            "scale_invariance": scale[name]["violations"],
        }
        losses[name] = {
            "violations": counts,
            "max_asymmetry": max(p[name]["max_asymmetry"] for p in parts),
            "near_pairs_checked": near[name]["near_pairs"],
            "scale_max_rel_change": scale[name]["max_rel_change"],
            "uniform_scale2_changed": scale[name]["uniform_scale2_changed"],
        }
        table[name] = {prop: counts[prop] == 0 for prop in PROPERTIES}
        largest, rest = parts[0][name]["scatter"]
        scatter_rows.extend((name, a, b) for a, b in zip(largest.tolist(), rest.tolist()))
    verdict = all(table["bd"].values())
    metrics = {
        "triples": cfg.trials,
        "scale_pairs": min(cfg.trials, scale_pairs),
        "losses": losses,
        "table": table,
    }
    tables = {"triangle_scatter": (("loss", "largest", "sum_of_others"), scatter_rows),
              "properties": (("loss",) + PROPERTIES,
                             [(n,) + tuple(int(table[n][p]) for p in PROPERTIES) for n in LOSSES])}
    return _summary("verify-properties", cfg, verdict, metrics, tables)


# --- loss alignment ----------------------------------------------------------

def _random_hbb(rng, cfg):
    c = rng.uniform(*cfg.center_range, size=2)
    s = rng.uniform(*cfg.size_range, size=2)
    return Hbb(c[0] - s[0] / 2, c[1] - s[1] / 2, c[0] + s[0] / 2, c[1] + s[1] / 2)


def sample_horizontal_pairs(cfg):
    """``cfg.trials`` box pairs; even-indexed pairs are redrawn until they
    overlap so both overlapping and separated regimes are covered."""
    rng = substream(cfg.seed, _PAIRS, 0)
    pairs = []
    while len(pairs) < cfg.trials:
        a, b = _random_hbb(rng, cfg), _random_hbb(rng, cfg)
        if len(pairs) % 2 == 0 and hbb_iou(a, b) <= 0:
            continue
        pairs.append((a, b))
    return pairs


def pair_losses(a, b, dcfg=DivergenceConfig(), policy=None):
    """CIoU and the bounded Gaussian losses for one horizontal pair
    (``a`` is the prediction)."""
    pa, pb = gaussian_for_pair(a.to_obb(), b.to_obb(), policy)
    return {
        "iou": hbb_iou(a, b),
        "ciou": ciou_loss(a, b),
        "bd": bounded_loss(bhattacharyya_distance(pa, pb, dcfg)),
        "gwd": bounded_loss(gwd(pa, pb)),
        "kld": bounded_loss(kld(pa, pb)),
    }


def _pearson(x, y):
    x = np.asarray(x) - np.mean(x)
    y = np.asarray(y) - np.mean(y)
    return float(np.dot(x, y) / math.sqrt(np.dot(x, x) * np.dot(y, y)))


def run_compare_losses(cfg=ExperimentConfig(trials=1000), dcfg=None, policy=None,
                       min_corr=0.9):
    dcfg = dcfg or DivergenceConfig(alpha=cfg.alpha)
    rows = []
    vals = {k: [] for k in ("ciou", "bd", "gwd", "kld")}
    for i, (a, b) in enumerate(sample_horizontal_pairs(cfg)):
        r = pair_losses(a, b, dcfg, policy)
        for k in vals:
            vals[k].append(r[k])
        rows.append((i, int(i % 2 == 0), a.xmin, a.ymin, a.xmax, a.ymax,
                     b.xmin, b.ymin, b.xmax, b.ymax,
                     r["iou"], r["ciou"], r["bd"], r["gwd"], r["kld"]))
    ciou = np.array(vals["ciou"])
    mad = {k: math.fsum(np.abs(np.array(vals[k]) - ciou)) / len(ciou) for k in LOSSES}
    corr = {k: _pearson(vals[k], ciou) for k in LOSSES}
    checks = {
        "mad_bd_below_gwd": mad["bd"] < mad["gwd"],
        "mad_bd_below_kld": mad["bd"] < mad["kld"],
        "corr_bd_above_gwd": corr["bd"] > corr["gwd"],
        "corr_bd_above_kld": corr["bd"] > corr["kld"],
        "corr_bd_above_floor": corr["bd"] > min_corr,
    }
    metrics = {"mad_vs_ciou": mad, "corr_vs_ciou": corr, "checks": checks}
    header = ("pair", "overlap_required", "a_xmin", "a_ymin", "a_xmax", "a_ymax",
              "b_xmin", "b_ymin", "b_xmax", "b_ymax", "iou", "ciou", "bd_loss",
              "gwd_loss", "kld_loss")
    return _summary("compare-losses", cfg, all(checks.values()), metrics,
                    {"loss_alignment": (header, rows)})


# --- isotropic failure case --------------------------------------------------

def run_isotropic_demo(policy=SquareLikePolicy(), dcfg=DivergenceConfig(), samples=10**5,
                       seed=0, side=2.0):
    """A square box against its pi/4 rotation.

    The plain representation cannot tell them apart while the exact IoU and
    the anisotropic representation can.
    """
    gt = ObbBox(0.0, 0.0, side, side, 0.0)
    pred = ObbBox(0.0, 0.0, side, side, math.pi / 4)
    gp, gg = obb_to_gaussian(pred), obb_to_gaussian(gt)
    ap, ag = gaussian_for_pair(pred, gt, policy)
    iou = rotated_iou(pred, gt)
    iou_mc = monte_carlo_iou(pred, gt, samples, rng=seed)
    metrics = {
        "gbb_bd": bhattacharyya_distance(gp, gg, dcfg),
        "gbb_bd_loss": bounded_loss(bhattacharyya_distance(gp, gg, dcfg)),
        "iou": iou,
        "iou_monte_carlo": iou_mc,
        "iou_loss": 1.0 - iou,
        "agbb_bd": bhattacharyya_distance(ap, ag, dcfg),
        "agbb_bd_loss": bounded_loss(bhattacharyya_distance(ap, ag, dcfg)),
    }
    verdict = (metrics["gbb_bd"] <= 1e-10 and abs(iou - iou_mc) <= 2e-3
               and metrics["agbb_bd_loss"] > 0.01)
    return _summary("isotropic-demo", None, verdict, metrics)


# --- gradient check ----------------------------------------------------------

def finite_difference_grad(pred, gt, policy=SquareLikePolicy(), dcfg=DivergenceConfig()):
    """Central differences of the box-pair loss in the five pred parameters.

    The step for parameter ``x`` is ``dcfg.grad_step * max(1, |x|)``.
    """
    x = pred.to_array()
    out = np.empty(5)
    for i in range(5):
        step = dcfg.grad_step * max(1.0, abs(x[i]))
        e = np.zeros(5)
        e[i] = step
        hi = box_pair_bd_loss(ObbBox(*(x + e)), gt, policy, dcfg)
        lo = box_pair_bd_loss(ObbBox(*(x - e)), gt, policy, dcfg)
        out[i] = (hi - lo) / (2 * step)
    return out


def gradient_rel_error(analytic, numeric, floor=GRAD_ABS_FLOOR):
    """Per-component ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def sample_grad_pair(rng, cfg, policy, anisotropic):
    """A (pred, gt) pair whose gt is square-like iff ``anisotropic``.

    The prediction is placed near the gt so the loss is not saturated.
    """
    lo, hi = cfg.size_range
    w = rng.uniform(lo, hi)
    if anisotropic:
        ratio = rng.uniform(1.0, policy.tau)
    else:
        ratio = rng.uniform(policy.tau * 1.05, max(policy.tau * 1.1, hi / lo))
    h = max(w / ratio, lo)
    gt = ObbBox(*rng.uniform(*cfg.center_range, size=2), w, h, rng.uniform(*cfg.angle_range))
    pred = ObbBox(gt.cx + rng.normal(0, 1), gt.cy + rng.normal(0, 1),
                  *rng.uniform(lo, hi, size=2), rng.uniform(*cfg.angle_range))
    return pred, gt


def run_grad_check(cfg=ExperimentConfig(trials=1000), policy=None, dcfg=None):
    policy = policy or SquareLikePolicy(cfg.tau, cfg.delta)
    dcfg = dcfg or DivergenceConfig(alpha=cfg.alpha)
    rng = substream(cfg.seed, _GRAD, 0)
    worst = {"agbb": 0.0, "gbb": 0.0}
    counts = {"agbb": 0, "gbb": 0}
    for i in range(cfg.trials):
        pred, gt = sample_grad_pair(rng, cfg, policy, anisotropic=(i % 2 == 0))
        branch = "agbb" if is_square_like(gt, policy) else "gbb"
        _, g = bd_loss_grad(pred, gt, policy, dcfg)
        err = gradient_rel_error(g.as_array(), finite_difference_grad(pred, gt, policy, dcfg))
        worst[branch] = max(worst[branch], float(err.max()))
        counts[branch] += 1
    # gradient at an exact minimum, both branches
    zero_norm = 0.0
    for anis in (True, False):
        _, gt = sample_grad_pair(rng, cfg, policy, anis)
        _, g = bd_loss_grad(gt, gt, policy, dcfg)
        zero_norm = max(zero_norm, float(np.abs(g.as_array()).max()))
    max_err = max(worst.values())
    metrics = {"max_rel_error": max_err, "max_rel_error_by_branch": worst,
               "pairs_by_branch": counts, "grad_at_minimum": zero_norm,
               "tolerance": GRAD_REL_TOL}
    return _summary("grad-check", cfg, max_err <= GRAD_REL_TOL and zero_norm <= 1e-8, metrics)


# --- single pair ---------------------------------------------------------------

def run_iou(a, b, policy=SquareLikePolicy(), dcfg=DivergenceConfig()):
    """All overlap and divergence measures for one (pred, gt) pair."""
    metrics = {"iou": rotated_iou(a, b), "gt_square_like": is_square_like(b, policy)}
    reps = {"gbb": (obb_to_gaussian(a), obb_to_gaussian(b))}
    if metrics["gt_square_like"]:
        reps["agbb"] = gaussian_for_pair(a, b, policy)
    for name, (p, t) in reps.items():
        db = bhattacharyya_distance(p, t, dcfg)
        metrics[name] = {"bd": db, "bd_loss": bounded_loss(db),
                         "kld_loss": bounded_loss(kld(p, t)),
                         "gwd_loss": bounded_loss(gwd(p, t))}
    return _summary("iou", None, True, metrics)



# --- dataset statistics ------------------------------------------------------

def run_analyze_dataset(paths, tau=1.1, bandwidth=None, include_difficult=True):
    """Squareness fractions, scatter rows and per-category KDE curves."""
    records, errors = load_dota_labels(paths)
    report = squareness_report(records, tau, include_difficult)
    kdes, too_small = [], []
    for cat in report.counts:
        try:
            kdes.append(aspect_ratio_kde(records, cat, bandwidth, include_difficult))
        except InsufficientDataError:
            too_small.append(cat)
    metrics = {
        "records": len(records),
        "tau": tau,
        "square_fraction": report.fractions,
        "counts": report.counts,
        "skipped_degenerate": report.skipped,
        "kde_skipped_categories": too_small,
        "kde_bandwidth": {s.category: s.bandwidth for s in kdes},
        "kde_integral": {s.category: s.integral() for s in kdes},
        "errors": [str(e) for e in errors],
    }
    scatter = [(r.category, r.w, r.h, r.ratio, int(r.square_like)) for r in report.rows]
    kde_rows = [(s.category, x, d) for s in kdes for x, d in zip(s.grid_x.tolist(), s.density.tolist())]
    tables = {"scatter": (SCATTER_HEADER, scatter), "kde": (KDE_HEADER, kde_rows)}
    return _summary("analyze-dataset", None, not errors, metrics, tables)
