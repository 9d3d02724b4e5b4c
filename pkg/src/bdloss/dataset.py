"""DOTA label ingestion and aspect-ratio statistics.

A DOTA v1.0 label file holds one object per line::

    x1 y1 x2 y2 x3 y3 x4 y4 category difficult

optionally preceded by ``imagesource:`` and ``gsd:`` header lines.
"""
import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimators import AspectRatioKDE
from .exceptions import DegenerateQuadError, InsufficientDataError, MalformedLineError
from .geometry import min_area_rect

logger = logging.getLogger(__name__)

HEADER_PREFIXES = ("imagesource:", "gsd:")
SCATTER_HEADER = ("category", "w", "h", "ratio", "square_like")
KDE_HEADER = ("category", "grid_x", "density")


class NonNumericCoordinateError(MalformedLineError):
    pass


def _segments_cross(p1, p2, p3, p4):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    d1, d2 = orient(p3, p4, p1), orient(p3, p4, p2)
    d3, d4 = orient(p1, p2, p3), orient(p1, p2, p4)
    return d1 * d2 < 0 and d3 * d4 < 0


@dataclass(frozen=True)
class AnnotationRecord:
    quad: tuple
    category: str
    difficult: bool = False

    def __post_init__(self):
        quad = tuple(float(v) for v in self.quad)
        if len(quad) != 8:
            raise ValueError(f"quad needs 8 coordinates, got {len(quad)}")
        if not all(math.isfinite(v) for v in quad):
            raise ValueError("quad coordinates must be finite")
        if not self.category:
            raise ValueError("category must be non-empty")
        pts = self.points()
        if _segments_cross(pts[0], pts[1], pts[2], pts[3]) or \
                _segments_cross(pts[1], pts[2], pts[3], pts[0]):
            raise ValueError("quadrilateral is self-intersecting")
        object.__setattr__(self, "quad", quad)
        object.__setattr__(self, "difficult", bool(self.difficult))

    def points(self):
        return np.asarray(self.quad, dtype=float).reshape(4, 2)


def parse_dota_annotation(text, source=None):
    """Parse label text into records, in file order."""
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.lower().startswith(HEADER_PREFIXES):
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise MalformedLineError(f"expected 10 fields, got {len(tokens)}", lineno, source)
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError:
            raise NonNumericCoordinateError(
                f"non-numeric coordinate in {tokens[:8]}", lineno, source) from None
        if tokens[9] not in ("0", "1"):
            raise MalformedLineError(f"difficult flag must be 0 or 1, got {tokens[9]!r}",
                                     lineno, source)
        try:
            records.append(AnnotationRecord(tuple(coords), tokens[8], tokens[9] == "1"))
        except ValueError as exc:
            raise MalformedLineError(str(exc), lineno, source) from None
    return records


def iter_label_files(paths):
    """Expand files and directories (``*.txt``, sorted) into label files."""
    for p in map(Path, paths):
        if p.is_dir():
            yield from sorted(p.glob("*.txt"))
        elif p.exists():
            yield p
        else:
            raise FileNotFoundError(p)


def load_dota_labels(paths):
    """Parse every label file under ``paths``.

    A file with a malformed line is reported and skipped; the others are
    still loaded. Returns ``(records, errors)``.
    """
    records, errors = [], []
    for path in iter_label_files(paths):
        try:
            records.extend(parse_dota_annotation(path.read_text(encoding="utf-8"), str(path)))
        except MalformedLineError as exc:
            logger.warning("skipping %s", exc)
            errors.append(exc)
    return records, errors


def quad_to_obb(record):
    """Minimum-area oriented rectangle enclosing the quad's corners."""
    try:
        return min_area_rect(record.points())
    except DegenerateQuadError:
        raise DegenerateQuadError(f"degenerate quad {record.quad}") from None


@dataclass
class AspectRatioStats:
    category: str
    ratios: np.ndarray
    grid_x: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self):
        return float(np.trapezoid(self.density, self.grid_x))

    def mode(self):
        return float(self.grid_x[int(np.argmax(self.density))])


def _ratios(records, category=None, include_difficult=True):
    out = []
    for r in records:
        if (category is not None and r.category != category) or \
                (r.difficult and not include_difficult):
            continue
        box = quad_to_obb(r)
        out.append(box.w / box.h)
    return np.asarray(out, dtype=float)


def aspect_ratio_kde(records, category, bandwidth=None, include_difficult=True):
    """Kernel density estimate of long/short ratios for one category.

    The bandwidth defaults to Scott's rule.
    """
    ratios = _ratios(records, category, include_difficult)
    if len(ratios) < 2:
        raise InsufficientDataError(
            f"category {category!r} has {len(ratios)} boxes, need at least 2")
    kde = AspectRatioKDE(bandwidth=bandwidth).fit(ratios)
    return AspectRatioStats(category, ratios, kde.grid_, kde.density_, kde.bandwidth_)


@dataclass(frozen=True)
class ScatterRow:
    category: str
    w: float
    h: float
    ratio: float
    square_like: bool


@dataclass
class SquarenessReport:
    tau: float
    counts: dict
    square_counts: dict
    rows: list
    skipped: int = 0

    @property
    def fractions(self):
        return {c: self.square_counts[c] / n for c, n in self.counts.items()}


def squareness_report(records, tau=1.1, include_difficult=True):
    """Per-category fraction of boxes with long/short <= ``tau``.

    Degenerate quads are counted in ``skipped`` and left out of the fractions.
    """
    counts = defaultdict(int)
    square = defaultdict(int)
    rows = []
    skipped = 0
    for r in records:
        if r.difficult and not include_difficult:
            continue
        try:
            box = quad_to_obb(r)
        except DegenerateQuadError:
            skipped += 1
            continue
        ratio = box.w / box.h
        sq = ratio <= tau
        counts[r.category] += 1
        square[r.category] += sq
        rows.append(ScatterRow(r.category, box.w, box.h, ratio, sq))
    cats = sorted(counts)
    return SquarenessReport(tau, {c: counts[c] for c in cats},
                            {c: square[c] for c in cats}, rows, skipped)


def _fmt(x):
    return repr(float(x))


def _open_csv(path):
    return open(path, "w", encoding="utf-8", newline="")


def write_scatter_csv(path, rows):
    with _open_csv(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCATTER_HEADER)
        for r in rows:
            w.writerow((r.category, _fmt(r.w), _fmt(r.h), _fmt(r.ratio), int(r.square_like)))


def write_kde_csv(path, stats):
    with _open_csv(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KDE_HEADER)
        for s in stats:
            for x, d in zip(s.grid_x, s.density):
                w.writerow((s.category, _fmt(x), _fmt(d)))
