"""Oriented boxes, convex polygon algebra and IoU measures.

Boxes use the long-edge convention: ``w >= h`` and ``theta`` in
``[-pi/2, pi/2)``, with ``theta`` the counter-clockwise angle of the long
edge from the x axis.
"""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateQuadError, InvalidBoxError

EPS_GEO = 1e-9

HALF_PI = math.pi / 2


def normalize_angle(theta):
    """Wrap an angle (scalar or array) into ``[-pi/2, pi/2)``."""
    return np.mod(np.asarray(theta, dtype=float) + HALF_PI, math.pi) - HALF_PI


def normalize_obb(w, h, theta):
    """Return ``(w, h, theta)`` in long-edge form.

    Works elementwise on arrays. ``(w, h, theta)`` and ``(h, w, theta - pi/2)``
    describe the same rectangle, so a short first edge is swapped.
    """
    w = np.asarray(w, dtype=float)
    h = np.asarray(h, dtype=float)
    theta = np.asarray(theta, dtype=float)
    swap = w < h
    w2 = np.where(swap, h, w)
    h2 = np.where(swap, w, h)
    t2 = normalize_angle(np.where(swap, theta - HALF_PI, theta))
    return w2, h2, t2


@dataclass(frozen=True)
class ObbBox:
    """Oriented box ``(cx, cy, w, h, theta)``, normalized on construction."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(float(v)) for v in vals):
            raise InvalidBoxError(f"non-finite box parameters {vals}")
        if not (self.w > 0 and self.h > 0):
            raise InvalidBoxError(f"box sides must be positive, got w={self.w}, h={self.h}")
        w, h, t = normalize_obb(self.w, self.h, self.theta)
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "w", float(w))
        object.__setattr__(self, "h", float(h))
        object.__setattr__(self, "theta", float(t))

    @classmethod
    def from_array(cls, row):
        return cls(*(float(v) for v in row))

    def to_array(self):
        return np.array([self.cx, self.cy, self.w, self.h, self.theta])

    @property
    def area(self):
        return self.w * self.h

    @property
    def aspect_ratio(self):
        return self.w / self.h

    def corners(self):
        """The four corners as a ``(4, 2)`` array in counter-clockwise order."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        local = np.array([[1, -1], [1, 1], [-1, 1], [-1, -1]], dtype=float)
        local *= (self.w / 2, self.h / 2)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + (self.cx, self.cy)

    def contains(self, pts):
        """Vectorized closed point-in-box test for a ``(n, 2)`` array."""
        pts = np.asarray(pts, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = pts[..., 0] - self.cx
        dy = pts[..., 1] - self.cy
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (np.abs(u) <= self.w / 2) & (np.abs(v) <= self.h / 2)

    def transformed(self, angle=0.0, shift=(0.0, 0.0)):
        """Apply a rotation about the origin followed by a translation."""
        c, s = math.cos(angle), math.sin(angle)
        x = c * self.cx - s * self.cy + shift[0]
        y = s * self.cx + c * self.cy + shift[1]
        return ObbBox(x, y, self.w, self.h, self.theta + angle)


@dataclass(frozen=True)
class Hbb:
    """Axis-aligned box given by its corner coordinates."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise InvalidBoxError(f"degenerate horizontal box {self}")

    @property
    def width(self):
        return self.xmax - self.xmin

    @property
    def height(self):
        return self.ymax - self.ymin

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return ((self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2)

    def to_obb(self):
        cx, cy = self.center
        return ObbBox(cx, cy, self.width, self.height, 0.0)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _signed_area(pts):
    if len(pts) < 3:
        return 0.0
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _simplify(pts, eps=EPS_GEO):
    """Drop repeated and collinear vertices from a closed vertex loop."""
    out = [tuple(p) for p in pts]
    changed = True
    while changed and len(out) >= 3:
        changed = False
        n = len(out)
        for i in range(n):
            prev, cur, nxt = out[i - 1], out[i], out[(i + 1) % n]
            base = math.hypot(nxt[0] - prev[0], nxt[1] - prev[1])
            if math.hypot(cur[0] - prev[0], cur[1] - prev[1]) <= eps:
                del out[i]
                changed = True
                break
            # distance of cur from the line prev -> nxt
            if base <= eps or abs(_cross(prev, nxt, cur)) / base <= eps:
                del out[i]
                changed = True
                break
    if len(out) < 3:
        return np.empty((0, 2))
    return np.array(out, dtype=float)


class ConvexPolygon:
    """Convex polygon with counter-clockwise vertices.

    Clockwise input is reversed. An empty vertex list is the empty polygon.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices=()):
        pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(pts):
            pts = _simplify(pts)
        if len(pts) and _signed_area(pts) < 0:
            pts = pts[::-1].copy()
        pts.setflags(write=False)
        self.vertices = pts

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"ConvexPolygon({self.vertices.tolist()!r})"

    @property
    def is_empty(self):
        return len(self.vertices) == 0

    @property
    def area(self):
        return polygon_area(self)

    def centroid(self):
        return self.vertices.mean(axis=0)

    def contains(self, pts):
        """Closed point-in-polygon test for a ``(n, 2)`` array."""
        pts = np.asarray(pts, dtype=float)
        inside = np.ones(pts.shape[:-1], dtype=bool)
        if self.is_empty:
            return ~inside
        v = self.vertices
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            cross = (b[0] - a[0]) * (pts[..., 1] - a[1]) - (b[1] - a[1]) * (pts[..., 0] - a[0])
            inside &= cross >= 0
        return inside


def obb_to_polygon(box):
    return ConvexPolygon(box.corners())


def polygon_area(poly):
    """Shoelace area; 0 for empty or degenerate polygons."""
    return abs(_signed_area(poly.vertices))


def polygon_clip(subject, clip):
    """Intersection of two convex polygons (Sutherland-Hodgman).

    Contact of zero measure (shared edge, single point) yields the empty
    polygon.
    """
    if subject.is_empty or clip.is_empty:
        return ConvexPolygon()
    out = [tuple(p) for p in subject.vertices]
    cv = clip.vertices
    for a, b in zip(cv, np.roll(cv, -1, axis=0)):
        if not out:
            break
        ex, ey = b[0] - a[0], b[1] - a[1]
        norm = math.hypot(ex, ey)
        inp = out
        out = []
        # signed distance to the clip edge, positive on the inner side
        dist = [(ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / norm for p in inp]
        n = len(inp)
        for i in range(n):
            p, q = inp[i], inp[(i + 1) % n]
            dp, dq = dist[i], dist[(i + 1) % n]
            if dp >= -EPS_GEO:
                out.append(p)
            if (dp > EPS_GEO and dq < -EPS_GEO) or (dp < -EPS_GEO and dq > EPS_GEO):
                t = dp / (dp - dq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    if len(out) < 3:
        return ConvexPolygon()
    return ConvexPolygon(out)


def rotated_iou(a, b):
    """Exact IoU of two oriented boxes by polygon clipping."""
    reach = 0.5 * (math.hypot(a.w, a.h) + math.hypot(b.w, b.h))
    if math.hypot(a.cx - b.cx, a.cy - b.cy) > reach:
        return 0.0
    inter = polygon_area(polygon_clip(obb_to_polygon(a), obb_to_polygon(b)))
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def hbb_iou(a, b):
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    inter = max(iw, 0.0) * max(ih, 0.0)
    return inter / (a.area + b.area - inter)


def ciou_loss(a, b):
    """Complete-IoU loss ``1 - IoU + rho^2 / c^2 + alpha * v``.

    ``rho`` is the center distance, ``c`` the diagonal of the smallest
    enclosing box, ``v`` the arctangent aspect-ratio discrepancy and
    ``alpha = v / ((1 - IoU) + v)`` its trade-off weight.
    """
    iou = hbb_iou(a, b)
    (ax, ay), (bx, by) = a.center, b.center
    rho2 = (ax - bx) ** 2 + (ay - by) ** 2
    c2 = (max(a.xmax, b.xmax) - min(a.xmin, b.xmin)) ** 2 \
        + (max(a.ymax, b.ymax) - min(a.ymin, b.ymin)) ** 2
    v = 4 / math.pi ** 2 * (math.atan(b.width / b.height) - math.atan(a.width / a.height)) ** 2
    denom = (1 - iou) + v
    alpha = v / denom if denom > 0 else 0.0
    return 1 - iou + rho2 / c2 + alpha * v


def convex_hull(points):
    """Andrew's monotone chain; returns CCW hull vertices without repeats."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).reshape(-1, 2))))
    if len(pts) <= 2:
        return np.array(pts, dtype=float).reshape(-1, 2)
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def min_area_rect(points):
    """Minimum-area enclosing rectangle via rotating calipers.

    The optimal rectangle has a side collinear with a hull edge, so every
    hull edge direction is tried. Raises :class:`DegenerateQuadError` when the
    hull has (near) zero area.
    """
    hull = convex_hull(points)
    if len(hull) < 3 or abs(_signed_area(hull)) < EPS_GEO:
        raise DegenerateQuadError("point set has no interior")
    best = None
    edges = np.roll(hull, -1, axis=0) - hull
    for e in edges:
        length = math.hypot(e[0], e[1])
        if length <= EPS_GEO:
            continue
        u = e / length
        v = np.array([-u[1], u[0]])
        pu = hull @ u
        pv = hull @ v
        umin, umax, vmin, vmax = pu.min(), pu.max(), pv.min(), pv.max()
        area = (umax - umin) * (vmax - vmin)
        if best is None or area < best[0]:
            best = (area, u, v, umin, umax, vmin, vmax)
    _, u, v, umin, umax, vmin, vmax = best
    center = u * (umin + umax) / 2 + v * (vmin + vmax) / 2
    return ObbBox(center[0], center[1], umax - umin, vmax - vmin,
                  math.atan2(u[1], u[0]))


def _jittered_grid(lo, hi, samples, rng):
    k = max(1, int(math.ceil(math.sqrt(samples))))
    cell = (hi - lo) / k
    ij = np.stack(np.meshgrid(np.arange(k), np.arange(k), indexing="ij"), -1).reshape(-1, 2)
    pts = lo + (ij + rng.random(ij.shape)) * cell
    return pts, cell[0] * cell[1]


def monte_carlo_area(shape, samples=10**6, rng=None):
    """Area of a box or polygon by stratified random sampling.

    Independent of the clipping code: only point-membership tests are used.
    """
    rng = np.random.default_rng(rng)
    verts = shape.corners() if isinstance(shape, ObbBox) else shape.vertices
    if len(verts) == 0:
        return 0.0
    pts, cell_area = _jittered_grid(verts.min(0), verts.max(0), samples, rng)
    return float(np.count_nonzero(shape.contains(pts))) * cell_area


def monte_carlo_iou(a, b, samples=10**5, rng=None):
    """IoU of two oriented boxes by stratified random sampling."""
    rng = np.random.default_rng(rng)
    corners = np.vstack([a.corners(), b.corners()])
    pts, _ = _jittered_grid(corners.min(0), corners.max(0), samples, rng)
    ina = a.contains(pts)
    inb = b.contains(pts)
    union = np.count_nonzero(ina | inb)
    return float(np.count_nonzero(ina & inb)) / union if union else 0.0
