import math

import numpy as np
import pytest
from hypothesis import strategies as st

from bdloss import ObbBox

ACCEPTANCE_LINES = []


def record_criterion(number, name, ok, detail=""):
    """Store one acceptance verdict for the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name} {detail}".rstrip())
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_box(rng, center=10.0, size=(0.5, 5.0)):
    return ObbBox(*rng.uniform(0, center, 2), *rng.uniform(*size, 2),
                  rng.uniform(-math.pi / 2, math.pi / 2))


finite = dict(allow_nan=False, allow_infinity=False)
sizes = st.floats(0.05, 20.0, **finite)
centers = st.floats(-50.0, 50.0, **finite)
angles = st.floats(-math.pi, math.pi, **finite)


@st.composite
def boxes(draw, size=sizes):
    return ObbBox(draw(centers), draw(centers), draw(size), draw(size), draw(angles))


def quad_line(box, category, difficult=0):
    coords = " ".join(repr(float(v)) for v in np.asarray(box.corners()).ravel())
    return f"{coords} {category} {difficult}"


def synthetic_corpus(root, rng, per_category=None):
    """Write label files whose square-like counts are known by construction.

    Returns ``{category: (n_boxes, n_square)}``.
    """
    per_category = per_category or {"plane": (40, 30), "bridge": (40, 4)}
    truth = {}
    files = {i: ["imagesource:GoogleEarth", "gsd:0.5"] for i in range(3)}
    for cat, (n, n_sq) in per_category.items():
        for k in range(n):
            short = rng.uniform(5, 50)
            ratio = rng.uniform(1.0, 1.08) if k < n_sq else rng.uniform(1.3, 6)
            box = ObbBox(*rng.uniform(0, 1000, 2), short * ratio, short,
                         rng.uniform(-math.pi / 2, math.pi / 2))
            files[k % 3].append(quad_line(box, cat, int(k % 7 == 0)))
        truth[cat] = (n, n_sq)
    for i, lines in files.items():
        (root / f"P{i:04d}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return truth
