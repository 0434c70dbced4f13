"""Synthetic benchmark generators, the 9-D polynomial lift, CSV I/O and scaling.

The five 2-D generators reproduce fixed sample and class counts
(elliptic_ring 1100/3, olympic 2500/5, spiral 312/3, shape 2000/5,
world_map 2843/5). Their geometry comes from templates committed under
``neurodavis/templates``; jitter is Gaussian with sigma equal to 2% of the
component template's diameter. All generators are deterministic per seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import CsvParseError, InvalidInputError
from .numerics import Rng, as_matrix

SYNTHETIC_KINDS = ("elliptic_ring", "olympic", "spiral", "shape", "world_map")

LIFT9_FEATURES = ("x+y", "x-y", "xy", "x^2", "y^2", "x^2y", "xy^2", "x^3", "y^3")


@dataclass
class Dataset:
    """An n x d matrix with optional dense integer class labels."""

    x: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list[str] | None = None
    name: str = ""

    def __post_init__(self):
        self.x = as_matrix(self.x, "x")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.x.shape[0],):
                raise InvalidInputError(
                    f"labels length {self.labels.shape} does not match "
                    f"{self.x.shape[0]} rows"
                )
            classes = np.unique(self.labels)
            if len(classes) and not np.array_equal(
                classes, np.arange(len(classes))
            ):
                raise InvalidInputError("class ids must be dense from 0")
        if self.feature_names is not None and len(self.feature_names) != self.x.shape[1]:
            raise InvalidInputError("feature_names length must match columns")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1


def _load_template(filename: str) -> dict:
    text = resources.files("neurodavis.templates").joinpath(filename).read_text()
    return json.loads(text)


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd ray casting (horizontal ray towards +x)."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    px, py = poly[:, 0], poly[:, 1]
    for k in range(len(poly)):
        x1, y1 = px[k - 1], py[k - 1]
        x2, y2 = px[k], py[k]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < np.where(crosses, xin, np.inf))
    return inside


def _sample_in_polygon(poly: np.ndarray, count: int, rng: Rng) -> np.ndarray:
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    out = np.empty((0, 2))
    while len(out) < count:
        cand = rng.uniform(lo, hi, size=(2 * (count - len(out)) + 16, 2))
        out = np.vstack([out, cand[_points_in_polygon(cand, poly)]])
    return out[:count]


def _apportion(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder split of ``total`` proportional to ``weights``."""
    quota = total * weights / weights.sum()
    counts = np.floor(quota).astype(np.int64)
    remainder = total - counts.sum()
    order = np.argsort(quota - counts)[::-1]
    counts[order[:remainder]] += 1
    return counts


def _gen_elliptic_ring(rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    a, b = 3.0, 1.8
    sigma_ring = 0.02 * 2 * a
    theta = rng.uniform(0.0, 2.0 * math.pi, 700)
    ring = np.column_stack([a * np.cos(theta), b * np.sin(theta)])
    ring += rng.normal(0.0, sigma_ring, (700, 2))
    balls = []
    for cx in (-1.2, 1.2):
        balls.append(np.array([cx, 0.0]) + rng.normal(0.0, 0.2, (200, 2)))
    x = np.vstack([ring, *balls])
    labels = np.repeat([0, 1, 2], [700, 200, 200])
    return x, labels


def _gen_olympic(rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    tpl = _load_template("olympic.json")
    radius = float(tpl["radius"])
    sigma = 0.02 * 2 * radius
    parts, labels = [], []
    for label, center in enumerate(tpl["centers"]):
        theta = rng.uniform(0.0, 2.0 * math.pi, 500)
        pts = np.asarray(center) + radius * np.column_stack(
            [np.cos(theta), np.sin(theta)]
        )
        parts.append(pts + rng.normal(0.0, sigma, (500, 2)))
        labels.append(np.full(500, label))
    return np.vstack(parts), np.concatenate(labels)


def _gen_spiral(rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    r0, growth, turns = 0.25, 0.3, 3.0 * math.pi
    sigma = 0.02 * 2 * (r0 + growth * turns)
    parts, labels = [], []
    for arm in range(3):
        theta = np.sort(rng.uniform(0.0, turns, 104))
        r = r0 + growth * theta
        phi = theta + arm * 2.0 * math.pi / 3.0
        pts = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        parts.append(pts + rng.normal(0.0, sigma, (104, 2)))
        labels.append(np.full(104, arm))
    return np.vstack(parts), np.concatenate(labels)


def _gen_shape(rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    tpl = _load_template("shape_letters.json")
    spacing = float(tpl["spacing"])
    n_letters = len(tpl["letters"])
    width = (n_letters - 1) * spacing + 1.0
    offset = np.array([-width / 2.0, -1.0])
    parts, labels = [], []
    for idx, letter in enumerate(tpl["letters"]):
        strokes = [np.asarray(s, dtype=float) for s in letter["strokes"]]
        starts = np.array([s[0] for s in strokes])
        ends = np.array([s[1] for s in strokes])
        lengths = np.linalg.norm(ends - starts, axis=1)
        diam = math.hypot(1.0, 2.0)  # letter grid is 1 wide, 2 tall
        seg = rng.choice(len(strokes), size=400, p=lengths / lengths.sum())
        t = rng.uniform(0.0, 1.0, (400, 1))
        pts = starts[seg] + t * (ends[seg] - starts[seg])
        pts += rng.normal(0.0, 0.02 * diam, (400, 2))
        pts[:, 0] += idx * spacing
        parts.append(pts + offset)
        labels.append(np.full(400, letter["label"]))
    return np.vstack(parts), np.concatenate(labels)


def _gen_world_map(rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    tpl = _load_template("world_map.json")
    polys = [np.asarray(c["polygon"], dtype=float) for c in tpl["continents"]]
    areas = np.array([_polygon_area(p) for p in polys])
    counts = _apportion(2843, areas)
    parts, labels = [], []
    for cont, poly, cnt in zip(tpl["continents"], polys, counts):
        parts.append(_sample_in_polygon(poly, int(cnt), rng))
        labels.append(np.full(int(cnt), cont["label"]))
    return np.vstack(parts), np.concatenate(labels)


_GENERATORS = {
    "elliptic_ring": _gen_elliptic_ring,
    "olympic": _gen_olympic,
    "spiral": _gen_spiral,
    "shape": _gen_shape,
    "world_map": _gen_world_map,
}


def gen_synthetic(kind: str, rng: Rng) -> Dataset:
    """Generate one of the committed 2-D benchmarks; see module docstring."""
    if kind not in _GENERATORS:
        raise InvalidInputError(
            f"unknown kind {kind!r}; expected one of {SYNTHETIC_KINDS}"
        )
    x, labels = _GENERATORS[kind](rng)
    return Dataset(x, labels=labels, feature_names=["x", "y"], name=kind)


def lift9(ds: Dataset) -> Dataset:
    """Map 2-D samples (x, y) to the 9-D polynomial feature vector
    (x+y, x-y, xy, x^2, y^2, x^2*y, x*y^2, x^3, y^3), keeping labels."""
    if ds.d != 2:
        raise InvalidInputError(f"lift9 requires 2-D data, got d={ds.d}")
    x, y = ds.x[:, 0], ds.x[:, 1]
    lifted = np.column_stack(
        [x + y, x - y, x * y, x**2, y**2, x**2 * y, x * y**2, x**3, y**3]
    )
    return Dataset(
        lifted,
        labels=None if ds.labels is None else ds.labels.copy(),
        feature_names=list(LIFT9_FEATURES),
        name=f"{ds.name}_lift9" if ds.name else "lift9",
    )


def minmax_scale(ds: Dataset) -> Dataset:
    """Affinely map every column to [0, 1]; constant columns become zeros."""
    lo = ds.x.min(axis=0)
    hi = ds.x.max(axis=0)
    span = hi - lo
    span[span == 0.0] = 1.0  # constant columns: (x - lo) is zero already
    scaled = (ds.x - lo) / span
    return Dataset(
        scaled,
        labels=None if ds.labels is None else ds.labels.copy(),
        feature_names=None if ds.feature_names is None else list(ds.feature_names),
        name=ds.name,
    )


def _parse_cell(cell: str, row: int, col: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CsvParseError(
            f"non-numeric cell {cell!r} at row {row}, column {col}",
            row=row,
            col=col,
        ) from None


def load_csv(
    path,
    label_column: str | int | None = None,
    has_header: bool = True,
) -> Dataset:
    """Load a numeric CSV ('.' decimal, ',' separator, UTF-8) as a Dataset.

    ``label_column`` selects a class-id column by header name or 0-based
    index; label values must be integers and are remapped to dense ids
    starting at 0 (ascending original value). Ragged rows and non-numeric
    cells raise :class:`CsvParseError` with 1-based row/column position.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvParseError("empty file", row=1, col=1)
    header: list[str] | None = None
    if has_header:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
        if not rows:
            raise CsvParseError("no data rows after header", row=2, col=1)
    width = len(rows[0])
    label_idx: int | None = None
    if label_column is not None:
        if isinstance(label_column, str):
            if header is None or label_column not in header:
                raise InvalidInputError(
                    f"label column {label_column!r} not found in header"
                )
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if not 0 <= label_idx < width:
                raise InvalidInputError(
                    f"label column index {label_idx} out of range for {width} columns"
                )
    data = np.empty((len(rows), width), dtype=np.float64)
    offset = 2 if has_header else 1  # 1-based file row of the first data row
    for r, row in enumerate(rows):
        if len(row) != width:
            raise CsvParseError(
                f"ragged row: expected {width} cells, got {len(row)}",
                row=r + offset,
                col=len(row) + 1,
            )
        for c, cell in enumerate(row):
            data[r, c] = _parse_cell(cell.strip(), r + offset, c + 1)
    labels = None
    if label_idx is not None:
        raw = data[:, label_idx]
        if not np.all(raw == np.round(raw)):
            bad = int(np.flatnonzero(raw != np.round(raw))[0])
            raise CsvParseError(
                "label column contains non-integer values",
                row=bad + offset,
                col=label_idx + 1,
            )
        ids = raw.astype(np.int64)
        classes = np.unique(ids)
        labels = np.searchsorted(classes, ids)
        data = np.delete(data, label_idx, axis=1)
        if header is not None:
            header = header[:label_idx] + header[label_idx + 1 :]
    return Dataset(data, labels=labels, feature_names=header, name="")


def save_csv(ds: Dataset, path) -> None:
    """Write a Dataset as CSV with a header; floats use 17 significant digits
    so a save/load round trip reproduces values bit-exactly. A ``label``
    column is appended when labels are present."""
    names = ds.feature_names or [f"x{i}" for i in range(ds.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + (["label"] if ds.labels is not None else []))
        for i in range(ds.n):
            row = [format(v, ".17g") for v in ds.x[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            writer.writerow(row)
