"""Square m-QAM constellations, decision regions, and bit mapping.

Constellation points live on the grid {(2p-1)d, p = -sqrt(m)/2 .. sqrt(m)/2}
on each axis, with the half minimum distance d chosen so the mean symbol
energy is one.  Points are classified by the shape of their decision region:
the four corners (quarter-plane), the edge points (half-strip), and the
interior points (box).  Detection is global minimum distance, which on this
rectangular grid coincides with decision-region membership.
"""

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np


class SubsetLabel(Enum):
    CORNER = "corner"
    BOUNDARY = "boundary"
    INTERIOR = "interior"


@dataclass(frozen=True)
class Constellation:
    """m-QAM constellation with unit mean symbol energy.

    ``points[i * L + q]`` has in-phase level ``i`` and quadrature level ``q``
    (levels ascending, L = sqrt(m)); ``labels`` tags each point's subset.
    """

    m: int
    delta: float
    points: np.ndarray
    labels: tuple

    @property
    def side(self):
        return int(round(np.sqrt(self.m)))

    @property
    def bits_per_symbol(self):
        return int(round(np.log2(self.m)))

    def subset_counts(self):
        """Number of (corner, boundary, interior) points."""
        return (
            sum(1 for l in self.labels if l is SubsetLabel.CORNER),
            sum(1 for l in self.labels if l is SubsetLabel.BOUNDARY),
            sum(1 for l in self.labels if l is SubsetLabel.INTERIOR),
        )

    def to_dict(self):
        return {
            "m": self.m,
            "delta": self.delta,
            "points": [[p.real, p.imag] for p in self.points],
            "labels": [l.value for l in self.labels],
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def half_min_distance(m):
    """Half of the minimum distance for unit mean symbol energy."""
    return np.sqrt(3.0 / (2.0 * (m - 1.0)))


def _side_length(m):
    if m < 4:
        raise ValueError(f"unsupported modulation order m={m}: need m >= 4")
    side = int(round(np.sqrt(m)))
    if side * side != m or side % 2:
        raise ValueError(
            f"unsupported modulation order m={m}: need an even perfect square"
        )
    return side


def build_constellation(m):
    """Construct the unit-energy square m-QAM constellation with labels."""
    side = _side_length(m)
    delta = half_min_distance(m)
    levels = (2.0 * np.arange(side) - side + 1.0) * delta
    re, im = np.meshgrid(levels, levels, indexing="ij")
    points = (re + 1j * im).reshape(m)

    labels = []
    for i in range(side):
        for q in range(side):
            on_edge = (i in (0, side - 1)) + (q in (0, side - 1))
            if on_edge == 2:
                labels.append(SubsetLabel.CORNER)
            elif on_edge == 1:
                labels.append(SubsetLabel.BOUNDARY)
            else:
                labels.append(SubsetLabel.INTERIOR)
    return Constellation(m=m, delta=delta, points=points, labels=tuple(labels))


def classify_point(point, m):
    """Subset label of a constellation member; raises for non-members."""
    c = build_constellation(m)
    idx = int(np.argmin(np.abs(c.points - point)))
    if abs(c.points[idx] - point) > 1e-9 * c.delta:
        raise ValueError(f"{point} is not a point of the {m}-QAM constellation")
    return c.labels[idx]


def detect(r, c):
    """Minimum-distance detection: index of the nearest constellation point.

    Works element-wise on arrays.  Distance ties (a measure-zero event)
    resolve to the lowest point index.
    """
    r = np.asarray(r, dtype=complex)
    if not np.all(np.isfinite(r)):
        raise ValueError("receive samples must be finite")
    dr = r.real[..., None] - c.points.real
    di = r.imag[..., None] - c.points.imag
    idx = np.argmin(dr * dr + di * di, axis=-1)
    return idx if r.ndim else int(idx)


def _gray_codes(side):
    """index -> Gray label and its inverse, for one axis with ``side`` levels."""
    idx = np.arange(side)
    gray = idx ^ (idx >> 1)
    inverse = np.empty(side, dtype=int)
    inverse[gray] = idx
    return gray, inverse


def map_bits(bits, c):
    """Gray-map a bit sequence to constellation point indices.

    Each symbol consumes log2(m) bits: the first half selects the in-phase
    level, the second half the quadrature level, both Gray-coded so adjacent
    levels differ in one bit.  The complex symbols are ``c.points[indices]``.
    """
    bits = np.asarray(bits, dtype=int)
    bps = c.bits_per_symbol
    if bits.ndim != 1 or bits.size % bps:
        raise ValueError(f"bit count must be a multiple of {bps}")
    side = c.side
    half = bps // 2
    weights = 1 << np.arange(half - 1, -1, -1)
    grouped = bits.reshape(-1, 2, half)
    _, inverse = _gray_codes(side)
    i_level = inverse[grouped[:, 0, :] @ weights]
    q_level = inverse[grouped[:, 1, :] @ weights]
    return i_level * side + q_level


def unmap_bits(indices, c):
    """Inverse of :func:`map_bits`: point indices back to the bit sequence."""
    indices = np.asarray(indices, dtype=int)
    side = c.side
    half = c.bits_per_symbol // 2
    gray, _ = _gray_codes(side)
    labels = np.stack([gray[indices // side], gray[indices % side]], axis=1)
    shifts = np.arange(half - 1, -1, -1)
    bits = (labels[..., None] >> shifts) & 1
    return bits.reshape(-1)
