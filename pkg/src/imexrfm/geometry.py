"""Hyper-rectangular domain decomposition and point generation.

Subdomains are ordered row-major over the per-dimension counts (the last axis
varies fastest), which fixes the global column ordering used by
:mod:`imexrfm.features`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Domain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise ValueError("lower and upper bounds differ in dimension")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ValueError(f"empty domain: lower={lower}, upper={upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))


@dataclass(frozen=True)
class Subdomain:
    center: np.ndarray
    half_width: np.ndarray
    index: int
    # multi-index of the subdomain within the tiling
    position: tuple[int, ...] = ()

    def __post_init__(self):
        if np.any(np.asarray(self.half_width) <= 0):
            raise ValueError("half-widths must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_width


@dataclass(frozen=True)
class InterfacePoint:
    location: np.ndarray
    axis: int
    left_sub: int
    right_sub: int


@dataclass(frozen=True)
class Decomposition:
    domain: Domain
    per_dim_counts: tuple[int, ...]
    subdomains: tuple[Subdomain, ...] = field(repr=False)

    @property
    def M(self) -> int:
        return len(self.subdomains)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def index_of(self, position) -> int:
        return int(np.ravel_multi_index(tuple(position), self.per_dim_counts))

    def neighbor(self, sub: Subdomain, axis: int, step: int = 1) -> Subdomain | None:
        pos = list(sub.position)
        pos[axis] += step
        if not 0 <= pos[axis] < self.per_dim_counts[axis]:
            return None
        return self.subdomains[self.index_of(pos)]

    def locate(self, points) -> np.ndarray:
        """Owning subdomain index of each point (half-open cells, last cell closed)."""
        pts = _as_points(points, self.dim)
        lower = np.asarray(self.domain.lower)
        width = (np.asarray(self.domain.upper) - lower) / np.asarray(self.per_dim_counts)
        cell = np.floor((pts - lower) / width).astype(int)
        cell = np.clip(cell, 0, np.asarray(self.per_dim_counts) - 1)
        return np.ravel_multi_index(tuple(cell.T), self.per_dim_counts)


def _as_points(points, dim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    if pts.shape[1] != dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {dim}")
    return pts


def decompose(domain: Domain, per_dim_counts) -> Decomposition:
    counts = tuple(int(c) for c in np.atleast_1d(per_dim_counts))
    if len(counts) != domain.dim:
        raise ValueError(f"{len(counts)} counts given for a {domain.dim}-D domain")
    if any(c < 1 for c in counts):
        raise ValueError("subdomain counts must be positive")
    edges = [np.linspace(lo, hi, c + 1) for lo, hi, c in zip(domain.lower, domain.upper, counts)]
    subs = []
    for idx, pos in enumerate(itertools.product(*(range(c) for c in counts))):
        a = np.array([edges[k][p] for k, p in enumerate(pos)])
        b = np.array([edges[k][p + 1] for k, p in enumerate(pos)])
        subs.append(Subdomain(center=(a + b) / 2, half_width=(b - a) / 2, index=idx, position=pos))
    return Decomposition(domain=domain, per_dim_counts=counts, subdomains=tuple(subs))


def normalize(sub: Subdomain, points) -> np.ndarray:
    """Map points of ``sub`` to the reference cube [-1, 1]^d."""
    pts = _as_points(points, sub.dim)
    return (pts - sub.center) / sub.half_width


def denormalize(sub: Subdomain, ref_points) -> np.ndarray:
    pts = _as_points(ref_points, sub.dim)
    return pts * sub.half_width + sub.center


def _axis_nodes(q: int, scheme: str) -> np.ndarray:
    if scheme == "uniform-closed":
        return np.linspace(-1.0, 1.0, q)
    if scheme == "uniform-interior":
        return -1.0 + (2.0 * np.arange(q) + 1.0) / q
    raise ValueError(f"unknown collocation scheme {scheme!r}")


def collocation_grid(sub: Subdomain, per_dim_q: int, scheme: str = "uniform-closed") -> np.ndarray:
    """Tensor grid of ``per_dim_q**d`` points in ``sub``, shape (Q, d), last axis fastest."""
    if per_dim_q < 2:
        raise ValueError("need at least 2 collocation points per dimension")
    nodes = _axis_nodes(per_dim_q, scheme)
    ref = np.array(list(itertools.product(nodes, repeat=sub.dim)))
    pts = denormalize(sub, ref)
    # snap closed-grid corners onto the exact subdomain bounds
    if scheme == "uniform-closed":
        for k in range(sub.dim):
            pts[ref[:, k] == -1.0, k] = sub.lower[k]
            pts[ref[:, k] == 1.0, k] = sub.upper[k]
    return pts


def face_points(sub: Subdomain, axis: int, side: int, per_face_count: int) -> np.ndarray:
    """Uniform closed grid on the face of ``sub`` normal to ``axis`` (side -1 or +1)."""
    d = sub.dim
    n = 1 if d == 1 else per_face_count
    tang = [np.linspace(sub.lower[k], sub.upper[k], n) for k in range(d) if k != axis]
    coord = sub.lower[axis] if side < 0 else sub.upper[axis]
    rows = []
    for t in itertools.product(*tang):
        p = list(t)
        p.insert(axis, coord)
        rows.append(p)
    return np.array(rows, dtype=float).reshape(-1, d)


def interface_points(dec: Decomposition, per_face_count: int) -> list[InterfacePoint]:
    if dec.M < 2:
        raise ValueError("interfaces need at least two subdomains")
    if per_face_count < 1:
        raise ValueError("per_face_count must be positive")
    out = []
    for sub in dec.subdomains:
        for axis in range(dec.dim):
            nb = dec.neighbor(sub, axis, +1)
            if nb is None:
                continue
            for p in face_points(sub, axis, +1, per_face_count):
                out.append(InterfacePoint(location=p, axis=axis, left_sub=sub.index, right_sub=nb.index))
    return out
