"""Partitions: uniform with singular points snapped to nodes, and Shishkin."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ConfigurationError",
    "Layer",
    "Partition",
    "ResolutionError",
    "build_partition",
    "shishkin_mesh",
]


class ConfigurationError(ValueError):
    """Invalid mesh request."""


class ResolutionError(ConfigurationError):
    """The mesh is too coarse to separate the singular points."""


@dataclass(frozen=True)
class Partition:
    """Strictly increasing nodes ``x_0 < ... < x_N`` and singular flags."""

    nodes: np.ndarray
    singular: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        flags = np.asarray(self.singular, dtype=bool)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ConfigurationError("a partition needs at least two nodes")
        if flags.shape != nodes.shape:
            raise ConfigurationError("singular flags must match the nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise ConfigurationError("nodes must be strictly increasing")
        nodes.setflags(write=False)
        flags.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "singular", flags)

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_max(self) -> float:
        return float(self.sizes.max())

    def element(self, k: int) -> tuple[float, float]:
        """Endpoints of element ``I_k = [x_{k-1}, x_k]`` for ``k = 1..N``."""
        return float(self.nodes[k - 1]), float(self.nodes[k])


def build_partition(
    x_left: float, x_right: float, n: int, singular_points: Iterable[float] = ()
) -> Partition:
    """Uniform partition with each singular point made a node.

    The nearest node to each singular point is moved onto it.  Endpoints
    never move, so a point closer to an endpoint than ``h/2`` captures the
    adjacent interior node instead.
    """
    if int(n) != n or n < 2:
        raise ConfigurationError(f"need an integer N >= 2, got {n}")
    n = int(n)
    if not x_left < x_right:
        raise ConfigurationError("need x_left < x_right")
    nodes = np.linspace(x_left, x_right, n + 1)
    flags = np.zeros(n + 1, dtype=bool)
    h = (x_right - x_left) / n
    taken: dict[int, float] = {}
    for s in sorted(float(s) for s in singular_points):
        if not x_left <= s <= x_right:
            raise ConfigurationError(f"singular point {s} lies outside the domain")
        if s == x_left:
            j = 0
        elif s == x_right:
            j = n
        else:
            j = min(max(int(round((s - x_left) / h)), 1), n - 1)
        if j in taken and taken[j] != s:
            raise ResolutionError(
                f"singular points {taken[j]} and {s} snap to the same node; increase N"
            )
        taken[j] = s
        nodes[j] = s
        flags[j] = True
    if not np.all(np.diff(nodes) > 0.0):
        raise ResolutionError("snapping produced a degenerate element; increase N")
    return Partition(nodes, flags)


@dataclass(frozen=True)
class Layer:
    """A layer to be resolved by a Shishkin mesh.

    ``scale`` is the layer width parameter (``eps`` for exponential layers,
    ``sqrt(eps)`` for turning point layers); ``side`` is ``"left"``,
    ``"right"`` or ``"both"`` and says on which side of ``location`` the fine
    region lies.
    """

    location: float
    scale: float
    side: str

    def sides(self) -> tuple[str, ...]:
        if self.side == "both":
            return ("left", "right")
        if self.side in ("left", "right"):
            return (self.side,)
        raise ConfigurationError(f"unknown layer side {self.side!r}")


def shishkin_mesh(
    x_left: float, x_right: float, n: int, layers: Sequence[Layer]
) -> Partition:
    """Piecewise uniform Shishkin mesh.

    Each fine side of a layer has width ``tau = min(gap/4, 2 * scale * ln N)``,
    where ``gap`` is the distance to the neighbouring layer or endpoint on
    that side.  A single fine region receives ``N/2`` cells; with several,
    each receives ``N/4``.  The remaining cells are spread over the coarse
    regions in proportion to their length.
    """
    if int(n) != n or n < 4 or n % 4:
        raise ConfigurationError(f"Shishkin meshes need N divisible by 4, got {n}")
    n = int(n)
    locs = sorted({float(layer.location) for layer in layers})
    for loc in locs:
        if not x_left <= loc <= x_right:
            raise ConfigurationError(f"layer at {loc} lies outside the domain")
    fine: list[tuple[float, float]] = []
    for layer in layers:
        loc = float(layer.location)
        idx = locs.index(loc)
        for side in layer.sides():
            if side == "left":
                neighbour = locs[idx - 1] if idx > 0 else x_left
            else:
                neighbour = locs[idx + 1] if idx + 1 < len(locs) else x_right
            gap = abs(loc - neighbour)
            if gap == 0.0:
                continue
            tau = min(gap / 4.0, 2.0 * layer.scale * math.log(n))
            fine.append((loc - tau, loc) if side == "left" else (loc, loc + tau))
    if not fine:
        return Partition(np.linspace(x_left, x_right, n + 1), np.zeros(n + 1, bool))
    fine.sort()
    for (a0, a1), (b0, b1) in zip(fine, fine[1:]):
        if b0 < a1:
            raise ConfigurationError("fine regions of the Shishkin mesh overlap")
    per_fine = n // 2 if len(fine) == 1 else n // 4
    coarse_cells = n - per_fine * len(fine)
    # coarse regions are the gaps between fine regions
    coarse: list[tuple[float, float]] = []
    cursor = x_left
    for a, b in fine:
        if a > cursor:
            coarse.append((cursor, a))
        cursor = b
    if cursor < x_right:
        coarse.append((cursor, x_right))
    if coarse_cells < len(coarse) or (coarse_cells and not coarse):
        raise ConfigurationError("too many layers for the requested N")
    lengths = np.array([b - a for a, b in coarse])
    counts = _apportion(coarse_cells, lengths) if coarse else []
    pieces = [(a, b, per_fine) for a, b in fine]
    pieces += [(a, b, c) for (a, b), c in zip(coarse, counts)]
    pieces.sort()
    nodes = [x_left]
    for a, b, cells in pieces:
        nodes.extend(np.linspace(a, b, cells + 1)[1:])
    nodes = np.array(nodes)
    nodes[-1] = x_right
    flags = np.isin(nodes, locs)
    return Partition(nodes, flags)


def _apportion(total: int, lengths: np.ndarray) -> list[int]:
    """Largest-remainder split of ``total`` cells, at least one per region."""
    share = total * lengths / lengths.sum()
    counts = np.maximum(np.floor(share).astype(int), 1)
    while counts.sum() > total:
        counts[np.argmax(counts)] -= 1
    order = np.argsort(-(share - np.floor(share)), kind="stable")
    i = 0
    while counts.sum() < total:
        counts[order[i % len(order)]] += 1
        i += 1
    return [int(c) for c in counts]
