"""Discrete norms, reference restriction and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import Partition

__all__ = [
    "ErrorReport",
    "ErrorRow",
    "convergence_rate",
    "energy_h",
    "error_report",
    "l2_h",
    "linf_h",
    "restrict_to",
]


def _check(values, partition: Partition):
    v = np.asarray(values, dtype=float)
    if v.shape != partition.nodes.shape:
        raise ValueError(
            f"expected {partition.nodes.size} nodal values, got shape {v.shape}"
        )
    return v


def linf_h(values, partition: Partition) -> float:
    """max_i |v_i|."""
    return float(np.max(np.abs(_check(values, partition))))


def l2_h(values, partition: Partition) -> float:
    """sqrt(sum_i v_i^2 (h_i + h_{i+1}) / 2), with h_0 = h_{N+1} = 0."""
    v = _check(values, partition)
    h = partition.sizes
    w = np.zeros(v.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return float(math.sqrt(np.sum(w * v * v)))


def energy_h(values, partition: Partition, eps: float) -> float:
    """sqrt(||v||_{l2,h}^2 + eps * sum_i ((v_i - v_{i-1}) / h_i)^2 h_i)."""
    v = _check(values, partition)
    h = partition.sizes
    grad = np.diff(v) / h
    return float(math.sqrt(l2_h(v, partition) ** 2 + eps * float(np.sum(grad * grad * h))))


def restrict_to(partition: Partition, ref_nodes, ref_values, rtol: float = 1e-12):
    """Reference values at the nodes of ``partition``.

    Nodes must coincide with reference nodes (to ``rtol`` times the domain
    width); otherwise the reference is not nested and a ValueError is raised.
    """
    ref_nodes = np.asarray(ref_nodes, dtype=float)
    ref_values = np.asarray(ref_values, dtype=float)
    x = partition.nodes
    idx = np.clip(np.searchsorted(ref_nodes, x), 1, ref_nodes.size - 1)
    left = ref_nodes[idx - 1]
    right = ref_nodes[idx]
    pick = np.where(np.abs(x - left) <= np.abs(x - right), idx - 1, idx)
    tol = rtol * (x[-1] - x[0])
    miss = np.abs(ref_nodes[pick] - x) > tol
    if miss.any():
        bad = x[miss][0]
        raise ValueError(f"node {bad!r} is not a reference node; refine the reference mesh")
    return ref_values[pick]


def convergence_rate(coarse: float, fine: float, h_coarse: float, h_fine: float) -> Optional[float]:
    """log(e_coarse / e_fine) / log(h_coarse / h_fine), or None if undefined."""
    if not (coarse > 0.0 and fine > 0.0) or h_coarse == h_fine:
        return None
    return math.log(coarse / fine) / math.log(h_coarse / h_fine)


@dataclass(frozen=True)
class ErrorRow:
    example: str
    eps: float
    n: int
    linf: float
    l2: float
    energy: float
    rate_linf: Optional[float]
    rate_l2: Optional[float]
    rate_energy: Optional[float]
    dual_mode: str
    n1: Optional[int]


@dataclass(frozen=True)
class ErrorReport:
    rows: tuple

    def by_eps(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out.setdefault(r.eps, []).append(r)
        return out

    def cell(self, eps: float, n: int) -> ErrorRow:
        for r in self.rows:
            if r.eps == eps and r.n == n:
                return r
        raise KeyError((eps, n))


def error_report(
    solutions: Sequence,
    reference: Callable,
    example: str = "custom",
) -> ErrorReport:
    """Errors of a sweep against a reference.

    ``solutions`` are :class:`~tpgfem.pgfem.GridSolution` objects.
    ``reference(solution)`` returns reference values at its nodes.
    Rates compare consecutive N at equal eps, using h_max.
    """
    rows = []
    prev: dict = {}
    for sol in sorted(solutions, key=lambda s: (-s.epsilon, s.n)):
        ref = np.asarray(reference(sol), dtype=float)
        err = sol.values - ref
        part = sol.partition
        e = (linf_h(err, part), l2_h(err, part), energy_h(err, part, sol.epsilon))
        h = part.h_max
        rates = (None, None, None)
        if sol.epsilon in prev:
            pe, ph = prev[sol.epsilon]
            rates = tuple(convergence_rate(a, b, ph, h) for a, b in zip(pe, e))
        prev[sol.epsilon] = (e, h)
        mode = sol.options.mode
        rows.append(ErrorRow(example, sol.epsilon, sol.n, *e, *rates, mode,
                             sol.options.n1 if mode == "tfpm" else None))
    return ErrorReport(tuple(rows))
