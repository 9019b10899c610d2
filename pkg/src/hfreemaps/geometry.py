"""Distributions given by explicit frames, and frame changes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Chart, Expr, as_expr, eval_jet2_many
from .lie import VectorField

DEFAULT_RANK_TOL = 1e-9


@dataclass(frozen=True)
class Distribution:
    """Span of ``k`` vector fields on a chart of dimension ``m >= k``."""

    chart: Chart
    frame: tuple[VectorField, ...]

    def __post_init__(self):
        if isinstance(self.frame, list):
            object.__setattr__(self, "frame", tuple(self.frame))
        k = len(self.frame)
        if not 1 <= k <= self.chart.dim:
            raise ValueError(f"frame size {k} out of range for dimension {self.chart.dim}")
        for field in self.frame:
            if field.chart != self.chart:
                raise ValueError("frame fields must live on the distribution chart")

    @property
    def k(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class FrameChange:
    """Pointwise-invertible ``k x k`` matrix of expressions."""

    entries: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(as_expr(x) for x in row) for row in self.entries)
        object.__setattr__(self, "entries", rows)
        k = len(rows)
        if any(len(row) != k for row in rows):
            raise ValueError("frame change must be square")

    @property
    def k(self) -> int:
        return len(self.entries)


def frame_values(d: Distribution, points) -> np.ndarray:
    """Component values of the frame at ``points (B, m)`` as ``(B, k, m)``."""
    pts = np.asarray(points, dtype=float)
    cols = [
        [eval_jet2_many(comp, d.chart, pts).value for comp in field.components]
        for field in d.frame
    ]
    return np.stack([np.stack(col, axis=-1) for col in cols], axis=1)


def frame_rank(d: Distribution, p, tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank of the ``k x m`` frame component matrix at ``p``."""
    matrix = frame_values(d, np.asarray(p, dtype=float)[None, :])[0]
    svals = np.linalg.svd(matrix, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.count_nonzero(svals > tol * svals[0]))


def change_frame(d: Distribution, lam: FrameChange) -> Distribution:
    """New frame ``zeta_a = sum_b lam[a][b] * xi_b``, composed symbolically."""
    if lam.k != d.k:
        raise ValueError(f"frame change is {lam.k}x{lam.k}, distribution has k={d.k}")
    new_fields = []
    for row in lam.entries:
        comps = []
        for alpha in range(d.chart.dim):
            acc: Expr = row[0] * d.frame[0].components[alpha]
            for lam_ab, field in zip(row[1:], d.frame[1:]):
                acc = acc + lam_ab * field.components[alpha]
            comps.append(acc)
        new_fields.append(VectorField(d.chart, tuple(comps)))
    return Distribution(d.chart, tuple(new_fields))
