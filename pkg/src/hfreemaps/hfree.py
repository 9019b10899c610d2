"""Core rank certification for partial isometries.

The central object is the freedom matrix of a map ``F`` relative to a
framed distribution: ``k`` first-order rows ``L_a F``, followed by one
row per index pair ``(a, b)``, ``a <= b`` in lexicographic order, where
the diagonal row holds ``L_a L_a F`` and the off-diagonal row holds the
anticommutator ``L_a L_b F + L_b L_a F``.  A map is H-free at a point
when this ``(k + k(k+1)/2) x q`` matrix has full row rank; the rank is
certified through singular values with a relative threshold.

All assemblies are batched over point sets; single-point entry points
wrap the batch of size one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateFrame,
    DomainError,
    NotHFree,
    NotImmersion,
    TooFewTargets,
)
from .expr import Chart, Expr, as_expr, coordinates, eval_jet2_many, parse
from .geometry import DEFAULT_RANK_TOL, Distribution
from .lie import lie

__all__ = [
    "MapSpec",
    "FreedomMatrix",
    "HFreeCertificate",
    "InducedMetric",
    "parse_map",
    "pair_order",
    "freedom_matrix",
    "freedom_matrix_many",
    "is_hfree_at",
    "is_h_immersion_at",
    "induced_metric",
    "infinitesimal_invert",
    "wintergarten_rank",
]


@dataclass(frozen=True)
class MapSpec:
    """Smooth map into Euclidean space, one component expression each."""

    chart: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        if isinstance(self.components, list):
            object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 2:
            raise ValueError("maps need at least two components")
        declared = set(self.chart.coords)
        for comp in self.components:
            undeclared = coordinates(comp) - declared
            if undeclared:
                raise ValueError(f"undeclared coordinates {sorted(undeclared)}")

    @property
    def q(self) -> int:
        return len(self.components)


def parse_map(chart: Chart, *component_texts: str) -> MapSpec:
    return MapSpec(chart, tuple(parse(t) for t in component_texts))


def pair_order(k: int) -> list[tuple[int, int]]:
    """Second-order row index pairs: ``(a, b)``, ``a <= b``, lexicographic."""
    return [(a, b) for a in range(k) for b in range(a, k)]


@dataclass(frozen=True)
class FreedomMatrix:
    """Assembled freedom matrix at a point, with its rank certificate."""

    entries: np.ndarray          # (k + s_k, q)
    singular_values: np.ndarray  # non-increasing
    certified_rank: int
    threshold: float
    point: np.ndarray
    k: int

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return pair_order(self.k)

    @property
    def first_block(self) -> np.ndarray:
        return self.entries[: self.k]

    def det(self) -> float:
        rows, cols = self.entries.shape
        if rows != cols:
            raise ValueError(f"matrix is {rows}x{cols}, determinant undefined")
        return float(np.linalg.det(self.entries))


@dataclass(frozen=True)
class HFreeCertificate:
    free: bool
    matrix: FreedomMatrix

    def __bool__(self) -> bool:
        return self.free


@dataclass(frozen=True)
class InducedMetric:
    """Pullback of the Euclidean metric restricted to the distribution."""

    matrix: np.ndarray
    point: np.ndarray

    def is_positive_definite(self) -> bool:
        try:
            np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError:
            return False
        return True


# ---------------------------------------------------------------------------
# batched jet assembly


def _map_jets(F: MapSpec, points: np.ndarray):
    """Stacked jets of the map components: values ``(B, q)``, gradients
    ``(B, q, m)``, Hessians ``(B, q, m, m)``."""
    jets = [eval_jet2_many(comp, F.chart, points) for comp in F.components]
    vals = np.stack([j.value for j in jets], axis=1)
    grads = np.stack([j.gradient for j in jets], axis=1)
    hesses = np.stack([j.hessian for j in jets], axis=1)
    return vals, grads, hesses


def _frame_jets(d: Distribution, points: np.ndarray):
    """Frame component values ``XV (B, k, m)`` and their derivatives
    ``XG (B, k, m, m)`` with ``XG[b, a, alpha, beta] = d_beta xi_a^alpha``."""
    vals, grads = [], []
    for field in d.frame:
        jets = [eval_jet2_many(comp, d.chart, points) for comp in field.components]
        vals.append(np.stack([j.value for j in jets], axis=1))
        grads.append(np.stack([j.gradient for j in jets], axis=1))
    return np.stack(vals, axis=1), np.stack(grads, axis=1)


def _first_block(XV, Fgrads):
    # L_a F^i = sum_alpha xi_a^alpha d_alpha F^i
    return np.einsum("bao,bio->bai", XV, Fgrads)


def _lie2_tensor(XV, XG, Fgrads, Fhesses):
    # L_a L_c F^i  =  xi_a^o d_o xi_c^p d_p F^i  +  xi_a^o xi_c^p d_op F^i
    first = np.einsum("bao,bcpo,bip->baci", XV, XG, Fgrads)
    second = np.einsum("bao,bcp,biop->baci", XV, XV, Fhesses)
    return first + second


def _second_block(L2, k: int, doubled_diagonal: bool):
    rows = []
    for a, b in pair_order(k):
        if a == b:
            row = L2[:, a, a, :]
            if doubled_diagonal:
                row = 2.0 * row
            rows.append(row)
        else:
            rows.append(L2[:, a, b, :] + L2[:, b, a, :])
    return np.stack(rows, axis=1)


def _certify_ranks(matrices: np.ndarray, tol: float):
    """Singular values, thresholds and certified ranks for a stack of
    matrices; threshold is ``tol * sigma_max * max(rows, cols)``."""
    svals = np.linalg.svd(matrices, compute_uv=False)
    dim_factor = max(matrices.shape[-2], matrices.shape[-1])
    thresholds = tol * svals[..., 0] * dim_factor
    ranks = np.count_nonzero(svals > thresholds[..., None], axis=-1)
    return svals, thresholds, ranks


def _check_frame(d: Distribution, XV: np.ndarray, tol: float):
    svals = np.linalg.svd(XV, compute_uv=False)
    with np.errstate(invalid="ignore"):
        ranks = np.count_nonzero(svals > tol * svals[..., 0:1], axis=-1)
    bad = np.nonzero(ranks < d.k)[0]
    if bad.size:
        raise DegenerateFrame(
            f"frame rank < {d.k} at {bad.size} of {XV.shape[0]} points "
            f"(first batch index {int(bad[0])})")


def _assemble_many(d: Distribution, F: MapSpec, points: np.ndarray,
                   tol: float, doubled_diagonal: bool = False):
    if F.chart != d.chart:
        raise ValueError("map and distribution must share one chart")
    Fvals, Fgrads, Fhesses = _map_jets(F, points)
    XV, XG = _frame_jets(d, points)
    if not (np.all(np.isfinite(XV)) and np.all(np.isfinite(Fgrads))
            and np.all(np.isfinite(Fhesses)) and np.all(np.isfinite(XG))):
        raise DomainError("non-finite jet values while assembling rows")
    _check_frame(d, XV, tol)
    first = _first_block(XV, Fgrads)
    L2 = _lie2_tensor(XV, XG, Fgrads, Fhesses)
    second = _second_block(L2, d.k, doubled_diagonal)
    return np.concatenate([first, second], axis=1)


def freedom_matrix_many(d: Distribution, F: MapSpec, points,
                        tol: float = DEFAULT_RANK_TOL):
    """Batched assembly: returns ``(matrices (B, R, q), singular values,
    thresholds, certified ranks)``."""
    pts = np.asarray(points, dtype=float)
    matrices = _assemble_many(d, F, pts, tol)
    svals, thresholds, ranks = _certify_ranks(matrices, tol)
    return matrices, svals, thresholds, ranks


def freedom_matrix(d: Distribution, F: MapSpec, p,
                   tol: float = DEFAULT_RANK_TOL) -> FreedomMatrix:
    """Assemble and rank-certify the freedom matrix at one point."""
    pts = np.asarray(p, dtype=float)[None, :]
    matrices, svals, thresholds, ranks = freedom_matrix_many(d, F, pts, tol)
    return FreedomMatrix(
        entries=matrices[0],
        singular_values=svals[0],
        certified_rank=int(ranks[0]),
        threshold=float(thresholds[0]),
        point=np.asarray(p, dtype=float),
        k=d.k,
    )


# ---------------------------------------------------------------------------
# certificates


def required_rank(k: int) -> int:
    return k + k * (k + 1) // 2


def is_hfree_at(d: Distribution, F: MapSpec, p,
                tol: float = DEFAULT_RANK_TOL) -> HFreeCertificate:
    """Full-rank certificate, with the assembled matrix as evidence."""
    need = required_rank(d.k)
    if F.q < need:
        raise TooFewTargets(f"need q >= {need} target components, got q={F.q}")
    matrix = freedom_matrix(d, F, p, tol)
    return HFreeCertificate(free=matrix.certified_rank == need, matrix=matrix)


def is_h_immersion_at(d: Distribution, F: MapSpec, p,
                      tol: float = DEFAULT_RANK_TOL) -> bool:
    """True when the first-order block ``(L_a F^i)`` has rank ``k``."""
    pts = np.asarray(p, dtype=float)[None, :]
    _, Fgrads, _ = _map_jets(F, pts)
    XV, _ = _frame_jets(d, pts)
    _check_frame(d, XV, tol)
    block = _first_block(XV, Fgrads)
    _, _, ranks = _certify_ranks(block, tol)
    return int(ranks[0]) == d.k


def induced_metric(d: Distribution, F: MapSpec, p) -> InducedMetric:
    """Gram matrix ``g_ab = sum_i L_a F^i L_b F^i`` at ``p``."""
    pts = np.asarray(p, dtype=float)[None, :]
    _, Fgrads, _ = _map_jets(F, pts)
    XV, _ = _frame_jets(d, pts)
    block = _first_block(XV, Fgrads)[0]
    g = block @ block.T
    # mirror the upper triangle so symmetry is exact
    g = np.triu(g) + np.triu(g, 1).T
    return InducedMetric(matrix=g, point=np.asarray(p, dtype=float))


def infinitesimal_invert(d: Distribution, F: MapSpec, p, dg, psi,
                         tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Minimum-norm solution of the linearized metric-inducing system.

    ``psi`` is a length-``k`` sequence of expressions (numbers are
    promoted to constants); ``dg`` is a symmetric ``k x k`` matrix of
    expressions.  The solved rows are::

        sum_i L_a F^i  df^i                    = psi_a(p)
        sum_i (L_a L_b + L_b L_a) F^i  df^i    = L_a psi_b + L_b psi_a - dg_ab

    for ``a <= b``.  Raises :class:`NotHFree` when the rank certificate
    fails, since the system may then be unsolvable.
    """
    k = d.k
    psi = [as_expr(x) for x in psi]
    if len(psi) != k:
        raise ValueError(f"psi needs {k} entries")
    dg = [[as_expr(x) for x in row] for row in dg]
    if len(dg) != k or any(len(row) != k for row in dg):
        raise ValueError(f"dg must be {k}x{k}")
    for a in range(k):
        for b in range(a + 1, k):
            if dg[a][b] != dg[b][a]:
                raise ValueError("dg must be symmetric")

    cert = is_hfree_at(d, F, p, tol)
    if not cert.free:
        raise NotHFree(
            f"certified rank {cert.matrix.certified_rank} < {required_rank(k)} at {p}")

    pts = np.asarray(p, dtype=float)[None, :]
    system = _assemble_many(d, F, pts, tol, doubled_diagonal=True)[0]

    psi_vals = [float(eval_jet2_many(e, d.chart, pts).value[0]) for e in psi]
    rhs = list(psi_vals)
    for a, b in pair_order(k):
        lhs = lie(d.frame[a], psi[b], p) + lie(d.frame[b], psi[a], p)
        rhs.append(lhs - float(eval_jet2_many(dg[a][b], d.chart, pts).value[0]))
    rhs = np.array(rhs)

    df, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = float(np.linalg.norm(system @ df - rhs))
    bound = 1e-8 * (1.0 + float(np.linalg.norm(rhs)))
    if residual > bound:
        raise NotHFree(f"residual {residual:.3e} exceeds bound {bound:.3e}")
    return df


def wintergarten_rank(d: Distribution, F: MapSpec, p,
                      tol: float = DEFAULT_RANK_TOL) -> int:
    """Rank of the normal-to-symmetric-tensor map built from the
    anticommutator rows; equals ``k(k+1)/2`` exactly when the map is
    H-free at ``p``."""
    if not is_h_immersion_at(d, F, p, tol):
        raise NotImmersion(f"first-order rows are rank deficient at {p}")
    pts = np.asarray(p, dtype=float)[None, :]
    rows = _assemble_many(d, F, pts, tol, doubled_diagonal=True)[0]
    k = d.k
    first, second = rows[:k], rows[k:]
    # orthonormal basis of the normal space from the full SVD of the
    # first-order block
    _, svals, vh = np.linalg.svd(first, full_matrices=True)
    keep = svals > tol * svals[0] * max(first.shape)
    normal_basis = vh[int(np.count_nonzero(keep)):]
    if normal_basis.shape[0] == 0:
        return 0
    image = second @ normal_basis.T  # (s_k, q - k)
    svals = np.linalg.svd(image, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.count_nonzero(svals > tol * svals[0] * max(image.shape)))
