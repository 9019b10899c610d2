"""Explicit builders of rank-certified maps, with predicted determinants.

Three families are covered:

* composition of a scalar function with a free curve (one-dimensional
  distributions), whose freedom matrix determinant factors as
  ``Dpsi(f) * (L_xi f)^3``;
* products of free curves for commuting frames of integrable systems,
  whose determinant factors as ``C * prod_i g_i^(n+2) Dpsi_i(f^i)``
  with a constant fixed by a brute-force numeric oracle;
* compositions along Hamiltonian fields of Riemann-Poisson brackets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CommutationViolation,
    DegenerateCasimirs,
    DomainError,
    NonTransversal,
)
from .expr import (
    Call,
    Chart,
    Coord,
    Expr,
    Num,
    as_expr,
    derivative,
    eval_jet2_many,
    fold_add,
    fold_mul,
    fold_sub,
    parse,
    substitute,
)
from .geometry import DEFAULT_RANK_TOL, Distribution
from .hfree import MapSpec, freedom_matrix_many, is_hfree_at
from .lie import VectorField, lie_expr

CURVE_VAR = "t"
CURVE_CHART = Chart((CURVE_VAR,))


# ---------------------------------------------------------------------------
# free curves


@dataclass(frozen=True)
class FreeCurve:
    """Plane curve ``t -> (a(t), b(t))`` with ``a'b'' - a''b'`` nonvanishing."""

    kind: str
    components: tuple[Expr, Expr]
    domain: str = "line"

    @staticmethod
    def exp() -> "FreeCurve":
        return FreeCurve("exp", (Coord(CURVE_VAR), Call("exp", Coord(CURVE_VAR))))

    @staticmethod
    def circle() -> "FreeCurve":
        return FreeCurve("circle",
                         (Call("cos", Coord(CURVE_VAR)), Call("sin", Coord(CURVE_VAR))),
                         domain="circle")

    @staticmethod
    def custom(a, b, domain: str = "line",
               interval: tuple[float, float] = (-4.0, 4.0),
               samples: int = 1000) -> "FreeCurve":
        """Build a curve from two expressions in ``t`` after checking its
        freeness on ``interval`` at ``samples`` points."""
        a = parse(a) if isinstance(a, str) else as_expr(a)
        b = parse(b) if isinstance(b, str) else as_expr(b)
        curve = FreeCurve("custom", (a, b), domain=domain)
        ts = np.linspace(interval[0], interval[1], samples)
        vals = curve_freeness_many(curve, ts)
        degenerate = (np.any(vals == 0.0) or not np.all(np.isfinite(vals))
                      or (vals.min() < 0.0 < vals.max()))  # sign change
        if degenerate:
            worst = ts[int(np.argmin(np.abs(vals)))]
            raise ValueError(f"curve is not free on {interval}: vanishes near t={worst:.6g}")
        return curve


def curve_freeness(curve: FreeCurve, t: float) -> float:
    """``a'(t) b''(t) - a''(t) b'(t)``, computed from exact jets."""
    return float(curve_freeness_many(curve, np.array([float(t)]))[0])


def curve_freeness_many(curve: FreeCurve, ts) -> np.ndarray:
    pts = np.asarray(ts, dtype=float)[:, None]
    ja = eval_jet2_many(curve.components[0], CURVE_CHART, pts)
    jb = eval_jet2_many(curve.components[1], CURVE_CHART, pts)
    return (ja.gradient[:, 0] * jb.hessian[:, 0, 0]
            - ja.hessian[:, 0, 0] * jb.gradient[:, 0])


def _freeness_expr(curve: FreeCurve) -> Expr:
    a, b = curve.components
    da, db = derivative(a, CURVE_VAR), derivative(b, CURVE_VAR)
    dda, ddb = derivative(da, CURVE_VAR), derivative(db, CURVE_VAR)
    return fold_sub(fold_mul(da, ddb), fold_mul(dda, db))


def _compose(curve_component: Expr, f: Expr) -> Expr:
    return substitute(curve_component, {CURVE_VAR: f})


# ---------------------------------------------------------------------------
# one-dimensional composition


@dataclass(frozen=True)
class Composed1d:
    """Result of composing ``f`` with a free curve: the two-component map
    and the curve freeness pulled back through ``f``."""

    map_spec: MapSpec
    f: Expr
    curve: FreeCurve
    freeness_of_f: Expr

    def predicted_det(self, xi: VectorField) -> Expr:
        """Predicted determinant ``Dpsi(f) * (L_xi f)^3`` as an expression."""
        return fold_mul(self.freeness_of_f, lie_expr(xi, self.f) ** 3)


def compose_1d(f, curve: FreeCurve, chart: Chart) -> Composed1d:
    """Map ``(a(f), b(f))`` together with its predicted determinant factor."""
    f = parse(f) if isinstance(f, str) else as_expr(f)
    comps = tuple(_compose(c, f) for c in curve.components)
    return Composed1d(MapSpec(chart, comps), f, curve, _compose(_freeness_expr(curve), f))


@dataclass(frozen=True)
class PointwiseCheck:
    """Per-point determinant identity check plus the rank certificate.

    ``identity`` records agreement of the assembled determinant with the
    prediction; ``certified`` records full rank; a point passes only
    when both hold (an identically zero determinant matches the
    prediction of a degenerate input but certifies nothing).  The rank
    evidence (certified ranks, smallest retained singular values and
    thresholds) is kept for reporting.
    """

    points: np.ndarray
    determinants: np.ndarray
    predicted: np.ndarray
    identity: np.ndarray
    certified: np.ndarray
    tolerance: float
    ranks: np.ndarray
    smallest_retained: np.ndarray
    thresholds: np.ndarray

    @property
    def passed(self) -> np.ndarray:
        return self.identity & self.certified

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def max_mismatch(self) -> float:
        return float(np.max(np.abs(self.determinants - self.predicted)))


def _retained(svals: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    out = np.zeros(len(ranks))
    positive = ranks > 0
    out[positive] = svals[positive, ranks[positive] - 1]
    return out


def _certified(dets: np.ndarray, ranks: np.ndarray, need: int,
               tol: float) -> np.ndarray:
    # a determinant within the identity tolerance of zero certifies
    # nothing: with degenerate inputs the assembled entries are pure
    # rounding noise and their relative-threshold rank is meaningless
    return (ranks == need) & (np.abs(dets) > tol * np.maximum(1.0, np.abs(dets)))


def verify_1d(d: Distribution, built: Composed1d, points,
              tol: float = 1e-9) -> PointwiseCheck:
    """Check ``det = Dpsi(f) (L_xi f)^3`` at each point, to relative
    tolerance ``tol * max(1, |det|)``."""
    if d.k != 1:
        raise ValueError("one-dimensional verification needs k = 1")
    pts = np.asarray(points, dtype=float)
    matrices, svals, thresholds, ranks = freedom_matrix_many(d, built.map_spec, pts)
    dets = np.linalg.det(matrices)
    predicted = eval_jet2_many(built.predicted_det(d.frame[0]), d.chart, pts).value
    identity = np.abs(dets - predicted) <= tol * np.maximum(1.0, np.abs(dets))
    return PointwiseCheck(pts, dets, predicted, identity,
                          _certified(dets, ranks, 2, tol), tol,
                          ranks, _retained(svals, ranks), thresholds)


# ---------------------------------------------------------------------------
# commuting frames of integrable systems


@dataclass(frozen=True)
class CisMap:
    """Curve components of each ``f^i`` followed by the products
    ``f^i f^j`` (``i < j``, lexicographic)."""

    map_spec: MapSpec
    fs: tuple[Expr, ...]
    curves: tuple[FreeCurve, ...]

    @property
    def n(self) -> int:
        return len(self.fs)


def build_cis(fs: Sequence, curves: Sequence[FreeCurve], chart: Chart) -> CisMap:
    fs = tuple(parse(f) if isinstance(f, str) else as_expr(f) for f in fs)
    curves = tuple(curves)
    if len(fs) != len(curves):
        raise ValueError("need one curve per function")
    comps: list[Expr] = []
    for f, curve in zip(fs, curves):
        comps.extend(_compose(c, f) for c in curve.components)
    n = len(fs)
    for i in range(n):
        for j in range(i + 1, n):
            comps.append(fs[i] * fs[j])
    return CisMap(MapSpec(chart, tuple(comps)), fs, curves)


_CIS_CONSTANT_CACHE: dict[int, float] = {}


def cis_determinant_constant(n: int) -> float:
    """Brute-force the determinant constant on one canonical instance.

    The oracle builds the model fixture (angle frames ``d/dw_i``,
    ``f^i = w_i``, exponential curves, so every ``g_i = 1``) and divides
    the numeric determinant by ``prod_i Dpsi_i(f^i)``.
    """
    if n in _CIS_CONSTANT_CACHE:
        return _CIS_CONSTANT_CACHE[n]
    coords = tuple(f"a{i+1}" for i in range(n)) + tuple(f"w{i+1}" for i in range(n))
    chart = Chart(coords)
    zero, one = Num(0.0), Num(1.0)
    frame = tuple(
        VectorField(chart, tuple(one if j == n + i else zero for j in range(2 * n)))
        for i in range(n)
    )
    dist = Distribution(chart, frame)
    cis = build_cis([Coord(f"w{i+1}") for i in range(n)],
                    [FreeCurve.exp() for _ in range(n)], chart)
    angles = 0.3 * np.arange(1, n + 1) * (-1.0) ** np.arange(n)
    point = np.concatenate([np.zeros(n), angles])
    matrices, _, _, _ = freedom_matrix_many(dist, cis.map_spec, point[None, :])
    det = float(np.linalg.det(matrices[0]))
    predicted = float(np.prod(np.exp(angles)))
    constant = det / predicted
    _CIS_CONSTANT_CACHE[n] = constant
    return constant


def verify_cis(d: Distribution, built: CisMap, points,
               tol: float = 1e-8, comm_tol: float = 1e-9,
               constant: float | None = None) -> PointwiseCheck:
    """Check the product-map determinant identity at each point.

    First enforces the bracket pattern ``L_i f^j = 0`` for ``i != j``
    and ``g_i = L_i f^i > 0`` (:class:`CommutationViolation` otherwise),
    then compares ``det`` with ``C * prod_i g_i^(n+2) Dpsi_i(f^i)``.
    """
    n = built.n
    if d.k != n:
        raise ValueError(f"distribution has k={d.k}, map was built for n={n}")
    if constant is None:
        constant = cis_determinant_constant(n)
    pts = np.asarray(points, dtype=float)

    L = np.empty((len(pts), n, n))  # L[:, i, j] = L_{xi_i} f^j
    fgrads = [eval_jet2_many(f, d.chart, pts).gradient for f in built.fs]
    for i, field in enumerate(d.frame):
        xivals = np.stack(
            [eval_jet2_many(c, d.chart, pts).value for c in field.components], axis=1)
        for j in range(n):
            L[:, i, j] = np.einsum("bo,bo->b", xivals, fgrads[j])
    g = np.einsum("bii->bi", L).copy()
    scale = np.maximum(1.0, np.max(np.abs(g), axis=1))[:, None, None]
    off = ~np.eye(n, dtype=bool)
    bad = np.abs(L) > comm_tol * scale
    bad &= off
    if np.any(bad):
        b, i, j = (int(x[0]) for x in np.nonzero(bad))
        raise CommutationViolation(
            f"L_{i+1} f^{j+1} = {L[b, i, j]:.3e} != 0 at {pts[b]}")
    if np.any(g <= 0.0):
        b, i = np.unravel_index(int(np.argmin(g)), g.shape)
        raise CommutationViolation(
            f"g_{i+1} = {g[b, i]:.3e} <= 0 at {pts[b]}")

    matrices, svals, thresholds, ranks = freedom_matrix_many(d, built.map_spec, pts)
    dets = np.linalg.det(matrices)
    predicted = np.full(len(pts), constant)
    for i, (f, curve) in enumerate(zip(built.fs, built.curves)):
        fvals = eval_jet2_many(f, d.chart, pts).value
        predicted *= g[:, i] ** (n + 2) * curve_freeness_many(curve, fvals)
    identity = np.abs(dets - predicted) <= tol * np.maximum(1.0, np.abs(dets))
    certified = _certified(dets, ranks, n + n * (n + 1) // 2, tol)
    return PointwiseCheck(pts, dets, predicted, identity, certified, tol,
                          ranks, _retained(svals, ranks), thresholds)


# ---------------------------------------------------------------------------
# Riemann-Poisson brackets


@dataclass(frozen=True)
class RPBracketSpec:
    """Bracket data: ``n - 2`` pointwise-independent functions, an
    optional metric (Euclidean when omitted) and an orientation sign."""

    chart: Chart
    casimirs: tuple[Expr, ...]
    metric: tuple[tuple[Expr, ...], ...] | None = None
    orientation: int = 1

    def __post_init__(self):
        if isinstance(self.casimirs, list):
            object.__setattr__(self, "casimirs", tuple(self.casimirs))
        n = self.chart.dim
        if n < 2:
            raise ValueError("bracket needs dimension >= 2")
        if len(self.casimirs) != n - 2:
            raise ValueError(f"need {n - 2} casimirs for dimension {n}")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if self.metric is not None:
            rows = tuple(tuple(as_expr(x) for x in row) for row in self.metric)
            object.__setattr__(self, "metric", rows)
            if len(rows) != n or any(len(r) != n for r in rows):
                raise ValueError("metric must be n x n")
            for i in range(n):
                for j in range(i + 1, n):
                    if rows[i][j] != rows[j][i]:
                        raise ValueError("metric must be symmetric")

    @property
    def n(self) -> int:
        return self.chart.dim


def _gradient_rows(spec: RPBracketSpec, exprs: Sequence[Expr], pts: np.ndarray) -> np.ndarray:
    return np.stack([eval_jet2_many(e, spec.chart, pts).gradient for e in exprs], axis=1)


def _metric_factor(spec: RPBracketSpec, pts: np.ndarray) -> np.ndarray:
    if spec.metric is None:
        return np.ones(len(pts))
    n = spec.n
    G = np.empty((len(pts), n, n))
    for i in range(n):
        for j in range(n):
            G[:, i, j] = eval_jet2_many(spec.metric[i][j], spec.chart, pts).value
    detg = np.linalg.det(G)
    if np.any(detg <= 0.0):
        raise DomainError("metric determinant must be positive")
    return np.sqrt(detg)


def _check_casimirs(spec: RPBracketSpec, pts: np.ndarray, tol: float):
    if not spec.casimirs:
        return
    rows = _gradient_rows(spec, spec.casimirs, pts)
    svals = np.linalg.svd(rows, compute_uv=False)
    with np.errstate(invalid="ignore"):
        ranks = np.count_nonzero(svals > tol * svals[..., 0:1], axis=-1)
    bad = np.nonzero(ranks < len(spec.casimirs))[0]
    if bad.size:
        raise DegenerateCasimirs(
            f"casimir differentials dependent at {pts[int(bad[0])]}")


def rp_bracket_many(spec: RPBracketSpec, f: Expr, g: Expr, points,
                    tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    _check_casimirs(spec, pts, tol)
    rows = _gradient_rows(spec, tuple(spec.casimirs) + (as_expr(f), as_expr(g)), pts)
    return spec.orientation * np.linalg.det(rows) / _metric_factor(spec, pts)


def rp_bracket(spec: RPBracketSpec, f, g, p, tol: float = DEFAULT_RANK_TOL) -> float:
    """Bracket value: ``orientation * det(casimir/f/g gradients) / sqrt(det metric)``."""
    f = parse(f) if isinstance(f, str) else as_expr(f)
    g = parse(g) if isinstance(g, str) else as_expr(g)
    return float(rp_bracket_many(spec, f, g, np.asarray(p, dtype=float)[None, :], tol)[0])


def _det_expr(rows: list[list[Expr]]) -> Expr:
    """Cofactor expansion of a matrix of expressions along its first row."""
    size = len(rows)
    if size == 1:
        return rows[0][0]
    total: Expr = Num(0.0)
    for col in range(size):
        minor = [[row[c] for c in range(size) if c != col] for row in rows[1:]]
        term = fold_mul(rows[0][col], _det_expr(minor))
        total = fold_add(total, term) if col % 2 == 0 else fold_sub(total, term)
    return total


def _grad_exprs(e: Expr, chart: Chart) -> list[Expr]:
    return [derivative(e, name) for name in chart.coords]


def rp_bracket_expr(spec: RPBracketSpec, f: Expr, g: Expr) -> Expr:
    """The bracket as an expression tree (Euclidean metric only)."""
    if spec.metric is not None:
        raise ValueError("symbolic bracket supports the Euclidean metric only")
    rows = [_grad_exprs(h, spec.chart) for h in spec.casimirs]
    rows.append(_grad_exprs(f, spec.chart))
    rows.append(_grad_exprs(g, spec.chart))
    det = _det_expr(rows)
    return det if spec.orientation == 1 else _negate(det)


def _negate(e: Expr) -> Expr:
    return fold_sub(Num(0.0), e)


def hamiltonian_field(spec: RPBracketSpec, h) -> VectorField:
    """Field ``xi_h`` with ``L_{xi_h} g = {h, g}`` for all ``g``, from the
    cofactor expansion of the casimir/h gradient matrix."""
    h = parse(h) if isinstance(h, str) else as_expr(h)
    n = spec.n
    rows = [_grad_exprs(c, spec.chart) for c in spec.casimirs]
    rows.append(_grad_exprs(h, spec.chart))
    comps: list[Expr] = []
    for beta in range(n):
        minor = [[row[c] for c in range(n) if c != beta] for row in rows]
        cof = _det_expr(minor)
        if (n - 1 + beta) % 2 == 1:
            cof = _negate(cof)
        comps.append(cof)
    if spec.metric is not None:
        G = [[spec.metric[i][j] for j in range(n)] for i in range(n)]
        denom = Call("sqrt", _det_expr(G))
        comps = [c / denom for c in comps]
    if spec.orientation == -1:
        comps = [_negate(c) for c in comps]
    return VectorField(spec.chart, tuple(comps))


@dataclass(frozen=True)
class RpMap:
    """Curve composition along a Hamiltonian direction."""

    map_spec: MapSpec
    field: VectorField
    h: Expr
    f: Expr
    curve: FreeCurve


def build_rp(spec: RPBracketSpec, h, f, curve: FreeCurve, check_points,
             tol: float = DEFAULT_RANK_TOL) -> RpMap:
    """Map ``(a(f), b(f))`` along ``xi_h``; requires ``{h, f} > 0`` at
    every check point (:class:`NonTransversal` otherwise)."""
    h = parse(h) if isinstance(h, str) else as_expr(h)
    f = parse(f) if isinstance(f, str) else as_expr(f)
    pts = np.asarray(check_points, dtype=float)
    rows = _gradient_rows(spec, tuple(spec.casimirs) + (h,), pts)
    svals = np.linalg.svd(rows, compute_uv=False)
    with np.errstate(invalid="ignore"):
        ranks = np.count_nonzero(svals > tol * svals[..., 0:1], axis=-1)
    if np.any(ranks < spec.n - 1):
        raise DegenerateCasimirs("h is not independent from the casimirs")
    brackets = rp_bracket_many(spec, h, f, pts, tol)
    if np.any(brackets <= 0.0):
        worst = pts[int(np.argmin(brackets))]
        raise NonTransversal(
            f"{{h, f}} = {float(np.min(brackets)):.3e} <= 0 at {worst}")
    comps = tuple(_compose(c, f) for c in curve.components)
    return RpMap(MapSpec(spec.chart, comps), hamiltonian_field(spec, h), h, f, curve)


def verify_rp(spec: RPBracketSpec, built: RpMap, points,
              tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Full-rank certification of the built map along ``span{xi_h}`` at
    each point; returns the boolean mask."""
    dist = Distribution(spec.chart, (built.field,))
    pts = np.asarray(points, dtype=float)
    out = np.empty(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        out[i] = bool(is_hfree_at(dist, built.map_spec, p, tol))
    return out
