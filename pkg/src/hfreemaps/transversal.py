"""Transversal functions on planar windows.

For a regular field on a window this module integrates flow lines,
builds tubes around orthogonal leaves, evaluates the monotone-step tube
functions, glues weighted tubes into a single grid function, and checks
positivity of the directional derivative, either by centered
differences on the glued grid or by exact jets for closed-form
candidates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.spatial import cKDTree

from .errors import BlowUp, CoverageGap, OutsideTube
from .expr import eval_jet2_many, eval_value_many
from .lie import VectorField

__all__ = [
    "Window",
    "BumpProfile",
    "Tube",
    "TubeValues",
    "GlueResult",
    "TransversalReport",
    "flow",
    "build_tube",
    "tube_function",
    "glue",
    "verify_transversal",
    "write_grid_csv",
]


@dataclass(frozen=True)
class Window:
    """Rectangle with a node grid; values live on ``(ny, nx)`` arrays."""

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int = 101
    ny: int = 101

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("window must have positive extent")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid resolution must be at least 2")

    def xs(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(self.y0, self.y1, self.ny)

    def nodes(self) -> np.ndarray:
        """All grid nodes, shape ``(ny * nx, 2)``, x fastest."""
        X, Y = np.meshgrid(self.xs(), self.ys())
        return np.column_stack([X.ravel(), Y.ravel()])

    def padded_box(self, pad: float) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([self.x0 - pad, self.y0 - pad])
        hi = np.array([self.x1 + pad, self.y1 + pad])
        return lo, hi


# ---------------------------------------------------------------------------
# adaptive Dormand-Prince 5(4) integration

# stage times are not needed: the integrated fields are autonomous
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4


def _integrate(fun, y0: np.ndarray, t_total: float, rtol: float, atol: float,
               max_step: float = np.inf, bbox=None, freeze_box=None) -> np.ndarray:
    """Advance the autonomous system ``dy/ds = fun(y)`` by ``t_total``.

    ``bbox`` raises :class:`BlowUp` on exit.  ``freeze_box`` instead
    holds any batch row constant once it leaves the box, so the rest of
    a batch can keep integrating past a runaway trajectory.
    """
    y = np.atleast_2d(np.array(y0, dtype=float))
    single = np.ndim(y0) == 1
    if t_total == 0.0:
        return y[0] if single else y
    alive = np.ones(y.shape[0], dtype=bool)
    if freeze_box is not None:
        lo, hi = freeze_box
        alive &= np.all((y >= lo) & (y <= hi), axis=1)
    direction = 1.0 if t_total > 0 else -1.0
    remaining = abs(t_total)
    h = min(remaining, max_step, 0.1)
    k1 = fun(y)
    while remaining > 0.0 and np.any(alive):
        h = min(h, remaining, max_step)
        if h < 1e-13:
            raise BlowUp("step size underflow (trajectory is not integrable here)")
        with np.errstate(over="ignore", invalid="ignore"):
            ks = [k1]
            for stage in range(1, 6):
                incr = sum(a * k for a, k in zip(_DP_A[stage], ks))
                ks.append(fun(y + direction * h * incr))
            y5 = y + direction * h * sum(b * k for b, k in zip(_DP_B5[:6], ks))
            k7 = fun(y5)
            ks.append(k7)
            err = direction * h * sum(e * k for e, k in zip(_DP_E, ks))
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
            ratios = (err[alive] / scale[alive]) ** 2
        err_norm = float(np.sqrt(np.mean(ratios)))
        if np.isfinite(err_norm) and err_norm <= 1.0:
            y = np.where(alive[:, None], y5, y)
            k1 = k7
            remaining -= h
            if not np.all(np.isfinite(y[alive])):
                raise BlowUp("trajectory diverged to a non-finite state")
            if bbox is not None:
                lo, hi = bbox
                if np.any(y[alive] < lo) or np.any(y[alive] > hi):
                    raise BlowUp("trajectory left the bounding box")
            if freeze_box is not None:
                lo, hi = freeze_box
                alive &= np.all((y >= lo) & (y <= hi), axis=1)
            factor = 5.0 if err_norm == 0.0 else 0.9 * err_norm ** -0.2
        else:
            k1 = ks[0]
            factor = 0.2 if not np.isfinite(err_norm) else 0.9 * err_norm ** -0.2
        h *= min(5.0, max(0.2, factor))
    return y[0] if single else y


def _field_fun(xi: VectorField):
    chart = xi.chart

    def fun(y: np.ndarray) -> np.ndarray:
        pts = y if y.ndim == 2 else y[None, :]
        vals = np.stack([eval_value_many(c, chart, pts) for c in xi.components], axis=-1)
        return vals if y.ndim == 2 else vals[0]

    return fun


def _unit_orthogonal_fun(xi: VectorField):
    fun = _field_fun(xi)

    def perp(y: np.ndarray) -> np.ndarray:
        v = fun(y)
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        if np.any(norm == 0.0):
            raise BlowUp("field vanishes on the orthogonal leaf")
        rotated = np.stack([-v[..., 1], v[..., 0]], axis=-1)
        return rotated / norm

    return perp


def flow(xi: VectorField, p, t: float, h_max: float = np.inf, *,
         rtol: float = 1e-10, atol: float = 1e-10, bbox=None) -> np.ndarray:
    """Point reached from ``p`` after flowing along ``xi`` for time ``t``."""
    y0 = np.asarray(p, dtype=float)
    return _integrate(_field_fun(xi), y0, float(t), rtol, atol,
                      max_step=h_max, bbox=bbox)


# ---------------------------------------------------------------------------
# monotone step and bump profiles


class BumpProfile:
    """The classical ``exp(-1/(1-t^2))`` bump and its normalized integral.

    ``step`` rises from 0 to 1 across ``(-1, 1)``, equals 1/2 at 0
    exactly, and has the closed-form derivative ``bump(t) / (2 c)``.
    """

    def __init__(self, resolution: int = 4001):
        u = np.linspace(0.0, 1.0, resolution)
        values = self.bump(u)
        cumulative = np.concatenate(
            [[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(u))])
        self._half_mass = float(cumulative[-1])
        self._cumulative = PchipInterpolator(u, cumulative)

    @staticmethod
    def bump(t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
        return out

    def step(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        clipped = np.minimum(np.abs(t), 1.0)
        half = self._cumulative(clipped) / self._half_mass
        return 0.5 + 0.5 * np.sign(t) * half

    def step_deriv(self, t) -> np.ndarray:
        return 0.5 * self.bump(t) / self._half_mass


# ---------------------------------------------------------------------------
# tubes


@dataclass
class Tube:
    """Flow saturation of an orthogonal leaf, tabulated on an
    (arclength x flow-time) grid."""

    xi: VectorField
    seed: np.ndarray
    window: Window
    transversal: np.ndarray   # (S, 2) points along the orthogonal leaf
    times: np.ndarray         # (T,) flow times, strictly increasing, 0 included
    states: np.ndarray        # (S, T, 2) with states[:, t0] the transversal
    pad: float


def build_tube(xi: VectorField, seed, window: Window, *, t_span: float = 3.0,
               n_t: int = 121, ds: float | None = None, pad: float = 0.75,
               max_samples: int = 4000, rtol: float = 1e-10,
               atol: float = 1e-10) -> Tube:
    """Integrate the orthogonal leaf through ``seed`` across the padded
    window, then tabulate its flow saturation for ``|t| <= t_span``."""
    seed = np.asarray(seed, dtype=float)
    if ds is None:
        ds = max(window.x1 - window.x0, window.y1 - window.y0) / 150.0
    lo, hi = window.padded_box(pad)
    perp = _unit_orthogonal_fun(xi)

    def march(sign: float) -> list[np.ndarray]:
        out = []
        y = seed.copy()
        for _ in range(max_samples):
            y = _integrate(perp, y, sign * ds, rtol, atol)
            if np.any(y < lo) or np.any(y > hi):
                break
            out.append(y.copy())
        return out

    forward = march(+1.0)
    backward = march(-1.0)
    transversal = np.array(backward[::-1] + [seed] + forward)

    if n_t % 2 == 0:
        n_t += 1  # keep t = 0 on the grid
    times = np.linspace(-t_span, t_span, n_t)
    zero = n_t // 2
    states = np.empty((len(transversal), n_t, 2))
    states[:, zero] = transversal
    fun = _field_fun(xi)
    # trajectories freeze once they exit the padded box, so leaves that
    # escape in finite time cannot stall the rest of the batch
    for idx in range(zero + 1, n_t):
        states[:, idx] = _integrate(fun, states[:, idx - 1],
                                    float(times[idx] - times[idx - 1]), rtol, atol,
                                    freeze_box=(lo, hi))
    for idx in range(zero - 1, -1, -1):
        states[:, idx] = _integrate(fun, states[:, idx + 1],
                                    float(times[idx] - times[idx + 1]), rtol, atol,
                                    freeze_box=(lo, hi))
    return Tube(xi, seed, window, transversal, times, states, pad)


def _invert_bilinear(nodes: np.ndarray, p00, p10, p01, p11):
    """Solve ``q = bilinear(u, v)`` on one quad per node; returns
    ``(u, v, ok)`` with ``ok`` flagging solutions inside the unit square."""
    eps = 1e-9
    A = p00 - nodes
    B = p10 - p00
    C = p01 - p00
    D = p00 - p10 - p01 + p11

    def cross(a, b):
        return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]

    # cross u(B + vD) = -(A + vC) with (B + vD) to eliminate u
    a2 = cross(C, D)
    a1 = cross(A, D) + cross(C, B)
    a0 = cross(A, B)

    u = np.full(len(nodes), np.nan)
    v = np.full(len(nodes), np.nan)
    quad = np.abs(a2) > 1e-14 * np.maximum(1.0, np.abs(a1))
    with np.errstate(invalid="ignore", divide="ignore"):
        disc = a1 * a1 - 4.0 * a2 * a0
        ok_disc = disc >= 0.0
        sq = np.sqrt(np.where(ok_disc, disc, 0.0))
        # stable quadratic roots
        qq = -0.5 * (a1 + np.sign(np.where(a1 == 0, 1.0, a1)) * sq)
        r1 = np.where(quad, qq / np.where(a2 == 0, 1.0, a2), -a0 / np.where(a1 == 0, 1.0, a1))
        r2 = np.where(quad & (qq != 0), a0 / np.where(qq == 0, 1.0, qq), r1)
    diam = np.sqrt(np.maximum(np.einsum("nd,nd->n", B, B),
                              np.einsum("nd,nd->n", C, C)))
    for root in (r1, r2):
        cand = ok_disc & (root >= -eps) & (root <= 1.0 + eps) & np.isnan(v)
        if not np.any(cand):
            continue
        denom_x = B[:, 0] + root * D[:, 0]
        denom_y = B[:, 1] + root * D[:, 1]
        use_x = np.abs(denom_x) >= np.abs(denom_y)
        with np.errstate(invalid="ignore", divide="ignore"):
            ux = -(A[:, 0] + root * C[:, 0]) / denom_x
            uy = -(A[:, 1] + root * C[:, 1]) / denom_y
        uu = np.where(use_x, ux, uy)
        # accept only solutions that actually map back onto the node
        residual = (A + uu[:, None] * B + root[:, None] * C
                    + (uu * root)[:, None] * D)
        res_ok = np.einsum("nd,nd->n", residual, residual) <= (1e-7 * diam) ** 2 + 1e-28
        good = cand & (uu >= -eps) & (uu <= 1.0 + eps) & res_ok
        u[good] = uu[good]
        v[good] = root[good]
    ok = ~np.isnan(v)
    return u, v, ok


def _locate_times(tube: Tube, nodes: np.ndarray, window: Window) -> np.ndarray:
    """Flow-time coordinate of every node that lies in the tabulated tube.

    The tube chart can fold over the window (the orthogonal leaf may run
    almost parallel to distant flow lines), so a node can have several
    preimages; all cells whose bounding box meets the node's raster bin
    are tested and the preimage with the smallest ``|t|`` wins.  Nodes
    in no cell get NaN.
    """
    S, T = tube.states.shape[:2]
    p00 = tube.states[:-1, :-1].reshape(-1, 2)
    p10 = tube.states[1:, :-1].reshape(-1, 2)
    p01 = tube.states[:-1, 1:].reshape(-1, 2)
    p11 = tube.states[1:, 1:].reshape(-1, 2)
    t_lo = np.broadcast_to(tube.times[:-1], (S - 1, T - 1)).reshape(-1)
    t_dt = np.broadcast_to(np.diff(tube.times), (S - 1, T - 1)).reshape(-1)

    lo = np.minimum(np.minimum(p00, p10), np.minimum(p01, p11))
    hi = np.maximum(np.maximum(p00, p10), np.maximum(p01, p11))
    wlo = np.array([window.x0, window.y0])
    whi = np.array([window.x1, window.y1])
    diag = float(np.linalg.norm(whi - wlo))
    edge = np.maximum.reduce([
        np.linalg.norm(p10 - p00, axis=1), np.linalg.norm(p01 - p00, axis=1),
        np.linalg.norm(p11 - p10, axis=1), np.linalg.norm(p11 - p01, axis=1)])
    # discard cells sheared apart by frozen trajectories; genuine cells
    # stay small, at the scale of one sample spacing times the flow speed
    keep = (np.all(lo <= whi, axis=1) & np.all(hi >= wlo, axis=1)
            & np.all(np.isfinite(lo), axis=1) & np.all(np.isfinite(hi), axis=1)
            & (edge <= 0.25 * diag) & (edge > 0.0))
    cells = np.nonzero(keep)[0]
    best_t = np.full(len(nodes), np.nan)
    if cells.size == 0:
        return best_t

    grid = 64
    span = whi - wlo

    def to_bins(xy: np.ndarray) -> np.ndarray:
        return np.clip(((xy - wlo) / span * grid).astype(int), 0, grid - 1)

    blo = to_bins(np.maximum(lo[cells], wlo))
    bhi = to_bins(np.minimum(hi[cells], whi))
    # (bin, cell) incidence pairs, one vectorized pass per bin offset
    pair_bins, pair_cells = [], []
    spans = bhi - blo
    for dx in range(int(spans[:, 0].max()) + 1):
        for dy in range(int(spans[:, 1].max()) + 1):
            mask = (spans[:, 0] >= dx) & (spans[:, 1] >= dy)
            if not np.any(mask):
                continue
            bx = blo[mask, 0] + dx
            by = blo[mask, 1] + dy
            pair_bins.append(bx * grid + by)
            pair_cells.append(cells[mask])
    pair_bins = np.concatenate(pair_bins)
    pair_cells = np.concatenate(pair_cells)
    order = np.argsort(pair_bins, kind="stable")
    pair_bins = pair_bins[order]
    pair_cells = pair_cells[order]

    node_bins_xy = to_bins(nodes)
    node_bins = node_bins_xy[:, 0] * grid + node_bins_xy[:, 1]
    starts = np.searchsorted(pair_bins, node_bins, side="left")
    ends = np.searchsorted(pair_bins, node_bins, side="right")
    counts = ends - starts
    total = int(counts.sum())
    if total == 0:
        return best_t
    node_rep = np.repeat(np.arange(len(nodes)), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    flat = np.arange(total) - np.repeat(offsets, counts) + np.repeat(starts, counts)
    cand = pair_cells[flat]

    inside = np.all((nodes[node_rep] >= lo[cand]) & (nodes[node_rep] <= hi[cand]), axis=1)
    node_rep, cand = node_rep[inside], cand[inside]
    if node_rep.size == 0:
        return best_t

    _, v, ok = _invert_bilinear(nodes[node_rep], p00[cand], p10[cand],
                                p01[cand], p11[cand])
    node_rep, cand, v = node_rep[ok], cand[ok], v[ok]
    if node_rep.size == 0:
        return best_t
    t_val = t_lo[cand] + v * t_dt[cand]
    order = np.lexsort((np.abs(t_val), node_rep))
    node_sorted = node_rep[order]
    first = np.unique(node_sorted, return_index=True)[1]
    best_t[node_sorted[first]] = t_val[order][first]
    return best_t


@dataclass(frozen=True)
class TubeValues:
    """Tube function sampled on the window grid.

    ``times`` holds the recovered flow-time coordinate, NaN where the
    node lay outside the tabulated tube and was classified by side.
    """

    values: np.ndarray
    times: np.ndarray
    window: Window


def tube_function(xi: VectorField, tube: Tube, profile: BumpProfile,
                  window: Window | None = None) -> TubeValues:
    """Evaluate ``step(flow time)`` at every window node.

    Nodes inside the tabulated tube are located by inverse bilinear
    interpolation on the (arclength x time) grid; nodes outside it get
    the saturated value of the side they lie on.
    """
    if window is None:
        window = tube.window
    nodes = window.nodes()
    t_of_node = _locate_times(tube, nodes, window)

    values = np.empty(len(nodes))
    located = ~np.isnan(t_of_node)
    values[located] = profile.step(t_of_node[located])

    if np.any(~located):
        # saturated side rule: compare against the flow direction at the
        # nearest transversal point
        missing = np.nonzero(~located)[0]
        trans_tree = cKDTree(tube.transversal)
        _, nearest = trans_tree.query(nodes[missing])
        base = tube.transversal[nearest]
        flow_dir = np.stack(
            [eval_value_many(c, xi.chart, base) for c in xi.components], axis=-1)
        side = np.einsum("nd,nd->n", nodes[missing] - base, flow_dir)
        if np.any(side == 0.0):
            bad = nodes[missing[side == 0.0][0]]
            raise OutsideTube(f"cannot classify node {bad} against the tube")
        values[missing] = np.where(side > 0.0, 1.0, 0.0)

    shape = (window.ny, window.nx)
    return TubeValues(values.reshape(shape), t_of_node.reshape(shape), window)


# ---------------------------------------------------------------------------
# gluing and verification


def _centered_lie_grid(xi: VectorField, values: np.ndarray, window: Window) -> np.ndarray:
    """Directional derivative of a grid function by centered differences;
    NaN on the boundary ring."""
    xs, ys = window.xs(), window.ys()
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    fx = np.full_like(values, np.nan)
    fy = np.full_like(values, np.nan)
    fx[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2.0 * hx)
    fy[1:-1, :] = (values[2:, :] - values[:-2, :]) / (2.0 * hy)
    nodes = window.nodes()
    comp = [eval_value_many(c, xi.chart, nodes).reshape(values.shape)
            for c in xi.components]
    return comp[0] * fx + comp[1] * fy


@dataclass(frozen=True)
class GlueResult:
    values: np.ndarray
    lie_values: np.ndarray   # centered differences, NaN on the boundary
    min_interior: float
    argmin: np.ndarray
    ok: bool


def glue(xi: VectorField, tubes: list[Tube], weights, profile: BumpProfile,
         window: Window) -> GlueResult:
    """Weighted sum of tube functions, with coverage and positivity checks.

    Every node must lie strictly inside the open band ``|t| < 1`` of at
    least one tube (:class:`CoverageGap` otherwise).  The directional
    derivative of the glued grid is then evaluated by centered
    differences; ``ok`` records positivity at all interior nodes.
    """
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(tubes):
        raise ValueError("need one weight per tube")
    fields = [tube_function(xi, tube, profile, window) for tube in tubes]

    covered = np.zeros((window.ny, window.nx), dtype=bool)
    for tv in fields:
        with np.errstate(invalid="ignore"):
            covered |= np.abs(tv.times) < 1.0
    # positivity is asserted on interior nodes, so coverage is demanded there
    if not np.all(covered[1:-1, 1:-1]):
        xs, ys = window.xs(), window.ys()
        uncovered = np.argwhere(~covered[1:-1, 1:-1]) + 1
        cells = [(int(iy), int(ix), float(xs[ix]), float(ys[iy]))
                 for iy, ix in uncovered]
        raise CoverageGap(cells)

    values = sum(w * tv.values for w, tv in zip(weights, fields))
    lie_vals = _centered_lie_grid(xi, values, window)
    interior = lie_vals[1:-1, 1:-1]
    min_idx = np.unravel_index(int(np.argmin(interior)), interior.shape)
    min_val = float(interior[min_idx])
    argmin = np.array([window.xs()[min_idx[1] + 1], window.ys()[min_idx[0] + 1]])
    return GlueResult(values, lie_vals, min_val, argmin, min_val > 0.0)


@dataclass(frozen=True)
class TransversalReport:
    min_value: float
    argmin: np.ndarray
    values: np.ndarray
    lie_values: np.ndarray


def verify_transversal(xi: VectorField, f, window: Window) -> TransversalReport:
    """Exact jet-based directional derivative of ``f`` on the window grid;
    returns the minimum and where it is attained."""
    nodes = window.nodes()
    jf = eval_jet2_many(f, xi.chart, nodes)
    comp = np.stack([eval_value_many(c, xi.chart, nodes) for c in xi.components], axis=-1)
    lie_vals = np.einsum("nd,nd->n", comp, jf.gradient)
    idx = int(np.argmin(lie_vals))
    shape = (window.ny, window.nx)
    return TransversalReport(
        min_value=float(lie_vals[idx]),
        argmin=nodes[idx].copy(),
        values=jf.value.reshape(shape),
        lie_values=lie_vals.reshape(shape),
    )


def write_grid_csv(path, window: Window, values: np.ndarray,
                   lie_values: np.ndarray) -> None:
    """Write ``x,y,f,lie_f`` rows (header line, ``.`` decimals, LF)."""
    xs, ys = window.xs(), window.ys()
    lines = ["x,y,f,lie_f"]
    for iy in range(window.ny):
        for ix in range(window.nx):
            lines.append(f"{float(xs[ix])!r},{float(ys[iy])!r},"
                         f"{float(values[iy, ix])!r},{float(lie_values[iy, ix])!r}")
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(lines) + "\n")
