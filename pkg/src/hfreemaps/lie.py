"""Lie-derivative calculus on second-order jets.

Everything here is pointwise and exact: ``lie2`` composes the jets of
the function and of the second field's components in a single pass
rather than differentiating through a closure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Chart, Expr, coordinates, derivative, eval_jet2, fold_add, fold_mul, parse


@dataclass(frozen=True)
class VectorField:
    """Vector field on a chart, one component expression per coordinate."""

    chart: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        if isinstance(self.components, list):
            object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != self.chart.dim:
            raise ValueError(
                f"field needs {self.chart.dim} components, got {len(self.components)}")
        declared = set(self.chart.coords)
        for comp in self.components:
            undeclared = coordinates(comp) - declared
            if undeclared:
                raise ValueError(f"undeclared coordinates {sorted(undeclared)}")


def parse_field(chart: Chart, *component_texts: str) -> VectorField:
    return VectorField(chart, tuple(parse(t) for t in component_texts))


def _check_shared_chart(*objs):
    charts = {obj.chart for obj in objs}
    if len(charts) != 1:
        raise ValueError("arguments must share one chart")


def lie(xi: VectorField, f: Expr, p) -> float:
    """Directional derivative of ``f`` along ``xi`` at ``p``."""
    chart = xi.chart
    jf = eval_jet2(f, chart, p)
    values = np.array([float(eval_jet2(c, chart, p).value) for c in xi.components])
    return float(values @ jf.gradient)


def lie2(xi: VectorField, eta: VectorField, f: Expr, p) -> float:
    """Iterated derivative along ``xi`` then ``eta``:
    ``sum_ab [xi^a (d_a eta^b) d_b f + xi^a eta^b d_ab f]``."""
    _check_shared_chart(xi, eta)
    chart = xi.chart
    jf = eval_jet2(f, chart, p)
    xv = np.array([float(eval_jet2(c, chart, p).value) for c in xi.components])
    eta_jets = [eval_jet2(c, chart, p) for c in eta.components]
    ev = np.array([float(j.value) for j in eta_jets])
    eg = np.stack([j.gradient for j in eta_jets])  # eg[b, a] = d_a eta^b
    first = np.einsum("a,ba,b->", xv, eg, jf.gradient)
    second = np.einsum("a,b,ab->", xv, ev, jf.hessian)
    return float(first + second)


def anticommutator(xi: VectorField, eta: VectorField, f: Expr, p) -> float:
    """Symmetrized second derivative ``L_xi L_eta f + L_eta L_xi f``."""
    return lie2(xi, eta, f, p) + lie2(eta, xi, f, p)


def lie_expr(xi: VectorField, f: Expr) -> Expr:
    """The directional derivative along ``xi`` as an expression tree."""
    out: Expr = fold_mul(xi.components[0], derivative(f, xi.chart.coords[0]))
    for name, comp in zip(xi.chart.coords[1:], xi.components[1:]):
        out = fold_add(out, fold_mul(comp, derivative(f, name)))
    return out
