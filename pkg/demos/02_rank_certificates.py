"""Rank-certifying maps relative to a framed distribution.

The freedom matrix stacks the first-order rows L_a F and one
second-order row per index pair (iterated derivative on the diagonal,
anticommutator off it).  Full row rank k + k(k+1)/2 is the property
that makes the linearized metric-inducing system solvable, and it is
certified through singular values.
"""

import numpy as np

from hfreemaps import (
    Chart,
    Distribution,
    freedom_matrix,
    induced_metric,
    is_h_immersion_at,
    is_hfree_at,
    parse_field,
    parse_map,
    wintergarten_rank,
)

space = Chart(("x", "y", "z"))
frame = Distribution(space, (parse_field(space, "0", "1", "0"),
                             parse_field(space, "1", "0", "-y")))
F = parse_map(space, "y", "x", "exp(y)", "exp(x)", "z")

print("Frame: span{(0,1,0), (1,0,-y)} on R^3;  F = (y, x, e^y, e^x, z)\n")

M = freedom_matrix(frame, F, (0.0, 0.0, 0.0))
print("freedom matrix at the origin:")
print(M.entries)
print("rank:", M.certified_rank, " det:", M.det(),
      " singular values:", np.round(M.singular_values, 3))

# the determinant follows exp(x + y) exactly, so the map certifies
# everywhere; sample a sweep
rng = np.random.default_rng(0)
pts = rng.uniform(-2, 2, size=(5, 3))
print("\ndet vs exp(x+y) on random points:")
for p in pts:
    print(f"  {freedom_matrix(frame, F, p).det():12.6f}   {np.exp(p[0]+p[1]):12.6f}")

p = (0.4, -0.7, 1.2)
cert = is_hfree_at(frame, F, p)
print("\ncertificate at", p, "->", bool(cert),
      "(rank", cert.matrix.certified_rank, ")")
print("immersion:", is_h_immersion_at(frame, F, p))
print("normal-map rank:", wintergarten_rank(frame, F, p),
      " (equals 3 = k(k+1)/2 exactly when the certificate holds)")

g = induced_metric(frame, F, (0.0, 0.0, 0.0))
print("\ninduced metric at the origin:\n", g.matrix)
print("positive definite:", g.is_positive_definite())

# a map with vanishing second derivatives can never certify
affine = parse_map(space, "x", "y", "z", "x+y", "x-z")
print("\naffine map certificate:", bool(is_hfree_at(frame, affine, p)),
      "(second-order rows vanish)")
