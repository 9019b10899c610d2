"""Brackets from a metric, an orientation and n-2 distinguished functions.

On an oriented n-dimensional chart, n-2 pointwise-independent functions
define a bracket: the determinant of their gradients stacked with the
gradients of the two arguments (divided by sqrt(det g) for non-flat
metrics).  Each distinguished function is a Casimir, and any extra
Hamiltonian h gives a one-dimensional distribution along which curve
compositions certify.
"""

import numpy as np

from hfreemaps import Chart, parse
from hfreemaps.constructions import (
    FreeCurve,
    RPBracketSpec,
    build_rp,
    hamiltonian_field,
    rp_bracket,
    verify_rp,
)

space = Chart(("x", "y", "z"))
spec = RPBracketSpec(space, (parse("x"),))

print("bracket with the plane Casimir x:")
print("  {y, z} =", rp_bracket(spec, "y", "z", (0.3, 1.0, -0.7)))
print("  {z, y} =", rp_bracket(spec, "z", "y", (0.3, 1.0, -0.7)))
print("  {x, y*z^2} =", rp_bracket(spec, "x", "y*z^2", (0.3, 1.0, -0.7)),
      "(Casimirs annihilate everything)")

xi_y = hamiltonian_field(spec, "y")
print("\nHamiltonian field of h = y:", [str(c) for c in xi_y.components])

rng = np.random.default_rng(11)
pts = rng.uniform(-2, 2, size=(100, 3))
built = build_rp(spec, "y", "z", FreeCurve.exp(), pts)
print("construction F =", [str(c) for c in built.map_spec.components])
print("certified along the Hamiltonian direction at all points:",
      bool(verify_rp(spec, built, pts).all()))

# constant-form bracket on a torus chart
torus = Chart(("t1", "t2", "t3"))
novikov = RPBracketSpec(torus, (parse("0.2*t1+0.5*t2+1.0*t3"),))
print("\ntorus bracket with constant form (0.2, 0.5, 1.0):")
print("  {t1, t2} =", rp_bracket(novikov, "t1", "t2", (0.0, 0.0, 0.0)),
      "  (the third form component)")
angles = rng.uniform(-np.pi, np.pi, size=(60, 3))
wound = build_rp(novikov, "t1", "t2", FreeCurve.circle(), angles)
print("  circle-curve construction certified:",
      bool(verify_rp(novikov, wound, angles).all()),
      "(periodic components suit angular coordinates)")
