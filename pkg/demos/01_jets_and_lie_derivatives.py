"""Second-order jets and Lie derivatives, step by step.

Everything downstream is built on two operations: evaluating an
expression into an exact (value, gradient, Hessian) jet, and
contracting jets with vector-field components to get directional
derivatives.  No numerical differencing is involved anywhere.
"""

import numpy as np

from hfreemaps import Chart, anticommutator, eval_jet2, lie, lie2, parse, parse_field

plane = Chart(("x", "y"))

# --- a jet is the full second-order behaviour at a point -------------------

f = parse("y*exp(x)")
jet = eval_jet2(f, plane, (1.0, 2.0))
print("f = y*exp(x) at (1, 2)")
print("  value   :", jet.value)
print("  gradient:", jet.gradient)
print("  hessian :\n", jet.hessian)

# --- directional derivatives along a field ---------------------------------

# this field is tangent to the level sets of (y^2 - 1) e^x
xi = parse_field(plane, "2*y", "1-y^2")
integral = parse("(y^2-1)*exp(x)")

print("\nL_xi applied to the first integral (should vanish):")
for p in [(0.0, 0.0), (1.0, 0.5), (-1.0, -0.4)]:
    print(f"  at {p}: {lie(xi, integral, p):+.2e}")

print("\nL_xi applied to y*exp(x) (equals (1 + y^2) e^x, always positive):")
for p in [(0.0, 0.0), (1.0, 0.5), (-1.0, -0.4)]:
    print(f"  at {p}: {lie(xi, f, p):.6f}   closed form "
          f"{(1 + p[1] ** 2) * np.exp(p[0]):.6f}")

# --- second-order operators -------------------------------------------------

space = Chart(("x", "y", "z"))
xi1 = parse_field(space, "0", "1", "0")
xi2 = parse_field(space, "1", "0", "-y")
height = parse("z")

print("\nIterated and symmetrized derivatives for the contact frame:")
print("  L_1 L_2 z          =", lie2(xi1, xi2, height, (0.3, -0.2, 0.9)))
print("  {L_1, L_2} z       =", anticommutator(xi1, xi2, height, (0.3, -0.2, 0.9)))
print("  {L_1, L_1} (y^2)   =",
      anticommutator(xi1, xi1, parse("y^2"), (0.0, 0.0, 0.0)), "(twice L_1^2)")
