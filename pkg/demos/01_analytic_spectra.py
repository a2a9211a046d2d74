"""Sanity-check the eigenvalue pipeline against shapes with known spectra.

Three classical cases: a circle (eigenvalues m^2, doubled), the unit sphere
(l(l+1) with multiplicity 2l+1), and the unit square with natural boundary
conditions (pi^2 (p^2 + q^2)).
"""

import math

import numpy as np

from eigenshape import (
    generate_blob,
    generate_contour,
    spectrum_of,
    unit_square_grid,
)

circle = generate_contour([1, 1], [0, 0, 0, 0], 512)
vals = spectrum_of(circle, 7).values
print("circle, k=7")
print("  computed:", np.round(vals, 4))
print("  exact:   ", [0, 1, 1, 4, 4, 9, 9])

sphere = generate_blob([1, 1, 1], np.zeros(7), 3)
vals = spectrum_of(sphere, 9, order="cubic").values
print("\nunit sphere (subdivision 3), cubic elements, k=9")
print("  computed:", np.round(vals, 4))
print("  exact:   ", [0, 2, 2, 2, 6, 6, 6, 6, 6])

square = unit_square_grid(8)
vals = spectrum_of(square, 4, order="cubic").values
print("\nunit square, natural boundary, k=4")
print("  computed:       ", np.round(vals, 5))
print("  exact (pi^2 *): ", [0, 1, 1, 2], "->", np.round(np.array([0, 1, 1, 2]) * math.pi**2, 5))
