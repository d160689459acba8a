"""Confocal length of a cavity containing a crystal.

With a crystal of length l and index n inside a cavity of mirror radius R,
the confocal length grows to R + l (1 - 1/n). The confocality range allowed
by the finesse is R pi / (2 F). Slightly different indices (for instance
the pump and the two down-converted waves) give slightly different confocal
lengths, which can all be degenerate at once if their spread stays below
that range.
"""
import numpy as np

from twinbeam import CavityGeometry, confocal_length, confocality_range, degeneracy_overlap

R, crystal, finesse = 100e-3, 10e-3, 300
indices = (1.7881, 1.8296, 1.7467)

for n in indices:
    g = CavityGeometry(R, crystal, n, finesse)
    print(f"n = {n}: L_conf = {confocal_length(g) * 1e3:.3f} mm, "
          f"range = +-{confocality_range(g) * 1e3:.3f} mm")

lengths, spread, half = degeneracy_overlap(R, crystal, indices, finesse)
mid = 0.5 * (max(lengths) + min(lengths))
print(f"midpoint {mid * 1e3:.3f} mm, spread {spread * 1e3:.3f} mm, "
      f"half-range {half * 1e3:.3f} mm -> {'degenerate' if spread < half else 'not degenerate'}")

# Lower finesse widens the range; the crossover for these indices
f_max = R * np.pi / (2 * spread)
print(f"all three stay degenerate up to F = {f_max:.0f}")
