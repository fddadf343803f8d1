"""Walk the exponent at z = 2 up by one and compare with a fresh build.

Run with ``python3 demos/schlesinger_walk.py``.
"""

import numpy as np

from artifact import schlesinger as sch
from artifact.bops import build_system
from artifact.semiclassical import SemiClassicalData
from artifact.tau import TauLattice
from artifact.weight import WeightFactor, WeightSpec, fourier_coefficients

spec = WeightSpec((WeightFactor("conjugated", 0.5, 0.3), WeightFactor("outer", 2, 0.4)))
data = SemiClassicalData.from_spec(spec)
base = build_system(fourier_coefficients(spec, tol=1e-14), 12)

up, data_up = sch.shifted_system(base, data, 2, 1, 8)
fresh = build_system(fourier_coefficients(sch.shifted_spec(spec, data, (0, 0, 1)), tol=1e-14), 8)

# real zeros and exponents give real Fourier coefficients, so r_n is real up to roundoff
print(f"{'n':>2} {'r_n shifted':>18} {'r_n rebuilt':>18} {'|diff|':>9}")
for n in range(9):
    print(f"{n:>2} {up.r[n].real:>18.12f} {fresh.r[n].real:>18.12f} {abs(up.r[n] - fresh.r[n]):>9.1e}")

lat = TauLattice(spec, data)
ratios = [lat.value(n + 1, {2: 1}) / lat.value(n + 1) for n in range(5)]
print("I_n ratios under the shift:", np.round(np.real(ratios), 8))
print("exponents after the shift:", data_up.rhos.real)
