"""Higher Josephson harmonics of the series-junction potential.

The reduced potential -E_JSigma sqrt(1 - lam sin^2(phi/2)) is a pure cosine
for lam -> 0 and develops a cusp at lam = 1, where |c2/c1| = 1/5.
The fit mode goes the other way: from f01..f04/4 back to U_1..U_4.
Run: python3 demos/harmonic_content.py
"""

import numpy as np

from djtransmon import circuit, estimator, models

params = circuit.reference_params("cd2")
ec_int = circuit.energies_bo(params).E_Cint
print(f"{'flux':>6} {'lambda':>7} {'c2/c1':>8} {'c3/c1':>8}")
for x in np.linspace(0, 0.5, 11):
    sq = circuit.squid_params(params, x)
    hc = estimator.potential_fourier(lambda p: models.bo_potential(p, sq, ec_int, zero_point=False), 3)
    print(f"{x:6.2f} {sq.lam:7.4f} {hc.ratio(2):8.4f} {hc.ratio(3):8.4f}")

u = 10.0 * np.array([1.0, 0.015, 0.011, 0.005])
f = estimator.harmonic_transitions(0.305, u)
print("transitions f01, f02/2, f03/3, f04/4:", np.round(f, 5))
fit = estimator.fit_harmonic_content(f, 0.305)
print("recovered U_k/U_1:", np.round(fit.coefficients, 6))
