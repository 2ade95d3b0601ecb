"""Qubit and internal-mode contributions to the dispersive shift.

chi_q and chi_int have opposite signs because the qubit sits below the
resonator and the internal mode above it. Their sum crosses zero at one
flux; near half flux the eigenstates hybridise and points are flagged.
Run: python3 demos/dispersive_shift.py
"""

import numpy as np

from djtransmon import circuit, dispersive

params = circuit.reference_params("cd1")
rows = dispersive.chi_sweep(params, np.linspace(0, 0.5, 26))

print(f"{'flux':>6} {'chi_q':>9} {'chi_int':>9} {'chi_0':>9}  (MHz)")
for r in rows:
    if r.flagged:
        print(f"{r.flux.phi0:6.2f}   flagged: {r.reason}")
        continue
    c = r.result
    print(f"{r.flux.phi0:6.2f} {1e3 * c.chi_q:9.4f} {1e3 * c.chi_int:9.4f} {1e3 * c.chi_0:9.4f}")

for a, b in dispersive.chi_zero_crossings(rows):
    root = dispersive.find_chi_zero(params, (a, b), n_scan=3)
    print(f"chi_0 = 0 at {root.phi0:.5f} Phi0")
