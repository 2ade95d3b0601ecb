"""Compare the two-mode, Born-Oppenheimer and reduced models over flux.

The two-mode model keeps both junction phases; the BO model integrates out
the fast internal mode and keeps its zero-point energy; the reduced model
drops that zero-point term. Run: python3 demos/spectrum_models.py
"""

import numpy as np

from djtransmon import circuit, models

params = circuit.reference_params("cd2")
fluxes = np.linspace(0, 0.5, 11)

results = {kind: models.sweep(kind, params, fluxes) for kind in ("two-mode", "bo", "reduced")}

print(f"{'flux':>6} {'f01 2M':>9} {'BO-2M':>8} {'red-2M':>8} {'alpha 2M':>9} {'f_int':>8}")
for i, x in enumerate(fluxes):
    tm, bo, red = (results[k][i] for k in ("two-mode", "bo", "reduced"))
    print(f"{x:6.2f} {tm.f01:9.4f} {1e3 * (bo.f01 - tm.f01):7.1f}M {1e3 * (red.f01 - tm.f01):7.1f}M "
          f"{1e3 * tm.anharmonicity:8.1f}M {tm.f_int:8.3f}")

# states near half flux where the internal mode meets f03 get flagged
for r in results["two-mode"]:
    if r.ambiguous:
        print(f"ambiguous labels at {r.flux.phi0:.2f} Phi0: {r.ambiguous}")
