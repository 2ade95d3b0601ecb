"""From a (synthetic) two-tone scan to fitted circuit parameters.

1. generate a scan whose lines follow the two-mode model,
2. average over drive amplitude and fit Lorentzians in flux-dependent windows,
3. fit the junction energies to the extracted transition table,
4. compare all models on the result.
Run: python3 demos/spectroscopy_to_fit.py  (about a minute)
"""

import numpy as np

from djtransmon import circuit, estimator, models, specfit

truth = circuit.reference_params("cd2")
fluxes = [0.0, 0.1, 0.2, 0.3, 0.4]
labels = ("f01", "f02/2")

centers = []
for x in fluxes:
    s = models.spectrum("two-mode", truth, x)
    centers.append({lab: s.observable(lab) for lab in labels})
allf = [f for c in centers for f in c.values()]
freqs = np.arange(min(allf) - 0.03, max(allf) + 0.03, 0.0005)
scan = specfit.synthesize_scan(fluxes, np.linspace(0.05, 1, 12), freqs, centers, noise=0.1, rng=1)

config = specfit.ExtractionConfig.from_dict({"transitions": [
    {"label": lab, "amp_window": None if lab == "f01" else [0.3, 1.0],
     "windows": [{"phi_e_phi0": x, "freq_GHz": [c[lab] - 0.015, c[lab] + 0.015]}
                 for x, c in zip(fluxes, centers)]}
    for lab in labels]})
table = specfit.extract_transitions(scan, config)
print(f"extracted {len(table)} lines, {len(table.failures)} failures")
for r in table.rows:
    print(f"  {r.phi_e_phi0:.2f} {r.label:6s} {r.freq:.5f} +- {1e3 * r.err:.3f} MHz")

start = truth.replace(E_J1=25.0, E_JB=20.0)
spec = estimator.FitSpec(start, ("E_J1", "E_JB"), transitions=labels)
report = estimator.fit_device_parameters(spec, table)
for name in spec.free:
    print(f"{name}: {getattr(report.params, name):.4f} +- {report.stderr[name]:.4f} GHz "
          f"(true {getattr(truth, name)})")
print(f"mean |residual| {1e3 * report.mean_abs_residual:.3f} MHz")

for d in estimator.model_discrepancy_report(report.params, table):
    print(f"{d.kind.value:>9}: mean |residual| {1e3 * d.mean_abs:.1f} MHz")
