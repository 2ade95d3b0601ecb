"""Dispersive shift of the readout resonator from the qubit and internal modes.

Second-order (Schrieffer-Wolff) contributions of the first excited qubit
state (1_q 0_int) and first excited internal state (0_q 1_int):

    chi_x = f_r / (16 E_Cr) * |g_1r mu_x,1 + g_2r mu_x,2|^2 / (f_r - f_x)

with mu_x,k = <x|n_k|0_q 0_int>. Higher states are not included.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.optimize import brentq

from . import circuit
from ._parallel import pmap
from .circuit import DeviceParams, FluxBias, as_flux
from .errors import ConfigError, DispersiveBreakdownError, RootNotFoundError
from .hilbert import ChargeBasis, charge_op, tensor
from .models import DEFAULT_NC, solve_two_mode
from .tables import write_csv

__all__ = [
    "MuElements",
    "ChiResult",
    "ChiRow",
    "DELTA_MIN",
    "OVERLAP_MIN",
    "charge_matrix_elements",
    "chi_components",
    "chi_sweep",
    "chi_zero_crossings",
    "find_chi_zero",
    "write_chi_csv",
    "CHI_CSV_HEADER",
]

DELTA_MIN = 0.05
# below this the eigenstates are too hybridised for a two-state decomposition
OVERLAP_MIN = 0.9


@dataclass(frozen=True)
class MuElements:
    flux: FluxBias
    mu10: tuple  # (<1_q 0_int|n_1|0 0>, <1_q 0_int|n_2|0 0>)
    mu01: tuple
    f10: float
    f01: float
    overlaps: dict


@dataclass(frozen=True)
class ChiResult:
    flux: FluxBias
    chi_q: float
    chi_int: float
    delta_10: float
    delta_01: float
    mu10: tuple
    mu01: tuple

    @property
    def chi_0(self) -> float:
        return self.chi_q + self.chi_int


@dataclass(frozen=True)
class ChiRow:
    flux: FluxBias
    result: ChiResult | None
    reason: str = ""

    @property
    def flagged(self) -> bool:
        return self.result is None


def charge_matrix_elements(params: DeviceParams, flux, nc: int = DEFAULT_NC,
                           overlap_min: float = OVERLAP_MIN) -> MuElements:
    """Charge matrix elements from the labeled ground, qubit and internal states."""
    flux = as_flux(flux)
    sol = solve_two_mode(params, flux, nc)
    lab = sol.labels
    keys = [(0, 0), (1, 0), (0, 1)]
    overlaps = {k: lab.overlap(*k) for k in keys}
    idx = {k: lab.index(*k) for k in keys}
    bad = [k for k in keys if overlaps[k] < overlap_min]
    if bad or len(set(idx.values())) < 3:
        raise DispersiveBreakdownError(
            f"hybridised states {bad} at phi_e={flux.phi0:.4f} Phi0 "
            f"(overlaps {', '.join(f'{k}:{overlaps[k]:.2f}' for k in keys)})",
            flux=flux,
            reason="avoided-crossing",
        )
    cb = ChargeBasis(nc)
    dims = (cb.dim, cb.dim)
    n1 = tensor({0: charge_op(cb)}, dims)
    n2 = tensor({1: charge_op(cb)}, dims)
    v = sol.vectors
    g0 = v[:, idx[(0, 0)]]

    def mu(k):
        vk = v[:, idx[k]].conj()
        return (complex(vk @ n1 @ g0), complex(vk @ n2 @ g0))

    w = sol.energies
    return MuElements(
        flux=flux,
        mu10=mu((1, 0)),
        mu01=mu((0, 1)),
        f10=float(w[idx[(1, 0)]] - w[idx[(0, 0)]]),
        f01=float(w[idx[(0, 1)]] - w[idx[(0, 0)]]),
        overlaps=overlaps,
    )


def chi_components(params: DeviceParams, flux, nc: int = DEFAULT_NC,
                   delta_min: float = DELTA_MIN, overlap_min: float = OVERLAP_MIN) -> ChiResult:
    """Qubit-mode and internal-mode dispersive shifts (GHz, signed).

    Identically zero when the resonator is decoupled (C_g = 0).
    """
    flux = as_flux(flux)
    en = circuit.energies_full(params)
    if en.g1r == 0 and en.g2r == 0:
        # decoupled resonator: no shift, whatever the qubit states look like
        return ChiResult(flux, 0.0, 0.0, float("nan"), float("nan"), (0j, 0j), (0j, 0j))
    mu = charge_matrix_elements(params, flux, nc, overlap_min)
    f_r = params.f_res_bare
    d10, d01 = f_r - mu.f10, f_r - mu.f01
    for name, d in (("Delta_10", d10), ("Delta_01", d01)):
        if abs(d) < delta_min:
            raise DispersiveBreakdownError(
                f"{name}={d:.4f} GHz below {delta_min} GHz at phi_e={flux.phi0:.4f} Phi0",
                flux=flux,
                reason="small-detuning",
            )
    pref = f_r / (16 * en.E_Cr)
    cq = pref * abs(en.g1r * mu.mu10[0] + en.g2r * mu.mu10[1]) ** 2 / d10
    ci = pref * abs(en.g1r * mu.mu01[0] + en.g2r * mu.mu01[1]) ** 2 / d01
    return ChiResult(flux, float(cq), float(ci), d10, d01, mu.mu10, mu.mu01)


def _chi_row(phi0, params, kw):
    flux = FluxBias.from_phi0(phi0)
    try:
        return ChiRow(flux, chi_components(params, flux, **kw))
    except DispersiveBreakdownError as exc:
        return ChiRow(flux, None, exc.reason)


def chi_sweep(params: DeviceParams, fluxes, nc: int = DEFAULT_NC, workers: int = 1,
              **kw) -> list[ChiRow]:
    """chi over a flux grid (units of Phi_0); breakdown points come back flagged."""
    fn = partial(_chi_row, params=params, kw=dict(nc=nc, **kw))
    return pmap(fn, [float(x) for x in fluxes], workers)


def chi_zero_crossings(rows: list[ChiRow]) -> list[tuple[float, float]]:
    """Flux brackets (Phi_0) where chi_0 changes sign between adjacent valid rows."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if a.flagged or b.flagged:
            continue
        if a.result.chi_0 == 0.0 or np.sign(a.result.chi_0) != np.sign(b.result.chi_0):
            out.append((a.flux.phi0, b.flux.phi0))
    return out


def find_chi_zero(params: DeviceParams, flux_range=(0.0, 0.45), nc: int = DEFAULT_NC,
                  n_scan: int = 19, tol: float = 1e-4, workers: int = 1, **kw) -> FluxBias:
    """Flux where chi_q + chi_int vanishes, located to ``tol`` (units of Phi_0).

    Scans ``n_scan`` points for a sign change of chi_0 between valid
    (unflagged) neighbours, then refines with Brent's method. If several
    crossings exist the lowest-flux one is returned.
    """
    if params.C_g == 0:
        raise ConfigError("C_g = 0: dispersive shift vanishes identically")
    lo, hi = (float(x) for x in flux_range)
    rows = chi_sweep(params, np.linspace(lo, hi, n_scan), nc=nc, workers=workers, **kw)
    brackets = chi_zero_crossings(rows)
    if not brackets:
        raise RootNotFoundError(f"chi_0 does not change sign on [{lo}, {hi}] Phi0")
    a, b = brackets[0]

    def chi0(x):
        return chi_components(params, FluxBias.from_phi0(x), nc, **kw).chi_0

    root = brentq(chi0, a, b, xtol=tol / 10)
    return FluxBias.from_phi0(root)


CHI_CSV_HEADER = ("phi_e_phi0", "chi_q_MHz", "chi_int_MHz", "chi_0_MHz", "flagged")


def write_chi_csv(rows: list[ChiRow], path):
    out = []
    for r in rows:
        if r.flagged:
            out.append((r.flux.phi0, None, None, None, 1))
        else:
            c = r.result
            out.append((r.flux.phi0, 1e3 * c.chi_q, 1e3 * c.chi_int, 1e3 * c.chi_0, 0))
    return write_csv(path, CHI_CSV_HEADER, out)

