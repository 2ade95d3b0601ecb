"""Device parameters, capacitance matrices and closed-form circuit energies.

Unit conventions used throughout the package:

* energies are E/h in GHz,
* capacitances are in fF (the resonator self-capacitance is accepted in pF
  when loading JSON and converted on the way in),
* phases are in radians; plain floats passed as flux are in units of Phi_0.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import scipy.constants as const

from .errors import ParameterError

__all__ = [
    "E2_OVER_2FF_GHZ",
    "ParameterError",
    "DeviceParams",
    "FluxBias",
    "as_flux",
    "EnergySetFull",
    "EnergySetBO",
    "SquidParams",
    "FormulaDiscrepancy",
    "island_charging_energy",
    "capacitance_matrix_junction_basis",
    "capacitance_matrix_bo_basis",
    "basis_change_matrix",
    "energies_full",
    "energies_bo",
    "formula_discrepancies",
    "squid_effective_ej",
    "lambda_and_sigma",
    "squid_params",
    "resonator_inductive_energy",
    "resonator_frequency",
    "load_params",
    "reference_params",
]

#: e^2 / (2 * 1 fF) / h in GHz (about 19.37 GHz).
E2_OVER_2FF_GHZ = const.e**2 / (2 * 1e-15) / const.h / 1e9


# JSON key -> (field name, multiplier into internal units)
_JSON_KEYS = {
    "C_fF": ("C", 1.0),
    "EJ1_GHz": ("E_J1", 1.0),
    "CJ1_fF": ("C_J1", 1.0),
    "EJA_GHz": ("E_JA", 1.0),
    "CJA_fF": ("C_JA", 1.0),
    "EJB_GHz": ("E_JB", 1.0),
    "CJB_fF": ("C_JB", 1.0),
    "fres_bare_GHz": ("f_res_bare", 1.0),
    "Cg_fF": ("C_g", 1.0),
    "Cr_pF": ("C_r", 1000.0),
}


@dataclass(frozen=True)
class DeviceParams:
    """Circuit constants of the double-junction transmon and its resonator.

    Capacitances in fF (``C_r`` included), energies and frequencies in GHz.
    ``C_g = 0`` is allowed and decouples the resonator.
    """

    C: float
    E_J1: float
    C_J1: float
    E_JA: float
    C_JA: float
    E_JB: float
    C_JB: float
    f_res_bare: float
    C_g: float
    C_r: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not np.isfinite(v):
                raise ParameterError(f"{f.name} must be finite, got {v!r}")
            if f.name == "C_g":
                if v < 0:
                    raise ParameterError("C_g must be >= 0")
            elif v <= 0:
                raise ParameterError(f"{f.name} must be > 0, got {v!r}")

    @property
    def C_J2(self) -> float:
        """SQUID branch capacitance, the two SQUID junctions in parallel."""
        return self.C_JA + self.C_JB

    def replace(self, **changes) -> "DeviceParams":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DeviceParams":
        missing = [k for k in _JSON_KEYS if k not in doc]
        if missing:
            raise ParameterError(f"missing keys in parameter document: {missing}")
        kw = {name: float(doc[key]) * scale for key, (name, scale) in _JSON_KEYS.items()}
        return cls(**kw)

    def to_json_dict(self) -> dict[str, float]:
        return {key: getattr(self, name) / scale for key, (name, scale) in _JSON_KEYS.items()}


def load_params(path) -> DeviceParams:
    """Read a parameter JSON document (Table-style keys, ``Cr_pF`` in pF)."""
    with open(path) as fh:
        return DeviceParams.from_json_dict(json.load(fh))


def reference_params(name: str) -> DeviceParams:
    """Return the bundled ``"cd1"`` or ``"cd2"`` parameter set."""
    path = Path(__file__).parent / "data" / f"{name.lower()}.json"
    if not path.exists():
        raise KeyError(f"no bundled parameter set named {name!r}")
    return load_params(path)


@dataclass(frozen=True)
class FluxBias:
    """External flux through the SQUID loop, stored as the reduced phase."""

    phi_e: float

    def __post_init__(self):
        if not math.isfinite(self.phi_e):
            raise ParameterError("flux must be finite")

    @classmethod
    def from_phi0(cls, x: float) -> "FluxBias":
        return cls(2 * math.pi * float(x))

    @property
    def phi0(self) -> float:
        """Flux in units of the flux quantum."""
        return self.phi_e / (2 * math.pi)


def as_flux(flux) -> FluxBias:
    """Coerce a FluxBias or a float in units of Phi_0."""
    if isinstance(flux, FluxBias):
        return flux
    return FluxBias.from_phi0(flux)


@dataclass(frozen=True)
class EnergySetFull:
    """Charging energies and charge couplings in the (phi_1, phi_2, phi_r) basis."""

    E_C1: float
    E_C2: float
    E_Cr: float
    g12: float
    g1r: float
    g2r: float


@dataclass(frozen=True)
class EnergySetBO:
    """Charging energies and coupling in the (phi_q, phi_int, phi_r) basis."""

    E_Cq: float
    E_Cint: float
    E_Cr: float
    g: float


@dataclass(frozen=True)
class SquidParams:
    E_J2: float
    lam: float
    E_JSigma: float


@dataclass(frozen=True)
class FormulaDiscrepancy:
    basis: str
    quantity: str
    formula: float
    inverse: float

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.inverse), 1e-300)
        return abs(self.formula - self.inverse) / scale


def island_charging_energy(C_fF: float) -> float:
    """e^2/2C in GHz for a capacitance in fF."""
    if C_fF <= 0:
        raise ParameterError("capacitance must be > 0")
    return E2_OVER_2FF_GHZ / C_fF


def capacitance_matrix_junction_basis(params: DeviceParams) -> np.ndarray:
    """Capacitance matrix in fF, rows/cols ordered (Phi_1, Phi_2, Phi_r)."""
    p = params
    C, Cg = p.C, p.C_g
    return np.array(
        [
            [C + p.C_J1 + Cg, C + Cg, -Cg],
            [C + Cg, C + p.C_J2 + Cg, -Cg],
            [-Cg, -Cg, p.C_r + Cg],
        ]
    )


def capacitance_matrix_bo_basis(params: DeviceParams) -> np.ndarray:
    """Capacitance matrix in fF, rows/cols ordered (Phi_q, Phi_int, Phi_r)."""
    p = params
    cj_series = p.C_J1 * p.C_J2 / (p.C_J1 + p.C_J2)
    return np.array(
        [
            [p.C + cj_series + p.C_g, 0.0, -p.C_g],
            [0.0, p.C_J1 + p.C_J2, 0.0],
            [-p.C_g, 0.0, p.C_r + p.C_g],
        ]
    )


def basis_change_matrix(params: DeviceParams) -> np.ndarray:
    """Matrix M with (phi_q, phi_int, phi_r) = M @ (phi_1, phi_2, phi_r)."""
    s = params.C_J1 + params.C_J2
    return np.array(
        [
            [1.0, 1.0, 0.0],
            [-params.C_J1 / s, params.C_J2 / s, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )


def _inverse_energies(cmat: np.ndarray):
    # H = 1/2 Q^T C^-1 Q with Q = 2e n  ->  4 E_Ci n_i^2 + g_ij n_i n_j
    cinv = np.linalg.inv(cmat)
    if not np.all(np.isfinite(cinv)):
        raise np.linalg.LinAlgError("capacitance matrix is singular")
    ec = E2_OVER_2FF_GHZ * np.diag(cinv)
    g = 8 * E2_OVER_2FF_GHZ * cinv
    return ec, g


def _primes(p: DeviceParams):
    c_prime = p.C + p.C_g * p.C_r / (p.C_g + p.C_r)
    c_dprime = p.C + p.C_J1 * p.C_J2 / (p.C_J1 + p.C_J2)
    return c_prime, c_dprime


def _formula_full(p: DeviceParams) -> EnergySetFull:
    # closed forms exactly as printed; C_1, C_2 in the denominators read as C_J1, C_J2
    k = E2_OVER_2FF_GHZ
    c1, c2 = p.C_J1, p.C_J2
    cp, cpp = _primes(p)
    den = cp * (c1 + c2) + c1 * c2
    return EnergySetFull(
        E_C1=k * (p.C + c2) / den,
        E_C2=k * (p.C + c1) / den,
        E_Cr=k * (cpp + p.C_g) / (cpp * (p.C_g + p.C_r) + p.C_g * p.C_r),
        g12=-8 * k * cp / den,
        g1r=8 * k * c2 * p.C_g / ((p.C_g + p.C_r) * den),
        g2r=8 * k * c1 * p.C_g / ((p.C_g + p.C_r) * den),
    )


def _formula_bo(p: DeviceParams) -> EnergySetBO:
    k = E2_OVER_2FF_GHZ
    cp, cpp = _primes(p)
    return EnergySetBO(
        E_Cq=k / (cp + cpp),
        E_Cint=k / (p.C_J1 + p.C_J2),
        E_Cr=k * (cpp + p.C_g) / ((cp + cpp) * (p.C_g + p.C_r)),
        g=8 * k * p.C_g / ((cp + cpp) * (p.C_g + p.C_r)),
    )


def energies_full(params: DeviceParams, use: str = "matrix_inverse") -> EnergySetFull:
    """Charging energies and couplings of the junction-basis Hamiltonian.

    ``use="matrix_inverse"`` (default) reads them off the inverse capacitance
    matrix; ``use="formula"`` evaluates the printed closed forms, which are
    known to differ for some quantities (see :func:`formula_discrepancies`).
    """
    if use == "formula":
        return _formula_full(params)
    if use != "matrix_inverse":
        raise ValueError(f"unknown evaluation path {use!r}")
    ec, g = _inverse_energies(capacitance_matrix_junction_basis(params))
    return EnergySetFull(
        E_C1=ec[0], E_C2=ec[1], E_Cr=ec[2], g12=g[0, 1], g1r=g[0, 2], g2r=g[1, 2]
    )


def energies_bo(params: DeviceParams, use: str = "matrix_inverse") -> EnergySetBO:
    """Charging energies and coupling in the qubit/internal-mode basis."""
    if use == "formula":
        return _formula_bo(params)
    if use != "matrix_inverse":
        raise ValueError(f"unknown evaluation path {use!r}")
    ec, g = _inverse_energies(capacitance_matrix_bo_basis(params))
    return EnergySetBO(E_Cq=ec[0], E_Cint=ec[1], E_Cr=ec[2], g=g[0, 2])


def formula_discrepancies(params: DeviceParams, rtol: float = 1e-9) -> list[FormulaDiscrepancy]:
    """Compare both evaluation paths and list every quantity that disagrees.

    The matrix-inverse values are authoritative. With the printed closed
    forms, ``E_C1``/``E_C2`` use ``C`` where ``C'`` is needed, and the
    qubit-basis denominators ``C' + C''`` count the island capacitance twice,
    so those entries show up here for any ``C_g > 0``.
    """
    out = []
    for basis, fn in (("full", energies_full), ("bo", energies_bo)):
        a, b = fn(params, use="formula"), fn(params, use="matrix_inverse")
        for f in fields(a):
            fa, fb = getattr(a, f.name), getattr(b, f.name)
            d = FormulaDiscrepancy(basis, f.name, fa, fb)
            if fa == fb:
                continue
            if d.rel_err > rtol:
                out.append(d)
    return out


def squid_effective_ej(E_JA: float, E_JB: float, flux) -> float:
    """Flux-dependent Josephson energy of an asymmetric SQUID."""
    if E_JA <= 0 or E_JB <= 0:
        raise ParameterError("SQUID Josephson energies must be > 0")
    phi = as_flux(flux).phi_e
    val = E_JA**2 + E_JB**2 + 2 * E_JA * E_JB * math.cos(phi)
    return math.sqrt(max(val, 0.0))


def lambda_and_sigma(E_J1: float, E_J2: float) -> SquidParams:
    """Junction-matching parameter and total Josephson energy."""
    if E_J1 <= 0 or E_J2 < 0:
        raise ParameterError("Josephson energies must be positive")
    total = E_J1 + E_J2
    lam = 4 * E_J1 * E_J2 / total**2
    return SquidParams(E_J2=E_J2, lam=min(lam, 1.0), E_JSigma=total)


def squid_params(params: DeviceParams, flux) -> SquidParams:
    return lambda_and_sigma(params.E_J1, squid_effective_ej(params.E_JA, params.E_JB, flux))


def resonator_inductive_energy(f_res_bare: float, E_Cr: float) -> float:
    """E_L such that sqrt(8 E_Cr E_L) equals the bare resonator frequency."""
    if f_res_bare <= 0 or E_Cr <= 0:
        raise ParameterError("frequency and charging energy must be > 0")
    return f_res_bare**2 / (8 * E_Cr)


def resonator_frequency(E_Cr: float, E_L: float) -> float:
    return math.sqrt(8 * E_Cr * E_L)
