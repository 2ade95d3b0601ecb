"""Spectral models of the double-junction transmon.

Four flux-dependent models are provided:

* ``TWO_MODE``: both junction phases in a 2D charge basis (the reference model),
* ``TWO_MODE_RESONATOR``: the same, dressed by the readout oscillator,
* ``BORN_OPPENHEIMER``: 1D model in the collective phase with the internal
  mode integrated out, including its zero-point energy,
* ``REDUCED``: the 1D model with only the classical series-junction potential,

plus ``HARMONIC`` for a single-junction transmon with arbitrary cos(k phi)
harmonics.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from numpy.polynomial.hermite import hermval

from . import circuit
from ._parallel import pmap
from .circuit import DeviceParams, EnergySetFull, FluxBias, SquidParams, as_flux
from .errors import ConfigError
from .hilbert import (
    ChargeBasis,
    FockBasis,
    charge_op,
    cos_k_phi_op,
    eigensolve,
    resonator_ops,
    tensor,
)
from .tables import write_csv

__all__ = [
    "ModelKind",
    "HarmonicSpec",
    "StateLabel",
    "StateLabels",
    "SpectrumResult",
    "AmbiguousLabelWarning",
    "TRANSITION_LABELS",
    "bo_potential",
    "cosine_coefficients",
    "potential_operator",
    "build_two_mode",
    "build_bo",
    "build_reduced",
    "build_harmonic_transmon",
    "product_states",
    "label_states",
    "solve_two_mode",
    "spectrum",
    "sweep",
    "write_spectrum_csv",
    "SPECTRUM_CSV_HEADER",
]

#: Observable name -> (qubit level k, divisor). Frequencies are f_0k / divisor.
TRANSITION_LABELS = {"f01": (1, 1), "f02/2": (2, 2), "f03/3": (3, 3), "f04/4": (4, 4)}

DEFAULT_NC = 15
DEFAULT_NF = 8
DEFAULT_K_POT = 20
FOURIER_NODES = 4096
AMBIGUOUS_OVERLAP = 0.5


class ModelKind(str, enum.Enum):
    TWO_MODE = "two-mode"
    TWO_MODE_RESONATOR = "two-mode-resonator"
    BORN_OPPENHEIMER = "bo"
    REDUCED = "reduced"
    HARMONIC = "harmonic"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "twomode": cls.TWO_MODE,
            "two_mode": cls.TWO_MODE,
            "born-oppenheimer": cls.BORN_OPPENHEIMER,
            "born_oppenheimer": cls.BORN_OPPENHEIMER,
            "two-mode-with-resonator": cls.TWO_MODE_RESONATOR,
        }
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown model {value!r}; expected one of {names}") from None


class AmbiguousLabelWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HarmonicSpec:
    """Charging energy and cos(k phi) amplitudes U_1..U_K (GHz)."""

    E_C: float
    U: tuple

    def __post_init__(self):
        object.__setattr__(self, "U", tuple(float(u) for u in self.U))
        if len(self.U) < 1:
            raise ConfigError("need at least one harmonic")
        if self.U[0] == 0:
            raise ConfigError("fundamental amplitude U_1 must be nonzero")
        if self.E_C <= 0:
            raise ConfigError("E_C must be > 0")


@dataclass(frozen=True)
class StateLabel:
    index: int
    i_q: int
    j_int: int
    overlap: float

    @property
    def ambiguous(self) -> bool:
        return self.overlap < AMBIGUOUS_OVERLAP


@dataclass(frozen=True)
class StateLabels:
    """Overlaps between eigenstates and (i_q, j_int) product states.

    ``overlaps[p, l]`` is |<product p|eigenstate l>|^2 with products ordered as
    ``keys``. ``labels`` assigns each eigenstate its best product state;
    :meth:`index` answers the reverse question used for transitions.
    """

    keys: tuple
    overlaps: np.ndarray
    labels: tuple

    def index(self, i_q: int, j_int: int = 0) -> int:
        p = self.keys.index((i_q, j_int))
        return int(np.argmax(self.overlaps[p]))

    def overlap(self, i_q: int, j_int: int = 0) -> float:
        p = self.keys.index((i_q, j_int))
        return float(np.max(self.overlaps[p]))

    def ambiguous(self, threshold: float = AMBIGUOUS_OVERLAP) -> tuple:
        return tuple(k for k in self.keys if self.overlap(*k) < threshold)


@dataclass(frozen=True)
class SpectrumResult:
    flux: FluxBias
    kind: ModelKind
    levels: np.ndarray  # ground-referenced, ascending
    transitions: tuple  # f_01 ... f_04 (undivided)
    anharmonicity: float
    f_int: float | None = None
    f_res: float | None = None
    labels: StateLabels | None = field(default=None, repr=False)
    ambiguous: tuple = ()

    @property
    def f01(self) -> float:
        return self.transitions[0]

    def observable(self, name: str) -> float:
        """Value of 'f01', 'f02/2', 'f03/3', 'f04/4', 'f_int' or 'f_res'."""
        if name in TRANSITION_LABELS:
            k, div = TRANSITION_LABELS[name]
            return self.transitions[k - 1] / div
        if name == "f_int":
            if self.f_int is None:
                raise ConfigError(f"{self.kind.value} model has no internal mode")
            return self.f_int
        if name == "f_res":
            if self.f_res is None:
                raise ConfigError("f_res needs the two-mode-resonator model")
            return self.f_res
        raise ConfigError(f"unknown observable {name!r}")


# --------------------------------------------------------------------------
# 1D potentials


def bo_potential(phi_q, squid: SquidParams, E_Cint: float, zero_point: bool = True):
    """Effective collective-mode potential with the internal mode integrated out.

    The classical part is ``-E_JSigma * r`` with ``r = sqrt(1 - lam sin^2(phi/2))``.
    The internal mode, harmonic around its minimum with stiffness
    ``E_JSigma * r``, adds its zero-point energy ``sqrt(2 E_Cint E_JSigma r)``.
    ``zero_point=False`` gives the reduced-model potential.
    """
    phi_q = np.asarray(phi_q, dtype=float)
    s = squid.E_JSigma
    r = np.sqrt(np.clip(1.0 - squid.lam * np.sin(phi_q / 2) ** 2, 0.0, None))
    v = -s * r
    if zero_point:
        v = v + np.sqrt(2 * E_Cint * s * r)
    return v


def cosine_coefficients(values: np.ndarray) -> np.ndarray:
    """Coefficients a_k with V = sum_k a_k cos(k phi) from samples on [0, 2pi).

    Assumes an even potential; ``a[0]`` is the constant term.
    """
    m = len(values)
    ck = np.fft.rfft(values) / m
    a = 2 * ck.real
    a[0] = ck[0].real
    return a


def potential_operator(potential, basis: ChargeBasis, k_pot: int = DEFAULT_K_POT) -> np.ndarray:
    """Charge-basis matrix of an even 2pi-periodic potential, K_pot harmonics."""
    if k_pot > 2 * basis.cutoff:
        raise ConfigError(
            f"k_pot={k_pot} exceeds the charge basis reach 2*nc={2 * basis.cutoff}"
        )
    phi = 2 * np.pi * np.arange(FOURIER_NODES) / FOURIER_NODES
    a = cosine_coefficients(potential(phi))
    h = a[0] * np.eye(basis.dim)
    for k in range(1, k_pot + 1):
        h += a[k] * cos_k_phi_op(basis, k)
    return h


def _one_d_potential(params: DeviceParams, flux, zero_point: bool):
    sq = circuit.squid_params(params, flux)
    ec_int = circuit.energies_bo(params).E_Cint
    return partial(bo_potential, squid=sq, E_Cint=ec_int, zero_point=zero_point)


def _build_one_d(params, flux, nc, k_pot, zero_point, check):
    basis = ChargeBasis(nc)
    n = charge_op(basis)
    kinetic = 4 * circuit.energies_bo(params).E_Cq * n @ n
    pot = _one_d_potential(params, flux, zero_point)
    h = kinetic + potential_operator(pot, basis, k_pot)
    if check:
        k_hi = min(k_pot + 5, 2 * nc)
        if k_hi > k_pot:
            h_hi = kinetic + potential_operator(pot, basis, k_hi)
            e_lo = np.linalg.eigvalsh(h)[:6]
            e_hi = np.linalg.eigvalsh(h_hi)[:6]
            diff = np.max(np.abs((e_lo - e_lo[0]) - (e_hi - e_hi[0])))
            if diff > 1e-6:
                raise ConfigError(
                    f"potential Fourier series not converged at k_pot={k_pot} "
                    f"(spectrum moves {diff:.2e} GHz with {k_hi} terms)"
                )
    return h


def build_bo(params: DeviceParams, flux, nc: int = DEFAULT_NC, k_pot: int = DEFAULT_K_POT,
             check: bool = True) -> np.ndarray:
    """1D Born-Oppenheimer Hamiltonian 4 E_Cq n^2 + E_0(phi_q) (qubit sector)."""
    return _build_one_d(params, flux, nc, k_pot, True, check)


def build_reduced(params: DeviceParams, flux, nc: int = DEFAULT_NC, k_pot: int = DEFAULT_K_POT,
                  check: bool = True) -> np.ndarray:
    """1D Hamiltonian with only the classical series-junction potential."""
    return _build_one_d(params, flux, nc, k_pot, False, check)


def build_harmonic_transmon(spec: HarmonicSpec, nc: int = DEFAULT_NC) -> np.ndarray:
    """4 E_C n^2 - sum_k U_k cos(k phi)."""
    basis = ChargeBasis(nc)
    if len(spec.U) > 2 * nc:
        raise ConfigError("more harmonics than the charge basis can represent")
    n = charge_op(basis)
    h = 4 * spec.E_C * n @ n
    for k, u in enumerate(spec.U, start=1):
        h -= u * cos_k_phi_op(basis, k)
    return h


# --------------------------------------------------------------------------
# two-mode model


def build_two_mode(
    params: DeviceParams,
    flux,
    nc: int = DEFAULT_NC,
    with_resonator: bool = False,
    nf: int = DEFAULT_NF,
    energies: EnergySetFull | None = None,
) -> np.ndarray:
    """Junction-basis Hamiltonian on the (n_1, n_2[, resonator]) product space.

    ``energies`` overrides the capacitance-derived charging energies and
    couplings (used for decoupled-limit checks).
    """
    flux = as_flux(flux)
    en = energies if energies is not None else circuit.energies_full(params)
    cb = ChargeBasis(nc)
    n, c = charge_op(cb), cos_k_phi_op(cb, 1)
    ej2 = circuit.squid_effective_ej(params.E_JA, params.E_JB, flux)
    if not with_resonator:
        dims = (cb.dim, cb.dim)
        n1, n2 = tensor({0: n}, dims), tensor({1: n}, dims)
        h = 4 * en.E_C1 * n1 @ n1 + 4 * en.E_C2 * n2 @ n2 + en.g12 * n1 @ n2
        h -= params.E_J1 * tensor({0: c}, dims) + ej2 * tensor({1: c}, dims)
        return h
    fb = FockBasis(nf)
    e_l = circuit.resonator_inductive_energy(params.f_res_bare, en.E_Cr)
    nr, phir = resonator_ops(fb, en.E_Cr, e_l)
    dims = (cb.dim, cb.dim, fb.dim)
    n1, n2, nr3 = tensor({0: n}, dims), tensor({1: n}, dims), tensor({2: nr}, dims)
    h = 4 * en.E_C1 * n1 @ n1 + 4 * en.E_C2 * n2 @ n2 + en.g12 * n1 @ n2
    h = h - params.E_J1 * tensor({0: c}, dims) - ej2 * tensor({1: c}, dims)
    h = h + tensor({2: 4 * en.E_Cr * nr @ nr + 0.5 * e_l * phir @ phir}, dims)
    h = h + en.g1r * n1 @ nr3 + en.g2r * n2 @ nr3
    return h


def _hermite_function(j: int, u: np.ndarray) -> np.ndarray:
    coef = np.zeros(j + 1)
    coef[j] = 1.0
    norm = 1.0 / math.sqrt(2.0**j * math.factorial(j) * math.sqrt(math.pi))
    return norm * hermval(u, coef) * np.exp(-0.5 * u**2)


def product_states(
    params: DeviceParams,
    flux,
    nc: int = DEFAULT_NC,
    n_qubit: int = 6,
    n_int: int = 3,
    grid: int | None = None,
):
    """Born-Oppenheimer product states expressed in the (n_1, n_2) charge basis.

    The collective factor is an eigenstate of the 1D Born-Oppenheimer model;
    the internal factor is the j-th oscillator state of the fast mode, centred
    on the potential minimum and with the stiffness it has at that phi_q.
    Returns ``(keys, vectors)`` with ``vectors[p]`` normalised.
    """
    flux = as_flux(flux)
    cj1, cj2 = params.C_J1, params.C_J2
    s = cj1 + cj2
    ec_int = circuit.energies_bo(params).E_Cint
    ej2 = circuit.squid_effective_ej(params.E_JA, params.E_JB, flux)

    _, vq = eigensolve(build_bo(params, flux, nc, k_pot=min(DEFAULT_K_POT, 2 * nc), check=False))
    vq = vq[:, :n_qubit]
    charges = ChargeBasis(nc).charges
    m = grid or max(64, 4 * nc + 4)
    x = -np.pi + 2 * np.pi * np.arange(m) / m
    p1, p2 = np.meshgrid(x, x, indexing="ij")
    p1, p2 = p1.ravel(), p2.ravel()

    acc = np.zeros((m * m, n_qubit, n_int), dtype=complex)
    for m1 in (-1, 0, 1):
        for m2 in (-1, 0, 1):
            q1 = p1 + 2 * np.pi * m1
            q2 = p2 + 2 * np.pi * m2
            pq = q1 + q2
            mask = np.abs(pq) <= np.pi
            if not mask.any():
                continue
            pq, pint = pq[mask], (cj2 * q2[mask] - cj1 * q1[mask]) / s
            chi = np.exp(1j * np.outer(pq, charges)) @ vq / math.sqrt(2 * np.pi)
            # internal-mode potential is -A cos(phi_int + theta) at fixed phi_q
            z = params.E_J1 * np.exp(-1j * cj2 / s * pq) + ej2 * np.exp(1j * cj1 / s * pq)
            amp = np.maximum(np.abs(z), 1e-12)
            ell = math.sqrt(2) * (2 * ec_int / amp) ** 0.25
            u = (pint + np.angle(z)) / ell
            xi = np.stack([_hermite_function(j, u) / np.sqrt(ell) for j in range(n_int)], axis=1)
            acc[mask] += chi[:, :, None] * xi[:, None, :]

    f = acc.reshape(m, m, n_qubit * n_int)
    ft = np.exp(-1j * np.outer(charges, x))
    nch, npr = len(charges), n_qubit * n_int
    half = (ft @ f.reshape(m, m * npr)).reshape(nch, m, npr)
    coeff = np.matmul(ft[None, :, :], half).reshape(nch * nch, npr)
    coeff /= np.linalg.norm(coeff, axis=0)
    keys = tuple((i, j) for i in range(n_qubit) for j in range(n_int))
    return keys, coeff.T


def label_states(eigvecs: np.ndarray, params: DeviceParams, flux, nc: int = DEFAULT_NC,
                 n_qubit: int = 6, n_int: int = 3, warn: bool = False) -> StateLabels:
    """Assign (i_q, j_int) labels by maximum overlap with product states."""
    keys, prods = product_states(params, flux, nc, n_qubit, n_int)
    ov = np.abs(prods.conj() @ eigvecs) ** 2
    labels = []
    for col in range(eigvecs.shape[1]):
        p = int(np.argmax(ov[:, col]))
        labels.append(StateLabel(col, keys[p][0], keys[p][1], float(ov[p, col])))
    out = StateLabels(keys, ov, tuple(labels))
    if warn:
        amb = [lab for lab in labels if lab.ambiguous]
        if amb:
            warnings.warn(
                f"ambiguous state labels at phi_e={as_flux(flux).phi0:.4f} Phi0: "
                + ", ".join(f"level {a.index} ~ ({a.i_q},{a.j_int}) p={a.overlap:.2f}" for a in amb),
                AmbiguousLabelWarning,
                stacklevel=2,
            )
    return out


@dataclass(frozen=True)
class TwoModeSolution:
    energies: np.ndarray
    vectors: np.ndarray
    labels: StateLabels


def solve_two_mode(params: DeviceParams, flux, nc: int = DEFAULT_NC, n_levels: int = 14,
                   energies: EnergySetFull | None = None) -> TwoModeSolution:
    h = build_two_mode(params, flux, nc, energies=energies)
    w, v = eigensolve(h, n_levels)
    return TwoModeSolution(w, v, label_states(v, params, flux, nc))


def _transitions_from_labels(w, labels: StateLabels):
    e0 = w[labels.index(0, 0)]
    lev = [w[labels.index(k, 0)] - e0 for k in range(1, 5)]
    f_int = w[labels.index(0, 1)] - e0
    alpha = (lev[1] - lev[0]) - lev[0]
    return tuple(float(x) for x in lev), float(f_int), float(alpha)


def _spectrum_two_mode(params, flux, nc, n_levels):
    sol = solve_two_mode(params, flux, nc, n_levels)
    trans, f_int, alpha = _transitions_from_labels(sol.energies, sol.labels)
    used = [(k, 0) for k in range(5)] + [(0, 1)]
    amb = tuple(k for k in used if sol.labels.overlap(*k) < AMBIGUOUS_OVERLAP)
    return SpectrumResult(
        flux=flux,
        kind=ModelKind.TWO_MODE,
        levels=sol.energies - sol.energies[0],
        transitions=trans,
        anharmonicity=alpha,
        f_int=f_int,
        labels=sol.labels,
        ambiguous=amb,
    )


def _spectrum_with_resonator(params, flux, nc, nf, n_levels, method):
    en = circuit.energies_full(params)
    sol = solve_two_mode(params, flux, nc, n_levels)
    fb = FockBasis(nf)
    e_l = circuit.resonator_inductive_energy(params.f_res_bare, en.E_Cr)
    nr, phir = resonator_ops(fb, en.E_Cr, e_l)
    if method == "hierarchical":
        # dressed problem in the basis of two-mode eigenstates x Fock states
        v = sol.vectors
        cb = ChargeBasis(nc)
        n1 = tensor({0: charge_op(cb)}, (cb.dim, cb.dim))
        n2 = tensor({1: charge_op(cb)}, (cb.dim, cb.dim))
        coup = v.conj().T @ (en.g1r * n1 + en.g2r * n2) @ v
        h_r = 4 * en.E_Cr * nr @ nr + 0.5 * e_l * phir @ phir
        h = np.kron(np.diag(sol.energies), np.eye(nf)) + np.kron(np.eye(len(sol.energies)), h_r)
        h = h + np.kron(coup, nr)
        h = 0.5 * (h + h.conj().T)
        w, vec = eigensolve(h)
        bare = np.eye(len(sol.energies) * nf)

        def dressed(k, mr):
            return int(np.argmax(np.abs(bare[k * nf + mr] @ vec) ** 2))

    elif method == "full":
        h = build_two_mode(params, flux, nc, with_resonator=True, nf=nf)
        w, vec = eigensolve(h, min(len(h), 4 * n_levels))

        def dressed(k, mr):
            ref = np.kron(sol.vectors[:, k], np.eye(nf)[mr])
            return int(np.argmax(np.abs(ref.conj() @ vec) ** 2))

    else:
        raise ConfigError(f"unknown resonator solve method {method!r}")

    lab = sol.labels
    g = dressed(lab.index(0, 0), 0)
    e0 = w[g]
    trans = tuple(float(w[dressed(lab.index(k, 0), 0)] - e0) for k in range(1, 5))
    f_int = float(w[dressed(lab.index(0, 1), 0)] - e0)
    f_res = float(w[dressed(lab.index(0, 0), 1)] - e0)
    alpha = (trans[1] - trans[0]) - trans[0]
    amb = tuple(k for k in [(i, 0) for i in range(5)] + [(0, 1)] if lab.overlap(*k) < AMBIGUOUS_OVERLAP)
    return SpectrumResult(
        flux=flux,
        kind=ModelKind.TWO_MODE_RESONATOR,
        levels=np.sort(w) - np.min(w),
        transitions=trans,
        anharmonicity=float(alpha),
        f_int=f_int,
        f_res=f_res,
        labels=lab,
        ambiguous=amb,
    )


def _spectrum_one_d(h, flux, kind):
    w = np.linalg.eigvalsh(h)
    lev = w - w[0]
    trans = tuple(float(lev[k]) for k in range(1, 5))
    alpha = float(lev[2] - 2 * lev[1])
    return SpectrumResult(flux=flux, kind=kind, levels=lev, transitions=trans, anharmonicity=alpha)


def spectrum(
    kind,
    params,
    flux=0.0,
    nc: int = DEFAULT_NC,
    k_pot: int = DEFAULT_K_POT,
    nf: int = DEFAULT_NF,
    n_levels: int = 14,
    resonator_method: str = "hierarchical",
) -> SpectrumResult:
    """Solve one model at one flux point.

    ``params`` is a :class:`DeviceParams`, or a :class:`HarmonicSpec` for the
    harmonic kind. Plain-float ``flux`` is in units of Phi_0.
    """
    kind = ModelKind.parse(kind)
    flux = as_flux(flux)
    if kind is ModelKind.HARMONIC:
        if not isinstance(params, HarmonicSpec):
            raise ConfigError("the harmonic model takes a HarmonicSpec")
        return _spectrum_one_d(build_harmonic_transmon(params, nc), flux, kind)
    if not isinstance(params, DeviceParams):
        raise ConfigError(f"{kind.value} model takes DeviceParams")
    if kind is ModelKind.TWO_MODE:
        return _spectrum_two_mode(params, flux, nc, n_levels)
    if kind is ModelKind.TWO_MODE_RESONATOR:
        return _spectrum_with_resonator(params, flux, nc, nf, n_levels, resonator_method)
    if kind is ModelKind.BORN_OPPENHEIMER:
        return _spectrum_one_d(build_bo(params, flux, nc, k_pot), flux, kind)
    return _spectrum_one_d(build_reduced(params, flux, nc, k_pot), flux, kind)


def _spectrum_at(phi0, kind, params, kw):
    return spectrum(kind, params, phi0, **kw)


def sweep(kind, params, fluxes, workers: int = 1, **kw) -> list[SpectrumResult]:
    """Spectra over a flux grid given in units of Phi_0."""
    fn = partial(_spectrum_at, kind=ModelKind.parse(kind), params=params, kw=kw)
    return pmap(fn, [float(x) for x in fluxes], workers)


SPECTRUM_CSV_HEADER = (
    "phi_e_phi0", "f01_GHz", "f02h_GHz", "f03t_GHz", "f04q_GHz", "fint_GHz", "alpha_GHz", "model",
)


def write_spectrum_csv(results, path):
    rows = []
    for r in results:
        t = r.transitions
        rows.append(
            (r.flux.phi0, t[0], t[1] / 2, t[2] / 3, t[3] / 4, r.f_int, r.anharmonicity, r.kind.value)
        )
    return write_csv(path, SPECTRUM_CSV_HEADER, rows)
