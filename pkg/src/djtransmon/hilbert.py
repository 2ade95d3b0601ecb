"""Operator construction in charge and Fock bases, and a checked eigensolver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .errors import NonHermitianError

__all__ = [
    "ChargeBasis",
    "FockBasis",
    "NonHermitianError",
    "is_hermitian",
    "charge_op",
    "cos_k_phi_op",
    "resonator_ops",
    "annihilation_op",
    "tensor",
    "eigensolve",
]

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class ChargeBasis:
    """Charge states n = -cutoff ... cutoff."""

    cutoff: int = 15

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError("charge cutoff must be an integer >= 1")

    @property
    def dim(self) -> int:
        return 2 * self.cutoff + 1

    @property
    def charges(self) -> np.ndarray:
        return np.arange(-self.cutoff, self.cutoff + 1, dtype=float)


@dataclass(frozen=True)
class FockBasis:
    """Oscillator states |0> ... |cutoff - 1>."""

    cutoff: int = 8

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise ValueError("Fock cutoff must be an integer >= 2")

    @property
    def dim(self) -> int:
        return self.cutoff


def is_hermitian(a: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) < atol)


def charge_op(basis: ChargeBasis) -> np.ndarray:
    return np.diag(basis.charges)


def cos_k_phi_op(basis: ChargeBasis, k: int = 1) -> np.ndarray:
    """cos(k phi) in the charge basis: 1/2 on the +-k off-diagonals."""
    if k <= 0:
        raise ValueError("harmonic index k must be positive")
    d = basis.dim
    if k >= d:
        return np.zeros((d, d))
    return 0.5 * (np.eye(d, k=k) + np.eye(d, k=-k))


def annihilation_op(basis: FockBasis) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, basis.dim, dtype=float)), k=1)


def resonator_ops(basis: FockBasis, E_Cr: float, E_L: float) -> tuple[np.ndarray, np.ndarray]:
    """Charge and phase quadratures (n_r, phi_r) of the readout oscillator.

    Scales are chosen so that ``4 E_Cr n_r^2 + E_L/2 phi_r^2`` equals
    ``f_r (a^dag a + 1/2)`` with ``f_r = sqrt(8 E_Cr E_L)``.
    """
    if E_Cr <= 0 or E_L <= 0:
        raise ValueError("oscillator energies must be > 0")
    a = annihilation_op(basis)
    ad = a.T
    phi_zpf = (8 * E_Cr / E_L) ** 0.25 / np.sqrt(2)
    n_zpf = (E_L / (8 * E_Cr)) ** 0.25 / np.sqrt(2)
    phi = phi_zpf * (a + ad)
    n = 1j * n_zpf * (ad - a)
    return n, phi


def tensor(ops: Mapping[int, np.ndarray], dims: Sequence[int]) -> np.ndarray:
    """Kronecker embedding of ``ops`` (factor index -> matrix), identity elsewhere."""
    for idx, op in ops.items():
        if not 0 <= idx < len(dims):
            raise ValueError(f"factor index {idx} outside {len(dims)} factors")
        if np.shape(op) != (dims[idx], dims[idx]):
            raise ValueError(
                f"operator on factor {idx} has shape {np.shape(op)}, expected {dims[idx]}"
            )
    out = np.ones((1, 1))
    for i, d in enumerate(dims):
        out = np.kron(out, ops[i] if i in ops else np.eye(d))
    return out


def eigensolve(h: np.ndarray, num_levels: int | None = None, check: bool = True):
    """Lowest ``num_levels`` eigenpairs of a Hermitian matrix, ascending.

    Raises NonHermitianError if ``h`` is not Hermitian within 1e-12.
    """
    h = np.asarray(h)
    if check and not is_hermitian(h):
        raise NonHermitianError("eigensolve requires a Hermitian matrix")
    n = h.shape[0]
    if num_levels is None or num_levels >= n:
        return scipy.linalg.eigh(h)
    return scipy.linalg.eigh(h, subset_by_index=[0, num_levels - 1])
