"""Small dense complex linear-algebra layer.

Matrices are plain ``numpy`` complex128 arrays. The helpers here validate the
Hermitian / unitary invariants the rest of the package relies on and build
unitaries from a Hermitian spectral decomposition (never a power series).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonHermitianError,
    NonUnitaryError,
    NumericalGuardError,
)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
ENSEMBLE_TOL = 1e-12
ABS_FLOOR = 1e-12


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalGuardError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def max_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def max_diff(a, b) -> float:
    return max_norm(np.asarray(a) - np.asarray(b))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = max(max_norm(a), 1.0)
    return max_diff(a, dagger(a)) <= max(tol * scale, ABS_FLOOR)


def check_hermitian(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise NonHermitianError(f"non-square operator {m.shape}")
    if not is_hermitian(m):
        raise NonHermitianError(
            f"operator is not Hermitian: max |A - A^dag| = {max_diff(m, dagger(m)):.3e}"
        )
    return m


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    m = as_matrix(u)
    if m.shape[0] != m.shape[1]:
        raise NonUnitaryError(f"non-square operator {m.shape}")
    err = max_diff(dagger(m) @ m, np.eye(m.shape[0]))
    if err > tol:
        raise NonUnitaryError(f"operator is not unitary: max |U^dag U - I| = {err:.3e}")
    return m


def tensor(a, b) -> np.ndarray:
    """Kronecker product; the left factor is the major index."""
    return np.kron(as_matrix(a), as_matrix(b))


def spectral_decompose(h) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(eigenvalues, eigenvectors)`` of a Hermitian operator.

    Eigenvalues are real and ascending; eigenvectors are the columns of a
    unitary matrix ``v`` with ``h = v @ diag(w) @ v^dag``.
    """
    m = check_hermitian(h)
    # symmetrize so eigh sees an exactly Hermitian input
    w, v = np.linalg.eigh(0.5 * (m + dagger(m)))
    return w, v


def evolve_unitary(h, t: float) -> np.ndarray:
    """``exp(-i h t)`` built from the spectral decomposition of ``h``."""
    if not np.isfinite(t):
        raise NumericalGuardError(f"non-finite evolution time {t!r}")
    w, v = spectral_decompose(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def expectation(state: np.ndarray, op: np.ndarray) -> complex:
    return complex(np.vdot(state, op @ state))


@dataclass(frozen=True)
class StateEnsemble:
    """Weighted set of unit vectors ``{p_i, |psi_i>}``.

    ``vectors`` is stored as a 2-d array with one state per row.
    """

    weights: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        vs = np.asarray(self.vectors, dtype=np.complex128)
        if vs.ndim == 1:
            vs = vs[None, :]
        if vs.ndim != 2 or vs.shape[0] != w.size:
            raise DimensionMismatchError(
                f"{w.size} weights but vectors of shape {vs.shape}"
            )
        if np.any(w < 0) or abs(w.sum() - 1.0) > ENSEMBLE_TOL:
            raise NumericalGuardError(f"weights must be a probability vector, sum={w.sum()!r}")
        norms = np.linalg.norm(vs, axis=1)
        if np.any(np.abs(norms - 1.0) > ENSEMBLE_TOL):
            raise NumericalGuardError(f"ensemble vectors not normalized: {norms}")
        w.setflags(write=False)
        vs.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "vectors", vs)

    @classmethod
    def pure(cls, vector) -> "StateEnsemble":
        return cls(np.ones(1), np.asarray(vector, dtype=np.complex128)[None, :])

    @classmethod
    def from_density(cls, rho, cutoff: float = 0.0) -> "StateEnsemble":
        """Spectral decomposition of a density matrix, dropping weights <= cutoff."""
        w, v = spectral_decompose(rho)
        w = np.clip(w, 0.0, None)
        keep = w > cutoff
        w = w[keep] / w[keep].sum()
        return cls(w, v[:, keep].T)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    def density(self) -> np.ndarray:
        return (self.vectors.T * self.weights) @ np.conj(self.vectors)

    def evolve(self, u) -> "StateEnsemble":
        u = as_matrix(u)
        if u.shape[1] != self.dim:
            raise DimensionMismatchError(f"operator {u.shape} on states of dim {self.dim}")
        return StateEnsemble(self.weights, self.vectors @ u.T)

    def tensor(self, other_vector) -> "StateEnsemble":
        """Attach a fixed pure factor as the minor tensor index."""
        phi = np.asarray(other_vector, dtype=np.complex128)
        return StateEnsemble(self.weights, np.stack([np.kron(v, phi) for v in self.vectors]))
