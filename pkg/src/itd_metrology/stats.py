"""Outcome probabilities, Fisher information, estimators and RMSE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadParamsError,
    DegenerateProbabilityError,
    DimensionMismatchError,
    EmptyListError,
    EmptyRecordError,
    NonOrthogonalEnsembleError,
)
from .linalg import StateEnsemble, as_matrix
from .physics import SchemeConfig, build_projectors, build_sequential, measurement_order

PROB_TOL = 1e-12
CFI_STEP = 1e-6
ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class ProbPair:
    p_plus: float
    p_minus: float

    def __post_init__(self):
        for p in (self.p_plus, self.p_minus):
            if not (-PROB_TOL <= p <= 1 + PROB_TOL):
                raise BadParamsError(f"probability {p!r} outside [0, 1]")
        if abs(self.p_plus + self.p_minus - 1.0) > PROB_TOL:
            raise BadParamsError(f"probabilities sum to {self.p_plus + self.p_minus!r}")

    @classmethod
    def from_plus(cls, p_plus: float) -> "ProbPair":
        return cls(p_plus, 1.0 - p_plus)

    def as_tuple(self) -> tuple[float, float]:
        return self.p_plus, self.p_minus


@dataclass(frozen=True)
class CountRecord:
    nu_plus: int
    nu_minus: int

    def __post_init__(self):
        if self.nu_plus < 0 or self.nu_minus < 0:
            raise BadParamsError(f"negative counts ({self.nu_plus}, {self.nu_minus})")

    @property
    def total(self) -> int:
        return self.nu_plus + self.nu_minus


def phase_scale(t_s: float, t_c: float, n: int) -> float:
    """Coefficient of g inside the sine: ``(N^2 + N) T_S T_C``."""
    return (n * n + n) * t_s * t_c


def probs_closed(g: float, t_s: float, t_c: float, n: int = 1) -> ProbPair:
    """Closed-form outcome probabilities for the |H> ancilla."""
    x = phase_scale(t_s, t_c, n) * g
    s = math.sin(x)
    # the smaller outcome via sin^2(pi/4 -+ x/2) avoids cancellation in 1 - |s|
    if s > 0.5:
        return ProbPair(0.5 * (1.0 + s), math.sin(math.pi / 4 - x / 2) ** 2)
    if s < -0.5:
        return ProbPair(math.cos(math.pi / 4 - x / 2) ** 2, 0.5 * (1.0 - s))
    return ProbPair(0.5 * (1.0 + s), 0.5 * (1.0 - s))


def probs_single_closed(g: float, t: float) -> ProbPair:
    return probs_closed(g, t, t, 1)


def probs_sequential_closed(alpha: float, n: int) -> ProbPair:
    if n < 1:
        raise BadParamsError(f"n must be >= 1, got {n}")
    return probs_closed(alpha, 1.0, 1.0, n)


def probs_simulated(cfg: SchemeConfig) -> ProbPair:
    """Evolve the joint state through the full scheme and project."""
    u = build_sequential(cfg)
    pi_plus, pi_minus = build_projectors(cfg.basis, measurement_order(cfg))
    final = cfg.joint_ensemble().evolve(u).vectors
    p_plus = float(np.dot(cfg.joint_ensemble().weights,
                          np.einsum("ij,ij->i", final.conj(), final @ pi_plus.T).real))
    p_minus = float(np.dot(cfg.joint_ensemble().weights,
                           np.einsum("ij,ij->i", final.conj(), final @ pi_minus.T).real))
    return ProbPair(p_plus, p_minus)


def cfi(prob_fn: Callable[[float], ProbPair], g: float, step: float = CFI_STEP) -> float:
    """Classical Fisher information ``sum_i (dP_i/dg)^2 / P_i`` by central difference."""
    p = np.array(prob_fn(g).as_tuple())
    if np.any(p < PROB_TOL):
        raise DegenerateProbabilityError(f"probability {p.min():.3e} too close to 0 at g={g}")
    dp = (np.array(prob_fn(g + step).as_tuple()) - np.array(prob_fn(g - step).as_tuple())) / (2 * step)
    return float(np.sum(dp**2 / p))


def qfi_ensemble(ens: StateEnsemble, k) -> float:
    """Quantum Fisher information of a unitary family generated by ``k``.

    ``ens`` must be (part of) the spectral decomposition of the state. Basis
    vectors missing from it are treated as zero-weight eigenvectors, whose
    cross terms enter through the projector onto the orthogonal complement.
    """
    k = as_matrix(k)
    if k.shape != (ens.dim, ens.dim):
        raise DimensionMismatchError(f"operator {k.shape} on states of dim {ens.dim}")
    vecs = ens.vectors
    gram = vecs.conj() @ vecs.T
    if np.max(np.abs(gram - np.eye(len(ens)))) > ORTHO_TOL:
        raise NonOrthogonalEnsembleError("ensemble vectors are not mutually orthogonal")
    p = ens.weights
    kv = vecs @ k.T  # rows: K|psi_i>
    kij = vecs.conj() @ kv.T  # <psi_i|K|psi_j>
    psum = p[:, None] + p[None, :]
    pdiff2 = (p[:, None] - p[None, :]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(psum > 0, pdiff2 / psum, 0.0)
    inner = 2.0 * float(np.sum(coef * np.abs(kij) ** 2))
    # components of K|psi_i> outside span{psi_j}
    outside = np.einsum("ij,ij->i", kv.conj(), kv).real - np.sum(np.abs(kij) ** 2, axis=0)
    return inner + 4.0 * float(np.dot(p, np.clip(outside, 0.0, None)))


def mle(rec: CountRecord, scale: float) -> float:
    """Invert ``P+ = (1 + sin(scale * g))/2`` on the principal branch.

    Uses ``atan2(nu+ - nu-, 2 sqrt(nu+ nu-))``, which equals
    ``asin((nu+ - nu-)/nu)`` but stays accurate near the branch edges.
    """
    if rec.total < 1:
        raise EmptyRecordError("count record has no detections")
    if not scale > 0:
        raise BadParamsError(f"estimator scale must be positive, got {scale!r}")
    return math.atan2(rec.nu_plus - rec.nu_minus, 2.0 * math.sqrt(rec.nu_plus * rec.nu_minus)) / scale


def mle_single(rec: CountRecord, t: float) -> float:
    if not t > 0:
        raise BadParamsError(f"t must be positive, got {t!r}")
    return mle(rec, 2.0 * t * t)


def mle_sequential(rec: CountRecord, n: int) -> float:
    if n < 1:
        raise BadParamsError(f"n must be >= 1, got {n}")
    return mle(rec, float(n * n + n))


def rmse(estimates: Sequence[float], g0: float) -> float:
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise EmptyListError("no estimates")
    return float(np.sqrt(np.mean((est - g0) ** 2)))


def experimental_bound(variant: str, nu: float, t_or_n: float) -> float:
    """Cramer-Rao limit of the implemented measurement.

    ``single-T``: 1/(2 sqrt(nu) T^2); ``sequential-N``: 1/(sqrt(nu) (N^2 + N)).
    """
    if nu < 1:
        raise BadParamsError(f"nu must be >= 1, got {nu}")
    if variant == "single-T":
        if not t_or_n > 0:
            raise BadParamsError(f"T must be positive, got {t_or_n!r}")
        return 1.0 / (2.0 * math.sqrt(nu) * t_or_n**2)
    if variant == "sequential-N":
        if t_or_n < 1:
            raise BadParamsError(f"N must be >= 1, got {t_or_n!r}")
        return 1.0 / (math.sqrt(nu) * (t_or_n**2 + t_or_n))
    raise BadParamsError(f"unknown experimental bound {variant!r}")
