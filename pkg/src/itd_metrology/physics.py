"""Operators of the OAM / polarization experiment on a truncated basis.

Joint space ordering is OAM-major, polarization-minor, with polarization
index 0 = |R> (switch control |0>) and 1 = |L> (switch control |1>).

Conventions fixed here:

* The generating unitary is ``U_C = exp(-i m phi)``, the OAM lowering map
  |l> -> |l - m>, so the |R> branch shifts OAM by -m and the |L> branch
  by +m. ``U_C^dag L_z U_C = L_z - m``, i.e. the generating time is T_C = m.
* ``|H> = (|R> + |L>)/sqrt(2)``.
* ``|+> = (|R> - i|L>)/sqrt(2)`` and ``|-> = (|R> + i|L>)/sqrt(2)``.  This
  phase choice makes the projected probability
  ``P+ = (1 + sin(2 theta))/2`` for the unwound ancilla
  ``(e^{i theta}|R> + e^{-i theta}|L>)/sqrt(2)``, so dP+/dg > 0 at g = 0.

The continuous angle operator is never built; only its exponentials
(cyclic OAM shifts) exist.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParamsError, ShiftTooLargeError, SupportOverflowError
from .linalg import StateEnsemble, dagger, ket

R, L = 0, 1

KET_R = np.array([1.0, 0.0], dtype=np.complex128)
KET_L = np.array([0.0, 1.0], dtype=np.complex128)
KET_H = (KET_R + KET_L) / np.sqrt(2.0)
KET_PLUS = (KET_R - 1j * KET_L) / np.sqrt(2.0)
KET_MINUS = (KET_R + 1j * KET_L) / np.sqrt(2.0)

PROJ_R = np.outer(KET_R, KET_R.conj())
PROJ_L = np.outer(KET_L, KET_L.conj())
SIGMA_Z = PROJ_R - PROJ_L
ID2 = np.eye(2, dtype=np.complex128)

SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class OamBasis:
    l_min: int = -40
    l_max: int = 40

    def __post_init__(self):
        if not (self.l_min <= 0 <= self.l_max):
            raise BadParamsError(
                f"OAM basis [{self.l_min}, {self.l_max}] must contain l = 0"
            )

    @property
    def dim(self) -> int:
        return self.l_max - self.l_min + 1

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.l_min, self.l_max + 1)

    def index(self, l: int) -> int:
        if not (self.l_min <= l <= self.l_max):
            raise BadParamsError(f"l = {l} outside basis [{self.l_min}, {self.l_max}]")
        return l - self.l_min

    def ket(self, l: int) -> np.ndarray:
        return ket(self.dim, self.index(l))


DEFAULT_BASIS = OamBasis(-40, 40)


@dataclass(frozen=True)
class SchemeConfig:
    """Parameters of one run of the (sequential) ITD scheme.

    ``probe`` is an ensemble on the OAM factor alone; ``None`` means the
    Gaussian beam |l = 0>.
    """

    g: float
    t_s: float
    m: int
    n_iter: int = 1
    ancilla: tuple[complex, complex] = (1 / np.sqrt(2.0), 1 / np.sqrt(2.0))
    basis: OamBasis = DEFAULT_BASIS
    probe: StateEnsemble | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.g) and np.isfinite(self.t_s)):
            raise BadParamsError("g and t_s must be finite")
        if self.m < 0 or self.n_iter < 1:
            raise BadParamsError(f"need m >= 0 and n_iter >= 1, got m={self.m}, N={self.n_iter}")
        a0, a1 = self.ancilla
        if abs(abs(a0) ** 2 + abs(a1) ** 2 - 1.0) > 1e-12:
            raise BadParamsError(f"ancilla amplitudes not normalized: {self.ancilla}")
        if self.probe is not None and self.probe.dim != self.basis.dim:
            raise BadParamsError(
                f"probe dimension {self.probe.dim} != basis dimension {self.basis.dim}"
            )

    @property
    def alpha(self) -> float:
        """Rotation angle per pass, ``g * t_s``."""
        return self.g * self.t_s

    @property
    def t_c(self) -> float:
        return float(self.m)

    @property
    def ancilla_ket(self) -> np.ndarray:
        return np.asarray(self.ancilla, dtype=np.complex128)

    def probe_ensemble(self) -> StateEnsemble:
        if self.probe is None:
            return StateEnsemble.pure(self.basis.ket(0))
        return self.probe

    def joint_ensemble(self) -> StateEnsemble:
        return self.probe_ensemble().tensor(self.ancilla_ket)

    def with_g(self, g: float) -> "SchemeConfig":
        return SchemeConfig(g, self.t_s, self.m, self.n_iter, self.ancilla, self.basis, self.probe)


def single_shot_config(g: float, t: int, basis: OamBasis = DEFAULT_BASIS, **kw) -> SchemeConfig:
    """Reference single-shot experiment: ``T_S = T_C = m = t``, N = 1."""
    return SchemeConfig(g=g, t_s=float(t), m=int(t), n_iter=1, basis=basis, **kw)


def sequential_config(alpha: float, n: int, basis: OamBasis = DEFAULT_BASIS, **kw) -> SchemeConfig:
    """Reference sequential experiment: ``T_S = T_C = m = 1``, so g equals alpha."""
    return SchemeConfig(g=alpha, t_s=1.0, m=1, n_iter=int(n), basis=basis, **kw)


def probe_support(ens: StateEnsemble, basis: OamBasis) -> tuple[int, int]:
    """Smallest and largest l carrying amplitude in any ensemble member."""
    occupied = np.nonzero(np.any(np.abs(ens.vectors) > SUPPORT_TOL, axis=0))[0]
    if occupied.size == 0:
        raise BadParamsError("probe ensemble has empty support")
    return int(basis.values[occupied[0]]), int(basis.values[occupied[-1]])


def check_support(cfg: SchemeConfig, n: int | None = None) -> None:
    n = cfg.n_iter if n is None else n
    reach = n * cfg.m
    basis = cfg.basis
    if basis.dim < 2 * reach + 1:
        raise SupportOverflowError(
            f"basis dimension {basis.dim} < 2*N*m + 1 = {2 * reach + 1}"
        )
    lo, hi = probe_support(cfg.probe_ensemble(), basis)
    if lo < basis.l_min + reach or hi > basis.l_max - reach:
        raise SupportOverflowError(
            f"probe support [{lo}, {hi}] must lie in "
            f"[{basis.l_min + reach}, {basis.l_max - reach}] for N*m = {reach}"
        )


def build_lz(basis: OamBasis) -> np.ndarray:
    return np.diag(basis.values.astype(np.complex128))


def build_shift(basis: OamBasis, m: int) -> np.ndarray:
    """Cyclic OAM ladder map |l> -> |l + m>, i.e. ``exp(i m phi)``."""
    if abs(m) >= basis.dim:
        raise ShiftTooLargeError(f"|m| = {abs(m)} >= basis dimension {basis.dim}")
    return np.roll(np.eye(basis.dim, dtype=np.complex128), m, axis=0)


def build_rotation(basis: OamBasis, alpha: float) -> np.ndarray:
    """Profile rotation ``exp(-i alpha L_z)``."""
    if not np.isfinite(alpha):
        raise BadParamsError(f"non-finite rotation angle {alpha!r}")
    return np.diag(np.exp(-1j * alpha * basis.values))


def controlled(block_r: np.ndarray, block_l: np.ndarray) -> np.ndarray:
    """``block_r (x) |R><R| + block_l (x) |L><L|`` on the joint space."""
    return np.kron(block_r, PROJ_R) + np.kron(block_l, PROJ_L)


def build_itd_switch(u_c: np.ndarray) -> np.ndarray:
    u_c = np.asarray(u_c, dtype=np.complex128)
    return controlled(u_c, dagger(u_c))


def _branch_blocks(cfg: SchemeConfig) -> tuple[np.ndarray, np.ndarray]:
    u_s = build_rotation(cfg.basis, cfg.alpha)
    u_c = build_shift(cfg.basis, -cfg.m)
    return u_s @ u_c, u_s @ dagger(u_c)


def build_single_shot(cfg: SchemeConfig) -> np.ndarray:
    """``(U_S (x) 1) U_I`` for one pass through switch and rotation."""
    check_support(cfg, n=1)
    u_s = build_rotation(cfg.basis, cfg.alpha)
    u_i = build_itd_switch(build_shift(cfg.basis, -cfg.m))
    return np.kron(u_s, ID2) @ u_i


def build_sequential(cfg: SchemeConfig) -> np.ndarray:
    """N passes, powered per control branch before assembling the joint matrix."""
    check_support(cfg)
    fwd, bwd = _branch_blocks(cfg)
    n = cfg.n_iter
    return controlled(np.linalg.matrix_power(fwd, n), np.linalg.matrix_power(bwd, n))


def build_unwinder(basis: OamBasis, order: int) -> np.ndarray:
    """``exp(-i k phi) (x) |L><L| + exp(i k phi) (x) |R><R|`` for order k."""
    return controlled(build_shift(basis, order), build_shift(basis, -order))


def build_projectors(basis: OamBasis, order: int) -> tuple[np.ndarray, np.ndarray]:
    u = build_unwinder(basis, order)
    ud = dagger(u)
    eye = np.eye(basis.dim, dtype=np.complex128)
    p_plus = ud @ np.kron(eye, np.outer(KET_PLUS, KET_PLUS.conj())) @ u
    p_minus = ud @ np.kron(eye, np.outer(KET_MINUS, KET_MINUS.conj())) @ u
    return p_plus, p_minus


def measurement_order(cfg: SchemeConfig) -> int:
    """Q-plate order that removes the accumulated charge, ``N * m``."""
    return cfg.n_iter * cfg.m


def final_ensemble(cfg: SchemeConfig) -> StateEnsemble:
    return cfg.joint_ensemble().evolve(build_sequential(cfg))


def reduced_probe_branches(cfg: SchemeConfig) -> StateEnsemble:
    """Final probe ensemble with one member per (initial state, ancilla branch).

    Tracing out the ancilla leaves ``sum_i p_i |a|^2 F psi_i psi_i^dag F^dag +
    p_i |b|^2 B psi_i psi_i^dag B^dag`` with F, B the two branch evolutions;
    this returns exactly that decomposition, not the eigen-decomposition of
    the reduced density matrix.
    """
    check_support(cfg)
    fwd, bwd = _branch_blocks(cfg)
    n = cfg.n_iter
    fwd_n, bwd_n = np.linalg.matrix_power(fwd, n), np.linalg.matrix_power(bwd, n)
    a0, a1 = cfg.ancilla
    probe = cfg.probe_ensemble()
    weights, vectors = [], []
    for amp, block in ((a0, fwd_n), (a1, bwd_n)):
        w = abs(amp) ** 2
        if w == 0:
            continue
        weights.append(probe.weights * w)
        vectors.append(probe.vectors @ block.T)
    weights = np.concatenate(weights)
    return StateEnsemble(weights / weights.sum(), np.concatenate(vectors))


def safe_oam_indices(basis: OamBasis, reach: int) -> np.ndarray:
    """OAM indices at least ``reach`` away from both truncation edges."""
    l = basis.values
    return np.nonzero((l >= basis.l_min + reach) & (l <= basis.l_max - reach))[0]


def safe_joint_indices(basis: OamBasis, reach: int) -> np.ndarray:
    """Joint-space indices whose OAM part never wraps within ``reach`` shifts.

    Cyclic shifts are exact only away from the edges, so operator identities
    that hold on the untruncated space are compared on this block.
    """
    oam = safe_oam_indices(basis, reach)
    return np.stack([2 * oam, 2 * oam + 1], axis=1).reshape(-1)
