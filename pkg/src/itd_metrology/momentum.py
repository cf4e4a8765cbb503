"""Canonical-momentum operators and the precision bounds built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadParamsError, DimensionMismatchError, NumericalGuardError, StepTooSmallError
from .linalg import StateEnsemble, as_matrix, check_hermitian, dagger, max_diff, spectral_decompose
from .physics import SIGMA_Z, PROJ_L, PROJ_R, ID2

DEFAULT_STEP = 1e-5
HERMITIZE_LIMIT = 1e-6
VARIANCE_FLOOR = -1e-12
SIMPSON_POINTS_PER_TIME = 200

BOUND_VARIANTS = ("standard-T", "standard-N", "itd-T", "itd-N")


def _central_difference(u_of_g, g, h):
    return (as_matrix(u_of_g(g + h)) - as_matrix(u_of_g(g - h))) / (2.0 * h)


def momentum_numeric(
    u_of_g: Callable[[float], np.ndarray],
    g: float,
    step: float = DEFAULT_STEP,
    richardson: bool = True,
    return_residual: bool = False,
):
    """Finite-difference canonical momentum ``i U^dag dU/dg``.

    With ``richardson`` the central differences at ``step`` and ``step/2`` are
    combined to cancel the O(step^2) term. The result is Hermitized; the
    anti-Hermitian part that was discarded is the residual.
    """
    if not step > 0:
        raise BadParamsError(f"step must be positive, got {step!r}")
    u = as_matrix(u_of_g(g))
    du = _central_difference(u_of_g, g, step)
    if richardson:
        du = (4.0 * _central_difference(u_of_g, g, step / 2.0) - du) / 3.0
    k = 1j * dagger(u) @ du
    herm = 0.5 * (k + dagger(k))
    residual = 0.5 * max_diff(k, dagger(k))
    if residual > HERMITIZE_LIMIT:
        raise StepTooSmallError(
            f"Hermitization residual {residual:.3e} exceeds {HERMITIZE_LIMIT:g}; "
            f"step {step:g} is unsuitable"
        )
    return (herm, residual) if return_residual else herm


def simpson_weights(n: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    if n < 3 or n % 2 == 0:
        raise BadParamsError(f"composite Simpson needs an odd point count >= 3, got {n}")
    nodes = np.linspace(0.0, t, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return nodes, w * (t / (n - 1)) / 3.0


def momentum_standard(v_s, h_s, t_s: float, quad_points: int | None = None) -> np.ndarray:
    """Heisenberg-picture momentum ``int_0^T U^dag(t) V U(t) dt`` by Simpson's rule.

    ``quad_points`` defaults to 200 intervals per unit time; an even count is
    bumped to the next odd number.
    """
    v_s = check_hermitian(v_s)
    h_s = check_hermitian(h_s)
    if v_s.shape != h_s.shape:
        raise DimensionMismatchError(f"V_S {v_s.shape} vs H_S {h_s.shape}")
    if quad_points is None:
        quad_points = max(2, int(math.ceil(SIMPSON_POINTS_PER_TIME * abs(t_s)))) + 1
    if quad_points < 2:
        raise BadParamsError(f"quad_points must be >= 2, got {quad_points}")
    if quad_points % 2 == 0:
        quad_points += 1
    if t_s == 0:
        return np.zeros_like(v_s)

    lam, w = spectral_decompose(h_s)
    v_eig = dagger(w) @ v_s @ w
    gaps = lam[:, None] - lam[None, :]
    nodes, weights = simpson_weights(quad_points, t_s)
    phase_integral = np.zeros_like(v_eig)
    for t, wt in zip(nodes, weights):
        phase_integral += wt * np.exp(1j * gaps * t)
    k = w @ (v_eig * phase_integral) @ dagger(w)
    return 0.5 * (k + dagger(k))


def momentum_itd_analytic(k_s, t_c: float, t_s: float) -> np.ndarray:
    """``(K_S - T_C T_S) (x) |0><0| + (K_S + T_C T_S) (x) |1><1|``."""
    k_s = check_hermitian(k_s)
    shift = t_c * t_s * np.eye(k_s.shape[0])
    return np.kron(k_s - shift, PROJ_R) + np.kron(k_s + shift, PROJ_L)


def sequential_offset(n: int, t_c: float, t_s: float) -> float:
    return 0.5 * (n * n + n) * t_c * t_s


def momentum_itd_sequential(k_s_n, n: int, t_c: float, t_s: float) -> np.ndarray:
    if n < 1:
        raise BadParamsError(f"n must be >= 1, got {n}")
    k_s_n = check_hermitian(k_s_n)
    eye = np.eye(k_s_n.shape[0])
    return np.kron(k_s_n, ID2) - sequential_offset(n, t_c, t_s) * np.kron(eye, SIGMA_Z)


def state_variances(ens: StateEnsemble, k) -> np.ndarray:
    k = as_matrix(k)
    if k.shape != (ens.dim, ens.dim):
        raise DimensionMismatchError(f"operator {k.shape} on states of dim {ens.dim}")
    kv = ens.vectors @ k.T
    mean = np.einsum("ij,ij->i", ens.vectors.conj(), kv).real
    second = np.einsum("ij,ij->i", kv.conj(), kv).real
    var = second - mean**2
    # clamp round-off negatives; anything more negative is a real error
    if np.any(var < VARIANCE_FLOOR * max(1.0, float(np.max(second)))):
        raise NumericalGuardError(f"negative variance {var.min():.3e}")
    return np.clip(var, 0.0, None)


def avg_uncertainty(ens: StateEnsemble, k) -> float:
    """Ensemble-average standard deviation ``sqrt(sum_i p_i Var_i(K))``."""
    return float(np.sqrt(np.dot(ens.weights, state_variances(ens, k))))


def uncertainty_bound_sq(
    variant: str, dv_max: float, t_s: float = 1.0, t_c: float = 1.0, n: int = 1
) -> float:
    """Upper bound on the squared average momentum uncertainty.

    ``standard-T``: dV^2 T_S^2; ``standard-N``: N^2 dV^2 T_S^2;
    ``itd-T``: dV^2 T_S^2 + T_C^2 T_S^2;
    ``itd-N``: dV^2 N^2 T_S^2 + (N^2 + N)^2 T_C^2 T_S^2 / 4.
    """
    if dv_max < 0 or n < 1:
        raise BadParamsError("need dv_max >= 0 and n >= 1")
    if variant == "standard-T":
        return dv_max**2 * t_s**2
    if variant == "standard-N":
        return n**2 * dv_max**2 * t_s**2
    if variant == "itd-T":
        return dv_max**2 * t_s**2 + t_c**2 * t_s**2
    if variant == "itd-N":
        return dv_max**2 * n**2 * t_s**2 + sequential_offset(n, t_c, t_s) ** 2
    raise BadParamsError(f"unknown bound variant {variant!r}; expected one of {BOUND_VARIANTS}")


def precision_bound(variant: str, nu: float, dv: float = 0.0, t: float | None = None, n: int | None = None) -> float:
    """Lower bound on the estimation error of g after ``nu`` repetitions."""
    if nu < 1 or dv < 0:
        raise BadParamsError(f"need nu >= 1 and dv >= 0, got nu={nu}, dv={dv}")
    root_nu = math.sqrt(nu)
    if variant in ("standard-T", "itd-T"):
        if t is None or not t > 0:
            raise BadParamsError(f"{variant} needs t > 0, got {t!r}")
        if variant == "standard-T":
            denom = 2 * root_nu * dv * t
        else:
            denom = 2 * root_nu * math.sqrt(dv**2 * t**2 + t**4)
    elif variant in ("standard-N", "itd-N"):
        if n is None or n < 1:
            raise BadParamsError(f"{variant} needs n >= 1, got {n!r}")
        if variant == "standard-N":
            denom = 2 * root_nu * dv * n
        else:
            denom = root_nu * math.sqrt(4 * dv**2 * n**2 + (n**2 + n) ** 2)
    else:
        raise BadParamsError(f"unknown bound variant {variant!r}; expected one of {BOUND_VARIANTS}")
    if denom == 0:
        return math.inf
    return 1.0 / denom


def half_spread(v_s, support: np.ndarray | None = None) -> float:
    """Maximum standard deviation of V_S: half its eigenvalue spread.

    For a diagonal V_S, ``support`` selects the basis indices in use.
    """
    v_s = check_hermitian(v_s)
    if support is not None:
        lam = np.diag(v_s).real[support]
    else:
        lam, _ = spectral_decompose(v_s)
    return 0.5 * float(np.max(lam) - np.min(lam))


@dataclass(frozen=True)
class MomentumReport:
    operator: np.ndarray = field(repr=False)
    avg_uncertainty: float
    bound_context: str
    dv_max: float
    t_s: float
    t_c: float
    n: int
    nu: int = 1

    @property
    def bound_sq(self) -> float:
        return uncertainty_bound_sq(self.bound_context, self.dv_max, self.t_s, self.t_c, self.n)

    @property
    def within_bound(self) -> bool:
        return self.avg_uncertainty**2 <= self.bound_sq + 1e-9


def momentum_report(
    ens: StateEnsemble,
    k,
    bound_context: str,
    dv_max: float,
    t_s: float = 1.0,
    t_c: float = 1.0,
    n: int = 1,
    nu: int = 1,
) -> MomentumReport:
    k = check_hermitian(k)
    return MomentumReport(k, avg_uncertainty(ens, k), bound_context, dv_max, t_s, t_c, n, nu)
