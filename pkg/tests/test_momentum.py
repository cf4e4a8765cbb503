import math

import numpy as np
import pytest

from itd_metrology.errors import BadParamsError, DimensionMismatchError, StepTooSmallError
from itd_metrology.linalg import StateEnsemble, evolve_unitary, max_diff, spectral_decompose
from itd_metrology.momentum import (
    avg_uncertainty,
    half_spread,
    momentum_itd_analytic,
    momentum_itd_sequential,
    momentum_numeric,
    momentum_report,
    momentum_standard,
    precision_bound,
    uncertainty_bound_sq,
)
from itd_metrology.physics import (
    KET_H,
    OamBasis,
    SchemeConfig,
    build_lz,
    build_rotation,
    build_sequential,
    build_single_shot,
    reduced_probe_branches,
    safe_joint_indices,
)

from conftest import random_ancilla, random_hermitian, random_probe

BASIS = OamBasis(-20, 20)


def block(a, idx):
    return a[np.ix_(idx, idx)]


def test_numeric_commuting_generator(small_basis):
    lz = build_lz(small_basis)
    k = momentum_numeric(lambda g: build_rotation(small_basis, g), 0.37)
    assert max_diff(k, lz) <= 1e-8


def test_numeric_constant_unitary(rng):
    u = evolve_unitary(random_hermitian(rng, 4), 1.0)
    assert max_diff(momentum_numeric(lambda g: u, 0.5), np.zeros((4, 4))) < 1e-12


def test_numeric_plain_central_difference_is_second_order(rng):
    h0, v = random_hermitian(rng, 4), random_hermitian(rng, 4)
    fam = lambda g: evolve_unitary(h0 + g * v, 1.3)
    ref = momentum_numeric(fam, 0.2, step=1e-4)
    e1 = max_diff(momentum_numeric(fam, 0.2, step=4e-4, richardson=False), ref)
    e2 = max_diff(momentum_numeric(fam, 0.2, step=2e-4, richardson=False), ref)
    assert 3.5 < e1 / e2 < 4.5
    # step 1e-4 -> 5e-5 changes the result by O(step^2)
    d = max_diff(momentum_numeric(fam, 0.2, step=1e-4, richardson=False),
                 momentum_numeric(fam, 0.2, step=5e-5, richardson=False))
    assert d < 1e-7


def test_numeric_residual_reported_and_guarded(rng):
    h0, v = random_hermitian(rng, 3), random_hermitian(rng, 3)
    fam = lambda g: evolve_unitary(h0 + g * v, 1.0)
    _, resid = momentum_numeric(fam, 0.0, return_residual=True)
    assert resid < 1e-8
    with pytest.raises(StepTooSmallError):
        momentum_numeric(fam, 0.0, step=1e-15)
    with pytest.raises(BadParamsError):
        momentum_numeric(fam, 0.0, step=0.0)


def test_standard_commuting_closed_form(small_basis):
    lz = build_lz(small_basis)
    k = momentum_standard(lz, 0.4 * lz, 3.0)
    assert max_diff(k, 3.0 * lz) <= 1e-10
    assert max_diff(momentum_standard(lz, lz, 0.0), np.zeros_like(lz)) == 0


def test_standard_matches_numeric_noncommuting(rng):
    h0, v = random_hermitian(rng, 4), random_hermitian(rng, 4)
    g, t_s = 0.3, 1.7
    k_quad = momentum_standard(v, h0 + g * v, t_s)
    k_fd = momentum_numeric(lambda x: evolve_unitary(h0 + x * v, t_s), g)
    assert max_diff(k_quad, k_fd) <= 1e-6


def test_standard_even_points_bumped(small_basis):
    lz = build_lz(small_basis)
    assert max_diff(momentum_standard(lz, lz, 1.0, quad_points=10), lz) <= 1e-10


def test_itd_analytic_examples(small_basis):
    ks = 2.0 * build_lz(small_basis)
    assert max_diff(momentum_itd_analytic(ks, 0.0, 2.0), np.kron(ks, np.eye(2))) == 0
    k = momentum_itd_analytic(build_lz(small_basis), 1.0, 1.0)
    i0 = small_basis.index(0)
    assert k[2 * i0, 2 * i0] == -1 and k[2 * i0 + 1, 2 * i0 + 1] == 1


def test_itd_sequential_examples(small_basis):
    ks = build_lz(small_basis)
    assert max_diff(momentum_itd_sequential(ks, 1, 2.0, 1.5), momentum_itd_analytic(ks, 2.0, 1.5)) == 0
    k3 = momentum_itd_sequential(3 * ks, 3, 1.0, 1.0)
    i0 = small_basis.index(0)
    assert (k3[2 * i0, 2 * i0], k3[2 * i0 + 1, 2 * i0 + 1]) == (-6, 6)
    with pytest.raises(BadParamsError):
        momentum_itd_sequential(ks, 0, 1.0, 1.0)


@pytest.mark.parametrize("g", [0.001, math.pi / 180, 0.1])
@pytest.mark.parametrize("m", range(5))
@pytest.mark.parametrize("n", range(1, 5))
def test_analytic_matches_finite_difference(g, m, n):
    t_s = float(max(m, 1))
    cfg = SchemeConfig(g=g, t_s=t_s, m=m, n_iter=n, basis=BASIS)
    ks = t_s * build_lz(BASIS)
    if n == 1:
        k_fd = momentum_numeric(lambda x: build_single_shot(cfg.with_g(x)), g)
        k_an = momentum_itd_analytic(ks, cfg.t_c, t_s)
    else:
        k_fd = momentum_numeric(lambda x: build_sequential(cfg.with_g(x)), g)
        k_an = momentum_itd_sequential(n * ks, n, cfg.t_c, t_s)
    idx = safe_joint_indices(BASIS, n * m)
    assert max_diff(block(k_fd, idx), block(k_an, idx)) <= 1e-6


@pytest.mark.parametrize("n,tc,ts", [(1, 1.0, 1.0), (2, 3.0, 0.5), (4, 2.0, 1.0)])
def test_branch_offset_exact(n, tc, ts, rng):
    ksn = random_hermitian(rng, 5)
    k = momentum_itd_sequential(ksn, n, tc, ts)
    off = (n * n + n) / 2 * tc * ts
    lam = spectral_decompose(ksn)[0]
    assert np.allclose(spectral_decompose(k[0::2, 0::2])[0], lam - off, atol=1e-9)
    assert np.allclose(spectral_decompose(k[1::2, 1::2])[0], lam + off, atol=1e-9)
    assert max_diff(k[0::2, 1::2], 0) == 0


def test_avg_uncertainty_examples(small_basis):
    lz = build_lz(small_basis)
    assert avg_uncertainty(StateEnsemble.pure(small_basis.ket(2)), lz) == 0
    probe = np.kron(small_basis.ket(0), KET_H)
    k = momentum_itd_analytic(lz, 1.0, 1.0)
    assert avg_uncertainty(StateEnsemble.pure(probe), k) == pytest.approx(1.0, abs=1e-15)
    mixed = StateEnsemble(np.array([0.5, 0.5]), np.stack([small_basis.ket(1), small_basis.ket(-1)]))
    assert avg_uncertainty(mixed, lz) == 0
    with pytest.raises(DimensionMismatchError):
        avg_uncertainty(mixed, np.eye(3))


def test_avg_uncertainty_is_not_density_variance(small_basis):
    # ensemble average of zero variances, although the density matrix has Var(L_z) = 1
    lz = build_lz(small_basis)
    mixed = StateEnsemble(np.array([0.5, 0.5]), np.stack([small_basis.ket(1), small_basis.ket(-1)]))
    rho = mixed.density()
    assert np.trace(rho @ lz @ lz).real - np.trace(rho @ lz).real ** 2 == pytest.approx(1.0)
    assert avg_uncertainty(mixed, lz) == 0


def test_precision_bound_examples():
    assert precision_bound("itd-N", 2000, 0.0, n=4) == pytest.approx(1 / (math.sqrt(2000) * 20), rel=1e-15)
    assert precision_bound("itd-N", 2000, 0.0, n=4) == pytest.approx(1.11803e-3, rel=1e-5)
    assert precision_bound("standard-T", 1, 1.0, t=1) == 0.5
    for t in (1, 2, 3, 4):
        assert precision_bound("itd-T", 2000, 0.0, t=t) == pytest.approx(1 / (2 * math.sqrt(2000) * t * t), rel=1e-15)
    assert precision_bound("standard-N", 4, 1.0, n=3) == pytest.approx(1 / 12)
    assert precision_bound("standard-T", 10, 0.0, t=1) == math.inf


@pytest.mark.parametrize("kw", [dict(variant="itd-T", nu=0, t=1), dict(variant="itd-T", nu=1, t=0),
                                dict(variant="itd-N", nu=1, n=0), dict(variant="nope", nu=1, t=1),
                                dict(variant="standard-T", nu=1, dv=-1, t=1)])
def test_precision_bound_bad_params(kw):
    with pytest.raises(BadParamsError):
        precision_bound(**kw)


def test_uncertainty_bounds_formulae():
    assert uncertainty_bound_sq("standard-T", 2.0, t_s=3.0) == 36.0
    assert uncertainty_bound_sq("standard-N", 2.0, t_s=1.0, n=3) == 36.0
    assert uncertainty_bound_sq("itd-T", 1.0, t_s=2.0, t_c=3.0) == 4.0 + 36.0
    assert uncertainty_bound_sq("itd-N", 1.0, t_s=1.0, t_c=1.0, n=3) == 9.0 + 36.0


def test_half_spread(small_basis):
    lz = build_lz(small_basis)
    assert half_spread(lz) == 6.0
    assert half_spread(lz, np.arange(3, 8)) == 2.0


@pytest.mark.parametrize("m,n", [(1, 1), (2, 1), (1, 3), (3, 2), (4, 4)])
def test_bound_compliance_random_ensembles(m, n, rng):
    t_s = 1.0
    lz = build_lz(BASIS)
    for _ in range(20):
        probe, idx = random_probe(rng, BASIS, n * m, width=6)
        dv = half_spread(lz, idx)
        phi = np.asarray(random_ancilla(rng))
        joint = probe.tensor(phi)
        k_std = n * t_s * lz
        k_itd = momentum_itd_sequential(k_std, n, float(m), t_s)
        std_ctx = "standard-T" if n == 1 else "standard-N"
        rep_s = momentum_report(probe, k_std, std_ctx, dv, t_s, float(m), n)
        rep_i = momentum_report(joint, k_itd, "itd-N", dv, t_s, float(m), n)
        assert rep_s.within_bound and rep_i.within_bound


@pytest.mark.parametrize("m,n,t_s", [(1, 1, 1.0), (2, 1, 2.0), (1, 4, 1.0), (3, 2, 0.7), (4, 4, 4.0)])
def test_final_probe_uncertainty_matches_standard(m, n, t_s, rng):
    lz = build_lz(BASIS)
    for _ in range(10):
        probe, _ = random_probe(rng, BASIS, n * m, width=8)
        cfg = SchemeConfig(g=0.3, t_s=t_s, m=m, n_iter=n, basis=BASIS, probe=probe,
                           ancilla=random_ancilla(rng))
        itd = avg_uncertainty(reduced_probe_branches(cfg), lz)
        std_final = probe.evolve(np.linalg.matrix_power(build_rotation(BASIS, cfg.alpha), n))
        assert itd == pytest.approx(avg_uncertainty(std_final, lz), abs=1e-10)


def test_final_probe_invariance_needs_branch_decomposition(rng):
    # the same reduced density matrix, eigen-decomposed, gives a different average uncertainty
    lz = build_lz(BASIS)
    probe, _ = random_probe(rng, BASIS, 2, width=6)
    cfg = SchemeConfig(g=0.3, t_s=1.0, m=1, n_iter=2, basis=BASIS, probe=probe, ancilla=random_ancilla(rng))
    branches = reduced_probe_branches(cfg)
    eig = StateEnsemble.from_density(branches.density(), cutoff=1e-12)
    std_final = probe.evolve(np.linalg.matrix_power(build_rotation(BASIS, cfg.alpha), 2))
    target = avg_uncertainty(std_final, lz)
    assert avg_uncertainty(branches, lz) == pytest.approx(target, abs=1e-10)
    assert abs(avg_uncertainty(eig, lz) - target) > 1e-3
