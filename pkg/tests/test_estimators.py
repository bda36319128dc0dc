import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hmoments.errors import (CMXSingularityError, ContractError, EstimatorDomainError,
                             InsufficientMomentsError, ITENormalizationError, PDSDegeneracyError)
from hmoments.estimators import (cmx_energy, estimate, exact_ite_energy, exact_ite_variance,
                                 golden_section, infimum_estimate, ite_energy, ite_expectation,
                                 krylov_generalized_eig, lanczos_closed_forms, lanczos_coefficients,
                                 lanczos_energy, optimize_tau, pds_energy, rte_propagate, tridiagonal)
from hmoments.models import (HeisenbergParams, build_ansatz, build_heisenberg, build_magnetization,
                             exact_spectrum)
from hmoments.moments import ConnectedMomentTable, MomentTable, connected_moments, moments_exact
from hmoments.pauli import PauliSum
from hmoments.simulator import StateVector, prepare

from oracles import (heisenberg_matrix, krylov_ground, lanczos_vectors, random_vector,
                     taylor_ite_energy)

H = build_heisenberg(HeisenbergParams(J=1, U=1, B=1))
HM = heisenberg_matrix(1, 1, 1)
SPEC = exact_spectrum(H)
E0 = SPEC.ground_energy


def rand_state(seed):
    return StateVector(4, random_vector(np.random.default_rng(seed), 16))


def eigenstate(k=0):
    return StateVector(4, SPEC.eigenvectors[:, k])


def two_point_moments(e, p, N):
    """Moments of a spectral measure with weights p on energies e."""
    e, p = np.asarray(e, float), np.asarray(p, float)
    return MomentTable([float(np.sum(p * e ** n)) for n in range(N + 1)])


# Krylov and Lanczos

def test_krylov_r0_is_mean():
    m = moments_exact(rand_state(0), H, 3)
    assert krylov_generalized_eig(m, 0).energy == pytest.approx(m[1], abs=1e-12)


@pytest.mark.parametrize("r", [0, 1, 3])
def test_krylov_on_eigenstate(r):
    k = 3
    m = moments_exact(eigenstate(k), H, 2 * r + 1)
    assert krylov_generalized_eig(m, r).energy == pytest.approx(SPEC.eigenvalues[k], abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_krylov_matches_projection_oracle(seed):
    s = rand_state(seed)
    m = moments_exact(s, H, 7)
    for r in range(4):
        ref = krylov_ground(HM, s.amplitudes, r)
        got = krylov_generalized_eig(m, r).aux["spectrum"]
        np.testing.assert_allclose(got, ref, atol=1e-8)


def test_krylov_ansatz_converges_with_r():
    m = moments_exact(prepare(build_ansatz(-2, 1)), H, 21)
    errs = [krylov_generalized_eig(m, r).energy - E0 for r in range(1, 10)]
    assert all(e >= -1e-9 for e in errs)
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3
    # the ansatz overlaps ten distinct levels, so r = 4 stays visibly above E0
    assert errs[3] > 1e-2


def test_lanczos_eigenstate_stops():
    m = moments_exact(eigenstate(2), H, 8)
    alpha, beta = lanczos_coefficients(m, 4)
    assert len(alpha) == 1
    assert alpha[0] == pytest.approx(SPEC.eigenvalues[2], abs=1e-10)
    assert beta[0] == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_lanczos_matches_vector_recursion(seed):
    s = rand_state(seed)
    m = moments_exact(s, H, 6)
    alpha, beta = lanczos_coefficients(m, 3)
    a_ref, b_ref = lanczos_vectors(HM, s.amplitudes, 3)
    np.testing.assert_allclose(alpha, a_ref, atol=1e-9)
    np.testing.assert_allclose(beta, b_ref, atol=1e-9)


def test_lanczos_closed_forms():
    s = rand_state(11)
    m = moments_exact(s, H, 4)
    cf = lanczos_closed_forms(m)
    alpha, beta = lanczos_coefficients(m, 2)
    assert cf["alpha1"] == pytest.approx(alpha[0], abs=1e-10)
    assert cf["beta1"] == pytest.approx(beta[0], abs=1e-10)
    m1, m2, m3 = m[1], m[2], m[3]
    assert (m3 - 2 * m2 * m1 + m1 ** 3) / (m2 - m1 ** 2) == pytest.approx(alpha[1], abs=1e-9)
    # the fourth-order expression equals beta_2 squared
    assert cf["beta2_squared"] == pytest.approx(beta[1] ** 2, rel=1e-8)
    assert abs(cf["beta2_squared"] - beta[1]) > 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_lanczos_spectrum_equals_krylov(seed):
    m = moments_exact(rand_state(seed), H, 7)
    alpha, beta = lanczos_coefficients(m, 3)
    # depth 3 gives a 3 x 3 tridiagonal matrix, the r = 2 Krylov space
    np.testing.assert_allclose(np.linalg.eigvalsh(tridiagonal(alpha, beta)),
                               krylov_generalized_eig(m, 2).aux["spectrum"], atol=1e-9)
    assert lanczos_energy(m, 3).energy == pytest.approx(krylov_generalized_eig(m, 2).energy, abs=1e-9)


# connected-moment estimators

def test_infimum_eigenstate():
    c = connected_moments(moments_exact(eigenstate(0), H, 4))
    assert infimum_estimate(c).energy == pytest.approx(E0, abs=1e-9)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_infimum_two_level_closed_form_matches_numeric(p):
    m = two_point_moments([-1.3, 0.9], [p, 1 - p], 4)
    res = infimum_estimate(connected_moments(m))
    assert res.aux["numeric"] == pytest.approx(res.energy, abs=1e-8)


def test_infimum_improves_on_mean():
    Hg = build_heisenberg(HeisenbergParams(J=0.5, U=0.5, B=1.0))
    m = moments_exact(prepare(build_ansatz(-2, 1)), Hg, 4)
    assert infimum_estimate(connected_moments(m)).energy <= m[1]


def test_infimum_negative_radicand():
    with pytest.raises(EstimatorDomainError):
        infimum_estimate(ConnectedMomentTable([0.0, 0.2, 0.0, 0.08]))


def test_infimum_needs_four():
    with pytest.raises(InsufficientMomentsError):
        infimum_estimate(ConnectedMomentTable([0.0, 1.0, 0.5]))


def test_cmx_eigenstate():
    c = connected_moments(moments_exact(eigenstate(1), H, 7))
    res = cmx_energy(c, 4)
    assert res.energy == SPEC.eigenvalues[1] or res.energy == pytest.approx(SPEC.eigenvalues[1], abs=1e-9)
    assert res.diagnostics["eigenstate"]


def test_cmx2_closed_form():
    c = connected_moments(moments_exact(rand_state(3), H, 3))
    res = cmx_energy(c, 2)
    ref = c[1] - c[2] ** 2 / c[3]
    assert res.energy == pytest.approx(ref, rel=1e-12)
    assert res.aux["recursion"] == pytest.approx(ref, rel=1e-12)


@given(seed=st.integers(0, 10_000), n=st.integers(2, 5))
@settings(max_examples=40, deadline=None)
def test_cmx_forms_agree(seed, n):
    c = connected_moments(moments_exact(rand_state(seed), H, 2 * n - 1))
    try:
        res = cmx_energy(c, n)
    except CMXSingularityError:
        return
    assert abs(res.energy - res.aux["recursion"]) <= 1e-8 * max(1.0, abs(res.energy))


def test_cmx_singular_system():
    # c3 = 0 makes the first nested fraction singular
    with pytest.raises(CMXSingularityError):
        cmx_energy(ConnectedMomentTable([0.0, 1.0, 0.0]), 2)


def test_cmx4_vs_cmx2_is_reported_not_asserted():
    better = 0
    for seed in range(20):
        c = connected_moments(moments_exact(rand_state(seed), H, 7))
        try:
            e2, e4 = cmx_energy(c, 2).energy, cmx_energy(c, 4).energy
        except CMXSingularityError:
            continue
        better += abs(e4 - E0) <= abs(e2 - E0)
    print(f"CMX(4) at least as accurate as CMX(2) on {better}/20 seeds")


# PDS

def test_pds_k1_is_mean():
    m = moments_exact(rand_state(5), H, 1)
    assert pds_energy(m, 1).energy == pytest.approx(m[1], abs=1e-12)


def test_pds_exact_on_two_point_support():
    s = StateVector(4, (SPEC.eigenvectors[:, 0] + 2 * SPEC.eigenvectors[:, 7]) / np.sqrt(5))
    roots = pds_energy(moments_exact(s, H, 3), 2).aux["roots"]
    np.testing.assert_allclose(roots, SPEC.eigenvalues[[0, 7]], atol=1e-7)


def test_pds_degenerate_support_raises():
    s = StateVector(4, (SPEC.eigenvectors[:, 0] + SPEC.eigenvectors[:, 7]) / np.sqrt(2))
    with pytest.raises(PDSDegeneracyError):
        pds_energy(moments_exact(s, H, 5), 3)


def test_pds_chain_on_ansatz():
    m = moments_exact(prepare(build_ansatz(-2, 1)), H, 5)
    p2, p3 = pds_energy(m, 2).energy, pds_energy(m, 3).energy
    assert E0 - 1e-9 <= p3 <= p2 <= m[1]


def test_pds_noisy_moments_flag_complex_roots():
    m = moments_exact(rand_state(2), H, 7)
    noisy = MomentTable(m.values * (1 + 0.05 * np.random.default_rng(0).normal(size=len(m))))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        res = pds_energy(noisy, 4)
    if res.aux["complex_roots"].size:
        assert any(issubclass(w.category, RuntimeWarning) for w in rec)
    assert np.isfinite(res.energy)


# imaginary time

def test_ite_tau_zero_is_mean():
    m = moments_exact(rand_state(1), H, 31)
    assert ite_energy(m, 0.0, 15).energy == pytest.approx(m[1], abs=1e-12)


def test_ite_eigenstate_constant():
    m = moments_exact(eigenstate(0), H, 11)
    for tau in (0.0, 0.5, 1.5):
        assert ite_energy(m, tau, 5).energy == pytest.approx(E0, abs=1e-9)


@pytest.mark.parametrize("tau,order", [(0.5, 3), (2.5, 9), (2.5, 15)])
def test_ite_matches_dense_taylor(tau, order):
    s = rand_state(4)
    m = moments_exact(s, H, 2 * order + 1)
    ref = taylor_ite_energy(HM, s.amplitudes, tau, order)
    assert ite_energy(m, tau, order).energy == pytest.approx(ref, rel=1e-8)
    ref1 = taylor_ite_energy(HM, s.amplitudes, tau, order, scale=1.0)
    assert ite_energy(m, tau, order, scale=1.0).energy == pytest.approx(ref1, rel=1e-8)


def test_ite_expectation_consistency():
    s = rand_state(6)
    m = moments_exact(s, H, 11)
    e = ite_energy(m, 1.2, 5).energy
    assert ite_expectation(H, H, 1.2, 5, state=s) == pytest.approx(e, rel=1e-10)
    assert ite_expectation(H, PauliSum.identity(4), 1.2, 5, state=s) == pytest.approx(1.0, abs=1e-12)


def test_ite_normalization_error():
    # first-order polynomial 1 - tau E / 2 vanishes at tau = 2 / E
    m = two_point_moments([2.0], [1.0], 3)
    with pytest.raises(ITENormalizationError):
        ite_energy(m, 1.0, 1)


def test_ite_needs_moments():
    with pytest.raises(InsufficientMomentsError, match="need order >= 31"):
        ite_energy(moments_exact(rand_state(0), H, 10), 2.5, 15)


def test_optimize_tau_eigenstate():
    m = moments_exact(eigenstate(0), H, 11)
    t, e = optimize_tau(m, 5)
    assert e == pytest.approx(E0, abs=1e-9)


def test_optimize_tau_two_level_matches_grid():
    m = two_point_moments([-1.0, 2.0], [0.3, 0.7], 9)
    t, e = optimize_tau(m, 4, tau_max=6.0)
    grid = np.linspace(0, 6.0, 60001)
    vals = []
    for g in grid:
        try:
            vals.append(ite_energy(m, g, 4).energy)
        except ITENormalizationError:
            vals.append(np.inf)
    k = int(np.argmin(vals))
    assert e <= min(vals[0], vals[-1]) + 1e-12
    assert t == pytest.approx(grid[k], abs=1e-3)


def test_golden_section_quadratic():
    x, fx = golden_section(lambda t: (t - 1.234) ** 2, 0, 5, tol=1e-6)
    assert x == pytest.approx(1.234, abs=1e-6)


def test_exact_ite_monotone_and_derivative():
    s = prepare(build_ansatz(-2, 1))
    w = SPEC.weights(s)
    taus = np.arange(0, 5.0001, 0.05)
    E = np.array([exact_ite_energy(SPEC.eigenvalues, w, t) for t in taus])
    assert np.all(np.diff(E) <= 1e-12)
    h = 1e-4
    for t in taus[1:-1]:
        d = (exact_ite_energy(SPEC.eigenvalues, w, t + h) - exact_ite_energy(SPEC.eigenvalues, w, t - h)) / (2 * h)
        # norm weights of exp(-tau H / 2) are exp(-tau E), so dE/dtau = -variance
        assert d == pytest.approx(-exact_ite_variance(SPEC.eigenvalues, w, t), abs=1e-6)


# real time

def test_rte_r0_phase():
    m = moments_exact(rand_state(2), H, 1)
    tr = rte_propagate(m, 0, [1.0], 0.01, 200)
    np.testing.assert_allclose(tr.coefficients[:, 0], np.exp(-1j * m[1] * tr.times), atol=1e-9)


def test_rte_eigenstate():
    m = moments_exact(eigenstate(3), H, 3)
    tr = rte_propagate(m, 0, [1.0], 0.01, 500)
    np.testing.assert_allclose(np.abs(tr.coefficients[:, 0]), 1.0, atol=1e-9)
    phase = np.unwrap(np.angle(tr.coefficients[:, 0]))
    # RK4 phase-rate error is about E (E dt)^4 / 120
    assert -np.polyfit(tr.times, phase, 1)[0] == pytest.approx(SPEC.eigenvalues[3], abs=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_rte_frequencies_match_krylov(seed):
    m = moments_exact(rand_state(seed), H, 7)
    dt, steps = 0.01, 4000
    tr = rte_propagate(m, 3, [1, 0, 0, 0], dt, steps)
    res = 2 * np.pi / (dt * steps)
    assert len(tr.frequencies) == len(tr.krylov_spectrum)
    for e in tr.krylov_spectrum:
        assert np.min(np.abs(tr.frequencies - e)) < res


# dispatch and serialization

def test_estimate_dispatch_and_row():
    m = moments_exact(rand_state(0), H, 31)
    res = estimate("ite", m, 15, 2.5)
    row = res.row()
    assert row["method"] == "ite"
    assert row["estimate"] == f"{res.energy:.12g}"
    assert "tau=2.5" in row["params"]
    with pytest.raises(ContractError):
        estimate("nope", m, 1)


def test_estimate_auto_tau():
    m = moments_exact(rand_state(0), H, 11)
    res = estimate("ite", m, 5, "auto", tau_max=3.0)
    assert 0 <= res.aux["tau_opt"] <= 3.0
