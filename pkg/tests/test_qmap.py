import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qbernoulli import baker, classical, qmap


def _T(D):
    return baker.build_baker_unitary(baker.QuantumGrid(D))


# -- shift index ---------------------------------------------------------------


@pytest.mark.parametrize("k,j,l", [(1, 0, 0), (12, 2, 1), (-3, 0, -2), (-16, 4, -1)])
def test_factor_examples(k, j, l):
    idx = qmap.factor_shift_index(k, 32)
    assert (idx.j, idx.l) == (j, l)
    assert 2**idx.j * idx.odd == k


@pytest.mark.parametrize("k", [0, 16, -17, 100])
def test_factor_rejects(k):
    with pytest.raises(ValueError):
        qmap.factor_shift_index(k, 32)


@pytest.mark.parametrize("N", [4, 8, 64])
def test_mode_order_covers_domain(N):
    ks = qmap.mode_order(N)
    assert len(ks) == N - 1
    assert sorted(ks) == [k for k in range(-N // 2, N // 2) if k != 0]
    idx = [qmap.factor_shift_index(k, N) for k in ks]
    assert len({(i.j, i.l) for i in idx}) == N - 1


def test_shift_state_modulus_and_period():
    N = 16
    for k in (-8, -3, 1, 7):
        e = qmap.shift_state(k, N)
        np.testing.assert_allclose(np.abs(e), 1.0)
        np.testing.assert_allclose(qmap.shift_state(k + N, N), e, atol=1e-12)
        np.testing.assert_allclose(qmap.shift_state(k - N, N), e, atol=1e-12)


# -- weights -------------------------------------------------------------------


def test_weight_examples():
    assert qmap.weight_s(3, 2, 4, 32) == 1.0
    assert qmap.weight_s(0, 0, 1, 8) == 0.75


def test_edge_weight_is_zero_and_matches_oracle():
    # k = -N/2 at N = 8 is (j=2, l=-1); the formula gives 1 - 8/8 = 0
    N = 8
    idx = qmap.factor_shift_index(-4, N)
    assert qmap.weight_s(idx.j, idx.l, 1, N) == 0.0
    n = np.arange(N)
    expected = qmap.shift_state(-2, N) * np.where(n % 2, 0.0, 1.0)
    got = qmap.decohere_step(_T(3), qmap.shift_state(-4, N).real)
    np.testing.assert_allclose(got, expected.real, atol=1e-12)


def test_mu_basics():
    assert qmap.mu(0, 3, 5, 32) == 1.0
    for j in range(4):
        for l in range(-3, 3):
            assert qmap.mu(j, l, 6, 32) == 1.0
    with pytest.raises(qmap.DegenerateModeError):
        qmap.mu(4, -1, 1, 32)


def _nondegenerate_mu_triples(N, tau):
    for j in range(0, 4):
        for l in range(-4, 4):
            for n in range(N):
                try:
                    yield j, l, n, (qmap.mu(j + tau, l, n, N), qmap.mu(j, l, n, N >> tau), qmap.mu(tau, l, n, N))
                except qmap.DegenerateModeError:
                    continue


def test_mu_rescaling_factorizes():
    N, tau = 32, 2
    seen = 0
    for j, l, n, (full, coarse, head) in _nondegenerate_mu_triples(N, tau):
        assert full == pytest.approx(head * coarse, rel=1e-12)
        seen += 1
    assert seen > 500


def test_mu_plain_rescaling_holds_on_even_sites_only():
    N, tau = 32, 2
    odd_misses = 0
    for j, l, n, (full, coarse, _) in _nondegenerate_mu_triples(N, tau):
        if n % 2 == 0:
            assert full == coarse
        else:
            odd_misses += abs(full - coarse) > 1e-12
    assert odd_misses > 0


def test_mu_ratio_is_direct_product():
    N = 64
    for j in range(3):
        for tau in range(3):
            for l in (-3, 0, 2):
                r = qmap.mu_ratio(j, tau, l, 1, N)
                assert r == pytest.approx(qmap.mu(j, l, 1, N) / qmap.mu(j + tau, l, 1, N), rel=1e-12)
    # edge mode: the ratio stays finite where mu itself does not exist
    assert qmap.mu_ratio(3, 1, -1, 1, 32) == 0.0


# -- one step ------------------------------------------------------------------


def test_decohere_uniform_fixed():
    T = _T(4)
    np.testing.assert_allclose(qmap.decohere_step(T, np.ones(16)), 1.0, atol=1e-13)


def test_decohere_kills_odd_modes():
    T = _T(4)
    for l in range(-4, 4):
        e = qmap.shift_state(2 * l + 1, 16)
        assert np.abs(qmap.decohere_step(T, e.real)).max() < 1e-13


def test_decohere_wrapper_and_sum():
    T = _T(4)
    rho = baker.DensityDiagonal(T.grid, np.random.default_rng(1).random(16))
    out = qmap.decohere_step(T, rho)
    assert isinstance(out, baker.DensityDiagonal)
    assert abs(out.trace - rho.trace) < 1e-12
    full = baker.baker_step_full(T, rho)
    np.testing.assert_allclose(out.values, np.diagonal(full).real, atol=1e-13)
    assert np.abs(np.diagonal(full).imag).max() < 1e-12
    with pytest.raises(ValueError):
        qmap.decohere_step(T, np.ones(8))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 16, elements=st.floats(-1, 1)), st.integers(0, 4))
def test_analytic_density_matches_oracle(v, tau):
    T = _T(4)
    w = v
    for _ in range(tau):
        w = qmap.decohere_step(T, w)
    assert np.abs(qmap.evolve_density(v, tau) - w).max() < 1e-10


@given(arrays(np.float64, 32, elements=st.floats(-1, 1)), arrays(np.float64, 32, elements=st.floats(-1, 1)),
       st.floats(-3, 3))
def test_analytic_density_linear(a, b, s):
    lhs = qmap.evolve_density(a + s * b, 3)
    rhs = qmap.evolve_density(a, 3) + s * qmap.evolve_density(b, 3)
    assert np.abs(lhs - rhs).max() < 1e-12


# -- weighted shift ------------------------------------------------------------


def test_shift_analytic_trivial_cases():
    idx = qmap.factor_shift_index(6, 16)
    np.testing.assert_allclose(qmap.evolve_shift_state_analytic(idx, 0, 16), qmap.shift_state(6, 16))
    assert not qmap.evolve_shift_state_analytic(idx, 2, 16).any()


@pytest.mark.parametrize("D", [2, 3, 4, 5])
def test_shift_analytic_matches_oracle(D):
    T = _T(D)
    N = T.N
    for k in qmap.mode_order(N):
        idx = qmap.factor_shift_index(k, N)
        v = qmap.shift_state(k, N)
        for tau in range(D + 1):
            if tau:
                v = qmap.decohere_step(T, v.real) + 1j * qmap.decohere_step(T, v.imag)
            assert np.abs(v - qmap.evolve_shift_state_analytic(idx, tau, N)).max() < 1e-10


def test_product_formula_exact_for_one_step():
    T = _T(5)
    for k in qmap.mode_order(32):
        idx = qmap.factor_shift_index(k, 32)
        e = qmap.shift_state(k, 32)
        one = qmap.decohere_step(T, e.real) + 1j * qmap.decohere_step(T, e.imag)
        assert np.abs(one - qmap.weighted_shift_closed_form(idx, 1, 32)).max() < 1e-12


def test_product_formula_drifts_after_two_steps():
    # the parity-dependent weight spills into e_{k/2 + N/2}; the plain product misses it
    N = 32
    idx = qmap.factor_shift_index(12, N)
    exact = qmap.evolve_shift_state_analytic(idx, 2, N)
    approx = qmap.weighted_shift_closed_form(idx, 2, N)
    assert np.abs(exact - approx).max() > 0.1


# -- polynomials ---------------------------------------------------------------


@pytest.mark.parametrize("N", [8, 64, 1024])
@pytest.mark.parametrize("alpha", [1, 2])
def test_closed_forms(alpha, N):
    B = qmap.quantum_bernoulli_poly(alpha, N).values
    assert np.abs(B - qmap.closed_form_qbp(alpha, N)).max() < 1e-10


def test_closed_form_only_low_orders():
    with pytest.raises(ValueError):
        qmap.closed_form_qbp(3, 8)


def test_b1_explicit_values():
    q = np.arange(8) / 8
    np.testing.assert_allclose(qmap.quantum_bernoulli_poly(1, 8).values, q - 0.5 + 1 / 16, atol=1e-14)


@pytest.mark.parametrize("alpha", range(1, 7))
def test_zero_sum(alpha):
    for N in (8, 256):
        assert abs(qmap.qbp_values(alpha, N).sum()) < 1e-9 * N


def test_alpha_guard():
    for a in (0, 13):
        with pytest.raises(ValueError):
            qmap.quantum_bernoulli_poly(a, 16)
        with pytest.raises(ValueError):
            qmap.quantum_bernoulli_poly_sine(a, 16)


def test_fft_matches_direct():
    for a in (1, 3, 5):
        np.testing.assert_allclose(qmap.qbp_values(a, 512, "fft"), qmap.qbp_values(a, 512), atol=1e-13)
    with pytest.raises(ValueError):
        qmap.qbp_values(2, 16, "magic")


def test_cached_values_not_shared():
    v = qmap.qbp_values(2, 64)
    v[:] = 0
    assert qmap.qbp_values(2, 64).any()


def test_sine_form_small():
    a = qmap.quantum_bernoulli_poly(1, 8).values
    b = qmap.quantum_bernoulli_poly_sine(1, baker.QuantumGrid(3)).values
    assert np.abs(a - b).max() < 1e-9


def test_sine_form_large():
    a = qmap.quantum_bernoulli_poly(3, 4096).values
    b = qmap.quantum_bernoulli_poly_sine(3, 4096).values
    assert np.abs(a - b).max() < 1e-9


def test_small_k_denominator():
    Np = 4096
    for k in range(1, 40):
        approx = 2j * Np * math.sin(math.pi * k / Np)
        rel = abs(approx - 2j * math.pi * k) / abs(2j * math.pi * k)
        assert rel < (math.pi * k / Np) ** 2 / 6 + 1e-14


@pytest.mark.parametrize("alpha", [2, 3, 4])
def test_classical_limit_pointwise(alpha):
    B = classical.bernoulli_polynomial(alpha)
    devs = []
    for N in (256, 512, 1024):
        q = np.arange(N) / N
        devs.append(np.abs(qmap.qbp_values(alpha, N) - B(q)).max())
    assert devs[0] > devs[1] > devs[2]
    assert devs[0] / devs[2] == pytest.approx(4, rel=0.1)


@pytest.mark.parametrize("alpha", range(1, 7))
def test_recurrence(alpha):
    for N in (8, 64, 1024):
        rep = qmap.verify_poly_recurrence(alpha, N)
        assert rep["passed"] and rep["max_residual"] < 1e-9


def test_b1_first_differences():
    N = 64
    d = np.diff(qmap.qbp_values(1, N))
    np.testing.assert_allclose(d, 1 / N, atol=1e-14)


# -- differences ---------------------------------------------------------------


def test_difference_basics():
    N = 16
    q = np.arange(N) / N
    d = qmap.difference_op(np.full(N, 3.0), 1)
    assert np.isnan(d[0]) and not d[1:].any()
    np.testing.assert_allclose(qmap.difference_op(q, 1)[1:], 1.0, atol=1e-12)
    np.testing.assert_array_equal(qmap.difference_op(q, 0), q)


def test_difference_annihilates_polynomials():
    N = 64
    q = np.arange(N) / N
    f = classical.PolynomialRep(np.arange(1, 5) / 8)  # degree 3, exact samples
    d = qmap.difference_op(f(q), 4)
    assert np.isnan(d[:4]).all()
    assert np.abs(d[4:]).max() < 1e-6


def test_difference_first_order_rate():
    errs = []
    for N in (64, 128, 256, 512):
        q = np.arange(N) / N
        d = qmap.difference_op(np.sin(2 * np.pi * q), 1)
        w = (q >= 0.25) & (q < 0.75)
        errs.append(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * q))[w].max())
    for a, b in zip(errs, errs[1:]):
        assert 1.8 < a / b < 2.2


# -- expansions ----------------------------------------------------------------


def test_qem_uniform():
    for tau in (0, 2):
        np.testing.assert_allclose(qmap.quantum_euler_maclaurin(np.full(16, 0.7), tau, 3), 0.7, atol=1e-14)


def test_qem_linear_needs_two_terms():
    N = 16
    q = np.arange(N) / N
    assert np.abs(qmap.quantum_euler_maclaurin(q, 0, 2) - q).max() < 1e-14
    # a single term leaves exactly -B_1(q_n, N)/N behind
    resid = qmap.quantum_euler_maclaurin(q, 0, 1) - q
    np.testing.assert_allclose(resid, -qmap.qbp_values(1, N) / N, atol=1e-14)


@pytest.mark.parametrize("N", [16, 64, 256])
def test_qem_reconstruction(N):
    rng = np.random.default_rng(N)
    q = np.arange(N) / N
    for d in range(6):
        f = classical.PolynomialRep(rng.integers(-8, 9, d + 1) / 8)
        assert np.abs(qmap.quantum_euler_maclaurin(f(q), 0, d + 1) - f(q)).max() < 1e-8


@pytest.mark.parametrize("tau", [1, 2])
def test_qem_evolved_matches_oracle(tau):
    T = _T(6)
    rho = T.grid.q ** 2
    v = rho
    for _ in range(tau):
        v = qmap.decohere_step(T, v)
    assert np.abs(qmap.quantum_euler_maclaurin(rho, tau, 3) - v).max() < 1e-8


def test_qem_guards():
    with pytest.raises(ValueError):
        qmap.quantum_euler_maclaurin(np.ones(8), 4, 2)
    with pytest.raises(ValueError):
        qmap.quantum_euler_maclaurin(np.ones(64), 0, 13)
    with pytest.raises(ValueError):
        qmap.quantum_euler_maclaurin(np.ones(8), 0, -1)


# -- evolved polynomials -------------------------------------------------------


def test_evolved_tau0_is_poly():
    np.testing.assert_array_equal(qmap.evolve_quantum_poly(3, 64, 0).values, qmap.qbp_values(3, 64))


@pytest.mark.parametrize("N", [16, 64, 256])
@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_equilibrium_exact(alpha, N):
    D = N.bit_length() - 1
    assert not qmap.evolve_quantum_poly(alpha, N, D).values.any()
    assert not qmap.evolve_quantum_poly(alpha, N, D + 2).values.any()


def test_evolved_matches_oracle_alpha3():
    T = _T(5)
    v = qmap.qbp_values(3, 32)
    for tau in (1, 2, 3):
        v = qmap.decohere_step(T, v)
        ev = qmap.evolve_quantum_poly(3, baker.QuantumGrid(5), tau)
        assert np.abs(v - ev.evolved).max() < 1e-9
        assert ev.scale == 2.0 ** (-3 * tau)


def test_evolved_zero_sum():
    for tau in range(6):
        assert abs(qmap.evolve_quantum_poly(2, 64, tau).evolved.sum()) < 1e-12


def test_negative_tau():
    with pytest.raises(ValueError):
        qmap.evolve_quantum_poly(2, 64, -1)
    with pytest.raises(ValueError):
        qmap.evolve_density(np.ones(8), -1)


# -- approximate eigenstates and termination -----------------------------------


def _eigen_defect(alpha, N, tau):
    B = qmap.qbp_values(alpha, N)
    d = np.abs(qmap.evolve_quantum_poly(alpha, N, tau).values - B)
    return d, np.abs(B).max()


@pytest.mark.parametrize("tau", [1, 2])
@pytest.mark.parametrize("alpha", [
    pytest.param(1, marks=pytest.mark.xfail(strict=True, reason="alpha=1 max-norm defect sits at n=N-1 and does not shrink")),
    2,
    3,
])
def test_approximate_eigenstate_max_norm_decreases(alpha, tau):
    rel = [d.max() / b for d, b in (_eigen_defect(alpha, N, tau) for N in (256, 1024, 4096))]
    # a genuine decrease, not rounding noise
    assert rel[1] < rel[0] * (1 - 1e-6) and rel[2] < rel[1] * (1 - 1e-6)


@pytest.mark.parametrize("tau", [1, 2])
def test_alpha1_defect_is_a_boundary_spike(tau):
    rms = []
    for N in (256, 1024, 4096):
        d, b = _eigen_defect(1, N, tau)
        assert d.argmax() == N - 1
        rms.append(np.sqrt(np.mean(d**2)) / b)
    assert rms[0] / rms[1] == pytest.approx(2, rel=0.05)
    assert rms[1] / rms[2] == pytest.approx(2, rel=0.05)


def _qem_term(rho, a):
    return qmap.quantum_euler_maclaurin(rho, 0, a) - qmap.quantum_euler_maclaurin(rho, 0, a - 1)


@pytest.mark.xfail(strict=True, reason="the alpha = d + 1 term survives on the grid")
def test_qem_terms_above_degree_vanish():
    q = np.arange(64) / 64
    assert np.abs(_qem_term(q**2, 3)).max() < 1e-12


def test_qem_terms_vanish_from_degree_plus_two():
    q = np.arange(64) / 64
    rho = q**2
    assert np.abs(_qem_term(rho, 3)).max() > 1e-3
    for a in range(4, 9):
        assert np.abs(_qem_term(rho, a)).max() < 1e-12
