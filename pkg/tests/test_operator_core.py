import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nessgeo import (
    Channel,
    DensityMatrix,
    HermitianObservable,
    LindbladModel,
    ModelError,
    NonUniqueSteadyState,
    NoSteadyState,
    ShapeError,
    Superoperator,
    SupportError,
    build_liouvillian,
    drazin_apply,
    drazin_matrix,
    kmb_inner,
    log_derivative,
    steady_state,
)
from nessgeo.dynamics import dpi_dlambda
from nessgeo.errors import ConditioningError, SupportWarning
from nessgeo.lindblad import check_unique_ness_spectrum, spectral_gap, steady_state_stack
from nessgeo.linalg import (
    kubo_mori,
    log_mean,
    matrix_entropy_functions,
    spectral,
    unvec,
    vec,
    von_neumann_entropy,
)

from oracles import (
    drazin_integral,
    kmb_quadrature,
    kubo_mori_quadrature,
    random_density,
    random_hermitian,
    tlm_populations,
)

positive = st.floats(min_value=1e-12, max_value=1e3, allow_nan=False)


def test_vec_is_column_stacking(rng):
    A, X, B = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(vec(A @ X @ B), np.kron(B.T, A) @ vec(X))
    assert np.array_equal(unvec(vec(X)), X)
    assert vec(X)[1] == X[1, 0]


def test_unvec_rejects_non_square_length():
    with pytest.raises(ShapeError):
        unvec(np.zeros(5))


class TestDensityMatrix:
    def test_validates(self):
        DensityMatrix(np.eye(2) / 2)
        with pytest.raises(ShapeError):
            DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
        with pytest.raises(ShapeError):
            DensityMatrix(np.eye(2))
        with pytest.raises(ShapeError):
            DensityMatrix(np.diag([1.5, -0.5]))
        with pytest.raises(ShapeError):
            DensityMatrix(np.ones((2, 3)) / 2)

    def test_from_array_normalizes(self, rng):
        X = random_density(rng, 3) * 7.0
        rho = DensityMatrix.from_array(X)
        assert abs(np.trace(rho.data) - 1) < 1e-14
        p, U = rho.eig
        assert np.allclose(U @ np.diag(p) @ U.conj().T, rho.data)

    def test_is_immutable(self):
        rho = DensityMatrix(np.eye(2) / 2)
        with pytest.raises(ValueError):
            rho.data[0, 0] = 1.0


def test_observable_rejects_non_hermitian():
    HermitianObservable(np.diag([1.0, 2.0]), units="energy/gamma")
    with pytest.raises(ShapeError):
        HermitianObservable(np.array([[0, 1], [0, 0]]))


@given(positive, positive)
def test_log_mean_symmetric_and_between(p, q):
    w = float(log_mean(p, q))
    assert w == pytest.approx(float(log_mean(q, p)), rel=1e-12)
    assert min(p, q) * (1 - 1e-12) <= w <= max(p, q) * (1 + 1e-12)


@given(positive, st.one_of(st.floats(min_value=-1e-7, max_value=1e-7), st.floats(min_value=-2.0, max_value=2.0)))
def test_log_mean_series_branch_is_continuous(p, x):
    q = p * np.exp(x)
    mp.mp.dps = 40
    P, Q = mp.mpf(p), mp.mpf(q)
    exact = float(P if P == Q else (P - Q) / (mp.log(P) - mp.log(Q)))
    assert float(log_mean(q, p)) == pytest.approx(exact, rel=1e-13)


def test_spectral_cache_weights(rng):
    sc = spectral(random_density(rng, 4))
    w = sc.weights
    assert np.allclose(w, w.T)
    assert np.allclose(np.diag(w), sc.p)


class TestLiouvillian:
    def test_fig2_trace_preserving(self, tlm):
        L = build_liouvillian(tlm, [0.001])
        assert L.data.shape == (9, 9)
        assert L.trace_preservation_defect() < 1e-12

    def test_zero_rates_give_commutator_spectrum(self):
        H = np.diag([0.0, 1.3, 2.9])
        A = np.zeros((3, 3))
        A[0, 1] = 1
        model = LindbladModel(3, H, [Channel(A, 0.0, 0.5, 1.3)])
        ev = np.sort_complex(build_liouvillian(model).spectrum())
        e = np.diag(H)
        expected = np.sort_complex(np.array([-1j * (a - b) for a in e for b in e]))
        assert np.allclose(ev, expected, atol=1e-12)

    def test_work_channel_infinite_temperature(self, tlm):
        fwd, rev = tlm.rates([0.02])
        assert fwd[2] == rev[2] == 1.0

    def test_local_detailed_balance(self, tlm, spec):
        fwd, rev = tlm.rates([0.013])
        assert rev[0] / fwd[0] == pytest.approx(np.exp(-0.013 * spec.omega1), rel=1e-12)
        assert rev[1] / fwd[1] == pytest.approx(np.exp(-spec.beta2 * spec.omega2), rel=1e-12)

    def test_negative_rate(self):
        A = np.array([[0, 1], [0, 0]])
        model = LindbladModel(2, np.zeros((2, 2)), [Channel(A, -1.0)])
        with pytest.raises(ModelError):
            build_liouvillian(model)

    def test_shape_errors(self, tlm):
        with pytest.raises(ShapeError):
            LindbladModel(2, np.zeros((3, 3)))
        with pytest.raises(ShapeError):
            LindbladModel(2, np.zeros((2, 2)), [Channel(np.zeros((3, 3)), 1.0)])
        with pytest.raises(ShapeError):
            build_liouvillian(tlm, [0.1, 0.2])

    def test_batched_matches_single(self, tlm):
        lams = np.linspace(0.001, 0.039, 5)[:, None]
        stack = tlm.liouvillian_matrix(lams)
        for k, lam in enumerate(lams):
            assert np.array_equal(stack[k], build_liouvillian(tlm, lam).data)

    def test_unique_ness_spectrum(self, tlm):
        for b in np.linspace(0.0, 0.2, 11):
            assert check_unique_ness_spectrum(build_liouvillian(tlm, [b]))


class TestSteadyState:
    @pytest.mark.parametrize("beta1", [0.001, 0.02, 0.039, 0.1])
    def test_matches_rate_matrix_oracle(self, tlm, beta1):
        pi = steady_state(build_liouvillian(tlm, [beta1])).data
        assert np.allclose(np.diag(pi).real, tlm_populations(beta1), atol=1e-12, rtol=0)
        assert np.max(np.abs(pi - np.diag(np.diag(pi)))) < 1e-12

    def test_residual(self, tlm):
        L = build_liouvillian(tlm, [0.01])
        pi = steady_state(L)
        assert np.max(np.abs(L.apply(pi))) < 1e-10

    def test_qubit_gibbs(self):
        w, beta = 1.7, 0.8
        H = np.diag([0.0, w])
        A = np.array([[0, 1], [0, 0]])
        model = LindbladModel(2, H, [Channel(A, 0.4, beta, w)])
        pi = steady_state(build_liouvillian(model)).data
        gibbs = np.diag(np.exp(-beta * np.diag(H)))
        assert np.allclose(pi, gibbs / np.trace(gibbs), atol=1e-12)

    def test_degenerate_kernel(self):
        model = LindbladModel(2, np.diag([0.0, 1.0]))
        with pytest.raises(NonUniqueSteadyState):
            steady_state(build_liouvillian(model))

    def test_no_kernel(self):
        with pytest.raises(NoSteadyState):
            steady_state(Superoperator(-np.eye(4)))

    def test_stack_agrees(self, tlm):
        lams = np.linspace(0.001, 0.039, 7)[:, None]
        pis = steady_state_stack(tlm.liouvillian_matrix(lams))
        for k, lam in enumerate(lams):
            assert np.allclose(pis[k], steady_state(build_liouvillian(tlm, lam)).data, atol=1e-13)


class TestDrazin:
    def test_properties(self, tlm, rng):
        for b in rng.uniform(0.001, 0.1, 3):
            L = build_liouvillian(tlm, [b])
            pi = steady_state(L).data
            for _ in range(5):
                A = random_hermitian(rng, 3)
                y = drazin_apply(L, pi, A)
                target = A - pi * np.trace(A)
                assert np.linalg.norm(L.apply(y) - target) <= 1e-9 * np.linalg.norm(A)
                assert np.linalg.norm(drazin_apply(L, pi, L.apply(A)) - target) <= 1e-9 * np.linalg.norm(A)
                assert abs(np.trace(y)) < 1e-10
            assert np.linalg.norm(drazin_apply(L, pi, pi)) < 1e-10

    def test_matrix_form_agrees(self, tlm, rng):
        L = build_liouvillian(tlm, [0.02])
        pi = steady_state(L).data
        D = drazin_matrix(L, pi)
        A = random_hermitian(rng, 3)
        assert np.allclose(D.apply(A), drazin_apply(L, pi, A), atol=1e-12)
        assert D.kind == "drazin"

    def test_integral_representation(self, tlm):
        L = build_liouvillian(tlm, [0.02])
        pi = steady_state(L).data
        A = dpi_dlambda(tlm, [0.02])[0]
        tau_max = 40.0 / spectral_gap(L)
        ref = drazin_integral(L.data, pi, A, tau_max, 8000)
        y = drazin_apply(L, pi, A)
        assert np.linalg.norm(y - ref) <= 1e-6 * np.linalg.norm(ref)

    def test_ill_conditioned(self, tlm):
        L = build_liouvillian(tlm, [0.02])
        pi = steady_state(L).data
        with pytest.raises(ConditioningError) as err:
            drazin_apply(L, pi, np.eye(3), cond_max=1.0)
        assert err.value.cond > 1.0


class TestKMB:
    def test_identity_normalization(self, tlm):
        pi = steady_state(build_liouvillian(tlm, [0.01])).data
        assert kmb_inner(pi, np.eye(3), np.eye(3)) == pytest.approx(1.0, abs=1e-14)

    def test_commuting_is_classical(self, rng):
        p = rng.dirichlet(np.ones(4))
        a, b = rng.normal(size=4), rng.normal(size=4)
        assert kmb_inner(np.diag(p), np.diag(a), np.diag(b)) == pytest.approx(np.sum(p * a * b), abs=1e-14)

    def test_quadrature_oracle(self, tlm, rng):
        pi = steady_state(build_liouvillian(tlm, [0.001])).data
        pi = pi + 0.05 * random_hermitian(rng, 3) * 0.1
        pi = pi / np.trace(pi)
        for _ in range(3):
            A, B = random_hermitian(rng, 3), random_hermitian(rng, 3)
            assert kmb_inner(pi, A, B) == pytest.approx(kmb_quadrature(pi, A, B), abs=1e-10)

    def test_inner_product_axioms(self, rng):
        pi = random_density(rng, 3)
        A, B, C = (random_hermitian(rng, 3) for _ in range(3))
        assert kmb_inner(pi, A, B) == pytest.approx(kmb_inner(pi, B, A), rel=1e-12)
        assert kmb_inner(pi, A, 2 * B + C) == pytest.approx(2 * kmb_inner(pi, A, B) + kmb_inner(pi, A, C), rel=1e-12)
        assert min(kmb_inner(pi, X, X) for X in (random_hermitian(rng, 3) for _ in range(100))) >= -1e-12

    def test_rejects_non_hermitian(self):
        with pytest.raises(ShapeError):
            kmb_inner(np.eye(2) / 2, np.array([[0, 1], [0, 0]]), np.eye(2))


class TestLogDerivative:
    def test_zero(self):
        assert np.array_equal(log_derivative(np.eye(2) / 2, np.zeros((2, 2))), np.zeros((2, 2)))

    def test_classical_score(self, rng):
        p = rng.dirichlet(np.ones(3))
        dp = rng.normal(size=3)
        dp -= dp.mean()
        F = log_derivative(np.diag(p), np.diag(dp))
        assert np.allclose(np.diag(F).real, dp / p, atol=1e-14)

    def test_tlm_round_trip(self, tlm):
        pi = steady_state(build_liouvillian(tlm, [0.02])).data
        dpi = dpi_dlambda(tlm, [0.02])[0]
        F = log_derivative(pi, dpi)
        assert np.allclose(kubo_mori_quadrature(pi, F), dpi, atol=1e-10, rtol=0)
        assert abs(np.trace(pi @ F)) < 1e-10

    def test_inverse_of_kubo_mori(self, rng):
        pi = random_density(rng, 3)
        for _ in range(10):
            X = random_hermitian(rng, 3)
            X -= np.trace(X) / 3 * np.eye(3)
            F = log_derivative(pi, kubo_mori(pi, X - np.trace(pi @ X) * np.eye(3)))
            assert np.allclose(F, X - np.trace(pi @ X) * np.eye(3), atol=1e-9)

    def test_requires_traceless(self):
        with pytest.raises(ShapeError):
            log_derivative(np.eye(2) / 2, np.eye(2))

    def test_support(self):
        pi = np.diag([1.0, 0.0])
        with pytest.raises(SupportError):
            log_derivative(pi, np.diag([-0.1, 0.1]))
        with pytest.warns(SupportWarning):
            log_derivative(pi, np.array([[0.0, 0.1], [0.1, 0.0]]))


class TestEntropy:
    def test_maximally_mixed(self):
        assert von_neumann_entropy(np.eye(3) / 3) == pytest.approx(np.log(3), abs=1e-14)

    def test_pure(self):
        psi = np.array([1.0, 1.0j]) / np.sqrt(2)
        with pytest.warns(SupportWarning):
            S, _ = matrix_entropy_functions(np.outer(psi, psi.conj()))
        assert abs(S) < 1e-14

    def test_tlm_population_oracle(self, tlm):
        pi = steady_state(build_liouvillian(tlm, [0.001])).data
        p = tlm_populations(0.001)
        assert von_neumann_entropy(pi) == pytest.approx(-np.sum(p * np.log(p)), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_kmb_positive_for_random_states(seed):
    r = np.random.default_rng(seed)
    pi = random_density(r, 3)
    A = random_hermitian(r, 3)
    assert kmb_inner(pi, A, A) >= -1e-12
