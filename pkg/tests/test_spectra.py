import numpy as np
import pytest

from m2spec import (
    GridDensity, IndexSet, PriorSpec, TorusGrid, eval_prior, eval_trig_poly,
    random_coercive_density, smoothed_periodogram, synth_field,
)
from m2spec.errors import DomainError, PriorInvalidError
from m2spec.spectra import periodogram

from conftest import random_symmetric_coeffs


def strictly_positive_poly(rng, index_set, m, grid):
    c = random_symmetric_coeffs(rng, index_set, m, scale=0.3)
    field = eval_trig_poly(c, index_set, grid)
    shift = 0.5 - np.linalg.eigvalsh(field).min()
    c[index_set.zero] += shift * np.eye(m)
    return c


class TestPrior:
    def test_constant_identity(self, grid2):
        psi = eval_prior(PriorSpec.identity(2), grid2)
        assert np.allclose(psi.samples, np.eye(2))
        assert psi.lower == pytest.approx(1) and psi.upper == pytest.approx(1)
        assert psi.coercive

    def test_scalar_inverse_polynomial(self):
        g = TorusGrid(1, 16)
        ix = IndexSet([[-1], [0], [1]])
        psi = eval_prior(PriorSpec.inverse_polynomial([[[0.5]], [[2.0]], [[0.5]]], ix), g)
        assert np.allclose(psi.samples[:, 0, 0], 1 / (2 + np.cos(g.thetas[:, 0])), atol=1e-15)

    def test_matrix_inverse_polynomial(self, rng, grid2, box2):
        c = strictly_positive_poly(rng, box2, 2, grid2)
        psi = eval_prior(PriorSpec.inverse_polynomial(c, box2), grid2)
        P = eval_trig_poly(c, box2, grid2)
        assert np.abs(psi.samples @ P - np.eye(2)).max() <= 1e-10
        assert np.array_equal(psi.inv(), P)

    def test_indefinite_polynomial(self, grid2, box2):
        c = np.zeros((9, 2, 2), complex)
        c[box2.zero] = np.diag([1.0, -0.1])
        with pytest.raises(PriorInvalidError):
            eval_prior(PriorSpec.inverse_polynomial(c, box2), grid2)

    def test_singular_grid_prior(self, grid2):
        S = np.zeros((grid2.n_nodes, 2, 2))
        S[:, 0, 0] = 1.0
        with pytest.raises(PriorInvalidError):
            eval_prior(PriorSpec.from_grid(GridDensity(grid2, S)), grid2)

    def test_not_psd_constant(self, grid2):
        with pytest.raises(PriorInvalidError):
            eval_prior(PriorSpec.constant(np.diag([1.0, -1.0])), grid2)


class TestRandomDensity:
    def test_degenerate_interval(self, grid2):
        phi = random_coercive_density(0, grid2, 2, 0.7, 0.7)
        assert np.allclose(phi.samples, 0.7 * np.eye(2))

    def test_deterministic(self, grid2):
        a = random_coercive_density(5, grid2, 2, 0.5, 2.0)
        b = random_coercive_density(5, grid2, 2, 0.5, 2.0)
        assert np.array_equal(a.samples, b.samples)

    @pytest.mark.parametrize("seed", range(20))
    def test_bounds(self, seed, grid2):
        phi = random_coercive_density(seed, grid2, 3, 0.5, 2.0)
        w = np.linalg.eigvalsh(phi.samples)
        assert w.min() >= 0.5 - 1e-12 and w.max() <= 2.0 + 1e-12

    def test_bad_bounds(self, grid2):
        with pytest.raises(DomainError):
            random_coercive_density(0, grid2, 2, 2.0, 1.0)


class TestField:
    def test_white_noise_lag0(self):
        g = TorusGrid(2, 32)
        phi = GridDensity(g, np.broadcast_to(np.eye(2, dtype=complex), (g.n_nodes, 2, 2)).copy())
        y = synth_field(phi, 11)
        cov0 = y.T @ y.conj() / g.n_nodes
        assert np.abs(cov0 - np.eye(2)).max() <= 3 / np.sqrt(g.n_nodes)

    def test_zero_density(self, grid2):
        phi = GridDensity(grid2, np.zeros((grid2.n_nodes, 2, 2)))
        assert np.array_equal(synth_field(phi, 1), np.zeros((grid2.n_nodes, 2)))

    def test_lag_one_of_cosine_spectrum(self):
        g = TorusGrid(1, 64)
        phi = GridDensity(g, (1 + 0.5 * np.cos(g.thetas[:, 0]))[:, None, None])
        Y = synth_field(phi, 3, 400)[:, :, 0]
        # E y(t+1) conj(y(t)) = int e^{i theta} (1 + cos(theta)/2) dm = 0.25
        lag1 = np.mean(np.roll(Y, -1, axis=1) * np.conj(Y))
        assert lag1.real == pytest.approx(0.25, abs=0.02)
        assert abs(lag1.imag) < 0.02

    def test_seed_determinism(self, grid2):
        phi = random_coercive_density(2, grid2, 2, 0.5, 2.0)
        assert np.array_equal(synth_field(phi, 9, 3), synth_field(phi, 9, 3))


class TestPeriodogram:
    def test_converges_to_true_moments(self, box2):
        g = TorusGrid(2, 16)
        phi = random_coercive_density(4, g, 2, 0.5, 2.0)
        sig = smoothed_periodogram(synth_field(phi, 8, 500), g, box2)
        truth = phi.moments(box2)
        err = np.linalg.norm(sig.values - truth.values) / np.linalg.norm(truth.values)
        assert err <= 0.05

    def test_single_constant_realization(self, grid2, box2):
        y = np.tile([1.0, 2.0 - 1j], (grid2.n_nodes, 1))
        P = periodogram(y, grid2)
        ranks = np.linalg.matrix_rank(P.samples, tol=1e-9)
        assert ranks.max() <= 1
        sig = smoothed_periodogram(y, grid2, box2)
        assert np.linalg.eigvalsh(sig.values[box2.zero]).min() >= -1e-12

    def test_sample_covariance_identity(self, grid2, box2):
        # moments of the periodogram are the circular sample covariances
        phi = random_coercive_density(1, grid2, 2, 0.5, 2.0)
        y = synth_field(phi, 2)
        sig = smoothed_periodogram(y, grid2, box2)
        Yg = y.reshape(grid2.shape + (2,))
        for i, k in enumerate(box2.indices):
            shifted = np.roll(Yg, shift=tuple(-k), axis=(0, 1)).reshape(-1, 2)
            oracle = shifted.T @ y.conj() / grid2.n_nodes
            assert np.allclose(sig.values[i], oracle, atol=1e-12)

    def test_symmetry_exact(self, grid2, box2):
        phi = random_coercive_density(1, grid2, 2, 0.5, 2.0)
        sig = smoothed_periodogram(synth_field(phi, 5, 4), grid2, box2)
        assert np.array_equal(sig.values[box2.neg], np.conj(np.swapaxes(sig.values, 1, 2)))
