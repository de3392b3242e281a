"""Homodyne densities, rotations and seeded sampling."""

import math

import numpy as np
import pytest
from scipy import stats

from cvverify.errors import DimensionError, TruncationError
from cvverify.fock import FockState, build_quadratures, tensor
from cvverify.homodyne import (
    HomodyneSampler,
    QuadratureGrid,
    hermite_functions,
    quadrature_density,
    rotate_state,
    sample_quadrature,
)
from cvverify.states import ResourceSpec, cubic_phase_state
from cvverify.witness import ObservableDescriptor


@pytest.fixture(scope="module")
def grid40():
    return QuadratureGrid.uniform(40)


class TestDensity:
    def test_vacuum_at_origin(self, grid40):
        dens = quadrature_density(FockState.vacuum(40), grid40)
        origin = np.argmin(np.abs(grid40.points))
        assert dens[origin] == pytest.approx(1.0 / math.sqrt(math.pi), abs=1e-6)

    def test_single_photon_vanishes_at_origin(self):
        # evaluate exactly at zero rather than at the nearest grid point
        phi = hermite_functions(2, np.array([0.0]))
        assert abs(phi[1, 0]) < 1e-300

    def test_normalization(self, grid40, honest_state):
        dens = quadrature_density(honest_state, grid40)
        assert grid40.integrate(dens) == pytest.approx(1.0, abs=1e-6)
        assert dens.min() >= 0.0

    def test_grid_moment_matches_exact_trace(self, grid40, honest_state):
        dens = quadrature_density(honest_state, grid40)
        x2_grid = grid40.integrate(grid40.points**2 * dens)
        q = build_quadratures(40)
        assert x2_grid == pytest.approx(honest_state.expectation(q.x @ q.x), abs=1e-7)

    def test_turning_point_check(self):
        tiny = QuadratureGrid(np.linspace(-2, 2, 64), np.full(64, 4 / 63), 2.0, 4 / 63)
        with pytest.raises(TruncationError):
            quadrature_density(FockState.vacuum(40), tiny)


class TestRotation:
    def test_zero_angle_is_identity(self, honest_state):
        rotated = rotate_state(honest_state, 0.0)
        assert np.array_equal(rotated.amplitudes, honest_state.amplitudes)

    def test_vacuum_is_phase_invariant(self):
        v = FockState.vacuum(12)
        rotated = rotate_state(v, math.pi / 2)
        assert np.max(np.abs(rotated.amplitudes - v.amplitudes)) < 1e-15

    def test_multimode_rejected(self):
        two = tensor(FockState.vacuum(6), FockState.vacuum(6))
        with pytest.raises(DimensionError):
            rotate_state(two, 0.3)

    def test_momentum_statistics_of_squeezed_state(self, rng):
        # width-2 Gaussian: p-quadrature variance 1/(2 s^2) = 0.125
        psi = cubic_phase_state(ResourceSpec(0.0, 2.0, dim=48))
        samples = HomodyneSampler(psi).sample(math.pi / 2, 10**5, rng)
        var = samples.var()
        stderr = 0.125 * math.sqrt(2.0 / samples.size)
        assert abs(var - 0.125) < 3 * stderr


class TestSampling:
    def test_vacuum_variance(self, rng):
        samples = HomodyneSampler(FockState.vacuum(40)).sample(0.0, 10**5, rng)
        stderr = 0.5 * math.sqrt(2.0 / samples.size)
        assert abs(samples.var() - 0.5) < 5 * stderr

    def test_single_photon_avoids_origin(self, rng):
        samples = HomodyneSampler(FockState.basis(40, 1)).sample(0.0, 10**5, rng)
        assert np.mean(np.abs(samples) < 0.1) < 0.01

    def test_deterministic_under_fixed_seed(self):
        sampler = HomodyneSampler(FockState.vacuum(40))
        a = sampler.sample(0.0, 1000, np.random.default_rng(5))
        b = sampler.sample(0.0, 1000, np.random.default_rng(5))
        assert np.array_equal(a, b)

    def test_rotation_consistency_two_sample(self, honest_state, rng):
        # drawing at angle theta must match drawing x on the pre-rotated state
        theta = -math.pi / 4
        a = HomodyneSampler(honest_state).sample(theta, 10**4, np.random.default_rng(1))
        b = HomodyneSampler(rotate_state(honest_state, theta)).sample(
            0.0, 10**4, np.random.default_rng(2)
        )
        assert stats.ks_2samp(a, b).pvalue > 0.001

    def test_module_level_single_draw(self, rng):
        value = sample_quadrature(FockState.vacuum(30), 0.0, rng)
        assert isinstance(value, float)


class TestObservableSampling:
    @pytest.mark.parametrize(
        "descriptor,expected",
        [
            (ObservableDescriptor(0, 0.0, 2, 1.0), 0.5),       # <x^2> on vacuum
            (ObservableDescriptor(0, 0.0, 4, 1.0), 0.75),      # <x^4> = 3 (1/2)^2
            (ObservableDescriptor(0, math.pi / 4, 3, 2.0**1.5), 0.0),  # odd moment
        ],
    )
    def test_vacuum_moments(self, descriptor, expected, rng):
        sampler = HomodyneSampler(FockState.vacuum(40))
        values = sampler.sample_observable(descriptor, 10**5, rng)
        stderr = values.std() / math.sqrt(values.size)
        assert abs(values.mean() - expected) < 5 * stderr + 1e-12

    def test_sampled_means_match_exact_traces(self, honest_state, default_witness, rng):
        sampler = HomodyneSampler(honest_state)
        rho = honest_state.to_density()
        for _, descriptor in default_witness.terms:
            values = sampler.sample_observable(descriptor, 2 * 10**5, rng)
            exact = rho.expectation(descriptor.matrix(rho.dim))
            stderr = values.std() / math.sqrt(values.size)
            assert abs(values.mean() - exact) < 5 * stderr, descriptor
