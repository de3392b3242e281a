"""Resource-state construction and adversary families."""

import math

import numpy as np
import pytest

from cvverify.errors import ConfigError, TruncationError
from cvverify.fock import FockState, build_quadratures, fidelity
from cvverify.homodyne import QuadratureGrid
from cvverify.states import (
    AdversarySpec,
    ResourceSpec,
    adversary_state,
    cubic_phase_state,
    orthogonalized_excited_state,
    resource_block,
)


def grid_mean_occupation(gamma_tilde, s, grid):
    """Independent route: <n> = (<x^2> + <p^2> - 1)/2 from the wavefunction.

    <x^2> and <p^2> are evaluated directly on the position grid, using the
    analytic derivative of the wavefunction for the momentum term.
    """
    x = grid.points
    norm = 1.0 / math.sqrt(s * math.sqrt(math.pi))
    envelope = norm * np.exp(-(x**2) / (2 * s * s))
    density = envelope**2
    x2 = grid.integrate(x**2 * density)
    # |psi'|^2 = |(3i g x^2 - x/s^2) psi|^2 for psi = exp(i g x^3) * envelope
    p2 = grid.integrate(((3 * gamma_tilde * x**2) ** 2 + (x / (s * s)) ** 2) * density)
    return (x2 + p2 - 1.0) / 2.0


class TestCubicPhaseState:
    def test_reduces_to_vacuum(self):
        psi = cubic_phase_state(ResourceSpec(0.0, 1.0, dim=40))
        assert abs(psi.amplitudes[0]) ** 2 == pytest.approx(1.0, abs=1e-10)

    def test_gamma_free_case_is_squeezed_vacuum(self):
        psi = cubic_phase_state(ResourceSpec(0.0, 2.0, dim=40))
        assert fidelity(FockState.vacuum(40), psi) == pytest.approx(0.8, abs=1e-8)

    def test_mean_occupation_two_routes(self):
        gamma_tilde, s, dim = 0.1, 1.2, 40
        psi = cubic_phase_state(ResourceSpec(gamma_tilde, s, dim=dim))
        fock_route = psi.expectation(build_quadratures(dim).n)
        grid_route = grid_mean_occupation(gamma_tilde, s, QuadratureGrid.for_dim(dim))
        assert fock_route == pytest.approx(grid_route, abs=1e-6)
        # closed form from the Gaussian moments of the width-s envelope
        closed = s**2 / 4 + 1 / (4 * s**2) - 0.5 + 27 * gamma_tilde**2 * s**4 / 8
        assert grid_route == pytest.approx(closed, abs=1e-9)

    def test_unit_norm_and_tail_gate(self):
        psi = cubic_phase_state(ResourceSpec(0.1, 1.0, dim=40))
        assert psi.norm == pytest.approx(1.0, abs=1e-12)
        assert psi.tail_mass() < 1e-8

    def test_phase_covariance(self):
        plus = cubic_phase_state(ResourceSpec(0.12, 1.1, dim=40))
        minus = cubic_phase_state(ResourceSpec(-0.12, 1.1, dim=40))
        assert np.max(np.abs(minus.amplitudes - plus.amplitudes.conj())) < 1e-10

    def test_truncation_gate_raises(self):
        with pytest.raises(TruncationError):
            cubic_phase_state(ResourceSpec(0.0, 3.0, dim=6))


class TestResourceBlock:
    def test_single_copy(self):
        block = resource_block(ResourceSpec(0.1, 1.0, modes=1, dim=40))
        assert len(block) == 1

    def test_identical_copies(self):
        block = resource_block(ResourceSpec(0.1, 1.0, modes=3, dim=40))
        assert len(block) == 3
        assert all(b is block[0] for b in block)

    def test_zero_copies_rejected(self):
        with pytest.raises(ConfigError):
            ResourceSpec(0.1, 1.0, modes=0, dim=40)


class TestAdversaries:
    @pytest.fixture(scope="class")
    def resource(self):
        return ResourceSpec(0.1, 1.0, dim=40)

    def test_honest_has_unit_fidelity(self, resource):
        rho = adversary_state(AdversarySpec("honest"), resource)
        assert fidelity(cubic_phase_state(resource), rho) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_mix_fidelity_by_construction(self, resource):
        rho = adversary_state(AdversarySpec("orthogonal_mix", weight=0.3), resource)
        assert fidelity(cubic_phase_state(resource), rho) == pytest.approx(0.7, abs=1e-10)

    def test_orthogonalized_state_is_orthogonal(self, resource):
        perp = orthogonalized_excited_state(resource)
        assert abs(cubic_phase_state(resource).overlap(perp)) < 1e-12

    def test_vacuum_fidelity_matches_inner_product(self):
        resource = ResourceSpec(0.1, 1.2, dim=40)
        rho = adversary_state(AdversarySpec("vacuum"), resource)
        psi = cubic_phase_state(resource)
        brute = abs(np.vdot(psi.amplitudes, FockState.vacuum(40).amplitudes)) ** 2
        assert fidelity(psi, rho) == pytest.approx(brute, abs=1e-12)

    @pytest.mark.parametrize(
        "adversary",
        [
            AdversarySpec("honest"),
            AdversarySpec("wrong_gamma", gamma_value=0.15),
            AdversarySpec("gaussian_only"),
            AdversarySpec("vacuum"),
            AdversarySpec("thermal_mix", weight=0.4),
            AdversarySpec("orthogonal_mix", weight=0.5),
        ],
    )
    def test_all_kinds_are_valid_density_matrices(self, adversary, resource):
        rho = adversary_state(adversary, resource)
        rho.validate(trace_atol=1e-9, eig_atol=1e-9)

    def test_invalid_weight_rejected(self):
        with pytest.raises(ConfigError):
            AdversarySpec("orthogonal_mix", weight=1.4)

    def test_wrong_gamma_requires_value(self):
        with pytest.raises(ConfigError):
            AdversarySpec("wrong_gamma")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            AdversarySpec("entangled_cheat")

    def test_roundtrip_through_dict(self):
        spec = AdversarySpec("thermal_mix", weight=0.25)
        assert AdversarySpec.from_dict(spec.to_dict()) == spec
