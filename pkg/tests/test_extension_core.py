"""
Finite-rank perturbations, projections and the correctness/normality criteria
"""

from dataclasses import replace

import numpy as np
import pytest

from models import cauchy_riemann as cr
from models import ode_oscillator as ode
from processors import extension_core as core
from processors.extension_core import (
    NORMAL_CANDIDATE,
    NOT_NORMAL,
    FiniteRankPerturbation,
    adjoint_domain_residual,
    assemble_inverse,
    check_admissibility,
    condition33_residual,
    domain_equality_residual,
    gamma_apply,
    gamma_via_boundary,
    hilbert_schmidt_norm,
    inverse_spectrum,
    involution_residual,
    is_selfadjoint_perturbation,
    map_from_domain,
    map_to_domain,
    normality_report,
    perturbation_matrix,
    selfadjoint_defect,
)
from utils.errors import AdmissibilityError, DimensionError, UnsupportedRepresentationError
from utils.expsum import ExpSum
from utils.linops import Grid, commutator_norm
from utils.settings import get_settings


def _random_params(rng, diagonal=False):
    z = rng.normal(size=4) + 1j * rng.normal(size=4)
    if diagonal:
        z[1] = z[2] = 0
    return ode.OdeParams.from_vector(z)


class TestFiniteRankPerturbation:

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            FiniteRankPerturbation((ExpSum.constant(1.0),), (ExpSum.constant(1.0),), np.zeros((2, 1)))

    def test_dependent_factors(self):
        one = ExpSum.constant(1.0)
        with pytest.raises(ValueError):
            FiniteRankPerturbation((one, one * 2.0), (one, ExpSum.exp(1.0)), np.eye(2))

    def test_factors_need_closed_forms(self):
        with pytest.raises(UnsupportedRepresentationError):
            FiniteRankPerturbation((np.ones(4),), (ExpSum.constant(1.0),), np.eye(1))

    def test_adjoint_pairing(self, rng):
        K = ode.build_K(_random_params(rng))
        f = ExpSum.exp(2.0) + ExpSum.exp(np.pi * 1j, coefficient=0.5)
        g = ExpSum.exp(0.5)
        assert K.apply(f).inner(g) == pytest.approx(f.inner(K.adjoint().apply(g)), rel=1e-12)

    def test_rank_and_terms(self):
        K = ode.build_K(ode.OdeParams(1, 2, 3, 4))
        assert K.rank == 2
        assert K.dimension == 1
        assert len(K.rank_one_terms()) == 4
        assert not K.is_zero()
        assert K.scaled(0).is_zero()


class TestAdmissibility:

    def test_model_kernels_are_admissible(self, ode_provider, cr_provider):
        check_admissibility(ode_provider, ode.build_K(ode.OdeParams(1, 2, 3, 4)))
        check_admissibility(cr_provider, cr.build_K_cr(cr.CrParam.case_I()))

    def test_range_outside_kernel(self, ode_provider):
        K = FiniteRankPerturbation((ExpSum.exp(1.0),), (ExpSum.constant(1.0),), np.eye(1))
        with pytest.raises(AdmissibilityError) as info:
            check_admissibility(ode_provider, K)
        assert info.value.kind == 'range'
        assert info.value.index == 0

    def test_weight_outside_kernel(self, ode_provider):
        K = FiniteRankPerturbation((ExpSum.constant(1.0),), (ExpSum.exp(-1.0),), np.eye(1))
        with pytest.raises(AdmissibilityError) as info:
            check_admissibility(ode_provider, K)
        assert info.value.kind == 'weight'

    def test_dimension_mismatch(self, ode_provider):
        with pytest.raises(DimensionError):
            check_admissibility(ode_provider, cr.build_K_cr(cr.CrParam(0.1)))


class TestAssembly:

    def test_zero_perturbation_gives_base_inverse(self, ode_provider):
        inverse = assemble_inverse(ode_provider, ode.build_K(ode.OdeParams()))
        np.testing.assert_array_equal(inverse.matrix, ode_provider.base_inverse.matrix)

    def test_grid_must_match_provider(self, ode_provider):
        with pytest.raises(DimensionError):
            assemble_inverse(ode_provider, ode.build_K(ode.OdeParams()), g=Grid.uniform(32))

    def test_perturbation_matrix_matches_closed_form(self, ode_provider):
        K = ode.build_K(ode.OdeParams(0.3, -0.2j, 0.1, 0.5))
        f = ExpSum.exp(np.pi * 1j)
        discrete = perturbation_matrix(ode_provider, K).apply(ode_provider.represent(f))
        exact = ode_provider.represent(K.apply(f))
        # trapezoid rule on smooth integrands
        assert np.max(np.abs(discrete - exact)) < 1e-3

    def test_closed_form_inverse_of_one_is_second_order(self):
        errors = []
        for n in (100, 200, 400):
            p = ode.create_provider(n)
            x = p.grid.nodes
            exact = x - 1.5 + 2 * np.exp(1 - x) / (1 + np.e)
            errors.append(np.max(np.abs(p.base_inverse.apply(np.ones(n)) - exact)))
        ratios = [a / b for a, b in zip(errors, errors[1:])]
        assert all(3.5 <= r <= 4.5 for r in ratios)


class TestProjections:

    def test_gamma_fixes_kernel(self, ode_provider):
        for h in ode_provider.kerL_basis:
            assert (gamma_apply(ode_provider, h) - h).norm() < 1e-12

    def test_gamma_is_idempotent(self, ode_provider, rng):
        for _ in range(16):
            alpha = rng.normal(size=3) + 1j * rng.normal(size=3)
            u = (ExpSum.exp(alpha[0]) + ExpSum.exp(alpha[1], coefficient=alpha[2])
                 + ExpSum.exp(2 * np.pi * 1j))
            once = gamma_apply(ode_provider, u)
            twice = gamma_apply(ode_provider, once)
            assert (twice - once).norm() <= 1e-10 * max(1.0, once.norm())

    def test_gamma_matches_printed_projection(self, ode_provider):
        u = ExpSum.exp(2.0) + ExpSum.exp(np.pi * 1j, coefficient=1j)
        assert (gamma_via_boundary(ode_provider, u) - ode.gamma_ln(u)).norm() < 1e-12

    def test_discrete_gamma_on_kernel(self, ode_provider):
        ones = np.ones(ode_provider.grid.n)
        np.testing.assert_allclose(gamma_apply(ode_provider, ones), ones, atol=1e-9)

    def test_domain_maps_are_inverse(self, ode_provider, rng):
        for _ in range(16):
            K = ode.build_K(_random_params(rng))
            assert involution_residual(ode_provider, K) <= 1e-10

    def test_sample_functions_follow_settings(self, ode_provider, monkeypatch):
        extra = len(ode_provider.kerL_basis) + len(ode_provider.kerM_basis)
        assert len(ode_provider.sample_functions()) == get_settings().test_basis_size + extra
        monkeypatch.setattr(core, 'get_settings', lambda: replace(get_settings(), test_basis_size=3))
        assert len(ode_provider.sample_functions()) == 3 + extra
        assert len(ode_provider.sample_functions(5)) == 5 + extra

    def test_domain_maps_on_square(self, cr_provider):
        K = cr.build_K_cr(cr.CrParam(0.05 - 0.02j))
        v = cr_provider.modes.mode(0, 1)
        assert (map_from_domain(cr_provider, K, map_to_domain(cr_provider, K, v)) - v).norm() == 0.0
        assert involution_residual(cr_provider, K) <= 1e-10


class TestCriteria:

    def test_condition33_vanishes_iff_off_diagonal_zero(self, ode_provider, rng):
        for _ in range(64):
            assert condition33_residual(ode.build_K(_random_params(rng, diagonal=True)), ode_provider) <= 1e-13
            assert condition33_residual(ode.build_K(_random_params(rng)), ode_provider) > 1e-6
        for axis in (ode.OdeParams(a12=1), ode.OdeParams(a21=1j)):
            assert condition33_residual(ode.build_K(axis), ode_provider) > 1e-6

    def test_condition33_holds_for_convolution_kernel(self, cr_provider):
        for a in (0.1, -0.3j, 1 + 1j):
            assert condition33_residual(cr.build_K_cr(cr.CrParam(a)), cr_provider) == 0.0

    def test_domain_equality(self, ode_provider):
        assert domain_equality_residual(ode_provider, ode.build_K(ode.OdeParams())) == 0.0
        normal = ode.match_family_II(1.0)
        assert domain_equality_residual(ode_provider, ode.build_K(normal)) <= 1e-9
        assert domain_equality_residual(ode_provider, ode.build_K(ode.OdeParams(a12=1))) > 1e-6

    def test_domain_equality_on_normality_circle(self, cr_provider):
        on_circle = cr.build_K_cr(cr.CrParam.case_I())
        off_circle = cr.build_K_cr(cr.CrParam(0.1))
        assert domain_equality_residual(cr_provider, on_circle) <= 1e-9
        assert domain_equality_residual(cr_provider, off_circle) > 1e-3

    def test_hilbert_schmidt_norm_of_rank_one(self):
        u = ExpSum.exp(-1.0)
        v = ExpSum.constant(1.0)
        expected = 2.0 * u.norm() * v.norm()
        assert hilbert_schmidt_norm([(2.0, u, v)]) == pytest.approx(expected, rel=1e-13)
        assert hilbert_schmidt_norm([(2.0, u, v), (-2.0, u, v)]) == 0.0

    def test_selfadjoint_defect(self):
        one = ExpSum.constant(1.0)
        symmetric = FiniteRankPerturbation((one,), (one,), [[2.0]])
        skew = FiniteRankPerturbation((one,), (one,), [[1j]])
        assert selfadjoint_defect(symmetric) == 0.0
        assert selfadjoint_defect(skew) == pytest.approx(2.0)
        assert is_selfadjoint_perturbation(symmetric)
        assert not is_selfadjoint_perturbation(skew)

    def test_adjoint_domain_spot_check(self):
        p = ode.create_provider(200)
        f = np.ones(200)
        assert adjoint_domain_residual(p, ode.build_K(ode.OdeParams()), f) < 1e-3
        assert adjoint_domain_residual(p, ode.build_K(ode.OdeParams(a12=1)), f) > 0.1


class TestNormalityReport:

    def test_unperturbed_ode_is_normal(self):
        K = ode.build_K(ode.OdeParams())
        report = normality_report(ode.create_provider, K, (100, 200, 400))
        assert report.admissibility_ok
        assert report.classification == NORMAL_CANDIDATE
        # the commutator is rounding noise on every grid, so only the floor branch can accept it
        assert all(value <= get_settings().tol_analytic for _, value in report.commutator_norms)

    def test_off_diagonal_ode_is_not_normal(self):
        K = ode.build_K(ode.OdeParams(a12=1))
        report = normality_report(ode.create_provider, K, (50, 100))
        assert report.classification == NOT_NORMAL
        assert any('condition33' in note for note in report.notes)

    def test_inadmissible_kernel_stops_early(self):
        K = FiniteRankPerturbation((ExpSum.exp(1.0),), (ExpSum.constant(1.0),), np.eye(1))
        report = normality_report(ode.create_provider, K, (50, 100))
        assert not report.admissibility_ok
        assert report.commutator_norms == []

    def test_case_I_commutator_decreases(self):
        K = cr.build_K_cr(cr.CrParam.case_I())
        report = normality_report(cr.create_provider, K, (4, 8, 16), order_window=(1.1, 1e6))
        assert report.classification == NORMAL_CANDIDATE
        norms = [value for _, value in report.commutator_norms]
        assert norms[0] > norms[1] > norms[2]

    def test_report_serializes(self):
        report = normality_report(ode.create_provider, ode.build_K(ode.OdeParams()), (50, 100), spectrum_count=2)
        data = report.to_dict()
        assert [entry['n'] for entry in data['commutator_norms']] == [50, 100]
        assert len(data['spectrum']) == 2


def test_inverse_spectrum_of_unperturbed_ode():
    p = ode.create_provider(200)
    spectrum = inverse_spectrum(assemble_inverse(p, ode.build_K(ode.OdeParams())), 4)
    expected = ode.antiperiodic_eigenvalues(4)
    for lam, residual in spectrum:
        nearest = min(expected, key=lambda z: abs(z - lam))
        assert abs(lam - nearest) <= 5e-3 * abs(nearest)
        assert residual < 1e-8


def test_commutator_of_base_inverse_is_small():
    assert commutator_norm(ode.create_provider(400).base_inverse) < 1e-4
