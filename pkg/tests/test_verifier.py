"""
Verification tasks for parsed spec documents
"""

import numpy as np
import pytest

from models import cauchy_riemann as cr
from models import ode_oscillator as ode
from processors.verifier import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    SOLVE_COLUMNS,
    SPECTRUM_COLUMNS,
    SWEEP_COLUMNS,
    create_verifier,
    worst_verdict,
)
from utils.errors import EigenConvergenceError, SpecError
from utils.settings import get_settings
from utils.spec_parser import EXAMPLE_CR, EXAMPLE_ODE, SpecDocument, parse_spec

CASE_I = SpecDocument(EXAMPLE_CR, (cr.CrParam.case_I().a,), 8, ('verify',))


@pytest.fixture
def zeros_doc(specs_dir):
    return parse_spec((specs_dir / 'ode_zeros.spec').read_bytes())


@pytest.fixture
def a12_doc(specs_dir):
    return parse_spec((specs_dir / 'ode_a12.spec').read_bytes())


def test_worst_verdict():
    assert worst_verdict([]) == PASS
    assert worst_verdict([PASS, INCONCLUSIVE]) == INCONCLUSIVE
    assert worst_verdict([FAIL, PASS, INCONCLUSIVE]) == FAIL


class TestVerify:

    def test_unperturbed_ode_passes(self, zeros_doc):
        result = create_verifier(zeros_doc, threads=1).run('verify', grids=(100, 200, 400))
        assert result['success']
        assert result['verdict'] == PASS
        assert result['failures'] == []
        assert [g['n'] for g in result['grids']] == [100, 200, 400]
        assert result['details']['family']['family'] == 'II'
        assert not result['details']['cross_validation_conflict']
        assert result['residuals']['system'] == 0.0
        assert result['wall_ms'] >= 0

    def test_off_diagonal_ode_fails(self, a12_doc):
        result = create_verifier(a12_doc, threads=1).run('verify', grids=(50, 100))
        assert result['verdict'] == FAIL
        names = [f['name'] for f in result['failures']]
        assert 'condition33_residual' in names
        assert 'domain_equality_residual' in names

    def test_case_I_passes(self):
        result = create_verifier(CASE_I, threads=1).run('verify', grids=(4, 8, 16))
        assert result['verdict'] == PASS
        assert result['residuals']['condition33'] == 0.0
        assert result['residuals']['normality_condition'] <= 1e-14
        assert result['residuals']['control_commutator'] > 0
        norms = [g['commutator'] for g in result['grids']]
        assert norms == sorted(norms, reverse=True)

    def test_control_reported_on_both_ends(self):
        result = create_verifier(CASE_I, threads=1).run('verify', grids=(4, 8, 16))
        residuals = result['residuals']
        assert residuals['control_commutator'] > result['grids'][-1]['commutator']
        assert residuals['control_commutator_coarse'] > 0
        assert result['details']['control_ratio'] > 10

    def test_control_that_stays_normal_is_inconclusive(self, monkeypatch):
        verifier = create_verifier(CASE_I, threads=1)
        monkeypatch.setattr(verifier, '_control_params', lambda: verifier.params)
        result = verifier.run('verify', grids=(4, 8, 16))
        assert result['verdict'] == INCONCLUSIVE
        assert [f['name'] for f in result['failures']] == ['negative_control']

    @pytest.mark.slow
    @pytest.mark.parametrize("a_real", [1.0, -2.0])
    def test_ode_control_separates_at_fine_grid(self, a_real):
        params = ode.match_family_II(a_real)
        doc = SpecDocument(EXAMPLE_ODE, tuple(params.to_vector()), 400, ('verify',))
        result = create_verifier(doc, threads=1).run('verify', grids=(200, 400))
        assert result['residuals']['control_commutator'] >= 1e-2

    @pytest.mark.slow
    def test_ode_control_does_not_decay_for_antiperiodic(self, zeros_doc):
        # shifting a11 by 0.1 from K = 0 stays below 1e-2 but does not shrink with the grid
        result = create_verifier(zeros_doc, threads=1).run('verify', grids=(200, 400))
        residuals = result['residuals']
        assert residuals['control_commutator'] > 1e-3
        assert residuals['control_commutator_coarse'] / residuals['control_commutator'] < 2.0
        assert result['verdict'] == PASS

    def test_grids_must_ascend(self, zeros_doc):
        with pytest.raises(SpecError):
            create_verifier(zeros_doc).run('verify', grids=(200, 100))

    def test_spec_tolerances_apply(self):
        doc = SpecDocument(EXAMPLE_ODE, (0j,) * 4, 100, ('verify',), {'tol_analytic': 1e-10})
        assert create_verifier(doc).settings.tol_analytic == 1e-10


class TestTasks:

    def test_solve_system_from_zero(self, zeros_doc):
        result = create_verifier(zeros_doc, threads=2).run('solve-system')
        assert result['verdict'] == PASS
        assert result['columns'] == SOLVE_COLUMNS
        assert len(result['rows']) == 1
        row = result['rows'][0]
        assert row['family'] == 'II'
        assert not row['conflict']
        assert row['residual'] == 0.0

    def test_solve_system_random_seeds_are_reproducible(self, zeros_doc):
        verifier = create_verifier(zeros_doc, threads=2)
        first = verifier.solve_system(random_count=4, seed=7)
        second = verifier.solve_system(random_count=4, seed=7)
        assert first['details']['seeds'] == 4
        assert first['rows'] == second['rows']

    @pytest.mark.slow
    def test_random_solutions_cross_validate(self, zeros_doc):
        result = create_verifier(zeros_doc, threads=2).solve_system(random_count=64, seed=7)
        settings = get_settings()
        provider = ode.create_provider(16)
        assert result['details']['solutions'] > 0
        assert any(not row['conflict'] for row in result['rows'])
        for row in result['rows']:
            a = ode.OdeParams.from_vector([row[name] for name in ('a11', 'a12', 'a21', 'a22')])
            assert row['residual'] <= settings.system_residual
            if row['conflict']:
                # genuine roots of the written-out system that the boundary form rejects
                assert np.linalg.norm(a.to_vector()) >= 1e-3
                assert ode.cross_validate(a, provider)['domain_equality_residual'] > 1e-6

    def test_solve_system_needs_ode(self):
        with pytest.raises(SpecError):
            create_verifier(CASE_I).run('solve-system')

    def test_sweep_minimum_on_circle(self):
        doc = SpecDocument(EXAMPLE_CR, (0j,), 4, ('sweep',))
        result = create_verifier(doc, threads=2).run('sweep', grid_re=(-0.1, 0.1, 5), grid_im=(-0.1, 0.1, 5))
        assert result['verdict'] == PASS
        assert result['columns'] == SWEEP_COLUMNS
        assert len(result['rows']) == 25
        minimum = result['details']['minimum']
        assert (minimum['a1'], minimum['a2']) == (0.0, 0.0)
        assert minimum['commutator_norm'] <= 1e-14
        assert result['details']['within_one_cell']

    @pytest.mark.slow
    def test_default_sweep_at_sixteen_modes(self):
        doc = SpecDocument(EXAMPLE_CR, (cr.CrParam.case_I().a,), 16, ('sweep',))
        result = create_verifier(doc, threads=2).run('sweep')
        assert len(result['rows']) == 21 * 21
        assert result['details']['truncation'] == 16
        assert result['details']['within_one_cell']
        assert result['verdict'] == PASS

    def test_sweep_needs_cauchy_riemann(self, zeros_doc):
        with pytest.raises(SpecError):
            create_verifier(zeros_doc).run('sweep')

    def test_empty_spectrum(self, zeros_doc):
        result = create_verifier(zeros_doc).run('spectrum', count=0)
        assert result['rows'] == []
        assert result['columns'] == SPECTRUM_COLUMNS[EXAMPLE_ODE]

    def test_ode_spectrum_against_oracle(self, zeros_doc):
        result = create_verifier(zeros_doc).run('spectrum', count=3, grid=100)
        assert len(result['rows']) == 3
        assert all(set(row) == set(SPECTRUM_COLUMNS[EXAMPLE_ODE]) for row in result['rows'])
        exact = ode.antiperiodic_eigenvalues(4)
        for row in result['rows']:
            oracle = complex(row['oracle_re'], row['oracle_im'])
            assert min(abs(oracle - value) for value in exact) <= 1e-12
            assert row['oracle_distance'] <= 1e-8
            assert row['discretization_error'] > 0

    @pytest.mark.slow
    def test_ode_spectrum_at_fine_grid(self, zeros_doc):
        result = create_verifier(zeros_doc).run('spectrum', count=10, grid=400)
        assert len(result['rows']) == 10
        assert max(row['oracle_distance'] for row in result['rows']) <= 1e-4

    def test_non_periodic_spectrum_uses_refined_roots(self, a12_doc):
        result = create_verifier(a12_doc).run('spectrum', count=3, grid=100)
        assert len(result['rows']) == 3
        assert all(row['oracle_distance'] == 0.0 for row in result['rows'])

    def test_cr_spectrum_columns(self):
        result = create_verifier(CASE_I).run('spectrum', count=5)
        assert result['columns'] == SPECTRUM_COLUMNS[EXAMPLE_CR]
        assert len(result['rows']) == 5
        assert all(set(row) == set(SPECTRUM_COLUMNS[EXAMPLE_CR]) for row in result['rows'])

    def test_unknown_task(self, zeros_doc):
        with pytest.raises(SpecError):
            create_verifier(zeros_doc).run('plot')

    def test_numeric_failure_becomes_result(self, zeros_doc, monkeypatch):
        verifier = create_verifier(zeros_doc)

        def broken(**_):
            raise EigenConvergenceError("no convergence", index=2)

        monkeypatch.setattr(verifier, 'spectrum', broken)
        result = verifier.run('spectrum', count=3)
        assert not result['success']
        assert result['verdict'] == FAIL
        assert 'eigenpair #2' in result['error']
        assert result['name'] == 'spectrum'
