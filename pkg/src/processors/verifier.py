"""
Extension Verifier - runs the verification tasks of one spec document
Each task returns a result dict with 'success', 'verdict' and its data
"""

import time
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from models import cauchy_riemann as cr
from models import ode_oscillator as ode
from processors.extension_core import (
    NORMAL_CANDIDATE,
    FiniteRankPerturbation,
    assemble_inverse,
    normality_report,
)
from utils.errors import ClassificationError, EigenConvergenceError, SpecError
from utils.linops import Grid
from utils.settings import Settings, get_settings
from utils.spec_parser import EXAMPLE_CR, EXAMPLE_ODE, SpecDocument
from utils.system_manager import get_runtime_manager

logger = logging.getLogger(__name__)

PASS = 'pass'
FAIL = 'fail'
INCONCLUSIVE = 'inconclusive'
VERDICT_ORDER = (PASS, INCONCLUSIVE, FAIL)

SPECTRUM_COLUMNS = {
    EXAMPLE_ODE: ('re', 'im', 'residual', 'discretization_error', 'oracle_re', 'oracle_im', 'oracle_distance'),
    EXAMPLE_CR: ('re', 'im', 'residual', 'match_re', 'match_im', 'distance'),
}
SOLVE_COLUMNS = ('a11', 'a12', 'a21', 'a22', 'residual', 'family', 'conflict')
SWEEP_COLUMNS = ('a1', 'a2', 'commutator_norm', 'condition_residual')


def worst_verdict(verdicts: Sequence[str]) -> str:
    return max(verdicts, key=VERDICT_ORDER.index, default=PASS)


class ExtensionVerifier:
    """
    Runs verify / solve-system / sweep / spectrum for one spec document
    """

    def __init__(
        self,
        doc: SpecDocument,
        settings: Optional[Settings] = None,
        threads: Optional[int] = None
    ):
        """
        Initialize verifier

        Args:
            doc: parsed spec document
            settings: base settings (spec tolerance overrides are applied on top)
            threads: worker count for concurrent solves and sweeps
        """
        self.doc = doc
        self.settings = doc.settings(settings or get_settings())
        self.threads = threads
        self.runtime = get_runtime_manager()

        if doc.example == EXAMPLE_ODE:
            self.params = ode.OdeParams.from_vector(doc.params)
        else:
            self.params = cr.CrParam(doc.params[0])

        logger.info(f"Verifier ready for '{doc.example}' ({self.runtime.get_info_string()})")

    @property
    def is_ode(self) -> bool:
        return self.doc.example == EXAMPLE_ODE

    def _require(self, example: str, task: str):
        if self.doc.example != example:
            raise SpecError(f"Task '{task}' needs a '{example}' spec, got '{self.doc.example}'")

    def _provider_factory(self):
        return ode.create_provider if self.is_ode else cr.create_provider

    def _perturbation(self, params=None) -> FiniteRankPerturbation:
        params = params if params is not None else self.params
        return ode.build_K(params) if self.is_ode else cr.build_K_cr(params)

    def _control_params(self):
        """Parameters pushed off the normal set for the negative control"""
        if self.is_ode:
            return ode.OdeParams(self.params.a11 + 0.1, self.params.a12, self.params.a21, self.params.a22)
        return cr.CrParam(self.params.a + 0.1)

    def default_grids(self) -> Tuple[int, ...]:
        return self.settings.ode_grids if self.is_ode else self.settings.cr_truncations

    def run(self, task: str, **options) -> Dict:
        """
        Run one task, timing it and converting numeric failures into result dicts

        Args:
            task: 'verify', 'solve-system', 'sweep' or 'spectrum'
            **options: task keyword arguments

        Returns:
            dict: task result with 'name', 'success', 'verdict' and 'wall_ms'

        Raises:
            SpecError: If the task does not apply to this spec
        """
        runners = {
            'verify': self.verify,
            'solve-system': self.solve_system,
            'sweep': self.sweep,
            'spectrum': self.spectrum,
        }
        if task not in runners:
            raise SpecError(f"Unknown task '{task}'")

        logger.info(f"Starting task '{task}'")
        start_time = time.time()
        try:
            result = runners[task](**options)
            result['success'] = True
        except SpecError:
            raise
        except (EigenConvergenceError, ClassificationError, np.linalg.LinAlgError, RuntimeError) as e:
            logger.error(f"Task '{task}' failed: {e}", exc_info=True)
            result = {'success': False, 'error': str(e), 'verdict': FAIL}
        result['name'] = task
        result['wall_ms'] = (time.time() - start_time) * 1000.0
        logger.info(f"Task '{task}' finished in {result['wall_ms']:.0f} ms: {result['verdict']}")
        return result

    def verify(self, grids: Optional[Sequence[int]] = None) -> Dict:
        """
        All criteria for the spec's extension

        Args:
            grids: ascending grid sizes (ODE) or truncations (Cauchy-Riemann)

        Returns:
            dict: verdict, residuals, grids, failures and details
        """
        grids = tuple(grids) if grids else self.default_grids()
        if list(grids) != sorted(set(grids)):
            raise SpecError(f"Grids must be strictly ascending, got {list(grids)}")
        window = self.settings.order_window if self.is_ode else self.settings.truncation_window
        if not self.is_ode:
            ok, message = self.runtime.check_memory_requirement(cr.ModeSet(max(grids)).size)
            if not ok:
                logger.warning(message)

        K = self._perturbation()
        report = normality_report(self._provider_factory(), K, grids, self.settings, order_window=window)

        residuals = {
            'domain_equality': report.domain_equality_residual,
            'condition33': report.condition33_residual,
            'involution': report.involution_residual,
        }
        details: Dict = {'classification': report.classification, 'notes': report.notes}
        failures: List[Dict] = []

        if not report.admissibility_ok:
            failures.append({'name': 'admissibility', 'value': None, 'threshold': self.settings.tol_analytic})
        checks = (
            ('involution', self.settings.tol_quadrature),
            ('domain_equality', self.settings.tol_quadrature),
            ('condition33', self.settings.tol_analytic),
        )
        for name, threshold in checks:
            value = residuals[name]
            if not value <= threshold:
                failures.append({'name': f"{name}_residual", 'value': value, 'threshold': threshold})

        if self.is_ode:
            check = ode.cross_validate(self.params)
            residuals['system'] = check['system_residual']
            details['cross_validation_conflict'] = check['conflict']
            try:
                details['family'] = ode.describe_family(ode.boundary_matrix(self.params))
            except ClassificationError as e:
                details['family'] = {'family': 'rank-deficient', 'reason': str(e)}
        else:
            residuals['normality_condition'] = cr.normality_condition_residual(self.params)

        if report.admissibility_ok:
            factory = self._provider_factory()
            control_K = self._perturbation(self._control_params())
            controls = {}
            for n in sorted({grids[0], grids[-1]}):
                provider = factory(n)
                controls[n] = provider.commutator_norm(assemble_inverse(provider, control_K, check=False))
            residuals['control_commutator'] = controls[grids[-1]]
            residuals['control_commutator_coarse'] = controls[grids[0]]
            own = report.commutator_norms[-1][1] if report.commutator_norms else 0.0
            details['control_ratio'] = controls[grids[-1]] / own if own > 0 else None
            control_ok = controls[grids[-1]] > own
        else:
            control_ok = True

        ratios = report.convergence_ratios()
        details['convergence_ratios'] = ratios

        if failures:
            verdict = FAIL
        elif report.classification == NORMAL_CANDIDATE and control_ok:
            verdict = PASS
        elif report.classification == NORMAL_CANDIDATE:
            # the perturbed extension is no less normal on the finest grid
            verdict = INCONCLUSIVE
            failures.append({'name': 'negative_control', 'value': residuals['control_commutator'],
                             'threshold': report.commutator_norms[-1][1]})
        else:
            verdict = INCONCLUSIVE
            failures.append({'name': 'commutator_ratio', 'value': ratios, 'threshold': list(window)})

        return {
            'verdict': verdict,
            'residuals': residuals,
            'grids': [{'n': n, 'commutator': value} for n, value in report.commutator_norms],
            'failures': failures,
            'details': details,
        }

    def solve_system(
        self,
        seeds: Optional[Sequence[ode.OdeParams]] = None,
        random_count: int = 0,
        seed: int = 0
    ) -> Dict:
        """
        Newton solutions of the four-equation system with their families

        Args:
            seeds: explicit starting points
            random_count: extra random seeds in the unit ball of C^4
            seed: RNG seed for the random starting points

        Returns:
            dict: 'rows' for the solution table and 'columns'
        """
        self._require(EXAMPLE_ODE, 'solve-system')
        all_seeds = list(seeds or [])
        if random_count > 0:
            rng = np.random.default_rng(seed)
            for _ in range(random_count):
                z = rng.normal(size=4) + 1j * rng.normal(size=4)
                radius = rng.random() ** 0.125
                all_seeds.append(ode.OdeParams.from_vector(radius * z / np.linalg.norm(z)))
        if not all_seeds:
            all_seeds = [self.params]

        solutions = ode.solve_system(all_seeds, self.threads)
        if not solutions:
            logger.warning("No seed converged; the solution table is empty")

        provider = ode.create_provider(16)
        rows = []
        for a in solutions:
            try:
                family = ode.classify_family(ode.boundary_matrix(a))
            except ClassificationError:
                family = 'rank-deficient'
            check = ode.cross_validate(a, provider)
            row = dict(zip(('a11', 'a12', 'a21', 'a22'), a.to_vector()))
            row.update({'residual': check['system_residual'], 'family': family, 'conflict': check['conflict']})
            rows.append(row)

        conflicts = sum(1 for r in rows if r['conflict'])
        return {
            'verdict': FAIL if conflicts else PASS,
            'rows': rows,
            'columns': SOLVE_COLUMNS,
            'details': {'seeds': len(all_seeds), 'solutions': len(rows), 'conflicts': conflicts},
        }

    def sweep(
        self,
        grid_re: Optional[Tuple[float, float, int]] = None,
        grid_im: Optional[Tuple[float, float, int]] = None,
        truncation: Optional[int] = None,
        progress: bool = False
    ) -> Dict:
        """
        Commutator norms over a rectangle of kernel amplitudes

        Args:
            grid_re: (lo, hi, steps) for a1
            grid_im: (lo, hi, steps) for a2
            truncation: Fourier truncation M (defaults to the spec's M)
            progress: show a progress bar on stderr

        Returns:
            dict: 'rows' plus the location of the minimum against the analytic zero set
        """
        self._require(EXAMPLE_CR, 'sweep')
        lo_re, hi_re, n_re = grid_re or self.settings.sweep_grid_re
        lo_im, hi_im, n_im = grid_im or self.settings.sweep_grid_im
        if n_re < 1 or n_im < 1:
            raise SpecError("Sweep grids need at least one step")
        xs = np.linspace(lo_re, hi_re, int(n_re))
        ys = np.linspace(lo_im, hi_im, int(n_im))
        points = [cr.CrParam(x + 1j * y) for x in xs for y in ys]

        ms = cr.ModeSet(truncation or self.doc.grid)
        results = cr.commutator_sweep(points, ms, self.threads, progress=progress)
        rows = cr.sweep_rows(results)

        best = min(rows, key=lambda r: r['commutator_norm'])
        radius = 1.0 / cr.GAP
        distance = abs(np.hypot(best['a1'], best['a2'] + radius) - radius)
        cell = np.hypot(
            (hi_re - lo_re) / max(int(n_re) - 1, 1),
            (hi_im - lo_im) / max(int(n_im) - 1, 1),
        )
        within = bool(distance <= cell) if cell > 0 else bool(best['condition_residual'] <= self.settings.tol_quadrature)

        return {
            'verdict': PASS if within else INCONCLUSIVE,
            'rows': rows,
            'columns': SWEEP_COLUMNS,
            'details': {
                'minimum': {'a1': best['a1'], 'a2': best['a2'], 'commutator_norm': best['commutator_norm']},
                'distance_to_zero_set': distance,
                'within_one_cell': within,
                'truncation': ms.M,
            },
        }

    def spectrum(self, count: int = 10, grid: Optional[int] = None) -> Dict:
        """
        Smallest eigenvalues of L with an oracle comparison per eigenvalue

        Args:
            count: number of eigenvalues (0 = header only)
            grid: grid size / truncation (defaults to the spec's)

        Returns:
            dict: 'rows' and 'columns'
        """
        columns = SPECTRUM_COLUMNS[self.doc.example]
        if count <= 0:
            return {'verdict': PASS, 'rows': [], 'columns': columns}
        size = grid or self.doc.grid

        rows = []
        if self.is_ode:
            B = ode.boundary_matrix(self.params)
            discrete = ode.spectrum(self.params, Grid.uniform(size), count, refine=False)
            closed_form = self._closed_form_spectrum(B, count)
            for lam, residual, error in ode.polish_spectrum(discrete, B):
                oracle = lam
                if closed_form is not None:
                    oracle = complex(closed_form[np.argmin(np.abs(closed_form - lam))])
                rows.append({'re': lam.real, 'im': lam.imag, 'residual': residual,
                             'discretization_error': error,
                             'oracle_re': oracle.real, 'oracle_im': oracle.imag,
                             'oracle_distance': abs(lam - oracle)})
        else:
            lattice = np.array(cr.printed_lattice(size))
            for lam, residual in cr.spectrum(self.params, cr.ModeSet(size), count):
                match = complex(lattice[np.argmin(np.abs(lattice - lam))])
                rows.append({'re': lam.real, 'im': lam.imag, 'residual': residual,
                             'match_re': match.real, 'match_im': match.imag,
                             'distance': abs(lam - match)})

        return {'verdict': PASS, 'rows': rows, 'columns': columns}

    @staticmethod
    def _closed_form_spectrum(B: 'ode.BoundaryConditionMatrix', count: int) -> Optional[np.ndarray]:
        """Family II eigenvalues when D(L) is periodic up to a unimodular multiplier"""
        try:
            description = ode.describe_family(B)
        except ClassificationError:
            return None
        if description['family'] != ode.FAMILY_II:
            return None
        # a few extra values so the nearest match never falls off the end
        return np.array(ode.family_II_eigenvalues(description['multiplier'], count + 4))


def create_verifier(
    doc: SpecDocument,
    settings: Optional[Settings] = None,
    threads: Optional[int] = None
) -> ExtensionVerifier:
    """
    Factory function to create a verifier

    Args:
        doc: parsed spec document
        settings: base settings
        threads: worker count

    Returns:
        ExtensionVerifier: verifier instance
    """
    return ExtensionVerifier(doc, settings=settings, threads=threads)
