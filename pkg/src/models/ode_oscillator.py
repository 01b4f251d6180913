"""
ODE Oscillator Model - y'' + y' = f on (0, 1)
Nystrom provider for the anti-periodic extension, the rank-2 perturbation
family and the boundary-condition families it generates
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.linalg
import scipy.optimize

from processors.extension_core import (
    ExampleProvider,
    FiniteRankPerturbation,
    assemble_inverse,
    domain_equality_residual,
    inverse_spectrum,
)
from utils.errors import ClassificationError, EigenConvergenceError, SingularSystemError
from utils.expsum import ExpSum
from utils.linops import GRID_SAMPLES, Grid, LinearMap
from utils.settings import get_settings
from utils.system_manager import get_runtime_manager

logger = logging.getLogger(__name__)

E = np.e
# T(e^{-x}) = (s, -s)
S = (1.0 + E) / E

FAMILY_I = 'I'
FAMILY_II = 'II'
FAMILY_III = 'III'
FAMILY_OTHER = 'other'

# Five-point stencils, order 4; rows for node 0 and node 1, interior is centered
FIRST_DERIVATIVE = {
    'edge': np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
    'near': np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0,
    'center': np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
}
SECOND_DERIVATIVE = {
    'edge': np.array([35.0, -104.0, 114.0, -56.0, 11.0]) / 12.0,
    'near': np.array([11.0, -20.0, 6.0, 4.0, -1.0]) / 12.0,
    'center': np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0,
}


@dataclass(frozen=True)
class OdeParams:
    """Coefficients a11, a12, a21, a22 of the rank-2 perturbation"""

    a11: complex = 0j
    a12: complex = 0j
    a21: complex = 0j
    a22: complex = 0j

    def __post_init__(self):
        for name in ('a11', 'a12', 'a21', 'a22'):
            value = complex(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"Parameter {name} is not finite: {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_vector(cls, values: Sequence[complex]) -> 'OdeParams':
        return cls(*[complex(v) for v in values])

    @classmethod
    def from_real(cls, x: np.ndarray) -> 'OdeParams':
        """Inverse of to_real: real parts first, then imaginary parts"""
        return cls.from_vector(np.asarray(x[:4]) + 1j * np.asarray(x[4:]))

    def to_vector(self) -> np.ndarray:
        return np.array([self.a11, self.a12, self.a21, self.a22], dtype=complex)

    def to_real(self) -> np.ndarray:
        v = self.to_vector()
        return np.concatenate([v.real, v.imag])

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]], dtype=complex)

    def is_normal_candidate(self) -> bool:
        return self.a12 == 0 and self.a21 == 0

    def to_dict(self) -> Dict:
        return {name: [value.real, value.imag]
                for name, value in zip(('a11', 'a12', 'a21', 'a22'), self.to_vector())}


@dataclass(frozen=True)
class BoundaryConditionMatrix:
    """B with B (y(0), y(1), y'(0), y'(1)) = 0 describing D(L)"""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex, copy=True)
        if matrix.shape != (2, 4):
            raise ValueError(f"Boundary matrix must be 2x4, got {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    def singular_values(self) -> np.ndarray:
        return scipy.linalg.svd(self.matrix, compute_uv=False)

    def rank(self, tolerance: float = 1e-9) -> int:
        sv = self.singular_values()
        return int(np.sum(sv > tolerance * max(sv[0], 1e-300)))

    def null_space(self) -> np.ndarray:
        """4x2 orthonormal basis of {b : B b = 0}"""
        _, _, vh = scipy.linalg.svd(self.matrix)
        return vh[2:].conj().T

    def rref(self) -> np.ndarray:
        """Reduced row echelon form with partial pivoting"""
        m = np.array(self.matrix, dtype=complex)
        row = 0
        for col in range(4):
            if row == 2:
                break
            pivot = row + int(np.argmax(np.abs(m[row:, col])))
            if abs(m[pivot, col]) < 1e-12:
                continue
            m[[row, pivot]] = m[[pivot, row]]
            m[row] = m[row] / m[row, col]
            for other in range(2):
                if other != row:
                    m[other] = m[other] - m[other, col] * m[row]
            row += 1
        return m

    def satisfied_by(self, boundary_data: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(boundary_data, dtype=complex)

    def to_dict(self) -> Dict:
        return {'rows': [[[z.real, z.imag] for z in row] for row in self.matrix]}


def ln_inverse_kernel(x, t):
    """
    Green's function of y'' + y' with anti-periodic conditions

    Args:
        x: evaluation point(s) in [0, 1]
        t: integration point(s) in [0, 1]

    Returns:
        numpy.ndarray or complex: kernel values, broadcast over x and t
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    volterra = np.where(x > t, 1.0 - np.exp(t - x), 0.0)
    value = volterra - 0.5 + np.exp(1.0 - x) * np.exp(t - 1.0) / (1.0 + E)
    return value.astype(complex) if value.ndim else complex(value)


def ln_inverse_adjoint_kernel(x, t):
    """conj(k(t, x))"""
    return np.conj(ln_inverse_kernel(t, x))


def _stencil_matrix(n: int, h: float, stencils: Dict[str, np.ndarray], odd: bool) -> np.ndarray:
    """Banded derivative matrix; right edge rows mirror the left ones"""
    D = np.zeros((n, n))
    sign = -1.0 if odd else 1.0
    D[0, 0:5] = stencils['edge']
    D[1, 0:5] = stencils['near']
    D[n - 1, n - 5:n] = sign * stencils['edge'][::-1]
    D[n - 2, n - 5:n] = sign * stencils['near'][::-1]
    for i in range(2, n - 2):
        D[i, i - 2:i + 3] = stencils['center']
    return D / (h if odd else h * h)


def first_derivative_matrix(g: Grid) -> np.ndarray:
    return _stencil_matrix(g.n, g.h, FIRST_DERIVATIVE, odd=True)


def second_derivative_matrix(g: Grid) -> np.ndarray:
    return _stencil_matrix(g.n, g.h, SECOND_DERIVATIVE, odd=False)


def boundary_data(u: ExpSum) -> np.ndarray:
    """(y(0), y(1), y'(0), y'(1)) of a closed-form function"""
    du = u.derivative()
    ends = np.array([0.0, 1.0])
    return np.concatenate([u(ends), du(ends)])


def gamma_ln(u: ExpSum) -> ExpSum:
    """Projection onto Ker L-hat along D(L_N), from the boundary data of u"""
    y0, y1, d0, d1 = boundary_data(u)
    jump = d0 + d1
    return (ExpSum.constant((y0 + y1) / 2 + jump / 2)
            + ExpSum.exp(-1.0, coefficient=-E * jump / (1.0 + E)))


def gamma_ln_star(u: ExpSum) -> ExpSum:
    """Projection onto Ker M-hat along D(L_N*), from the boundary data of u"""
    y0, y1, d0, d1 = boundary_data(u)
    jump = d0 + d1
    return (ExpSum.constant((y0 + y1) / 2 - jump / 2)
            + ExpSum.exp(1.0, coefficient=jump / (1.0 + E)))


class OdeProvider(ExampleProvider):
    """Grid discretization of y'' + y' with the anti-periodic extension L_N"""

    name = 'ode'

    def __init__(self, g: Grid):
        if g.dimension != 1:
            raise ValueError(f"The oscillator needs a 1-D grid, got dimension {g.dimension}")
        self.grid = g
        self.domain = g
        self.basis = GRID_SAMPLES

        x = g.nodes
        w = np.asarray(g.weights)
        self.base_inverse = LinearMap(ln_inverse_kernel(x[:, None], x[None, :]) * w[None, :], GRID_SAMPLES, g)
        self.base_inverse_adjoint = LinearMap(
            ln_inverse_adjoint_kernel(x[:, None], x[None, :]) * w[None, :], GRID_SAMPLES, g
        )
        self.kerL_basis = [ExpSum.constant(1.0), ExpSum.exp(-1.0)]
        self.kerM_basis = [ExpSum.constant(1.0), ExpSum.exp(1.0)]

        self._D1 = first_derivative_matrix(g)
        self._D2 = second_derivative_matrix(g)

        logger.debug(f"Built oscillator provider on {g.n} nodes")

    def lhat_symbol(self, exponent: np.ndarray) -> complex:
        alpha = exponent[0]
        return alpha * alpha + alpha

    def mhat_symbol(self, exponent: np.ndarray) -> complex:
        alpha = exponent[0]
        return alpha * alpha - alpha

    def boundary_operator_T(self, u: ExpSum) -> np.ndarray:
        y0, y1, d0, d1 = boundary_data(u)
        return np.array([y0 + y1, d0 + d1])

    def boundary_data_discrete(self, vector: np.ndarray) -> np.ndarray:
        """Boundary data of sampled values, derivatives from one-sided stencils"""
        v = np.asarray(vector, dtype=complex)
        dv = self._D1 @ v
        return np.array([v[0], v[-1], dv[0], dv[-1]])

    def test_basis(self, size: int) -> List[ExpSum]:
        """Anti-periodic modes exp((2k+1) pi i x), k = 0, -1, 1, -2, ..."""
        ks = []
        k = 0
        while len(ks) < size:
            ks.append(k)
            k = -k - 1 if k >= 0 else -k
        return [ExpSum.exp((2 * k + 1) * np.pi * 1j) for k in ks]

    def represent(self, u: ExpSum) -> np.ndarray:
        return u(self.grid.nodes)

    def functional(self, w: ExpSum) -> np.ndarray:
        return np.conj(w(self.grid.nodes)) * np.asarray(self.grid.weights)

    def apply_Lhat_discrete(self, vector: np.ndarray) -> np.ndarray:
        return (self._D2 + self._D1) @ np.asarray(vector, dtype=complex)

    def apply_Mhat_discrete(self, vector: np.ndarray) -> np.ndarray:
        return (self._D2 - self._D1) @ np.asarray(vector, dtype=complex)


def build_provider(g: Grid) -> OdeProvider:
    return OdeProvider(g)


def create_provider(n: int) -> OdeProvider:
    """
    Factory for an oscillator provider on a uniform grid

    Args:
        n: number of nodes (>= 8)

    Returns:
        OdeProvider: provider instance
    """
    return OdeProvider(Grid.uniform(n, dimension=1))


def build_K(a: OdeParams) -> FiniteRankPerturbation:
    """
    Rank-2 perturbation with range {1, e^{-x}} and weights {1, e^x}

    K f = int f (conj(a11) + conj(a12) e^t) dt + e^{-x} int f (conj(a21) + conj(a22) e^t) dt
    """
    return FiniteRankPerturbation(
        (ExpSum.constant(1.0), ExpSum.exp(-1.0)),
        (ExpSum.constant(1.0), ExpSum.exp(1.0)),
        np.conj(a.as_matrix()),
    )


def _auxiliary_A(c11, c12, c21, c22) -> complex:
    return (2 * (E - 1) * c11 + (E * E - 1) * c12
            + (E + 1) / E * (c21 * (E - 1) + c22 * (E * E - 1) / 2))


def system_residual(a: OdeParams) -> np.ndarray:
    """
    The four equations for D(L) = D(L*), written out in the coefficients

    Args:
        a: perturbation coefficients

    Returns:
        numpy.ndarray: the four complex left-hand sides
    """
    a11, a12, a21, a22 = a.to_vector()
    c11, c12, c21, c22 = np.conj(a.to_vector())
    A = _auxiliary_A(c11, c12, c21, c22)
    bracket = c21 * (E - 1) + c22 * (E * E - 1) / 2

    eq1 = 4 * (a11 + c11) + 2 * (E + 1) * (c21 / E + a12) * A
    eq2 = (-4 * (a11 - c11) - 2 * (E + 1) * (a12 - c12) - 2 * (E + 1) / E * (a21 - c21)
           - (E + 1) ** 2 / E * (a22 - c22) + (4 * a12 + 2 * (E + 1) / E * a22) * A)
    eq3 = -c21 / E + a12 + 2 / E * a12 * bracket
    eq4 = (-(2 * c21 + c22 * (1 + E)) / E - 2 * a12 - (E + 1) / E * a22
           - 4 * a12 / E * (c21 + c22 * (E * E - 1) / 2)
           - 2 * (E + 1) / E ** 2 * a22 * bracket)
    return np.array([eq1, eq2, eq3, eq4], dtype=complex)


def _integral_rows() -> Tuple[np.ndarray, np.ndarray]:
    """int (y''+y') dt and int (y''+y') e^t dt as rows on (y0, y1, y'0, y'1)"""
    return np.array([-1.0, 1.0, -1.0, 1.0]), np.array([0.0, 0.0, -1.0, E])


def boundary_matrix(a: OdeParams) -> BoundaryConditionMatrix:
    """
    Expand Gamma_{L_N}(I - K L-hat) y = 0 into two boundary conditions

    The integrals of L-hat y against the weights 1 and e^t reduce to
    boundary terms, and T(1) = (2, 0), T(e^{-x}) = (s, -s).

    Args:
        a: perturbation coefficients

    Returns:
        BoundaryConditionMatrix: rows acting on (y(0), y(1), y'(0), y'(1))
    """
    c11, c12, c21, c22 = np.conj(a.to_vector())
    I1, I2 = _integral_rows()
    P = c11 * I1 + c12 * I2
    Q = c21 * I1 + c22 * I2
    row1 = np.array([1.0, 1.0, 0.0, 0.0]) - 2 * P - S * Q
    row2 = np.array([0.0, 0.0, 1.0, 1.0]) + S * Q
    return BoundaryConditionMatrix(np.vstack([row1, row2]))


def family_II_multiplier(a_real: float) -> complex:
    return (a_real - 1j) / (a_real + 1j)


def match_family_II(a_real: float) -> OdeParams:
    """
    Diagonal perturbation producing y(0) = c y(1), y'(0) = c y'(1)

    Args:
        a_real: real parameter of the multiplier c = (a - i)/(a + i)

    Returns:
        OdeParams: coefficients with a12 = a21 = 0

    Raises:
        SingularSystemError: If the matching system is singular
    """
    if not np.isfinite(a_real):
        raise ValueError(f"Family parameter must be finite, got {a_real}")
    c = family_II_multiplier(float(a_real))
    # 2 conj(a11) (c - 1) = -(1 + c) and s conj(a22) (e - c) = -(1 + c)
    diag = np.array([2 * (c - 1), S * (E - c)])
    if np.min(np.abs(diag)) < 1e-12 * np.max(np.abs(diag)):
        raise SingularSystemError("Family II matching system is singular", multiplier=c)
    c11, c22 = -(1 + c) / diag
    return OdeParams(a11=np.conj(c11), a22=np.conj(c22))


def _row_in_span(row: np.ndarray, null: np.ndarray) -> float:
    return float(np.linalg.norm(row @ null))


def describe_family(B: BoundaryConditionMatrix, tolerance: Optional[float] = None) -> Dict:
    """
    Match B against the three printed families

    Args:
        B: boundary matrix of rank 2
        tolerance: matching tolerance (defaults to settings.family_match)

    Returns:
        dict: 'family' label plus the recovered family parameters

    Raises:
        ClassificationError: If B is rank deficient
    """
    tol = tolerance if tolerance is not None else get_settings().family_match
    if B.rank() < 2:
        raise ClassificationError(f"Boundary matrix is rank deficient: {B.singular_values()}")
    N = B.null_space()

    e = np.eye(4)
    if _row_in_span(e[0], N) <= tol and _row_in_span(e[1], N) <= tol:
        return {'family': FAMILY_I}

    # II: rows (1, -c, 0, 0) and (0, 0, 1, -c)
    if np.linalg.norm(N[1]) > tol:
        c = complex(np.vdot(N[1], N[0]) / np.vdot(N[1], N[1]))
        rows = (np.array([1, -c, 0, 0]), np.array([0, 0, 1, -c]))
        if (all(_row_in_span(r, N) <= tol * max(1.0, abs(c)) for r in rows)
                and abs(abs(c) - 1.0) <= tol and abs(c - 1.0) > tol):
            a_real = (1j * (1 + c) / (1 - c)).real
            return {'family': FAMILY_II, 'multiplier': c, 'a': a_real}

    # III: rows (a, conj(b), 0, 0) and (0, 1, -b, -a), a real, |b| = |a|
    _, sv, vh = scipy.linalg.svd(N[:2].T)
    if sv[-1] <= tol:
        p, q = vh[-1].conj()
        if abs(p) > tol:
            u1 = q / p  # conj(b) / a
            v0 = np.array([0, 1, 0, 0], dtype=complex) @ N
            v1 = np.array([0, 0, -np.conj(u1), -1], dtype=complex) @ N
            if np.linalg.norm(v1) > tol:
                t = -complex(np.vdot(v1, v0) / np.vdot(v1, v1))
                mismatch = np.linalg.norm(v0 + t * v1)
                if (mismatch <= tol * max(1.0, abs(t)) and abs(t.imag) <= tol * max(1.0, abs(t))
                        and abs(abs(u1) - 1.0) <= tol and abs(t) > tol):
                    a_value = t.real
                    return {'family': FAMILY_III, 'a': a_value, 'b': complex(a_value * np.conj(u1))}

    return {'family': FAMILY_OTHER}


def classify_family(B: BoundaryConditionMatrix) -> str:
    """
    Label of the boundary-condition family of D(L)

    Args:
        B: boundary matrix

    Returns:
        str: 'I', 'II', 'III' or 'other'
    """
    return describe_family(B)['family']


@dataclass
class NewtonOutcome:
    seed: OdeParams
    solution: OdeParams
    residual: float
    iterations: int
    converged: bool
    step: float = float('nan')


def _real_system(x: np.ndarray) -> np.ndarray:
    r = system_residual(OdeParams.from_real(x))
    return np.concatenate([r.real, r.imag])


def _jacobian(x: np.ndarray, step: float) -> np.ndarray:
    """Central differences, exact up to rounding for the quadratic system"""
    J = np.empty((8, 8))
    for k in range(8):
        shift = np.zeros(8)
        shift[k] = step
        J[:, k] = (_real_system(x + shift) - _real_system(x - shift)) / (2 * step)
    return J


def _newton(seed: OdeParams) -> NewtonOutcome:
    """
    Damped Gauss-Newton with min-norm steps

    Converged means the residual is below the Newton tolerance and the next
    full step is small relative to |a|. Singular directions below the rcond
    cutoff (tangents of solution curves) are left out of the step.
    """
    settings = get_settings()
    x = seed.to_real()
    F = _real_system(x)
    norm = float(np.linalg.norm(F))
    step_norm = float('nan')

    iteration = 0
    for iteration in range(settings.newton_max_iterations):
        J = _jacobian(x, settings.newton_jacobian_step)
        delta, *_ = np.linalg.lstsq(J, -F, rcond=settings.newton_rcond)
        step_norm = float(np.linalg.norm(delta))
        if norm <= settings.newton_tolerance and \
                step_norm <= settings.newton_step_tolerance * float(np.linalg.norm(x)):
            return NewtonOutcome(seed, OdeParams.from_real(x), norm, iteration, True, step_norm)

        damping = 1.0
        while damping >= settings.newton_min_damping:
            trial = x + damping * delta
            F_trial = _real_system(trial)
            trial_norm = float(np.linalg.norm(F_trial))
            if trial_norm < norm:
                x, F, norm = trial, F_trial, trial_norm
                break
            damping /= 2
        else:
            break
    else:
        iteration = settings.newton_max_iterations

    logger.debug(f"Newton from {seed.to_vector()} stopped after {iteration} iterations "
                 f"(residual {norm:.3e}, step {step_norm:.3e})")
    return NewtonOutcome(seed, OdeParams.from_real(x), norm, iteration, False, step_norm)


def solve_seeds(seeds: Sequence[OdeParams], threads: Optional[int] = None) -> List[NewtonOutcome]:
    """
    Run the Newton iteration from every seed concurrently

    Args:
        seeds: starting points
        threads: worker count (resolved through the runtime manager)

    Returns:
        list: one NewtonOutcome per seed, in seed order
    """
    workers = get_runtime_manager().resolve_threads(threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(_newton, seeds))
    failed = sum(1 for o in outcomes if not o.converged)
    if failed:
        logger.warning(f"{failed} of {len(outcomes)} Newton seeds did not converge")
    return outcomes


def solve_system(seeds: Sequence[OdeParams], threads: Optional[int] = None) -> List[OdeParams]:
    """
    Converged, deduplicated solutions of the four-equation system

    Args:
        seeds: starting points
        threads: worker count

    Returns:
        list: distinct OdeParams with residual below the Newton tolerance
    """
    settings = get_settings()
    distance = settings.newton_dedup_distance
    solutions: List[OdeParams] = []
    for outcome in solve_seeds(seeds, threads):
        if not outcome.converged:
            continue
        solution = outcome.solution
        # a = 0 is an exact root where the system degenerates; Newton only creeps towards it
        if np.linalg.norm(solution.to_vector()) <= settings.newton_origin_radius:
            solution = OdeParams()
        candidate = solution.to_vector()
        if all(np.linalg.norm(candidate - s.to_vector()) > distance for s in solutions):
            solutions.append(solution)
    return solutions


def cross_validate(a: OdeParams, provider: Optional[OdeProvider] = None) -> Dict:
    """
    Compare the written-out system against the boundary-form criterion

    Args:
        a: perturbation coefficients
        provider: provider used for the boundary-form residual

    Returns:
        dict: both residuals, their verdicts and a conflict flag
    """
    settings = get_settings()
    provider = provider or create_provider(16)
    K = build_K(a)
    system_norm = float(np.linalg.norm(system_residual(a)))
    boundary_norm = domain_equality_residual(provider, K, settings.test_basis_size)
    scale = max(1.0, float(np.max(np.abs(a.to_vector()))) ** 2)
    system_zero = system_norm <= settings.system_residual
    boundary_zero = boundary_norm <= settings.system_residual * scale
    if system_zero != boundary_zero:
        logger.warning(f"Criteria disagree for {a}: system {system_norm:.3e}, boundary form {boundary_norm:.3e}")
    return {
        'system_residual': system_norm,
        'domain_equality_residual': boundary_norm,
        'system_zero': system_zero,
        'boundary_zero': boundary_zero,
        'conflict': system_zero != boundary_zero,
    }


def antiperiodic_eigenvalues(count: int) -> List[complex]:
    """-(2k+1)^2 pi^2 + i (2k+1) pi by ascending modulus"""
    values = []
    m = 1
    while len(values) < count:
        for odd in (m, -m):
            values.append(complex(-(odd * np.pi) ** 2, odd * np.pi))
        m += 2
    return sorted(values[:count], key=abs)


def _boundary_vector(mu: complex) -> np.ndarray:
    em = np.exp(mu)
    return np.array([1.0, em, mu, mu * em])


def characteristic_determinant(lam: complex, B: BoundaryConditionMatrix) -> complex:
    """
    Entire function of lambda vanishing exactly on the spectrum of L

    Applies B to the boundary data of the solutions of mu^2 + mu = lambda,
    divided by mu1 - mu2 so that the double root lambda = -1/4 is regular.
    """
    root = np.sqrt(complex(1 + 4 * lam))
    mu1, mu2 = (-1 + root) / 2, (-1 - root) / 2
    if abs(mu1 - mu2) < 1e-8:
        mu = -0.5
        em = np.exp(mu)
        derivative = np.array([0.0, em, 1.0, em * (1 + mu)])
        return -complex(np.linalg.det(B.matrix @ np.column_stack([_boundary_vector(mu), derivative])))
    columns = np.column_stack([_boundary_vector(mu1), _boundary_vector(mu2)])
    return complex(np.linalg.det(B.matrix @ columns)) / (mu1 - mu2)


def refine_eigenvalue(lam0: complex, B: BoundaryConditionMatrix, index: int = 0) -> complex:
    """
    Polish an approximate eigenvalue on the characteristic determinant

    Raises:
        EigenConvergenceError: If the secant iteration fails
    """
    try:
        root = scipy.optimize.newton(
            lambda z: characteristic_determinant(z, B), complex(lam0),
            tol=1e-12, rtol=1e-13, maxiter=100,
        )
    except (RuntimeError, ZeroDivisionError) as e:
        raise EigenConvergenceError(f"Characteristic root refinement failed near {lam0}: {e}", index=index) from e
    return complex(root)


def family_II_eigenvalues(c: complex, count: int) -> List[complex]:
    """
    Closed-form spectrum for y(0) = c y(1), y'(0) = c y'(1) with |c| = 1

    mu = i (2 pi k - arg c) runs over the logarithms of 1/c and lambda = mu^2 + mu.
    """
    theta = float(np.angle(c))
    values = []
    k = 0
    # |lambda| grows with |2 pi k - theta|, so a symmetric window around theta / 2 pi suffices
    center = int(round(theta / (2 * np.pi)))
    while len(values) < count + 2:
        for shift in ((k,) if k == 0 else (k, -k)):
            mu = 1j * (2 * np.pi * (center + shift) - theta)
            values.append(complex(mu * mu + mu))
        k += 1
    return sorted(values, key=abs)[:count]


def polish_spectrum(points: Sequence[Tuple[complex, float]],
                    B: BoundaryConditionMatrix) -> List[Tuple[complex, float, float]]:
    """
    Refine discrete eigenvalues on the characteristic determinant

    Returns:
        list: (refined lambda, residual, |discrete - refined|) by ascending |lambda|;
        eigenvalues whose refinement fails keep their discrete value with a nan error
    """
    polished = []
    for index, (lam, residual) in enumerate(points):
        try:
            root = refine_eigenvalue(lam, B, index)
        except EigenConvergenceError as e:
            logger.warning(str(e))
            polished.append((lam, residual, float('nan')))
            continue
        polished.append((root, residual, abs(lam - root)))
    return sorted(polished, key=lambda p: abs(p[0]))


def spectrum(a: OdeParams, g: Grid, count: Optional[int] = None,
             refine: bool = True) -> List[Tuple[complex, float]]:
    """
    Eigenvalues of L from the assembled inverse

    Args:
        a: perturbation coefficients
        g: 1-D grid
        count: number of smallest eigenvalues (None = all nonzero)
        refine: polish each eigenvalue on the characteristic determinant

    Returns:
        list: (lambda, relative eigen-residual of L^{-1}) by ascending |lambda|
    """
    provider = build_provider(g)
    inverse = assemble_inverse(provider, build_K(a))
    points = inverse_spectrum(inverse, count, get_settings().eigen_residual)
    if not refine:
        return points
    return [(lam, residual) for lam, residual, _ in polish_spectrum(points, boundary_matrix(a))]


def spectrum_rows(points: Sequence[Tuple[complex, float]]) -> List[Dict]:
    """CSV rows with columns re, im, residual"""
    return [{'re': lam.real, 'im': lam.imag, 'residual': residual} for lam, residual in points]
