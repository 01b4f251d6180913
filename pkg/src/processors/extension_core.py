"""
Extension Core - Correct extensions through finite-rank perturbed inverses
Assembles L^{-1} = L_S^{-1} + K and evaluates the domain-equality and
normality criteria as residuals, generically over a model-problem provider
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np

from utils.errors import AdmissibilityError, DimensionError, UnsupportedRepresentationError
from utils.expsum import ExpSum, gram_matrix
from utils.linops import (
    Grid,
    GridFunction,
    LinearMap,
    commutator_norm,
    eigenpairs,
    weighted_norm,
)
from utils.settings import Settings, get_settings

logger = logging.getLogger(__name__)

NORMAL_CANDIDATE = 'normal-candidate'
NOT_NORMAL = 'not-normal'
INCONCLUSIVE = 'inconclusive'


@dataclass(frozen=True)
class FiniteRankPerturbation:
    """K f = sum_ij C_ij r_i <f, w_j> with closed-form factors"""

    range_functions: Tuple[ExpSum, ...]
    weight_functions: Tuple[ExpSum, ...]
    coefficients: np.ndarray

    def __post_init__(self):
        ranges = tuple(self.range_functions)
        weights = tuple(self.weight_functions)
        coefs = np.array(self.coefficients, dtype=complex, copy=True)
        if not ranges or not weights:
            raise ValueError("A perturbation needs at least one range and one weight function")
        if coefs.shape != (len(ranges), len(weights)):
            raise DimensionError(
                f"Coefficient matrix {coefs.shape} does not match "
                f"{len(ranges)} range and {len(weights)} weight functions"
            )
        for label, funcs in (('range', ranges), ('weight', weights)):
            if any(not isinstance(f, ExpSum) for f in funcs):
                raise UnsupportedRepresentationError(f"All {label} functions need closed forms")
            gram = np.array([[fj.inner(fi) for fj in funcs] for fi in funcs])
            if np.min(np.linalg.eigvalsh((gram + gram.conj().T) / 2)) <= 1e-12 * np.trace(gram).real:
                raise ValueError(f"The {label} functions are linearly dependent")
        coefs.setflags(write=False)
        object.__setattr__(self, 'range_functions', ranges)
        object.__setattr__(self, 'weight_functions', weights)
        object.__setattr__(self, 'coefficients', coefs)

    @property
    def rank(self) -> int:
        return len(self.range_functions)

    @property
    def dimension(self) -> int:
        return self.range_functions[0].dimension

    def is_zero(self) -> bool:
        return not np.any(self.coefficients)

    def apply(self, f: ExpSum) -> ExpSum:
        """Exact action on a closed-form function"""
        pairings = [f.inner(w) for w in self.weight_functions]
        amplitudes = self.coefficients @ np.array(pairings, dtype=complex)
        result = ExpSum.zero(self.dimension)
        for r, amp in zip(self.range_functions, amplitudes):
            if amp != 0:
                result = result + r * amp
        return result

    def adjoint(self) -> 'FiniteRankPerturbation':
        """K* g = sum_ij conj(C_ij) w_j <g, r_i>"""
        return FiniteRankPerturbation(
            self.weight_functions, self.range_functions, self.coefficients.conj().T
        )

    def scaled(self, factor: complex) -> 'FiniteRankPerturbation':
        return FiniteRankPerturbation(
            self.range_functions, self.weight_functions, self.coefficients * factor
        )

    def rank_one_terms(self) -> List[Tuple[complex, ExpSum, ExpSum]]:
        """(C_ij, r_i, w_j) triples"""
        return [
            (complex(self.coefficients[i, j]), r, w)
            for i, r in enumerate(self.range_functions)
            for j, w in enumerate(self.weight_functions)
        ]


class ExampleProvider(ABC):
    """
    A model problem: maximal operators, a fixed correct extension and its boundary operator

    Subclasses set basis, domain, base_inverse, base_inverse_adjoint,
    kerL_basis and kerM_basis in their constructors.
    """

    name: str = 'abstract'
    basis: str
    domain: object
    base_inverse: LinearMap
    base_inverse_adjoint: LinearMap
    kerL_basis: List[ExpSum]
    kerM_basis: List[ExpSum]

    @abstractmethod
    def lhat_symbol(self, exponent: np.ndarray) -> complex:
        """Multiplier of L-hat on exp(exponent . x)"""

    @abstractmethod
    def mhat_symbol(self, exponent: np.ndarray) -> complex:
        """Multiplier of M-hat on exp(exponent . x)"""

    @abstractmethod
    def boundary_operator_T(self, u: ExpSum) -> np.ndarray:
        """Boundary functionals whose kernel is D(L_S)"""

    @abstractmethod
    def test_basis(self, size: int) -> List[ExpSum]:
        """Closed-form functions in D(L_S)"""

    @abstractmethod
    def represent(self, u: ExpSum) -> np.ndarray:
        """Vector of u in the provider basis"""

    @abstractmethod
    def functional(self, w: ExpSum) -> np.ndarray:
        """Row vector c with <f, w> ~ c @ represent(f)"""

    @abstractmethod
    def apply_Lhat_discrete(self, vector: np.ndarray) -> np.ndarray:
        """L-hat on a basis vector without closed form"""

    @abstractmethod
    def apply_Mhat_discrete(self, vector: np.ndarray) -> np.ndarray:
        """M-hat on a basis vector without closed form"""

    def apply_Lhat(self, u: ExpSum) -> ExpSum:
        return u.apply_symbol(self.lhat_symbol)

    def apply_Mhat(self, u: ExpSum) -> ExpSum:
        return u.apply_symbol(self.mhat_symbol)

    def commutator_norm(self, inverse: LinearMap) -> float:
        """||A A* - A* A|| of an inverse assembled on this provider"""
        return commutator_norm(inverse)

    def sample_functions(self, size: Optional[int] = None) -> List[ExpSum]:
        """Smooth functions of D(L-hat) used for operator identities"""
        size = size if size is not None else get_settings().test_basis_size
        return list(self.test_basis(size)) + list(self.kerL_basis) + list(self.kerM_basis)

    def vector_norm(self, vector: np.ndarray) -> float:
        return weighted_norm(self.base_inverse.weights, vector)


@dataclass
class CriterionReport:
    """Structured residuals of one extension"""

    admissibility_ok: bool = False
    domain_equality_residual: float = float('nan')
    condition33_residual: float = float('nan')
    involution_residual: float = float('nan')
    commutator_norms: List[Tuple[int, float]] = field(default_factory=list)
    classification: str = INCONCLUSIVE
    spectrum: List[complex] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def convergence_ratios(self) -> List[float]:
        norms = [value for _, value in self.commutator_norms]
        return [a / b if b > 0 else float('inf') for a, b in zip(norms, norms[1:])]

    def to_dict(self) -> Dict:
        return {
            'admissibility_ok': self.admissibility_ok,
            'domain_equality_residual': self.domain_equality_residual,
            'condition33_residual': self.condition33_residual,
            'involution_residual': self.involution_residual,
            'commutator_norms': [{'n': n, 'commutator': value} for n, value in self.commutator_norms],
            'classification': self.classification,
            'spectrum': [[z.real, z.imag] for z in self.spectrum],
            'notes': list(self.notes),
        }


def check_admissibility(
    p: ExampleProvider,
    K: FiniteRankPerturbation,
    tolerance: float = 1e-12,
    points: int = 32,
    seed: int = 0
) -> None:
    """
    Verify L-hat r_i = 0 and M-hat w_j = 0 analytically

    Args:
        p: provider
        K: perturbation
        tolerance: max |value| at the random points, relative to the factor size
        points: number of random evaluation points
        seed: RNG seed for the points

    Raises:
        AdmissibilityError: naming the first failing function
    """
    if K.dimension != p.kerL_basis[0].dimension:
        raise DimensionError(f"Perturbation is {K.dimension}-D, provider is {p.kerL_basis[0].dimension}-D")
    rng = np.random.default_rng(seed)
    coords = [rng.random(points) for _ in range(K.dimension)]

    checks = (('range', K.range_functions, p.apply_Lhat), ('weight', K.weight_functions, p.apply_Mhat))
    for kind, funcs, operator in checks:
        for index, f in enumerate(funcs):
            image = operator(f)
            scale = max(1.0, float(np.max(np.abs(f(*coords)))))
            if np.max(np.abs(image(*coords)), initial=0.0) > tolerance * scale:
                raise AdmissibilityError(
                    "Perturbation is not admissible: the factor is not annihilated",
                    index=index, kind=kind,
                )


def perturbation_matrix(p: ExampleProvider, K: FiniteRankPerturbation) -> LinearMap:
    """Rank-m matrix of K in the provider basis, built from the closed forms"""
    ranges = np.column_stack([p.represent(r) for r in K.range_functions])
    rows = np.vstack([p.functional(w) for w in K.weight_functions])
    return LinearMap(ranges @ K.coefficients @ rows, p.basis, p.domain)


def assemble_inverse(
    p: ExampleProvider,
    K: FiniteRankPerturbation,
    g: Optional[Grid] = None,
    check: bool = True
) -> LinearMap:
    """
    Matrix of L^{-1} = L_S^{-1} + K

    Args:
        p: provider
        K: admissible perturbation
        g: optional grid, must be the provider grid
        check: run the admissibility check first

    Returns:
        LinearMap: the assembled inverse

    Raises:
        AdmissibilityError: If K is not admissible for p
        DimensionError: If g is not the provider's grid
    """
    if g is not None and (not isinstance(p.domain, Grid) or g.size != p.domain.size):
        raise DimensionError("Grid does not match the provider discretization")
    if check:
        check_admissibility(p, K)
    return p.base_inverse + perturbation_matrix(p, K)


def gamma_via_boundary(p: ExampleProvider, u: ExpSum, tolerance: float = 1e-10) -> ExpSum:
    """
    Gamma u as the kernel element with the same boundary data as u

    Args:
        p: provider
        u: closed-form function
        tolerance: allowed mismatch of the boundary data

    Returns:
        ExpSum: h in span(kerL_basis) with T h = T u

    Raises:
        UnsupportedRepresentationError: If the kernel basis cannot match the boundary data
    """
    target = p.boundary_operator_T(u)
    system = np.column_stack([p.boundary_operator_T(k) for k in p.kerL_basis])
    coefs, *_ = np.linalg.lstsq(system, target, rcond=None)
    mismatch = np.linalg.norm(system @ coefs - target)
    if mismatch > tolerance * max(1.0, np.linalg.norm(target)):
        raise UnsupportedRepresentationError(
            f"Boundary data not reachable from the stored kernel basis (mismatch {mismatch:.2e})"
        )
    result = ExpSum.zero(u.dimension)
    for k, c in zip(p.kerL_basis, coefs):
        result = result + k * c
    return result


def gamma_apply(
    p: ExampleProvider,
    u: Union[ExpSum, GridFunction, np.ndarray]
) -> Union[ExpSum, np.ndarray]:
    """
    Projection Gamma = I - L_S^{-1} L-hat

    Closed-form input goes through the boundary operator, sampled input
    through the discrete inverse and the discrete L-hat.
    """
    if isinstance(u, ExpSum):
        return gamma_via_boundary(p, u)
    vector = u.samples if isinstance(u, GridFunction) else np.asarray(u, dtype=complex)
    return vector - p.base_inverse.apply(p.apply_Lhat_discrete(vector))


def map_to_domain(p: ExampleProvider, K: FiniteRankPerturbation, v: ExpSum) -> ExpSum:
    """(I + K L-hat) v, mapping D(L_S) onto D(L)"""
    return v + K.apply(p.apply_Lhat(v))


def map_from_domain(p: ExampleProvider, K: FiniteRankPerturbation, u: ExpSum) -> ExpSum:
    """(I - K L-hat) u, mapping D(L) onto D(L_S)"""
    return u - K.apply(p.apply_Lhat(u))


def involution_residual(p: ExampleProvider, K: FiniteRankPerturbation) -> float:
    """
    max ||(I - K L)(I + K L) v - v|| / ||v|| over the sample functions

    Vanishes because L-hat K = 0 makes (K L-hat)^2 = 0.
    """
    worst = 0.0
    for v in p.sample_functions():
        scale = max(v.norm(), 1e-300)
        defect = map_from_domain(p, K, map_to_domain(p, K, v)) - v
        worst = max(worst, defect.norm() / scale)
    return worst


def domain_equality_residual(
    p: ExampleProvider,
    K: FiniteRankPerturbation,
    basis_size: Optional[int] = None
) -> float:
    """
    Boundary form of the D(L) = D(L*) criterion over a test basis of D(L_S)

    Evaluates T (K* M - K L + K* M K L) v for each test function v.

    Args:
        p: provider
        K: admissible perturbation with closed-form factors
        basis_size: number of test functions (defaults to settings.test_basis_size)

    Returns:
        float: max norm of the boundary vectors (0 iff D(L) = D(L*))
    """
    size = basis_size or get_settings().test_basis_size
    K_star = K.adjoint()
    worst = 0.0
    for v in p.test_basis(size):
        KLv = K.apply(p.apply_Lhat(v))
        term = K_star.apply(p.apply_Mhat(v)) - KLv + K_star.apply(p.apply_Mhat(KLv))
        worst = max(worst, float(np.linalg.norm(p.boundary_operator_T(term))))
    return worst


def hilbert_schmidt_norm(terms: Sequence[Tuple[complex, ExpSum, ExpSum]]) -> float:
    """
    HS norm of sum_k c_k u_k <., v_k>

    Terms are first collected over pure exponentials so that exact
    cancellations give exactly zero.
    """
    left: Dict[Tuple[complex, ...], int] = {}
    right: Dict[Tuple[complex, ...], int] = {}
    entries: Dict[Tuple[int, int], complex] = {}

    for c, u, v in terms:
        if c == 0:
            continue
        for u_key, u_coef in u.split_atoms():
            p_idx = left.setdefault(u_key, len(left))
            for v_key, v_coef in v.split_atoms():
                q_idx = right.setdefault(v_key, len(right))
                entries[(p_idx, q_idx)] = entries.get((p_idx, q_idx), 0j) + c * u_coef * np.conj(v_coef)

    if not entries:
        return 0.0
    Z = np.zeros((len(left), len(right)), dtype=complex)
    for (i, j), value in entries.items():
        Z[i, j] = value
    if not np.any(Z):
        return 0.0
    G_left = gram_matrix(list(left))
    G_right = gram_matrix(list(right))
    value = np.trace(Z.conj().T @ G_left @ Z @ G_right).real
    return float(np.sqrt(max(value, 0.0)))


def condition33_residual(K: FiniteRankPerturbation, p: ExampleProvider) -> float:
    """
    HS norm of L-hat K* - (M-hat K)*, computed from closed forms

    Args:
        K: perturbation
        p: provider supplying L-hat and M-hat

    Returns:
        float: 0 iff the extra normality condition holds
    """
    terms = []
    for c, r, w in K.rank_one_terms():
        # L-hat K* contributes conj(c) (L-hat w) <., r>
        terms.append((np.conj(c), p.apply_Lhat(w), r))
        # (M-hat K)* contributes conj(c) w <., M-hat r>
        terms.append((-np.conj(c), w, p.apply_Mhat(r)))
    return hilbert_schmidt_norm(terms)


def selfadjoint_defect(K: FiniteRankPerturbation) -> float:
    """||K - K*||_HS, zero exactly for the symmetric-case extensions"""
    terms = [(c, r, w) for c, r, w in K.rank_one_terms()]
    terms += [(-c, r, w) for c, r, w in K.adjoint().rank_one_terms()]
    return hilbert_schmidt_norm(terms)


def adjoint_domain_residual(
    p: ExampleProvider,
    K: FiniteRankPerturbation,
    f: Union[GridFunction, np.ndarray]
) -> float:
    """
    Spot-check that u = L^{-1} f lies in D(L*)

    Returns ||Gamma_{L_S*} (I - K* M-hat) u|| with
    Gamma_{L_S*} = I - (L_S*)^{-1} M-hat.
    """
    vector = f.samples if isinstance(f, GridFunction) else np.asarray(f, dtype=complex)
    u = assemble_inverse(p, K).apply(vector)
    K_star = perturbation_matrix(p, K.adjoint())
    z = u - K_star.apply(p.apply_Mhat_discrete(u))
    residual = z - p.base_inverse_adjoint.apply(p.apply_Mhat_discrete(z))
    return p.vector_norm(residual)


def inverse_spectrum(inverse: LinearMap, count: Optional[int] = None, tolerance: float = 1e-8):
    """
    Eigenvalues of L from the eigenpairs of L^{-1}

    Args:
        inverse: assembled L^{-1}
        count: number of smallest-|lambda| eigenvalues to keep (None = all)
        tolerance: eigen-residual tolerance

    Returns:
        list: (lambda, residual) sorted by ascending |lambda|
    """
    pairs = eigenpairs(inverse, tolerance=tolerance)
    scale = max((abs(pair.value) for pair in pairs), default=0.0)
    # reciprocals of the numerically nonzero eigenvalues
    nonzero = [pair for pair in reversed(pairs) if abs(pair.value) > 1e-12 * max(scale, 1e-300)]
    spectrum = [(1.0 / pair.value, pair.residual) for pair in nonzero]
    return spectrum if count is None else spectrum[:count]


def _decays(norms: List[float], window: Tuple[float, float], floor: float) -> bool:
    if all(value <= floor for value in norms):
        return True
    ratios = [a / b if b > 0 else float('inf') for a, b in zip(norms, norms[1:])]
    return bool(ratios) and all(window[0] <= r <= window[1] for r in ratios)


def normality_report(
    provider_factory: Callable[[int], ExampleProvider],
    K: FiniteRankPerturbation,
    grid_sizes: Sequence[int],
    settings: Optional[Settings] = None,
    order_window: Optional[Tuple[float, float]] = None,
    spectrum_count: int = 0
) -> CriterionReport:
    """
    Run every criterion for one extension

    Args:
        provider_factory: builds the provider for a grid size / truncation
        K: perturbation
        grid_sizes: ascending discretization levels
        settings: thresholds (defaults when omitted)
        order_window: accepted ratio window for successive commutator norms
        spectrum_count: eigenvalues of L to record from the finest level

    Returns:
        CriterionReport: filled report
    """
    settings = settings or get_settings()
    window = order_window or settings.order_window
    report = CriterionReport()

    providers = [provider_factory(n) for n in grid_sizes]
    coarse = providers[0]

    try:
        check_admissibility(coarse, K, tolerance=settings.tol_analytic)
        report.admissibility_ok = True
    except AdmissibilityError as e:
        report.notes.append(str(e))
        report.classification = NOT_NORMAL
        return report

    report.domain_equality_residual = domain_equality_residual(coarse, K, settings.test_basis_size)
    report.condition33_residual = condition33_residual(K, coarse)
    report.involution_residual = involution_residual(coarse, K)

    for n, provider in zip(grid_sizes, providers):
        norm = provider.commutator_norm(assemble_inverse(provider, K, check=False))
        report.commutator_norms.append((int(n), norm))
        logger.info(f"Commutator norm at level {n}: {norm:.3e}")

    if spectrum_count > 0:
        inverse = assemble_inverse(providers[-1], K, check=False)
        report.spectrum = [lam for lam, _ in inverse_spectrum(inverse, spectrum_count, settings.eigen_residual)]

    domain_ok = report.domain_equality_residual <= settings.tol_quadrature
    c33_ok = report.condition33_residual <= settings.tol_analytic
    norms = [value for _, value in report.commutator_norms]

    if not domain_ok:
        report.notes.append(f"domain_equality_residual {report.domain_equality_residual:.3e} "
                            f"> {settings.tol_quadrature:.1e}")
    if not c33_ok:
        report.notes.append(f"condition33_residual {report.condition33_residual:.3e} "
                            f"> {settings.tol_analytic:.1e}")

    if not (domain_ok and c33_ok):
        report.classification = NOT_NORMAL
    elif _decays(norms, window, settings.tol_analytic):
        report.classification = NORMAL_CANDIDATE
    else:
        report.classification = INCONCLUSIVE
        report.notes.append(f"commutator ratios {report.convergence_ratios()} outside {tuple(window)}")

    return report


def is_selfadjoint_perturbation(K: FiniteRankPerturbation, tolerance: Optional[float] = None) -> bool:
    """K = K*, the whole criterion when L_0 is symmetric and L_S self-adjoint"""
    tol = tolerance if tolerance is not None else get_settings().tol_analytic
    return selfadjoint_defect(K) <= tol
