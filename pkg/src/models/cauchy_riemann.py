"""
Cauchy-Riemann Model - u_x + i u_y = f on the unit square
Anti-periodic Fourier provider, the rank-1 convolution perturbation and
the normality circle of its amplitude
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import scipy.integrate
from tqdm import tqdm

from processors.extension_core import ExampleProvider, FiniteRankPerturbation, assemble_inverse, inverse_spectrum
from utils.errors import UnsupportedRepresentationError
from utils.expsum import ExpSum
from utils.linops import FOURIER_COEFFICIENTS, LinearMap, commutator_norm
from utils.settings import get_settings
from utils.system_manager import get_runtime_manager

logger = logging.getLogger(__name__)

PI = np.pi
# e^pi - e^{-pi}
GAP = np.exp(PI) - np.exp(-PI)
CASE_I_A2 = 2.0 / (np.exp(-PI) - np.exp(PI))
MIN_TRUNCATION = 4

FIRST_FAMILY = 'first'
SECOND_FAMILY = 'second'


@dataclass(frozen=True)
class ModeSet:
    """Anti-periodic modes exp((2k+1) pi i x + (2n+1) pi i y), |k|, |n| <= M, k outer"""

    M: int
    ks: np.ndarray = field(init=False, repr=False, compare=False)
    ns: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.M) < 1:
            raise ValueError(f"Truncation must be positive, got {self.M}")
        indices = np.arange(-self.M, self.M + 1)
        kk, nn = np.meshgrid(indices, indices, indexing='ij')
        object.__setattr__(self, 'ks', kk.reshape(-1))
        object.__setattr__(self, 'ns', nn.reshape(-1))

    @property
    def size(self) -> int:
        return (2 * self.M + 1) ** 2

    @property
    def modes(self) -> List[Tuple[int, int]]:
        return list(zip(self.ks.tolist(), self.ns.tolist()))

    def exponents(self) -> np.ndarray:
        """(size, 2) exponent rows of the basis modes"""
        return np.column_stack([(2 * self.ks + 1) * PI * 1j, (2 * self.ns + 1) * PI * 1j])

    def index(self, k: int, n: int) -> int:
        if abs(k) > self.M or abs(n) > self.M:
            raise IndexError(f"Mode ({k}, {n}) outside truncation {self.M}")
        return (k + self.M) * (2 * self.M + 1) + (n + self.M)

    def mode(self, k: int, n: int) -> ExpSum:
        return ExpSum.exp((2 * k + 1) * PI * 1j, (2 * n + 1) * PI * 1j)


@dataclass(frozen=True)
class CoupledModes:
    """The k = 0 column of a truncation, the only modes the kernel couples"""

    M: int

    @property
    def size(self) -> int:
        return 2 * self.M + 1


@dataclass(frozen=True)
class CrParam:
    """Amplitude a = a1 + i a2 of the convolution kernel a exp(i pi (z - zeta))"""

    a: complex = 0j

    def __post_init__(self):
        value = complex(self.a)
        if not np.isfinite(value):
            raise ValueError(f"Kernel amplitude is not finite: {value}")
        object.__setattr__(self, 'a', value)

    @property
    def a1(self) -> float:
        return self.a.real

    @property
    def a2(self) -> float:
        return self.a.imag

    @classmethod
    def case_I(cls) -> 'CrParam':
        return cls(1j * CASE_I_A2)

    def to_dict(self) -> Dict:
        return {'a': [self.a.real, self.a.imag]}


def ln_inverse_coeff(k: int, n: int) -> complex:
    """Eigenvalue of L_N^{-1} on the mode (k, n)"""
    return 1.0 / ((2 * k + 1) * PI * 1j - (2 * n + 1) * PI)


class CrProvider(ExampleProvider):
    """Truncated Fourier discretization of u_x + i u_y with anti-periodic L_N"""

    name = 'cr'

    def __init__(self, ms: ModeSet):
        if ms.M < MIN_TRUNCATION:
            raise ValueError(f"Truncation must be at least {MIN_TRUNCATION}, got {ms.M}")
        self.modes = ms
        self.domain = ms
        self.basis = FOURIER_COEFFICIENTS

        self._lhat_diag = (2 * ms.ks + 1) * PI * 1j - (2 * ms.ns + 1) * PI
        self._mhat_diag = -(2 * ms.ks + 1) * PI * 1j - (2 * ms.ns + 1) * PI
        inverse = 1.0 / self._lhat_diag
        self.base_inverse = LinearMap(np.diag(inverse), FOURIER_COEFFICIENTS, ms)
        self.base_inverse_adjoint = LinearMap(np.diag(np.conj(inverse)), FOURIER_COEFFICIENTS, ms)

        self.kerL_basis = [ExpSum.exp(PI * 1j, -PI)]
        self.kerM_basis = [ExpSum.exp(PI * 1j, PI)]
        self.kerL_coefficients = self.represent(self.kerL_basis[0])
        self.kerM_coefficients = self.represent(self.kerM_basis[0])

        logger.debug(f"Built Cauchy-Riemann provider with {ms.size} modes")

    def lhat_symbol(self, exponent: np.ndarray) -> complex:
        return exponent[0] + 1j * exponent[1]

    def mhat_symbol(self, exponent: np.ndarray) -> complex:
        return -exponent[0] + 1j * exponent[1]

    def boundary_operator_T(self, u: ExpSum) -> np.ndarray:
        """Both anti-periodicity defects sampled on the edges, RMS-normalized"""
        samples = get_settings().boundary_samples
        s = (np.arange(samples) + 0.5) / samples
        zero, one = np.zeros(samples), np.ones(samples)
        vertical = u(zero, s) + u(one, s)
        horizontal = u(s, zero) + u(s, one)
        return np.concatenate([vertical, horizontal]) / np.sqrt(samples)

    def test_basis(self, size: int) -> List[ExpSum]:
        """Lowest-frequency anti-periodic modes"""
        span = int(np.ceil(np.sqrt(size))) + 1
        pairs = [(k, n) for k in range(-span, span) for n in range(-span, span)]
        pairs.sort(key=lambda kn: ((2 * kn[0] + 1) ** 2 + (2 * kn[1] + 1) ** 2, kn))
        return [self.modes.mode(k, n) for k, n in pairs[:size]]

    def represent(self, u: ExpSum) -> np.ndarray:
        return u.project(self.modes.exponents())

    def functional(self, w: ExpSum) -> np.ndarray:
        return np.conj(self.represent(w))

    def apply_Lhat_discrete(self, vector: np.ndarray) -> np.ndarray:
        return self._lhat_diag * np.asarray(vector, dtype=complex)

    def apply_Mhat_discrete(self, vector: np.ndarray) -> np.ndarray:
        return self._mhat_diag * np.asarray(vector, dtype=complex)

    def commutator_norm(self, inverse: LinearMap) -> float:
        return block_commutator_norm(inverse, self.modes)


def build_provider(ms: ModeSet) -> CrProvider:
    return CrProvider(ms)


def create_provider(M: int) -> CrProvider:
    """
    Factory for a Cauchy-Riemann provider

    Args:
        M: truncation (>= 4)

    Returns:
        CrProvider: provider instance
    """
    return CrProvider(ModeSet(M))


def build_K_cr(p: CrParam, ms: Optional[ModeSet] = None) -> FiniteRankPerturbation:
    """
    Rank-1 convolution perturbation K f = a e^{i pi x - pi y} <f, e^{i pi x + pi y}>

    Both factors are closed forms, so the result does not depend on ms;
    expansions in a mode set happen in assemble_inverse.
    """
    return FiniteRankPerturbation(
        (ExpSum.exp(PI * 1j, -PI),),
        (ExpSum.exp(PI * 1j, PI),),
        np.array([[p.a]]),
    )


def depends_on_z(u: ExpSum) -> bool:
    """True when every exponent row has the form (c, i c), a function of x + iy"""
    return bool(np.all(np.abs(u.exponents[:, 1] - 1j * u.exponents[:, 0]) <= 1e-15 * (1 + np.abs(u.exponents[:, 0]))))


def depends_on_conj_z(u: ExpSum) -> bool:
    """True when every exponent row has the form (c, -i c), a function of x - iy"""
    return bool(np.all(np.abs(u.exponents[:, 1] + 1j * u.exponents[:, 0]) <= 1e-15 * (1 + np.abs(u.exponents[:, 0]))))


def normality_condition_residual(p: CrParam) -> float:
    """|2 a2 + |a|^2 (e^pi - e^{-pi})|"""
    return float(abs(2 * p.a2 + (p.a1 ** 2 + p.a2 ** 2) * GAP))


def branch_solutions(a1: float) -> List[float]:
    """
    Real a2 on the normality circle for a given a1

    Args:
        a1: real part of the amplitude

    Returns:
        list: zero, one or two a2 values
    """
    discriminant = 1.0 - (a1 * GAP) ** 2
    if discriminant < -1e-12:
        return []
    if abs(discriminant) <= 1e-14:
        return [-1.0 / GAP]
    root = np.sqrt(discriminant)
    return [(-1.0 + root) / GAP, (-1.0 - root) / GAP]


def eigenfunction(k: Optional[int], n: int, family: str = SECOND_FAMILY) -> ExpSum:
    """
    Printed eigenfunction of the case-I extension

    Raises:
        ValueError: If the index set is not part of the family
    """
    if family == FIRST_FAMILY:
        if k not in (None, 0):
            raise ValueError(f"First family is indexed by n only, got k={k}")
        return ExpSum.exp(PI * 1j, 2 * n * PI * 1j)
    if family != SECOND_FAMILY:
        raise ValueError(f"Unknown eigenfunction family: {family}")
    if k is None or k == 0:
        raise ValueError("Second family needs k != 0")
    return ExpSum.exp((2 * k + 1) * PI * 1j, (2 * n + 1) * PI * 1j)


def printed_eigenvalue(k: Optional[int], n: int, family: str = SECOND_FAMILY) -> complex:
    if family == FIRST_FAMILY:
        return complex(-2 * n * PI, PI)
    return complex(-(2 * n + 1) * PI, (2 * k + 1) * PI)


def eigenbasis_check(k: Optional[int], n: int, family: str = SECOND_FAMILY) -> Tuple[complex, float]:
    """
    Apply L-hat to a printed eigenfunction

    Args:
        k: x index (second family, k != 0)
        n: y index
        family: 'first' or 'second'

    Returns:
        tuple: (printed eigenvalue, ||L u - lambda u|| / ||u||)
    """
    u = eigenfunction(k, n, family)
    lam = printed_eigenvalue(k, n, family)
    defect = u.apply_symbol(lambda row: row[0] + 1j * row[1]) - u * lam
    return lam, defect.norm() / u.norm()


def printed_lattice(bound: int) -> List[complex]:
    """Printed eigenvalues with |n|, |k| <= bound, ascending modulus"""
    values = [printed_eigenvalue(None, n, FIRST_FAMILY) for n in range(-bound, bound + 1)]
    values += [printed_eigenvalue(k, n) for k in range(-bound, bound + 1) if k != 0
               for n in range(-bound, bound + 1)]
    return sorted(values, key=lambda z: (abs(z), z.real, z.imag))


def _trace_integral(u, at_y: float, points: int) -> complex:
    """int_0^1 e^{-i pi xi} u(xi, at_y) d xi"""
    if isinstance(u, ExpSum):
        return u.trace(1, at_y).inner(ExpSum.exp(PI * 1j))
    xi = np.linspace(0.0, 1.0, points)
    return complex(scipy.integrate.trapezoid(np.exp(-1j * PI * xi) * u(xi, np.full_like(xi, at_y)), xi))


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(values) ** 2)))


def bc_membership_check(
    u: Union[ExpSum, Callable[[np.ndarray, np.ndarray], np.ndarray]],
    p: CrParam,
    samples: Optional[int] = None
) -> Tuple[float, float]:
    """
    Residuals of the two boundary conditions of D(L)

    Args:
        u: closed form (exact edge integrals) or a vectorized callable (quadrature)
        p: kernel amplitude
        samples: edge sample count (defaults to settings.boundary_samples)

    Returns:
        tuple: RMS of u(0,y)+u(1,y) and of the modified y-condition

    Raises:
        UnsupportedRepresentationError: If u has no evaluable traces
    """
    settings = get_settings()
    count = samples or settings.boundary_samples
    if not (isinstance(u, ExpSum) or callable(u)):
        raise UnsupportedRepresentationError(f"No edge traces for {type(u).__name__}")
    if isinstance(u, ExpSum) and u.dimension != 2:
        raise UnsupportedRepresentationError("Edge traces need a function on the square")

    s = (np.arange(count) + 0.5) / count
    zero, one = np.zeros(count), np.ones(count)
    first = u(zero, s) + u(one, s)

    top = _trace_integral(u, 1.0, settings.edge_quadrature_points)
    bottom = _trace_integral(u, 0.0, settings.edge_quadrature_points)
    amplitude = 1j * p.a * ((np.exp(PI) + 1) * top - (np.exp(-PI) + 1) * bottom)
    second = u(s, zero) + u(s, one) - amplitude * np.exp(1j * PI * s)

    return _rms(first), _rms(second)


def sweep_grid(center: complex = 0j) -> List[CrParam]:
    """Rectangular grid of amplitudes around center from the sweep settings"""
    settings = get_settings()
    re = np.linspace(*settings.sweep_grid_re[:2], settings.sweep_grid_re[2])
    im = np.linspace(*settings.sweep_grid_im[:2], settings.sweep_grid_im[2])
    return [CrParam(center + x + 1j * y) for x in re for y in im]


def split_coupled_block(inverse: LinearMap, ms: ModeSet) -> Optional[Tuple[LinearMap, np.ndarray]]:
    """
    Separate the k = 0 block of an assembled inverse from its diagonal rest

    The kernel factors are single x-modes, so K only couples the k = 0 modes
    and L_N^{-1} is diagonal. The split is exact up to the leak tolerance.

    Args:
        inverse: assembled L^{-1} in the mode basis of ms
        ms: truncation

    Returns:
        tuple: (k = 0 block, diagonal entries of the other modes), or None
            when entries outside the block and the diagonal do not vanish
    """
    A = inverse.matrix
    if A.shape != (ms.size, ms.size):
        return None
    block = np.flatnonzero(ms.ks == 0)
    rest = np.flatnonzero(ms.ks != 0)
    leak = A.copy()
    leak[np.ix_(block, block)] = 0
    leak[rest, rest] = 0
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if scale > 0 and float(np.max(np.abs(leak))) > 1e-13 * scale:
        return None
    return LinearMap(A[np.ix_(block, block)], inverse.basis, CoupledModes(ms.M)), np.diag(A)[rest].copy()


def block_commutator_norm(inverse: LinearMap, ms: ModeSet) -> float:
    """Commutator norm of the assembled inverse through its k = 0 block"""
    split = split_coupled_block(inverse, ms)
    if split is None:
        return commutator_norm(inverse)
    return commutator_norm(split[0])


def spectrum(p: CrParam, ms: ModeSet, count: Optional[int] = None) -> List[Tuple[complex, float]]:
    """
    Eigenvalues of the truncated L for amplitude p

    Modes with k != 0 are eigenvectors of the assembled inverse with
    residual 0; only the k = 0 block goes through the eigensolver.

    Args:
        p: kernel amplitude
        ms: truncation
        count: number of smallest-|lambda| eigenvalues (None = all)

    Returns:
        list: (lambda, relative eigen-residual of L^{-1}) by ascending |lambda|
    """
    tolerance = get_settings().eigen_residual
    inverse = assemble_inverse(build_provider(ms), build_K_cr(p))
    split = split_coupled_block(inverse, ms)
    if split is None:
        return inverse_spectrum(inverse, count, tolerance)
    block, diagonal = split
    points = inverse_spectrum(block, None, tolerance)
    points += [(1.0 / complex(d), 0.0) for d in diagonal if d != 0]
    points.sort(key=lambda point: abs(point[0]))
    return points if count is None else points[:count]


def _commutator_at(args: Tuple[CrParam, CrProvider]) -> float:
    p, provider = args
    return block_commutator_norm(assemble_inverse(provider, build_K_cr(p), check=False), provider.modes)


def commutator_sweep(
    a_grid: Sequence[CrParam],
    ms: ModeSet,
    threads: Optional[int] = None,
    progress: bool = False
) -> List[Tuple[CrParam, float]]:
    """
    Commutator norm of the assembled inverse at every amplitude

    Args:
        a_grid: amplitudes
        ms: truncation
        threads: worker count
        progress: show a tqdm progress bar

    Returns:
        list: (CrParam, commutator norm) in input order
    """
    provider = build_provider(ms)
    ok, message = get_runtime_manager().check_memory_requirement(ms.size)
    if not ok:
        logger.warning(message)
    workers = get_runtime_manager().resolve_threads(threads)
    jobs = [(p, provider) for p in a_grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = pool.map(_commutator_at, jobs)
        norms = list(tqdm(results, total=len(jobs), desc='sweep', disable=not progress))
    return list(zip(a_grid, norms))


def sweep_rows(results: Sequence[Tuple[CrParam, float]]) -> List[Dict]:
    """CSV rows with columns a1, a2, commutator_norm, condition_residual"""
    return [
        {'a1': p.a1, 'a2': p.a2, 'commutator_norm': norm,
         'condition_residual': normality_condition_residual(p)}
        for p, norm in results
    ]
