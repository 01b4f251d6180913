"""
Linear operators on quadrature grids and truncated Fourier bases
Dense complex linear algebra under quadrature-weighted inner products
"""

from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple, Union
import logging

import numpy as np
import scipy.linalg

from utils.errors import DimensionError, EigenConvergenceError
from utils.expsum import ExpSum

logger = logging.getLogger(__name__)

GRID_SAMPLES = 'grid-samples'
FOURIER_COEFFICIENTS = 'fourier-coefficients'
BASES = (GRID_SAMPLES, FOURIER_COEFFICIENTS)

MIN_NODES = 8


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Grid:
    """Uniform composite-trapezoid grid on [0,1] or [0,1]^2"""

    dimension: int
    n: int
    nodes: np.ndarray
    weights: np.ndarray = field(repr=False)

    @classmethod
    def uniform(cls, n: int, dimension: int = 1) -> 'Grid':
        """
        Build a uniform grid

        Args:
            n: nodes per axis (>= 8)
            dimension: 1 for the interval, 2 for the square

        Returns:
            Grid: grid with trapezoid weights

        Raises:
            ValueError: If n < 8 or the dimension is not 1 or 2
        """
        if dimension not in (1, 2):
            raise ValueError(f"Unsupported grid dimension: {dimension}")
        if n < MIN_NODES:
            raise ValueError(f"Grid needs at least {MIN_NODES} nodes per axis, got {n}")

        nodes = np.linspace(0.0, 1.0, n)
        w = np.full(n, 1.0 / (n - 1))
        w[0] = w[-1] = 0.5 / (n - 1)
        weights = w if dimension == 1 else np.outer(w, w).reshape(-1)
        return cls(dimension, n, _frozen(nodes), _frozen(weights))

    @property
    def size(self) -> int:
        return self.n ** self.dimension

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Flattened node coordinates, x varying slowest in 2-D"""
        if self.dimension == 1:
            return (self.nodes,)
        xx, yy = np.meshgrid(self.nodes, self.nodes, indexing='ij')
        return xx.reshape(-1), yy.reshape(-1)

    def sample(self, f: ExpSum) -> 'GridFunction':
        """Sample a closed-form function at the nodes"""
        return GridFunction(self, f(*self.coordinates()), closed_form=f)


@dataclass(frozen=True)
class GridFunction:
    """Samples (or coefficients) on a grid or mode set, optionally with a closed form"""

    domain: Any
    samples: np.ndarray
    closed_form: Optional[ExpSum] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex).reshape(-1)
        if samples.shape[0] != self.domain.size:
            raise DimensionError(
                f"{samples.shape[0]} samples for a domain of size {self.domain.size}"
            )
        object.__setattr__(self, 'samples', _frozen(samples))

        if self.closed_form is not None and isinstance(self.domain, Grid):
            expected = self.closed_form(*self.domain.coordinates())
            scale = max(1.0, float(np.max(np.abs(expected), initial=0.0)))
            if np.max(np.abs(expected - samples), initial=0.0) > 1e-13 * scale:
                raise ValueError("Samples disagree with the attached closed form")


@dataclass(frozen=True)
class LinearMap:
    """Dense complex matrix with its representation basis"""

    matrix: np.ndarray
    basis: str
    domain: Any

    def __post_init__(self):
        if self.basis not in BASES:
            raise ValueError(f"Unknown basis tag: {self.basis}")
        matrix = np.array(self.matrix, dtype=complex, copy=True)
        if matrix.ndim != 2:
            raise DimensionError(f"Matrix must be 2-D, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("Matrix has non-finite entries")
        object.__setattr__(self, 'matrix', _frozen(matrix))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def is_square(self) -> bool:
        return self.shape[0] == self.shape[1]

    @property
    def weights(self) -> np.ndarray:
        """Inner-product weights of the basis (ones for orthonormal coefficients)"""
        if self.basis == GRID_SAMPLES:
            return np.asarray(self.domain.weights)
        return np.ones(self.shape[0])

    def _check_compatible(self, other: 'LinearMap'):
        if other.basis != self.basis:
            raise DimensionError(f"Basis mismatch: {self.basis} vs {other.basis}")
        if self.shape[1] != other.shape[0]:
            raise DimensionError(f"Shape mismatch: {self.shape} vs {other.shape}")

    def __matmul__(self, other: 'LinearMap') -> 'LinearMap':
        self._check_compatible(other)
        return LinearMap(self.matrix @ other.matrix, self.basis, self.domain)

    def __add__(self, other: 'LinearMap') -> 'LinearMap':
        if other.basis != self.basis or other.shape != self.shape:
            raise DimensionError(f"Cannot add {self.shape} {self.basis} and {other.shape} {other.basis}")
        return LinearMap(self.matrix + other.matrix, self.basis, self.domain)

    def __sub__(self, other: 'LinearMap') -> 'LinearMap':
        return self + LinearMap(-other.matrix, other.basis, other.domain)

    def apply(self, vector) -> np.ndarray:
        if isinstance(vector, GridFunction):
            vector = vector.samples
        vector = np.asarray(vector, dtype=complex)
        if vector.shape[0] != self.shape[1]:
            raise DimensionError(f"Vector of length {vector.shape[0]} for map of shape {self.shape}")
        return self.matrix @ vector

    @classmethod
    def identity(cls, basis: str, domain: Any) -> 'LinearMap':
        return cls(np.eye(domain.size), basis, domain)


def _require_square(A: LinearMap):
    if not A.is_square:
        raise DimensionError(f"Square map required, got shape {A.shape}")


def quadrature(g: Grid, f: Union[GridFunction, np.ndarray]) -> complex:
    """
    Composite trapezoid quadrature of samples

    Args:
        g: Grid
        f: GridFunction or raw samples on g

    Returns:
        complex: sum_i w_i f(x_i)

    Raises:
        DimensionError: If the sample count does not match the grid
    """
    samples = f.samples if isinstance(f, GridFunction) else np.asarray(f, dtype=complex).reshape(-1)
    if samples.shape[0] != g.size:
        raise DimensionError(f"{samples.shape[0]} samples on a grid of size {g.size}")
    return complex(np.dot(g.weights, samples))


def weighted_norm(weights: np.ndarray, vector: np.ndarray) -> float:
    return float(np.sqrt(np.dot(weights, np.abs(vector) ** 2)))


def weighted_adjoint(A: LinearMap) -> LinearMap:
    """
    Adjoint with respect to the basis inner product

    Args:
        A: square LinearMap

    Returns:
        LinearMap: W^{-1} A^H W (grid basis) or A^H (orthonormal coefficients)
    """
    _require_square(A)
    if A.basis == FOURIER_COEFFICIENTS:
        return LinearMap(A.matrix.conj().T, A.basis, A.domain)
    w = A.weights
    return LinearMap((A.matrix.conj().T * w[None, :]) / w[:, None], A.basis, A.domain)


def operator_norm(A: LinearMap) -> float:
    """Largest singular value in the weighted L2 norm (full SVD)"""
    if A.basis == FOURIER_COEFFICIENTS:
        scaled = A.matrix
    else:
        root = np.sqrt(A.weights)
        scaled = root[:, None] * A.matrix / root[None, :]
    if scaled.size == 0:
        return 0.0
    return float(scipy.linalg.svd(scaled, compute_uv=False)[0])


def commutator_norm(A: LinearMap) -> float:
    """
    Operator norm of A A^dagger - A^dagger A

    Args:
        A: square LinearMap

    Returns:
        float: 0 for normal maps
    """
    _require_square(A)
    adj = weighted_adjoint(A)
    return operator_norm(A @ adj - adj @ A)


@dataclass(frozen=True)
class EigenPair:
    value: complex
    vector: GridFunction
    residual: float


def eigenpairs(A: LinearMap, tolerance: float = 1e-8) -> List[EigenPair]:
    """
    Full non-Hermitian eigendecomposition

    Args:
        A: square LinearMap
        tolerance: maximum relative residual ||Av - lambda v|| / ||v|| per pair

    Returns:
        list: EigenPair objects sorted by ascending |lambda|

    Raises:
        EigenConvergenceError: If LAPACK fails or a pair exceeds the tolerance
    """
    _require_square(A)
    try:
        values, vectors = scipy.linalg.eig(A.matrix, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenConvergenceError(f"Eigen-decomposition failed: {e}", index=-1) from e

    order = np.argsort(np.abs(values), kind='stable')
    w = A.weights
    scale = max(1.0, float(np.max(np.abs(values), initial=0.0)))
    pairs = []
    for rank, idx in enumerate(order):
        v = vectors[:, idx]
        lam = complex(values[idx])
        if not np.isfinite(lam):
            raise EigenConvergenceError("Non-finite eigenvalue", index=rank)
        denom = weighted_norm(w, v)
        residual = weighted_norm(w, A.matrix @ v - lam * v) / denom if denom > 0 else 0.0
        if residual > tolerance * scale:
            raise EigenConvergenceError(f"Residual {residual:.3e} exceeds {tolerance:.1e}", index=rank)
        pairs.append(EigenPair(lam, GridFunction(A.domain, v), residual))

    logger.debug(f"Computed {len(pairs)} eigenpairs, max residual "
                 f"{max((p.residual for p in pairs), default=0.0):.2e}")
    return pairs
