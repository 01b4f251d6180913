"""
Closed-form exponential sums
Functions of the form sum_p c_p * exp(alpha_p . x) on [0,1] or [0,1]^2

Every kernel function used by the model problems (1, e^{-x}, e^x,
e^{i pi x -/+ pi y}, anti-periodic modes) is an exponential sum, so
differential actions, traces and L2 inner products are exact.
"""

from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from utils.errors import DimensionError

_SMALL = 1e-12


def _unit_integral(gamma: np.ndarray) -> np.ndarray:
    """Integral of exp(gamma * t) over [0, 1], elementwise"""
    gamma = np.asarray(gamma, dtype=complex)
    out = np.ones_like(gamma)
    big = np.abs(gamma) > _SMALL
    out[big] = np.expm1(gamma[big]) / gamma[big]
    out[~big] = 1.0 + gamma[~big] / 2.0
    return out


class ExpSum:
    """Finite sum of complex exponentials in one or two variables"""

    def __init__(self, exponents, coefficients, dimension: int = None):
        """
        Initialize an exponential sum

        Args:
            exponents: (m, d) array of exponent rows (or (m,) for d = 1)
            coefficients: (m,) array of coefficients
            dimension: spatial dimension, inferred from exponents when omitted
        """
        exps = np.asarray(exponents, dtype=complex)
        coefs = np.asarray(coefficients, dtype=complex).reshape(-1)

        if exps.ndim == 1:
            exps = exps.reshape(-1, 1) if dimension in (None, 1) else exps.reshape(-1, dimension)
        if exps.size == 0:
            exps = np.zeros((0, dimension or 1), dtype=complex)
        if exps.shape[0] != coefs.shape[0]:
            raise DimensionError(
                f"{exps.shape[0]} exponent rows but {coefs.shape[0]} coefficients"
            )
        if dimension is not None and exps.shape[1] != dimension:
            raise DimensionError(f"exponent rows have length {exps.shape[1]}, expected {dimension}")
        if exps.shape[1] not in (1, 2):
            raise DimensionError(f"Only 1-D and 2-D sums are supported, got {exps.shape[1]}")

        self.exponents = exps
        self.coefficients = coefs
        self.exponents.setflags(write=False)
        self.coefficients.setflags(write=False)

    # Constructors

    @classmethod
    def exp(cls, *alpha: complex, coefficient: complex = 1.0) -> 'ExpSum':
        """Single term coefficient * exp(alpha . x)"""
        return cls([list(alpha)], [coefficient], dimension=len(alpha))

    @classmethod
    def constant(cls, value: complex, dimension: int = 1) -> 'ExpSum':
        return cls([[0.0] * dimension], [value], dimension=dimension)

    @classmethod
    def zero(cls, dimension: int = 1) -> 'ExpSum':
        return cls(np.zeros((0, dimension)), [], dimension=dimension)

    # Basic properties

    @property
    def dimension(self) -> int:
        return self.exponents.shape[1]

    @property
    def terms(self) -> int:
        return self.coefficients.shape[0]

    def __repr__(self) -> str:
        parts = [f"{c:.4g}*exp({tuple(np.round(a, 4))})" for a, c in zip(self.exponents, self.coefficients)]
        return f"ExpSum({' + '.join(parts) or '0'})"

    def __call__(self, *coords) -> np.ndarray:
        """
        Evaluate at points

        Args:
            *coords: one array per axis, broadcastable against each other

        Returns:
            numpy.ndarray: complex values
        """
        if len(coords) != self.dimension:
            raise DimensionError(f"Expected {self.dimension} coordinate arrays, got {len(coords)}")
        grids = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        phase = np.zeros(grids[0].shape + (self.terms,), dtype=complex)
        for axis, g in enumerate(grids):
            phase = phase + g[..., None] * self.exponents[:, axis]
        return np.exp(phase) @ self.coefficients

    # Algebra

    def _check_same(self, other: 'ExpSum'):
        if not isinstance(other, ExpSum):
            raise TypeError(f"Cannot combine ExpSum with {type(other).__name__}")
        if other.dimension != self.dimension:
            raise DimensionError(f"Dimension mismatch: {self.dimension} vs {other.dimension}")

    def __add__(self, other: 'ExpSum') -> 'ExpSum':
        self._check_same(other)
        return ExpSum(
            np.vstack([self.exponents, other.exponents]),
            np.concatenate([self.coefficients, other.coefficients]),
            dimension=self.dimension,
        ).simplify()

    def __neg__(self) -> 'ExpSum':
        return ExpSum(self.exponents, -self.coefficients, dimension=self.dimension)

    def __sub__(self, other: 'ExpSum') -> 'ExpSum':
        return self + (-other)

    def __mul__(self, scalar: complex) -> 'ExpSum':
        if isinstance(scalar, ExpSum):
            return self.product(scalar)
        return ExpSum(self.exponents, self.coefficients * complex(scalar), dimension=self.dimension)

    __rmul__ = __mul__

    def product(self, other: 'ExpSum') -> 'ExpSum':
        """Pointwise product (exponents add)"""
        self._check_same(other)
        exps = (self.exponents[:, None, :] + other.exponents[None, :, :]).reshape(-1, self.dimension)
        coefs = np.outer(self.coefficients, other.coefficients).reshape(-1)
        return ExpSum(exps, coefs, dimension=self.dimension).simplify()

    def simplify(self) -> 'ExpSum':
        """Merge equal exponents and drop exactly-zero coefficients"""
        merged: Dict[Tuple[complex, ...], complex] = {}
        for row, c in zip(self.exponents, self.coefficients):
            key = tuple(complex(v) for v in row)
            merged[key] = merged.get(key, 0j) + c
        keys = [k for k, c in merged.items() if c != 0]
        if not keys:
            return ExpSum.zero(self.dimension)
        return ExpSum(np.array(keys), [merged[k] for k in keys], dimension=self.dimension)

    def conj(self) -> 'ExpSum':
        return ExpSum(np.conj(self.exponents), np.conj(self.coefficients), dimension=self.dimension)

    def derivative(self, axis: int = 0, order: int = 1) -> 'ExpSum':
        return ExpSum(
            self.exponents,
            self.coefficients * self.exponents[:, axis] ** order,
            dimension=self.dimension,
        ).simplify()

    def apply_symbol(self, symbol: Callable[[np.ndarray], complex]) -> 'ExpSum':
        """
        Apply a constant-coefficient differential operator given by its symbol

        Args:
            symbol: maps an exponent row to the multiplier of that exponential

        Returns:
            ExpSum: the image, exact
        """
        factors = np.array([symbol(row) for row in self.exponents], dtype=complex)
        return ExpSum(self.exponents, self.coefficients * factors, dimension=self.dimension).simplify()

    def trace(self, axis: int, value: float) -> 'ExpSum':
        """Restrict one coordinate of a 2-D sum to a fixed value"""
        if self.dimension != 2:
            raise DimensionError("Traces are defined for 2-D sums only")
        keep = 1 - axis
        coefs = self.coefficients * np.exp(self.exponents[:, axis] * value)
        return ExpSum(self.exponents[:, [keep]], coefs, dimension=1).simplify()

    # Hilbert structure on the unit interval / square

    def inner(self, other: 'ExpSum') -> complex:
        """Exact L2 inner product <self, other> = integral of self * conj(other)"""
        self._check_same(other)
        if self.terms == 0 or other.terms == 0:
            return 0j
        gamma = self.exponents[:, None, :] + np.conj(other.exponents)[None, :, :]
        factors = np.prod(_unit_integral(gamma), axis=2)
        return complex(self.coefficients @ factors @ np.conj(other.coefficients))

    def project(self, exponents: np.ndarray) -> np.ndarray:
        """<self, exp(beta_q . x)> for every exponent row beta_q"""
        rows = np.asarray(exponents, dtype=complex).reshape(-1, self.dimension)
        if self.terms == 0:
            return np.zeros(rows.shape[0], dtype=complex)
        gamma = self.exponents[:, None, :] + np.conj(rows)[None, :, :]
        return self.coefficients @ np.prod(_unit_integral(gamma), axis=2)

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self).real, 0.0)))

    def max_abs_coefficient(self) -> float:
        simplified = self.simplify()
        return float(np.max(np.abs(simplified.coefficients))) if simplified.terms else 0.0

    def split_atoms(self) -> List[Tuple[Tuple[complex, ...], complex]]:
        """(exponent key, coefficient) pairs after merging"""
        simplified = self.simplify()
        return [
            (tuple(complex(v) for v in row), complex(c))
            for row, c in zip(simplified.exponents, simplified.coefficients)
        ]


def gram_matrix(atoms: Sequence[Tuple[complex, ...]]) -> np.ndarray:
    """
    Gram matrix of pure exponentials

    Args:
        atoms: exponent keys

    Returns:
        numpy.ndarray: G with G[i, j] = <e_j, e_i>
    """
    exps = np.array(atoms, dtype=complex)
    if exps.size == 0:
        return np.zeros((0, 0), dtype=complex)
    gamma = exps[None, :, :] + np.conj(exps)[:, None, :]
    return np.prod(_unit_integral(gamma), axis=2)


def linear_combination(functions: Iterable[ExpSum], coefficients: Iterable[complex]) -> ExpSum:
    """sum_i coefficients[i] * functions[i]"""
    functions = list(functions)
    if not functions:
        raise ValueError("Empty combination")
    total = ExpSum.zero(functions[0].dimension)
    for f, c in zip(functions, coefficients):
        total = total + f * c
    return total
