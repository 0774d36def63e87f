# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""Dense complex linear algebra shared by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. Composite
indices follow ``index = k1 * D2 + k2`` throughout the package, so that
``|4> = |1> (x) |1>`` for ``D1 = 2, D2 = 3``.
"""

from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np

__all__ = ["Tolerances", "TOLERANCES", "PureState", "tensor_product",
           "partial_trace", "hermitian_eig", "psd_sqrt", "random_pure_state",
           "dagger", "projector", "is_hermitian", "to_pairs", "from_pairs"]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used by estimators, projectors and tests."""
    unit_norm: float = 1e-12
    hermitian: float = 1e-10
    reconstruction: float = 1e-9
    psd: float = 1e-10
    trace_preserving: float = 1e-8
    covariance: float = 1e-8
    probability: float = 1e-9


TOLERANCES = Tolerances()


@dataclass(frozen=True, eq=False)
class PureState:
    """A unit-norm state vector.

    Use :meth:`from_vector` to normalize arbitrary vectors. Direct
    construction checks the norm against ``TOLERANCES.unit_norm``.
    """
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size == 0:
            raise ValueError("a state needs at least one amplitude")
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > TOLERANCES.unit_norm:
            raise ValueError(f"state is not normalized: norm {norm!r}")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_vector(cls, vector) -> "PureState":
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(vector / norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def overlap(self, other: "PureState") -> complex:
        """<self|other>"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"PureState(dim={self.dim})"


def dagger(m: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(m), -1, -2)


def projector(vector) -> np.ndarray:
    vector = np.asarray(vector, dtype=complex).reshape(-1)
    return np.outer(vector, vector.conj())


def is_hermitian(m: np.ndarray, tol: float = TOLERANCES.hermitian) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and \
        bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def _check_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, ``(a (x) b)[i*rb + k, j*cb + l] = a[i,j] * b[k,l]``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(m: np.ndarray, dims: Tuple[int, int], keep: int) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    :param m: operator on a space of dimension ``D1 * D2``.
    :param dims: the factor dimensions ``(D1, D2)``.
    :param keep: 1 keeps the first factor (traces out the second), 2 keeps
                 the second factor.
    """
    m = _check_square(m)
    d1, d2 = dims
    if m.shape[0] != d1 * d2:
        raise ValueError(f"dimension mismatch: matrix of size {m.shape[0]} "
                         f"cannot be split as {d1} x {d2}")
    blocks = m.reshape(d1, d2, d1, d2)
    if keep == 1:
        return np.einsum("ikjk->ij", blocks)
    elif keep == 2:
        return np.einsum("kikj->ij", blocks)
    raise ValueError(f"keep should be 1 or 2, got {keep}")


def hermitian_eig(m: np.ndarray, tol: float = TOLERANCES.hermitian
                  ) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    The input is symmetrized before decomposing. Eigenvalues are returned in
    ascending order, eigenvectors as columns. No particular eigenvector is
    promised inside a degenerate eigenspace.
    """
    m = _check_square(m)
    asymmetry = np.max(np.abs(m - m.conj().T), initial=0.0)
    if asymmetry > tol * max(1.0, np.max(np.abs(m), initial=0.0)):
        raise ValueError(f"matrix is not Hermitian: max|M - M^dagger| = "
                         f"{asymmetry:.3e}")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def psd_sqrt(m: np.ndarray, tol: float = TOLERANCES.psd) -> np.ndarray:
    """Square root of a positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are clipped to zero.
    """
    values, vectors = hermitian_eig(m)
    if values.size and values[0] < -tol:
        raise ValueError(f"matrix is not positive semidefinite: smallest "
                         f"eigenvalue {values[0]:.3e}")
    roots = np.sqrt(np.clip(values, 0.0, None))
    root = (vectors * roots) @ vectors.conj().T
    return 0.5 * (root + root.conj().T)


def random_pure_state(dim: int, rng: np.random.Generator) -> PureState:
    """Haar-random pure state from normalized complex Gaussian components."""
    if dim < 1:
        raise ValueError(f"dim should be at least 1, got {dim}")
    vector = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return PureState.from_vector(vector)


def to_pairs(array) -> Any:
    """Nested lists of ``[re, im]`` pairs. NaN entries become ``None``."""
    array = np.asarray(array, dtype=complex)
    if array.ndim == 0:
        value = complex(array)
        if np.isnan(value.real) or np.isnan(value.imag):
            return None
        return [value.real, value.imag]
    return [to_pairs(item) for item in array]


def from_pairs(obj, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """Inverse of :func:`to_pairs`; ``None`` entries become complex NaN."""
    def convert(item) -> Any:
        if item is None:
            return complex(np.nan, np.nan)
        if len(item) == 2 and not isinstance(item[0], (list, type(None))):
            return complex(item[0], item[1])
        return [convert(sub) for sub in item]

    converted: List[Any] = [convert(item) for item in obj]
    array = np.array(converted, dtype=complex)
    if shape is not None:
        array = array.reshape(shape)
    return array
