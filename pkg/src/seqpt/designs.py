# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
Operator bases and state 2-designs.

The Sylvester basis ``E_kl = sum_m w^(ml) |m+k><m|`` (``w = exp(2 pi i / d)``,
addition modulo d) is indexed by ``n = k * d + l``. Complete sets of mutually
unbiased bases are built for prime dimensions only. Their tensor product
:class:`ProductDesign` is the sampling family used by the estimator.

Every basis state carries the same phase convention: its first nonzero
component is real and positive.
"""

import functools
import itertools
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from .algebra import PureState, TOLERANCES, from_pairs, to_pairs

__all__ = ["OperatorBasis", "MubDesign", "ProductDesign", "CovarianceAction",
           "CovarianceError", "sylvester_basis", "product_basis", "is_prime",
           "mub_prime", "product_design", "covariance_action",
           "covariance_table", "two_design_residual", "basis_to_json",
           "basis_from_json", "design_to_json", "design_from_json",
           "factor_states", "basis_companions"]

_log = logging.getLogger(__name__)


class CovarianceError(LookupError):
    """No design state is the image of a basis operator acting on a state."""


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    """
    ``dim**2`` unitary, trace-orthogonal operators stored as an array of
    shape ``(dim**2, dim, dim)``.

    ``factors`` is empty for a single-system Sylvester basis and holds the
    two factor bases for a product basis, whose flat index is
    ``n = n1 * D2**2 + n2``.
    """
    dim: int
    elements: np.ndarray
    factors: Tuple["OperatorBasis", ...] = ()

    def __post_init__(self):
        elements = _read_only(self.elements)
        if elements.shape != (self.dim ** 2, self.dim, self.dim):
            raise ValueError(
                f"a basis in dimension {self.dim} needs {self.dim ** 2} "
                f"operators of shape ({self.dim}, {self.dim}), got array of "
                f"shape {elements.shape}")
        object.__setattr__(self, "elements", elements)

    def __len__(self):
        return self.dim ** 2

    def __getitem__(self, n: int) -> np.ndarray:
        return self.elements[n]

    @property
    def label(self) -> str:
        if self.factors:
            return "x".join(f.label for f in self.factors)
        return f"sylvester-{self.dim}"

    @property
    def dims(self) -> Tuple[int, ...]:
        if self.factors:
            return tuple(f.dim for f in self.factors)
        return (self.dim,)

    def same_convention(self, other: "OperatorBasis") -> bool:
        return self.label == other.label

    def flat_index(self, *indices: int) -> int:
        """Flat index from ``(k, l)`` of a Sylvester basis or ``(n1, n2)``
        of a product basis."""
        if len(indices) != 2:
            raise ValueError(f"expected two indices, got {indices}")
        first, second = indices
        size = self.factors[1].dim ** 2 if self.factors else self.dim
        limit = self.factors[0].dim ** 2 if self.factors else self.dim
        if not (0 <= first < limit and 0 <= second < size):
            raise ValueError(f"index {indices} out of range for basis "
                             f"{self.label}")
        return first * size + second

    def split_index(self, n: int) -> Tuple[int, int]:
        if not 0 <= n < len(self):
            raise ValueError(f"index {n} out of range for basis {self.label}")
        size = self.factors[1].dim ** 2 if self.factors else self.dim
        return divmod(n, size)

    def decompose(self, operator: np.ndarray) -> np.ndarray:
        """Coefficients ``a_m = Tr(E_m^dagger A) / d``."""
        operator = np.asarray(operator, dtype=complex)
        if operator.shape != (self.dim, self.dim):
            raise ValueError(f"operator of shape {operator.shape} does not "
                             f"match basis dimension {self.dim}")
        return np.einsum("mab,ab->m", self.elements.conj(), operator) / self.dim

    def __repr__(self):
        return f"OperatorBasis({self.label})"


@functools.lru_cache(maxsize=None)
def sylvester_basis(d: int) -> OperatorBasis:
    if d < 2:
        raise ValueError(f"d should be at least 2, got {d}")
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)  # |m> -> |m+1>
    clock = np.diag(omega ** np.arange(d))
    elements = np.empty((d * d, d, d), dtype=complex)
    for k, p in itertools.product(range(d), repeat=2):
        elements[k * d + p] = (np.linalg.matrix_power(shift, k) @
                               np.linalg.matrix_power(clock, p))
    return OperatorBasis(d, elements)


def product_basis(first: OperatorBasis, second: OperatorBasis
                  ) -> OperatorBasis:
    elements = np.einsum("mab,ncd->mnacbd", first.elements, second.elements)
    d = first.dim * second.dim
    return OperatorBasis(d, elements.reshape(d * d, d, d), (first, second))


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, int(n ** 0.5) + 1))


def _fix_phase(vector: np.ndarray) -> np.ndarray:
    first = vector[np.flatnonzero(np.abs(vector) > 1e-9)[0]]
    return vector * (abs(first) / first)


@dataclass(frozen=True, eq=False)
class MubDesign:
    """
    ``dim + 1`` mutually unbiased bases stored as an array of shape
    ``(dim + 1, dim, dim)``; ``bases[j, m]`` is the state ``|psi_m^j>``.
    Basis 0 is the canonical basis.
    """
    dim: int
    bases: np.ndarray

    def __post_init__(self):
        bases = _read_only(self.bases)
        if bases.shape != (self.dim + 1, self.dim, self.dim):
            raise ValueError(f"expected bases of shape "
                             f"{(self.dim + 1, self.dim, self.dim)}, got "
                             f"{bases.shape}")
        object.__setattr__(self, "bases", bases)

    def __len__(self):
        return (self.dim + 1) * self.dim

    def state(self, j: int, m: int) -> PureState:
        return PureState(self.bases[j, m])

    @property
    def states(self) -> np.ndarray:
        """All design states as rows, ordered by ``(j, m)``."""
        return self.bases.reshape(-1, self.dim)

    def __repr__(self):
        return f"MubDesign(dim={self.dim})"


def _verify_unbiased(bases: np.ndarray):
    d = bases.shape[1]
    overlaps = np.abs(np.einsum("jma,kna->jmkn", bases.conj(), bases)) ** 2
    for j, k in itertools.product(range(d + 1), repeat=2):
        expected = np.eye(d) if j == k else np.full((d, d), 1 / d)
        if np.max(np.abs(overlaps[j, :, k, :] - expected)) > \
                TOLERANCES.hermitian:
            raise ArithmeticError(f"bases {j} and {k} in dimension {d} are "
                                  f"not mutually unbiased")


def _verify_abelian_subsets(bases: np.ndarray, basis: OperatorBasis):
    """Each basis must be the common eigenbasis of one Sylvester operator:
    ``E_01`` for the canonical basis, some ``E_1l`` for the others."""
    d = basis.dim
    candidates = [[basis.flat_index(0, 1)]] + \
        [[basis.flat_index(1, p) for p in range(d)]] * d
    for j, states in enumerate(bases):
        for n in candidates[j]:
            images = states @ basis[n].T  # rows E |psi_m>
            eigenvalues = np.einsum("ma,ma->m", states.conj(), images)
            if np.allclose(images, eigenvalues[:, None] * states,
                           atol=TOLERANCES.hermitian):
                break
        else:
            raise ArithmeticError(f"basis {j} in dimension {d} does not "
                                  f"diagonalize a Sylvester operator")


@functools.lru_cache(maxsize=None)
def mub_prime(d: int) -> MubDesign:
    """
    The complete set of ``d + 1`` mutually unbiased bases for prime ``d``.

    For ``d = 2`` bases 1 and 2 are the eigenbases of sigma_x and sigma_y,
    ``(1, +-1)/sqrt(2)`` and ``(1, +-i)/sqrt(2)``. For odd primes basis
    ``j = 1..d`` has components ``<k|psi_m^j> = w^((j-1) k^2 + m k)/sqrt(d)``,
    so that basis 1 is the Fourier basis.
    """
    if not is_prime(d):
        raise ValueError(f"d should be prime, got {d}; prime powers need "
                         f"Galois-field constructions, which are not "
                         f"supported")
    bases = np.zeros((d + 1, d, d), dtype=complex)
    bases[0] = np.eye(d)
    if d == 2:
        bases[1] = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        bases[2] = np.array([[1, 1j], [1, -1j]]) / np.sqrt(2)
    else:
        omega = np.exp(2j * np.pi / d)
        k = np.arange(d)
        for j in range(1, d + 1):
            for m in range(d):
                exponent = ((j - 1) * k * k + m * k) % d
                bases[j, m] = omega ** exponent / np.sqrt(d)
    for j, m in itertools.product(range(d + 1), range(d)):
        bases[j, m] = _fix_phase(bases[j, m])
    _verify_unbiased(bases)
    _verify_abelian_subsets(bases, sylvester_basis(d))
    _log.debug("built %d mutually unbiased bases in dimension %d", d + 1, d)
    return MubDesign(d, bases)


@dataclass(frozen=True, eq=False)
class ProductDesign:
    """
    All products ``|psi1> (x) |psi2>`` of two :class:`MubDesign` states.

    Elements are labelled ``(j1, m1, j2, m2)`` and enumerated by the flat
    index ``(j1 * D1 + m1) * (D2 + 1) * D2 + (j2 * D2 + m2)``.
    """
    first: MubDesign
    second: MubDesign

    @property
    def dims(self) -> Tuple[int, int]:
        return self.first.dim, self.second.dim

    @property
    def dim(self) -> int:
        return self.first.dim * self.second.dim

    def __len__(self):
        return len(self.first) * len(self.second)

    def index(self, j1: int, m1: int, j2: int, m2: int) -> int:
        d1, d2 = self.dims
        if not (0 <= j1 <= d1 and 0 <= m1 < d1 and
                0 <= j2 <= d2 and 0 <= m2 < d2):
            raise ValueError(f"design label {(j1, m1, j2, m2)} out of range")
        return (j1 * d1 + m1) * len(self.second) + j2 * d2 + m2

    def label(self, n: int) -> Tuple[int, int, int, int]:
        if not 0 <= n < len(self):
            raise ValueError(f"design index {n} out of range for "
                             f"{len(self)} elements")
        d1, d2 = self.dims
        first, second = divmod(n, len(self.second))
        return first // d1, first % d1, second // d2, second % d2

    def vector(self, n: int) -> np.ndarray:
        j1, m1, j2, m2 = self.label(n)
        return np.kron(self.first.bases[j1, m1], self.second.bases[j2, m2])

    def element(self, n: int) -> PureState:
        return PureState(self.vector(n))

    @functools.cached_property
    def states(self) -> np.ndarray:
        states = np.einsum("pa,qb->pqab", self.first.states,
                           self.second.states).reshape(len(self), self.dim)
        states.flags.writeable = False
        return states

    def __repr__(self):
        return f"ProductDesign(dims={self.dims})"


def product_design(first: MubDesign, second: MubDesign) -> ProductDesign:
    return ProductDesign(first, second)


@dataclass(frozen=True)
class CovarianceAction:
    """``E_n |psi_m^j> = exp(i phase) |psi_image^j>`` (``E_n^dagger`` when
    ``adjoint`` is set)."""
    operator: int
    basis_id: int
    state: int
    image: int
    phase: float
    adjoint: bool = False


def covariance_action(basis: OperatorBasis, design: MubDesign,
                      op_idx: Tuple[int, int], st_idx: Tuple[int, int],
                      adjoint: bool = False) -> CovarianceAction:
    """
    Locate the image of a design state under a basis operator by scanning
    the same basis for an overlap of unit modulus.

    :raises CovarianceError: if no image is found, which means the basis and
                             the design use incompatible conventions.
    """
    if basis.dim != design.dim or basis.factors:
        raise ValueError(f"basis {basis.label} does not match a design in "
                         f"dimension {design.dim}")
    n = basis.flat_index(*op_idx)
    j, m = st_idx
    operator = basis[n].conj().T if adjoint else basis[n]
    image = operator @ design.bases[j, m]
    overlaps = design.bases[j].conj() @ image
    candidate = int(np.argmax(np.abs(overlaps)))
    if abs(overlaps[candidate]) < 1 - TOLERANCES.covariance:
        raise CovarianceError(
            f"E_{op_idx} does not map design state {st_idx} onto basis {j}; "
            f"largest overlap {abs(overlaps[candidate]):.3e}")
    return CovarianceAction(n, j, m, candidate,
                            float(np.angle(overlaps[candidate])), adjoint)


@functools.lru_cache(maxsize=None)
def covariance_table(d: int, adjoint: bool = True
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Images and phases of every Sylvester operator on every design state of
    the prime dimension ``d``, as arrays of shape ``(d**2, d + 1, d)``.
    ``adjoint`` tabulates ``E_n^dagger``, the action the estimator needs.
    """
    basis = sylvester_basis(d)
    design = mub_prime(d)
    images = np.empty((d * d, d + 1, d), dtype=int)
    phases = np.empty((d * d, d + 1, d), dtype=float)
    for n, j, m in itertools.product(range(d * d), range(d + 1), range(d)):
        action = covariance_action(basis, design, divmod(n, d), (j, m),
                                   adjoint=adjoint)
        images[n, j, m] = action.image
        phases[n, j, m] = action.phase
    images.flags.writeable = False
    phases.flags.writeable = False
    return images, phases


def two_design_residual(design: Any, a: np.ndarray, b: np.ndarray) -> float:
    """
    ``|mean_psi Tr[P a P b] - (Tr a Tr b + Tr ab) / (d (d + 1))|`` over the
    states of ``design``; zero for a uniform state 2-design.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    d = design.dim
    if a.shape != (d, d) or b.shape != (d, d):
        raise ValueError(f"operators of shape {a.shape} and {b.shape} do not "
                         f"match design dimension {d}")
    states = design.states
    # Tr[P a P b] = <psi|a|psi><psi|b|psi>
    left = np.einsum("pa,ab,pb->p", states.conj(), a, states)
    right = np.einsum("pa,ab,pb->p", states.conj(), b, states)
    mean = np.mean(left * right)
    expected = (np.trace(a) * np.trace(b) + np.trace(a @ b)) / (d * (d + 1))
    return float(abs(mean - expected))


def basis_to_json(basis: OperatorBasis) -> Dict[str, Any]:
    obj: Dict[str, Any] = {"label": basis.label, "dim": basis.dim,
                           "elements": to_pairs(basis.elements)}
    if basis.factors:
        obj["factors"] = [basis_to_json(f) for f in basis.factors]
    return obj


def basis_from_json(obj: Dict[str, Any]) -> OperatorBasis:
    try:
        factors = tuple(basis_from_json(f) for f in obj.get("factors", ()))
        basis = OperatorBasis(int(obj["dim"]), from_pairs(obj["elements"]),
                              factors)
    except (KeyError, TypeError, AttributeError) as error:
        raise ValueError(f"not a serialized operator basis: {error!r}") \
            from error
    if basis.label != obj.get("label", basis.label):
        raise ValueError(f"basis label {obj['label']!r} does not match "
                         f"its factors {basis.label!r}")
    return basis


def design_to_json(design: MubDesign) -> Dict[str, Any]:
    return {"dim": design.dim, "bases": to_pairs(design.bases)}


def design_from_json(obj: Dict[str, Any]) -> MubDesign:
    try:
        design = MubDesign(int(obj["dim"]), from_pairs(obj["bases"]))
    except (KeyError, TypeError, AttributeError) as error:
        raise ValueError(f"not a serialized design: {error!r}") from error
    try:
        _verify_unbiased(design.bases)
    except ArithmeticError as error:
        raise ValueError(str(error)) from error
    return design


def factor_states(design: ProductDesign, n: int
                  ) -> Tuple[np.ndarray, np.ndarray]:
    j1, m1, j2, m2 = design.label(n)
    return design.first.bases[j1, m1], design.second.bases[j2, m2]


def basis_companions(design: ProductDesign, n: int
                     ) -> Tuple[List[int], List[int]]:
    """Design indices sharing the first factor state of element ``n`` with
    the second factor running over its basis, and vice versa."""
    j1, m1, j2, m2 = design.label(n)
    d1, d2 = design.dims
    second = [design.index(j1, m1, j2, m) for m in range(d2)]
    first = [design.index(j1, m, j2, m2) for m in range(d1)]
    return second, first
