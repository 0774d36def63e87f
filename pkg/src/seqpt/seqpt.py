# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
Selective and efficient estimation of chi-matrix entries.

A chi entry of a channel on ``d = D1 * D2`` follows from three mean
fidelities of the modified channel ``rho -> E(E_i^dagger rho E_j)`` averaged
over the product design::

    chi_ij = F_tensor (1 + D1)(1 + D2)/d + delta_ij/d
             - F_1 (1 + D1)/d - F_2 (1 + D2)/d

Each entry can be estimated on its own, from as few design elements as the
caller is willing to sample. Coefficient indices are ``(i1, i2, j1, j2)``
with ``i1, j1`` flat Sylvester indices of the first factor and ``i2, j2`` of
the second; the product basis index is ``i = i1 * D2**2 + i2``.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from .algebra import PureState, TOLERANCES, projector
from .channels import (ChiMatrix, KrausChannel, basis_for_dims, chi_support,
                       modified_apply)
from .designs import (CovarianceError, MubDesign, OperatorBasis, ProductDesign,
                      basis_companions, covariance_table, mub_prime,
                      product_design, sylvester_basis)
from .seqpt_threaded import threaded_map

__all__ = ["FidelityTriple", "OuterDecomposition", "SamplePlan",
           "ChiEstimate", "ChiReconstruction", "SurvivalSource",
           "ExactSource", "ElementRecipe", "OUTER_COMBINATION",
           "PRINTED_COMBINATION", "decompose_outer", "element_recipe",
           "fidelity_triple", "chi_from_fidelities", "resolve_coefficients",
           "reconstruct", "mean_fidelity_prime", "chi_from_mean_fidelity",
           "reconstruct_prime", "design_for_dims", "as_source", "flat_pair",
           "coefficient_index", "direct_fidelity", "sample_plans"]

_log = logging.getLogger(__name__)

CoefficientIndex = Tuple[int, int, int, int]

_SQRT_HALF = 1 / np.sqrt(2)

# Each row (c_alpha, c_beta, w) contributes w |s><s| with
# |s> = c_alpha |alpha> + c_beta |beta>. The rows sum to |alpha><beta|.
OUTER_COMBINATION: Tuple[Tuple[complex, complex, complex], ...] = (
    (_SQRT_HALF, _SQRT_HALF, 1),
    (_SQRT_HALF, 1j * _SQRT_HALF, 1j),
    (1, 0, -(1 + 1j) / 2),
    (0, 1, -(1 + 1j) / 2),
)
# The same rows with a unit weight on the second projector. It does not
# reassemble |alpha><beta| and is kept for comparison only.
PRINTED_COMBINATION: Tuple[Tuple[complex, complex, complex], ...] = (
    (_SQRT_HALF, _SQRT_HALF, 1),
    (_SQRT_HALF, 1j * _SQRT_HALF, 1),
    (1, 0, -(1 + 1j) / 2),
    (0, 1, -(1 + 1j) / 2),
)


@dataclass(frozen=True)
class OuterDecomposition:
    """``sum_k w_k |s_k><s_k|`` with unit-norm states ``s_k``."""
    terms: Tuple[Tuple[complex, PureState], ...]

    def __len__(self):
        return len(self.terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms], dtype=complex)

    @property
    def states(self) -> np.ndarray:
        return np.array([s.amplitudes for _, s in self.terms])

    def matrix(self) -> np.ndarray:
        return np.einsum("k,ka,kb->ab", self.weights, self.states,
                         self.states.conj())


def _as_unit_vector(state: Union[PureState, np.ndarray], name: str
                    ) -> np.ndarray:
    if isinstance(state, PureState):
        return state.amplitudes
    vector = np.asarray(state, dtype=complex).reshape(-1)
    norm = np.linalg.norm(vector)
    if abs(norm - 1.0) > TOLERANCES.unit_norm * 10:
        raise ValueError(f"{name} is not normalized: norm {norm!r}")
    return vector


def decompose_outer(alpha: Union[PureState, np.ndarray],
                    beta: Union[PureState, np.ndarray],
                    combination=OUTER_COMBINATION) -> OuterDecomposition:
    """
    Write ``|alpha><beta|`` as a combination of at most five weighted
    projectors, so that a channel acting on it can be measured with
    physical preparations only.

    Parallel states ``|beta> = exp(i theta)|alpha>`` give the single term
    ``exp(-i theta) |alpha><alpha|``. Otherwise the rows of ``combination``
    are expanded; rows whose state vanishes are dropped.
    """
    a = _as_unit_vector(alpha, "alpha")
    b = _as_unit_vector(beta, "beta")
    if a.shape != b.shape:
        raise ValueError(f"states of dimension {a.size} and {b.size} cannot "
                         f"be combined")
    overlap = np.vdot(a, b)
    if np.linalg.norm(b - overlap * a) <= 1e-13:
        phase = np.conj(overlap) / abs(overlap)
        return OuterDecomposition(((complex(phase), PureState(a)),))
    terms = []
    for c_alpha, c_beta, weight in combination:
        vector = c_alpha * a + c_beta * b
        norm_squared = float(np.vdot(vector, vector).real)
        if norm_squared < 1e-16:
            continue
        terms.append((complex(weight * norm_squared),
                      PureState(vector / np.sqrt(norm_squared))))
    return OuterDecomposition(tuple(terms))


@dataclass(frozen=True)
class FidelityTriple:
    """Design-averaged fidelities of one modified channel. The values are
    complex for off-diagonal coefficients."""
    f_tensor: complex
    f_1: complex
    f_2: complex
    stderr_tensor: float = 0.0
    stderr_1: float = 0.0
    stderr_2: float = 0.0

    @property
    def values(self) -> Tuple[complex, complex, complex]:
        return self.f_tensor, self.f_1, self.f_2


@dataclass(frozen=True)
class SamplePlan:
    """Design elements sampled without replacement for one coefficient."""
    index: CoefficientIndex
    subset: Tuple[int, ...]
    seed: int = 0
    permutation: int = 0

    def __post_init__(self):
        if len(self.subset) == 0:
            raise ValueError("a sample plan needs at least one design element")
        if len(set(self.subset)) != len(self.subset):
            raise ValueError("a sample plan cannot repeat design elements")

    @property
    def size(self) -> int:
        return len(self.subset)

    @classmethod
    def draw(cls, index: CoefficientIndex, size: int, population: int,
             seed: int = 0, permutation: int = 0) -> "SamplePlan":
        """Random subset of ``size`` elements out of ``population``,
        reproducible from ``(seed, permutation, index)``."""
        if not 1 <= size <= population:
            raise ValueError(f"sample size should be between 1 and "
                             f"{population}, got {size}")
        rng = np.random.default_rng([seed, permutation, *index])
        subset = rng.choice(population, size=size, replace=False)
        return cls(index=tuple(index),  # type: ignore
                   subset=tuple(int(n) for n in np.sort(subset)),
                   seed=seed, permutation=permutation)

    @classmethod
    def full(cls, index: CoefficientIndex, population: int,
             seed: int = 0, permutation: int = 0) -> "SamplePlan":
        return cls(tuple(index), tuple(range(population)),  # type: ignore
                   seed, permutation)


@dataclass(frozen=True)
class ChiEstimate:
    index: CoefficientIndex
    value: complex
    stderr: float
    sample_size: int
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"estimate for {self.index} is not finite")
        if self.stderr < 0:
            raise ValueError(f"stderr should be non-negative, got "
                             f"{self.stderr}")

    def to_json(self) -> Dict[str, Any]:
        return {"index": list(self.index), "re": self.value.real,
                "im": self.value.imag, "stderr": self.stderr,
                "M": self.sample_size, "seed": self.seed}


class SurvivalSource(Protocol):
    def expectations(self, preparations: np.ndarray, projectors: np.ndarray
                     ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Survival probabilities of every preparation row onto every
        projector row and their variances, both of shape ``(P, K)``.
        """
        ...


class ExactSource:
    """Noiseless survival probabilities straight from a channel."""
    def __init__(self, channel: Union[KrausChannel, ChiMatrix]):
        self.channel = channel

    @property
    def dim(self) -> int:
        return self.channel.dim

    def expectations(self, preparations, projectors):
        values = self.channel.survival(preparations, projectors)
        return values, np.zeros_like(values)


def as_source(source) -> SurvivalSource:
    if isinstance(source, (KrausChannel, ChiMatrix)):
        return ExactSource(source)
    if not hasattr(source, "expectations"):
        raise TypeError(f"expected a channel or a survival source, got "
                        f"{type(source).__name__}")
    return source


def design_for_dims(dims: Sequence[int]) -> ProductDesign:
    d1, d2 = dims
    return product_design(mub_prime(d1), mub_prime(d2))


def _check_product_basis(basis: OperatorBasis, design: ProductDesign):
    if not basis.factors or basis.dims != design.dims or any(
            not f.same_convention(sylvester_basis(f.dim))
            for f in basis.factors):
        raise ValueError(f"basis {basis.label} is not the product Sylvester "
                         f"basis of a {design.dims[0]}x{design.dims[1]} "
                         f"design")


def flat_pair(index: CoefficientIndex, dims: Tuple[int, int]
              ) -> Tuple[int, int]:
    i1, i2, j1, j2 = (int(k) for k in index)
    d1, d2 = dims
    if not (0 <= i1 < d1 ** 2 and 0 <= j1 < d1 ** 2 and
            0 <= i2 < d2 ** 2 and 0 <= j2 < d2 ** 2):
        raise ValueError(f"invalid coefficient index {tuple(index)} for "
                         f"dimensions {dims}")
    return i1 * d2 ** 2 + i2, j1 * d2 ** 2 + j2


def coefficient_index(i: int, j: int, dims: Tuple[int, int]
                      ) -> CoefficientIndex:
    size = dims[1] ** 2
    i1, i2 = divmod(i, size)
    j1, j2 = divmod(j, size)
    return i1, i2, j1, j2


@dataclass(frozen=True, eq=False)
class ElementRecipe:
    """
    What to prepare and what to project on for one design element and one
    coefficient.

    ``projectors`` are distinct: row 0 is the sampled state itself,
    ``marginal_1`` lists the rows ``|psi1> (x) |phi>`` with ``phi`` running
    over the basis of ``psi2`` and ``marginal_2`` the rows
    ``|phi> (x) |psi2>``.
    """
    element: int
    weights: np.ndarray
    preparations: np.ndarray
    projectors: np.ndarray
    projector_elements: Tuple[int, ...]
    marginal_1: Tuple[int, ...]
    marginal_2: Tuple[int, ...]
    diagonal: bool = field(default=False)

    def combine(self, values: np.ndarray, variances: np.ndarray
                ) -> Tuple[np.ndarray, np.ndarray]:
        """Fidelity contributions and their variances, ordered as
        ``(tensor, marginal 1, marginal 2)``."""
        rows = ([0], list(self.marginal_1), list(self.marginal_2))
        weighted = self.weights @ values
        spread = np.abs(self.weights) ** 2 @ variances
        return (np.array([weighted[r].sum() for r in rows]),
                np.array([spread[r].sum() for r in rows]))


def element_recipe(design: ProductDesign, basis: OperatorBasis,
                   i: int, j: int, n: int) -> ElementRecipe:
    """
    Settings for coefficient ``(i, j)`` on design element ``n``.

    Diagonal coefficients prepare the design element that
    ``E_i^dagger |psi>`` equals up to a phase. Off-diagonal coefficients
    prepare the projectors of :func:`decompose_outer` applied to
    ``E_i^dagger |psi>`` and ``E_j^dagger |psi>``.
    """
    psi = design.states[n]
    second, first = basis_companions(design, n)
    elements = [n] + [c for c in second if c != n] + \
        [c for c in first if c != n]
    position = {c: k for k, c in enumerate(elements)}
    projectors = design.states[elements]
    marginal_1 = tuple(position[c] for c in second)
    marginal_2 = tuple(position[c] for c in first)
    if i == j:
        i1, i2 = basis.split_index(i)
        j1, m1, j2, m2 = design.label(n)
        images_1, _ = covariance_table(design.dims[0])
        images_2, _ = covariance_table(design.dims[1])
        image = design.index(j1, images_1[i1, j1, m1],
                             j2, images_2[i2, j2, m2])
        preparation = design.states[image]
        alpha = basis[i].conj().T @ psi
        # The covariance phase cancels in |alpha><alpha|.
        if abs(abs(np.vdot(preparation, alpha)) - 1) > TOLERANCES.covariance:
            raise CovarianceError(f"E_{i}^dagger maps design element {n} "
                                  f"outside the design")
        return ElementRecipe(n, np.ones(1, dtype=complex), preparation[None],
                             projectors, tuple(elements), marginal_1,
                             marginal_2, diagonal=True)
    alpha = basis[i].conj().T @ psi
    beta = basis[j].conj().T @ psi
    decomposition = decompose_outer(alpha, beta)
    return ElementRecipe(n, decomposition.weights, decomposition.states,
                         projectors, tuple(elements), marginal_1, marginal_2)


def _element_values(source: SurvivalSource, recipe: ElementRecipe
                    ) -> Tuple[np.ndarray, np.ndarray]:
    values, variances = source.expectations(recipe.preparations,
                                            recipe.projectors)
    return recipe.combine(np.asarray(values), np.asarray(variances))


def fidelity_triple(source, index: CoefficientIndex, plan: SamplePlan,
                    design: Optional[ProductDesign] = None,
                    basis: Optional[OperatorBasis] = None) -> FidelityTriple:
    """
    Mean fidelities of the modified channel of ``index`` over the design
    elements of ``plan``.

    ``source`` is a channel (exact) or anything with an ``expectations``
    method, such as a :class:`seqpt.simlab.MeasurementDataset`, which raises
    :class:`seqpt.simlab.MissingSettingError` for settings it lacks.
    """
    source = as_source(source)
    if design is None:
        dims = _dims_of(source)
        design = design_for_dims(dims)
    if basis is None:
        basis = basis_for_dims(design.dims)
    _check_product_basis(basis, design)
    i, j = flat_pair(index, design.dims)
    totals = np.zeros(3, dtype=complex)
    spread = np.zeros(3)
    for n in plan.subset:
        values, variances = _element_values(
            source, element_recipe(design, basis, i, j, n))
        totals += values
        spread += variances
    means = totals / plan.size
    stderr = np.sqrt(spread) / plan.size
    return FidelityTriple(complex(means[0]), complex(means[1]),
                          complex(means[2]), float(stderr[0]),
                          float(stderr[1]), float(stderr[2]))


def _dims_of(source) -> Tuple[int, int]:
    dims = getattr(source, "dims", None)
    if dims is None:
        raise ValueError("the factor dimensions cannot be inferred from "
                         "the source; pass a design")
    return tuple(dims)  # type: ignore


def chi_from_fidelities(t: FidelityTriple, index: CoefficientIndex,
                        dims: Tuple[int, int], sample_size: int = 0,
                        seed: int = 0) -> ChiEstimate:
    d1, d2 = dims
    d = d1 * d2
    i, j = flat_pair(index, dims)
    c_tensor = Fraction((1 + d1) * (1 + d2), d)
    c_delta = Fraction(1 if i == j else 0, d)
    c_1 = Fraction(1 + d1, d)
    c_2 = Fraction(1 + d2, d)
    value = (float(c_tensor) * t.f_tensor + float(c_delta) -
             float(c_1) * t.f_1 - float(c_2) * t.f_2)
    stderr = np.sqrt((float(c_tensor) * t.stderr_tensor) ** 2 +
                     (float(c_1) * t.stderr_1) ** 2 +
                     (float(c_2) * t.stderr_2) ** 2)
    return ChiEstimate(tuple(int(k) for k in index),  # type: ignore
                       complex(value), float(stderr), sample_size, seed)


@dataclass(frozen=True, eq=False)
class ChiReconstruction:
    """
    A possibly partial chi matrix. Entries that were not estimated are NaN;
    they serialize as null and are never silently read as zero.
    """
    basis: OperatorBasis
    entries: np.ndarray
    stderr: np.ndarray
    estimates: Tuple[ChiEstimate, ...]

    @property
    def estimated(self) -> np.ndarray:
        return ~np.isnan(self.entries)

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.basis.dims

    def chi(self, fill: complex = 0.0) -> ChiMatrix:
        """The estimate as a :class:`ChiMatrix`, missing entries set to
        ``fill``."""
        entries = np.where(self.estimated, self.entries, fill)
        return ChiMatrix(self.basis, entries)

    def report(self) -> Dict[str, Any]:
        return {"basis": self.basis.label, "dims": list(self.dims),
                "coefficients": [e.to_json() for e in self.estimates]}


def resolve_coefficients(selection, dims: Tuple[int, int],
                         reference: Optional[ChiMatrix] = None
                         ) -> List[Tuple[int, int]]:
    """
    Sorted, distinct product-basis positions ``(i, j)`` with ``i <= j`` for
    ``"full"``, ``"support"`` (the upper-triangular support of
    ``reference``) or a list of ``(i1, i2, j1, j2)`` indices.
    """
    size = (dims[0] * dims[1]) ** 2
    if isinstance(selection, str):
        if selection == "full":
            return [(i, j) for i in range(size) for j in range(i, size)]
        elif selection == "support":
            if reference is None:
                raise ValueError("support selection needs a reference chi "
                                 "matrix")
            if len(reference.basis) != size:
                raise ValueError(f"reference chi in basis "
                                 f"{reference.basis.label} does not match "
                                 f"dimensions {dims}")
            return chi_support(reference)
        raise ValueError(f"unknown coefficient selection {selection!r}")
    pairs = set()
    for index in selection:
        if len(index) != 4:
            raise ValueError(f"invalid coefficient index {index}")
        i, j = flat_pair(tuple(index), dims)  # type: ignore
        pairs.add((min(i, j), max(i, j)))
    if not pairs:
        raise ValueError("no coefficients selected")
    return sorted(pairs)


def sample_plans(pairs: Sequence[Tuple[int, int]], dims: Tuple[int, int],
                 sample_size: Optional[int] = None, seed: int = 0,
                 permutation: int = 0) -> List[SamplePlan]:
    """The plans :func:`reconstruct` uses for ``pairs``, so that the
    settings they need can be measured beforehand."""
    population = len(design_for_dims(dims))
    if sample_size is None:
        sample_size = population
    if not 1 <= sample_size <= population:
        raise ValueError(f"sample size should be between 1 and {population}, "
                         f"got {sample_size}")
    plans = []
    for i, j in pairs:
        index = coefficient_index(i, j, dims)
        if sample_size == population:
            plans.append(SamplePlan.full(index, population, seed,
                                         permutation))
        else:
            plans.append(SamplePlan.draw(index, sample_size, population,
                                         seed, permutation))
    return plans


def reconstruct(source, dims: Tuple[int, int], coefficients="full",
                sample_size: Optional[int] = None, seed: int = 0,
                permutation: int = 0, threads: int = 0,
                reference: Optional[ChiMatrix] = None
                ) -> ChiReconstruction:
    """
    Estimate the selected chi entries, each from its own random plan of
    ``sample_size`` design elements (all of them by default).

    Only entries with ``i <= j`` are estimated; their mirror images are
    filled in by conjugation.
    """
    dims = (int(dims[0]), int(dims[1]))
    source = as_source(source)
    design = design_for_dims(dims)
    basis = basis_for_dims(dims)
    pairs = resolve_coefficients(coefficients, dims, reference)
    plans = sample_plans(pairs, dims, sample_size, seed, permutation)
    _log.info("estimating %d chi entries from %d of %d design elements",
              len(pairs), plans[0].size, len(design))

    def estimate(plan: SamplePlan) -> ChiEstimate:
        triple = fidelity_triple(source, plan.index, plan, design, basis)
        return chi_from_fidelities(triple, plan.index, dims, plan.size, seed)

    estimates = threaded_map(estimate, plans, threads)
    size = len(basis)
    entries = np.full((size, size), np.nan, dtype=complex)
    stderr = np.full((size, size), np.nan)
    for (i, j), est in zip(pairs, estimates):
        value = est.value.real if i == j else est.value
        entries[i, j] = value
        entries[j, i] = np.conj(value)
        stderr[i, j] = stderr[j, i] = est.stderr
    _log.debug("estimated %d chi entries", len(estimates))
    return ChiReconstruction(basis, entries, stderr, tuple(estimates))


def mean_fidelity_prime(ch, basis: OperatorBasis, design: MubDesign,
                        i: int, j: int) -> complex:
    """Design average of ``<psi| E(E_i^dagger |psi><psi| E_j) |psi>`` for a
    channel on a single prime-dimensional system."""
    if not (ch.dim == basis.dim == design.dim):
        raise ValueError(f"dimension mismatch: channel {ch.dim}, basis "
                         f"{basis.dim}, design {design.dim}")
    states = design.states
    rhos = np.einsum("pa,pb->pab", states, states.conj())
    outputs = modified_apply(ch, basis, i, j, rhos)
    values = np.einsum("pa,pab,pb->p", states.conj(), outputs, states)
    return complex(values.mean())


def chi_from_mean_fidelity(f: complex, i: int, j: int, d: int) -> complex:
    return ((d + 1) * f - (1 if i == j else 0)) / d


def reconstruct_prime(ch, threads: int = 0) -> ChiMatrix:
    """Every chi entry of a channel on a prime dimension, in the Sylvester
    basis, from design-averaged modified-channel fidelities."""
    d = ch.dim
    design = mub_prime(d)
    basis = sylvester_basis(d)
    pairs = [(i, j) for i in range(d * d) for j in range(i, d * d)]

    def estimate(pair: Tuple[int, int]) -> complex:
        f = mean_fidelity_prime(ch, basis, design, *pair)
        return chi_from_mean_fidelity(f, pair[0], pair[1], d)

    entries = np.zeros((d * d, d * d), dtype=complex)
    for (i, j), value in zip(pairs, threaded_map(estimate, pairs, threads)):
        entries[i, j] = value.real if i == j else value
        entries[j, i] = np.conj(entries[i, j])
    return ChiMatrix(basis, entries)


def direct_fidelity(ch, basis: OperatorBasis, design: ProductDesign,
                    i: int, j: int, n: int) -> complex:
    """``Tr[P_psi E(E_i^dagger P_psi E_j)]`` for design element ``n``,
    evaluated without any decomposition."""
    psi = design.states[n]
    output = modified_apply(ch, basis, i, j, projector(psi))
    return complex(np.vdot(psi, output @ psi))
