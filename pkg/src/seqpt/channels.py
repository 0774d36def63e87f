# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
Quantum channels held as Kraus operators, chi matrices or Choi matrices.

The chi matrix of a channel in an operator basis ``{E_m}`` is defined by
``E(rho) = sum_mn chi_mn E_m rho E_n^dagger``. The Choi matrix puts the
output factor first and is normalized to unit trace::

    C = (1/d) sum_ij E(|i><j|) (x) |i><j|

so that a trace-preserving channel satisfies ``Tr_1 C = I/d``.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from scipy.stats import unitary_group

from .algebra import (TOLERANCES, dagger, from_pairs, hermitian_eig,
                      partial_trace, to_pairs)
from .designs import OperatorBasis, product_basis, sylvester_basis

__all__ = ["KrausChannel", "ChiMatrix", "ChoiMatrix", "Channel", "apply",
           "modified_apply", "chi_from_kraus", "choi_from_chi",
           "chi_from_choi", "choi_from_kraus", "kraus_from_chi",
           "build_phase_slab", "build_depolarizing", "build_random_unitary",
           "unitary_channel", "identity_channel", "chi_support",
           "channel_from_spec", "basis_for_dims", "TARGET_PHASE",
           "TARGET_SUPPORT", "PHASE_SHIFT", "channel_to_json", "chi_to_json",
           "choi_to_json", "choi_entries_from_chi_entries"]

_log = logging.getLogger(__name__)

TARGET_PHASE = 5.42
TARGET_SUPPORT = (0, 1)
# Phase offset of the look-alike process used to check discrimination.
PHASE_SHIFT = 1.0


def _check_operand(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim < 2 or x.shape[-2:] != (dim, dim):
        raise ValueError(f"dimension mismatch: channel acts on {dim}x{dim} "
                         f"matrices, got shape {x.shape}")
    return x


def _projector_batch(vectors: np.ndarray) -> np.ndarray:
    return np.einsum("pa,pb->pab", vectors, vectors.conj())


class _ChannelBase:
    dim: int

    def apply(self, x) -> np.ndarray:
        raise NotImplementedError

    def survival(self, preparations, projectors) -> np.ndarray:
        """
        ``<phi_k| E(|psi_p><psi_p|) |phi_k>`` for every preparation row
        ``psi_p`` and projector row ``phi_k``, as a real array of shape
        ``(P, K)``.
        """
        preparations = np.atleast_2d(np.asarray(preparations, dtype=complex))
        projectors = np.atleast_2d(np.asarray(projectors, dtype=complex))
        outputs = self.apply(_projector_batch(preparations))
        values = np.einsum("ka,pab,kb->pk", projectors.conj(), outputs,
                           projectors)
        return values.real


@dataclass(frozen=True, eq=False)
class KrausChannel(_ChannelBase):
    """``E(rho) = sum_i A_i rho A_i^dagger`` with ``kraus_ops`` of shape
    ``(K, dim, dim)``."""
    dim: int
    kraus_ops: np.ndarray
    trace_preserving: bool = True

    def __post_init__(self):
        ops = np.array(self.kraus_ops, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[1:] != (self.dim, self.dim) or \
                ops.shape[0] == 0:
            raise ValueError(f"Kraus operators of shape {ops.shape} do not "
                             f"act on dimension {self.dim}")
        ops.flags.writeable = False
        object.__setattr__(self, "kraus_ops", ops)
        if self.trace_preserving:
            residual = self.completeness_residual()
            if residual > TOLERANCES.hermitian:
                raise ValueError(f"Kraus operators are not complete: "
                                 f"||sum A^dagger A - I|| = {residual:.3e}")

    def completeness_residual(self) -> float:
        total = np.einsum("kba,kbc->ac", self.kraus_ops.conj(),
                          self.kraus_ops)
        return float(np.linalg.norm(total - np.eye(self.dim)))

    def apply(self, x) -> np.ndarray:
        x = _check_operand(x, self.dim)
        return np.einsum("kab,...bc,kdc->...ad", self.kraus_ops, x,
                         self.kraus_ops.conj(), optimize=True)

    def __repr__(self):
        return f"KrausChannel(dim={self.dim}, rank={len(self.kraus_ops)})"


@dataclass(frozen=True, eq=False)
class ChiMatrix(_ChannelBase):
    """Process matrix relative to ``basis``; Hermitian, shape ``(d**2, d**2)``."""
    basis: OperatorBasis
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        size = len(self.basis)
        if entries.shape != (size, size):
            raise ValueError(f"chi matrix of shape {entries.shape} does not "
                             f"match basis {self.basis.label}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("chi matrix has entries that are not finite")
        asymmetry = np.max(np.abs(entries - entries.conj().T))
        if asymmetry > TOLERANCES.hermitian:
            raise ValueError(f"chi matrix is not Hermitian: "
                             f"max|chi - chi^dagger| = {asymmetry:.3e}")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.basis.dim

    def apply(self, x) -> np.ndarray:
        x = _check_operand(x, self.dim)
        elements = self.basis.elements
        return np.einsum("mn,mab,...bc,ndc->...ad", self.entries, elements,
                         x, elements.conj(), optimize=True)

    def trace_residual(self) -> float:
        """``||sum_mn chi_mn E_n^dagger E_m - I||``"""
        elements = self.basis.elements
        total = np.einsum("mn,nba,mbc->ac", self.entries, elements.conj(),
                          elements, optimize=True)
        return float(np.linalg.norm(total - np.eye(self.dim)))

    def is_trace_preserving(self, tol: float = TOLERANCES.trace_preserving
                            ) -> bool:
        return self.trace_residual() <= tol

    def __repr__(self):
        return f"ChiMatrix(basis={self.basis.label})"


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """
    Choi matrix of shape ``(d**2, d**2)``, output factor first.

    Choi matrices of channels have unit trace; estimates awaiting projection
    need not.
    """
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        size = entries.shape[0] if entries.ndim == 2 else 0
        dim = int(round(np.sqrt(size)))
        if entries.ndim != 2 or entries.shape != (size, size) or \
                dim * dim != size or size == 0:
            raise ValueError(f"a Choi matrix must be square with a square "
                             f"size, got shape {entries.shape}")
        asymmetry = np.max(np.abs(entries - entries.conj().T))
        if asymmetry > TOLERANCES.hermitian:
            raise ValueError(f"Choi matrix is not Hermitian: "
                             f"max|C - C^dagger| = {asymmetry:.3e}")
        entries = 0.5 * (entries + entries.conj().T)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.entries.shape[0])))

    def input_marginal(self) -> np.ndarray:
        """``Tr_1 C``, equal to ``I/d`` for trace-preserving channels."""
        return partial_trace(self.entries, (self.dim, self.dim), keep=2)

    def tp_residual(self) -> float:
        return float(np.linalg.norm(self.input_marginal() -
                                    np.eye(self.dim) / self.dim))

    def min_eigenvalue(self) -> float:
        return float(hermitian_eig(self.entries)[0][0])

    def normalized(self) -> np.ndarray:
        return self.entries / np.trace(self.entries).real

    def __repr__(self):
        return f"ChoiMatrix(dim={self.dim})"


Channel = Union[KrausChannel, ChiMatrix]


def apply(ch: Channel, x) -> np.ndarray:
    return ch.apply(x)


def modified_apply(ch: Channel, basis: OperatorBasis, i: int, j: int, x
                   ) -> np.ndarray:
    """``E(E_i^dagger x E_j)``; x need not be a density matrix."""
    if basis.dim != ch.dim:
        raise ValueError(f"dimension mismatch: basis {basis.label} and "
                         f"channel in dimension {ch.dim}")
    x = _check_operand(x, ch.dim)
    return ch.apply(dagger(basis[i]) @ x @ basis[j])


def chi_from_kraus(ch: KrausChannel, basis: OperatorBasis) -> ChiMatrix:
    if basis.dim != ch.dim:
        raise ValueError(f"dimension mismatch: basis {basis.label} and "
                         f"channel in dimension {ch.dim}")
    coefficients = np.stack([basis.decompose(op) for op in ch.kraus_ops])
    entries = coefficients.T @ coefficients.conj()
    return ChiMatrix(basis, 0.5 * (entries + entries.conj().T))


def _choi_from_action(ch: _ChannelBase, dim: int) -> ChoiMatrix:
    units = np.eye(dim * dim, dtype=complex).reshape(dim, dim, dim, dim)
    outputs = ch.apply(units)  # outputs[i, j] = E(|i><j|)
    entries = outputs.transpose(2, 0, 3, 1).reshape(dim * dim, dim * dim)
    return ChoiMatrix(entries / dim)


def choi_from_chi(chi: ChiMatrix) -> ChoiMatrix:
    return _choi_from_action(chi, chi.dim)


def choi_from_kraus(ch: KrausChannel) -> ChoiMatrix:
    return _choi_from_action(ch, ch.dim)


def _vectorized_basis(basis: OperatorBasis) -> np.ndarray:
    # column m is E_m flattened row-major
    return basis.elements.reshape(len(basis), -1).T


def chi_from_choi(choi: ChoiMatrix, basis: OperatorBasis) -> ChiMatrix:
    if choi.dim != basis.dim:
        raise ValueError(f"dimension mismatch: Choi matrix in dimension "
                         f"{choi.dim} and basis {basis.label}")
    v = _vectorized_basis(basis)
    entries = v.conj().T @ choi.entries @ v / basis.dim
    return ChiMatrix(basis, 0.5 * (entries + entries.conj().T))


def choi_entries_from_chi_entries(entries: np.ndarray, basis: OperatorBasis
                                  ) -> np.ndarray:
    """``C = V chi V^dagger / d``; works for chi estimates that are not
    valid :class:`ChiMatrix` values yet."""
    v = _vectorized_basis(basis)
    choi = v @ np.asarray(entries, dtype=complex) @ v.conj().T / basis.dim
    return 0.5 * (choi + choi.conj().T)


def kraus_from_chi(chi: ChiMatrix, tol: float = TOLERANCES.psd
                   ) -> KrausChannel:
    """Canonical Kraus operators from the eigen-decomposition of chi."""
    values, vectors = hermitian_eig(chi.entries)
    if values[0] < -tol:
        raise ValueError(f"chi matrix is not positive semidefinite: "
                         f"smallest eigenvalue {values[0]:.3e}")
    keep = values > tol
    ops = np.einsum("mk,mab->kab", vectors[:, keep] * np.sqrt(values[keep]),
                    chi.basis.elements)
    return KrausChannel(chi.dim, ops,
                        trace_preserving=chi.is_trace_preserving())


def build_phase_slab(d: int, phase: float,
                     support: Sequence[int] = TARGET_SUPPORT) -> KrausChannel:
    """Diagonal unitary adding ``phase`` to the basis states in ``support``."""
    support = sorted(set(int(k) for k in support))
    if any(k < 0 or k >= d for k in support):
        raise ValueError(f"support {support} is not a subset of "
                         f"0..{d - 1}")
    diagonal = np.ones(d, dtype=complex)
    diagonal[support] = np.exp(1j * phase)
    return KrausChannel(d, np.diag(diagonal)[None])


def build_depolarizing(d: int, p: float) -> KrausChannel:
    """
    ``E(rho) = (1 - p) rho + p I/d``.

    The Sylvester twirl ``sum_kl E_kl rho E_kl^dagger = d Tr(rho) I`` gives
    Kraus operators ``sqrt(1 - p + p/d**2) I`` and ``sqrt(p)/d E_kl`` for
    ``(k, l) != (0, 0)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p should be a probability, got {p}")
    ops = sylvester_basis(d).elements * (np.sqrt(p) / d)
    ops = np.array(ops)
    ops[0] = np.sqrt(1 - p + p / d ** 2) * np.eye(d)
    return KrausChannel(d, ops)


def unitary_channel(u) -> KrausChannel:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"a unitary must be square, got shape {u.shape}")
    return KrausChannel(u.shape[0], u[None])


def identity_channel(d: int) -> KrausChannel:
    return unitary_channel(np.eye(d))


def build_random_unitary(d: int, rng: np.random.Generator) -> KrausChannel:
    return unitary_channel(unitary_group.rvs(d, random_state=rng))


def chi_support(chi: ChiMatrix, threshold: float = TOLERANCES.psd
                ) -> List[Tuple[int, int]]:
    """Upper-triangular ``(i, j)`` positions with ``|chi_ij| > threshold``.
    These are the independent entries of a Hermitian chi matrix."""
    rows, cols = np.nonzero(np.triu(np.abs(chi.entries) > threshold))
    return [(int(i), int(j)) for i, j in zip(rows, cols)]


def basis_for_dims(dims: Sequence[int]) -> OperatorBasis:
    """Sylvester basis for one factor, product of Sylvester bases for two."""
    if len(dims) == 1:
        return sylvester_basis(dims[0])
    if len(dims) == 2:
        return product_basis(sylvester_basis(dims[0]),
                             sylvester_basis(dims[1]))
    raise ValueError(f"one or two factors are supported, got {len(dims)}")


def channel_from_spec(spec: Dict[str, Any]) -> KrausChannel:
    """
    Build a channel from its JSON description::

        {"type": "phase_slab", "d": 6, "phase": 5.42, "support": [0, 1]}
        {"type": "depolarizing", "d": 6, "p": 0.3}
        {"type": "random_unitary", "d": 6, "seed": 7}
        {"type": "identity", "d": 6}
        {"type": "kraus", "d": 2, "kraus": [[[[re, im], ...], ...], ...]}
    """
    try:
        kind = spec["type"]
        d = int(spec["d"])
    except KeyError as error:
        raise ValueError(f"channel spec is missing {error}") from error
    if kind == "phase_slab":
        return build_phase_slab(d, float(spec.get("phase", TARGET_PHASE)),
                                spec.get("support", TARGET_SUPPORT))
    elif kind == "depolarizing":
        if "p" not in spec:
            raise ValueError("channel spec is missing 'p'")
        return build_depolarizing(d, float(spec["p"]))
    elif kind == "random_unitary":
        return build_random_unitary(
            d, np.random.default_rng(spec.get("seed", 0)))
    elif kind == "identity":
        return identity_channel(d)
    elif kind == "kraus":
        ops = from_pairs(spec["kraus"])
        return KrausChannel(d, ops, bool(spec.get("trace_preserving", True)))
    raise ValueError(f"unknown channel type {kind!r}")


def channel_to_json(ch: KrausChannel) -> Dict[str, Any]:
    return {"type": "kraus", "d": ch.dim, "kraus": to_pairs(ch.kraus_ops),
            "trace_preserving": ch.trace_preserving}


def chi_to_json(basis: OperatorBasis, entries) -> Dict[str, Any]:
    """chi entries as complex pairs; NaN entries (not estimated) become
    null."""
    return {"basis": basis.label, "dims": list(basis.dims),
            "entries": to_pairs(entries)}


def choi_to_json(choi: ChoiMatrix) -> Dict[str, Any]:
    return {"dim": choi.dim, "entries": to_pairs(choi.entries)}
