# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

"""
Physicality restoration, fidelities and the baseline tomography methods used
to cross-check selective reconstructions.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Union

import numpy as np

import scipy.linalg

from .algebra import (PureState, TOLERANCES, hermitian_eig, partial_trace,
                      projector, psd_sqrt)
from .channels import ChiMatrix, ChoiMatrix, chi_from_choi, choi_from_chi
from .designs import MubDesign, OperatorBasis, ProductDesign
from .seqpt import as_source
from .simlab import Setting

__all__ = ["ProjectionReport", "cptp_project", "state_fidelity",
           "process_fidelity", "choi_fidelity", "standard_qpt",
           "standard_qpt_inputs", "standard_qpt_settings", "qst_ls"]

_log = logging.getLogger(__name__)

Design = Union[MubDesign, ProductDesign]


@dataclass(frozen=True, eq=False)
class ProjectionReport:
    input: ChoiMatrix
    output: ChoiMatrix
    iterations: int
    tp_residual: float
    min_eigenvalue: float
    converged: bool

    def to_json(self) -> Dict[str, Any]:
        return {"iterations": self.iterations,
                "tp_residual": self.tp_residual,
                "min_eigenvalue": self.min_eigenvalue,
                "converged": self.converged}


def cptp_project(choi: Union[ChoiMatrix, np.ndarray],
                 tol: float = TOLERANCES.trace_preserving,
                 max_iter: int = 10_000) -> ProjectionReport:
    """
    Project a Choi matrix onto the completely positive, trace-preserving
    set under the Frobenius norm using Dykstra's alternating projections.

    The trace-preserving step is ``C -> C - I (x) (Tr_1 C - I/d) / d``; the
    positive step clips negative eigenvalues. Iteration stops once the
    trace-preserving residual and the relative change are both below
    ``tol``. Running out of iterations is reported, not raised.
    """
    if not isinstance(choi, ChoiMatrix):
        choi = ChoiMatrix(choi)
    d = choi.dim
    identity = np.eye(d)

    def marginal(x: np.ndarray) -> np.ndarray:
        return partial_trace(x, (d, d), keep=2)

    def project_tp(y: np.ndarray) -> np.ndarray:
        return y - np.kron(identity, marginal(y) - identity / d) / d

    def project_cp(y: np.ndarray) -> np.ndarray:
        values, vectors = np.linalg.eigh(0.5 * (y + y.conj().T))
        z = (vectors * np.clip(values, 0.0, None)) @ vectors.conj().T
        return 0.5 * (z + z.conj().T)

    x = np.array(choi.entries)
    r = np.zeros_like(x)
    s = np.zeros_like(x)
    converged = False
    tp_residual = np.inf
    iteration = 0
    for iteration in range(1, max_iter + 1):
        previous = x
        y = project_tp(x + r)
        r = x + r - y
        x = project_cp(y + s)
        s = y + s - x
        tp_residual = float(np.linalg.norm(marginal(x) - identity / d))
        change = float(np.linalg.norm(x - previous) /
                       max(1.0, np.linalg.norm(previous)))
        if tp_residual <= tol and change <= tol:
            converged = True
            break
    min_eigenvalue = float(np.linalg.eigvalsh(x)[0])
    if not converged:
        _log.warning("CPTP projection did not converge in %d iterations: "
                     "TP residual %.3e", max_iter, tp_residual)
    else:
        _log.debug("CPTP projection converged in %d iterations", iteration)
    return ProjectionReport(choi, ChoiMatrix(x), iteration, tp_residual,
                            min_eigenvalue, converged)


def _as_density(rho: np.ndarray, name: str) -> np.ndarray:
    values, vectors = hermitian_eig(np.asarray(rho, dtype=complex))
    if values[0] < -TOLERANCES.trace_preserving:
        raise ValueError(f"{name} is not positive semidefinite: smallest "
                         f"eigenvalue {values[0]:.3e}")
    clipped = np.clip(values, 0.0, None)
    trace = clipped.sum()
    if trace <= 0:
        raise ValueError(f"{name} has no positive trace")
    if values[0] < 0 or abs(trace - 1) > TOLERANCES.unit_norm:
        _log.debug("clipped and renormalized %s: smallest eigenvalue "
                   "%.3e, trace %.12f", name, values[0], trace)
    clipped /= trace
    return (vectors * clipped) @ vectors.conj().T


def state_fidelity(r1: np.ndarray, r2: np.ndarray) -> float:
    """``Tr sqrt(sqrt(r1) r2 sqrt(r1))``, which is ``|<psi|phi>|`` for pure
    states."""
    r1 = np.asarray(r1, dtype=complex)
    r2 = np.asarray(r2, dtype=complex)
    if r1.shape != r2.shape:
        raise ValueError(f"density matrices of shape {r1.shape} and "
                         f"{r2.shape} cannot be compared")
    root_1 = psd_sqrt(_as_density(r1, "first state"))
    root_2 = psd_sqrt(_as_density(r2, "second state"))
    return float(np.sum(np.linalg.svd(root_1 @ root_2, compute_uv=False)))


def choi_fidelity(a: ChoiMatrix, b: ChoiMatrix) -> float:
    return state_fidelity(a.normalized(), b.normalized())


def process_fidelity(chi_a: ChiMatrix, chi_b: ChiMatrix) -> float:
    """State fidelity of the normalized Choi matrices of two channels."""
    if not chi_a.basis.same_convention(chi_b.basis):
        raise ValueError(f"basis mismatch: {chi_a.basis.label} and "
                         f"{chi_b.basis.label}")
    return choi_fidelity(choi_from_chi(chi_a), choi_from_chi(chi_b))


def qst_ls(probabilities, projectors) -> np.ndarray:
    """
    Least-squares density matrix from projector expectations, made
    positive semidefinite by clipping eigenvalues and renormalized to unit
    trace.

    :param probabilities: ``<phi_k| rho |phi_k>`` for every projector row.
    :param projectors: state vectors ``phi_k`` as rows.
    """
    projectors = np.atleast_2d(np.asarray(projectors, dtype=complex))
    probabilities = np.asarray(probabilities, dtype=float).reshape(-1)
    k, d = projectors.shape
    if probabilities.size != k:
        raise ValueError(f"{probabilities.size} probabilities for {k} "
                         f"projectors")
    design_matrix = np.einsum("ka,kb->kab", projectors.conj(),
                              projectors).reshape(k, d * d)
    solution, _, rank, _ = scipy.linalg.lstsq(design_matrix,
                                              probabilities.astype(complex))
    if rank < d * d:
        raise ValueError(f"{k} projectors determine only {rank} of {d * d} "
                         f"density matrix parameters")
    rho = solution.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    values, vectors = np.linalg.eigh(rho)
    values = np.clip(values, 0.0, None)
    if values.sum() <= 0:
        raise ValueError("least-squares estimate has no positive part")
    values /= values.sum()
    return (vectors * values) @ vectors.conj().T


def standard_qpt_inputs(d: int) -> np.ndarray:
    """The ``d**2`` input states ``|j>``, ``(|j> + |k>)/sqrt(2)`` and
    ``(|j> + i|k>)/sqrt(2)`` for ``j < k``, as rows."""
    inputs: List[np.ndarray] = list(np.eye(d, dtype=complex))
    for phase in (1, 1j):
        for j in range(d):
            for k in range(j + 1, d):
                vector = np.zeros(d, dtype=complex)
                vector[j] = 1
                vector[k] = phase
                inputs.append(vector / np.sqrt(2))
    return np.array(inputs)


def standard_qpt_settings(design: Design) -> List[Setting]:
    inputs = standard_qpt_inputs(design.dim)
    return [Setting(PureState(state), PureState(proj), "sqpt", (s, k))
            for s, state in enumerate(inputs)
            for k, proj in enumerate(design.states)]


def standard_qpt(source, design: Design, basis: OperatorBasis) -> ChiMatrix:
    """
    Standard process tomography: each of the ``d**2`` spanning inputs is
    measured on every design projector, its output reconstructed with
    :func:`qst_ls`, and the linear map solved by least squares.
    """
    d = design.dim
    if d > 8:
        raise ValueError(f"standard QPT is limited to d <= 8, got {d}")
    if basis.dim != d:
        raise ValueError(f"basis {basis.label} does not match dimension {d}")
    source = as_source(source)
    inputs = standard_qpt_inputs(d)
    projectors = design.states
    outputs = []
    for state in inputs:
        values, _ = source.expectations(state[None], projectors)
        outputs.append(qst_ls(values[0], projectors))
    inputs_vec = np.array([projector(s).reshape(-1) for s in inputs])
    outputs_vec = np.array([rho.reshape(-1) for rho in outputs])
    solution, _, rank, _ = scipy.linalg.lstsq(inputs_vec, outputs_vec)
    if rank < d * d:
        raise ValueError(f"the inputs span only {rank} of {d * d} "
                         f"dimensions")
    superoperator = solution.T  # vec(E(rho)) = S vec(rho)
    choi = superoperator.reshape(d, d, d, d).transpose(0, 2, 1, 3)
    choi = choi.reshape(d * d, d * d) / d
    return chi_from_choi(ChoiMatrix(0.5 * (choi + choi.conj().T)), basis)
