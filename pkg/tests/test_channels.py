# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

import json

import numpy as np

import pytest

from scipy.stats import unitary_group

from seqpt.algebra import partial_trace, random_pure_state
from seqpt.channels import (ChiMatrix, ChoiMatrix, KrausChannel, TARGET_PHASE,
                            apply, basis_for_dims, build_depolarizing,
                            build_phase_slab, build_random_unitary,
                            channel_from_spec, channel_to_json, chi_from_choi,
                            chi_from_kraus, chi_support, chi_to_json,
                            choi_entries_from_chi_entries, choi_from_chi,
                            choi_from_kraus, identity_channel, kraus_from_chi,
                            modified_apply)

DIMS = (2, 3)


def random_kraus_channel(d, rank, seed):
    isometry = unitary_group.rvs(d * rank, random_state=seed)[:, :d]
    return KrausChannel(d, isometry.reshape(rank, d, d))


def random_density(d, seed):
    state = random_pure_state(d, np.random.default_rng(seed))
    mixed = np.diag(np.random.default_rng(seed + 1).random(d))
    rho = 0.5 * state.projector() + 0.5 * mixed / np.trace(mixed)
    return rho


def target_channel():
    return build_phase_slab(6, TARGET_PHASE)


def test_target_survival():
    psi = np.zeros(6)
    psi[[0, 2]] = 1 / np.sqrt(2)
    survival = target_channel().survival(psi, psi)
    assert survival.shape == (1, 1)
    assert survival[0, 0] == pytest.approx(np.cos(2.71) ** 2, abs=1e-12)
    assert survival[0, 0] == pytest.approx(0.825, abs=1e-3)


def test_target_support():
    chi = chi_from_kraus(target_channel(), basis_for_dims(DIMS))
    support = chi_support(chi)
    assert len(support) == 21
    assert {i for pair in support for i in pair} == {0, 1, 2, 9, 10, 11}
    assert all(i <= j for i, j in support)


def test_identity_chi():
    chi = chi_from_kraus(identity_channel(6), basis_for_dims(DIMS))
    expected = np.zeros((36, 36))
    expected[0, 0] = 1
    assert np.allclose(chi.entries, expected, atol=1e-10)


def test_phase_slab_invalid_support():
    with pytest.raises(ValueError) as error:
        build_phase_slab(6, 1.0, (0, 6))
    error.match("not a subset")


def test_kraus_incomplete():
    with pytest.raises(ValueError) as error:
        KrausChannel(2, np.array([np.eye(2), np.eye(2)]))
    error.match("not complete")


def test_kraus_not_trace_preserving_allowed():
    channel = KrausChannel(2, np.diag([1.0, 0.0])[None],
                           trace_preserving=False)
    assert channel.completeness_residual() == pytest.approx(1.0)


def test_kraus_wrong_shape():
    with pytest.raises(ValueError) as error:
        KrausChannel(3, np.eye(2)[None])
    error.match("do not act on dimension 3")


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError) as error:
        target_channel().apply(np.eye(3))
    error.match("dimension mismatch")


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_depolarizing(p):
    rho = random_density(6, 3)
    output = build_depolarizing(6, p).apply(rho)
    assert np.allclose(output, (1 - p) * rho + p * np.eye(6) / 6, atol=1e-12)


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_depolarizing_invalid(p):
    with pytest.raises(ValueError) as error:
        build_depolarizing(6, p)
    error.match("should be a probability")


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_chi_apply_matches_kraus(seed):
    channel = random_kraus_channel(6, 3, seed)
    chi = chi_from_kraus(channel, basis_for_dims(DIMS))
    rho = random_density(6, seed)
    assert np.allclose(chi.apply(rho), channel.apply(rho), atol=1e-10)
    assert chi.is_trace_preserving()


@pytest.mark.parametrize("seed", [3, 4])
def test_apply_is_linear(seed):
    rng = np.random.default_rng(seed)
    channel = random_kraus_channel(6, 2, seed)
    chi = chi_from_kraus(channel, basis_for_dims(DIMS))
    x, y = rng.normal(size=(2, 6, 6)) + 1j * rng.normal(size=(2, 6, 6))
    alpha, beta = 0.3 - 1.2j, -0.7 + 0.4j
    for ch in (channel, chi):
        assert np.allclose(apply(ch, alpha * x + beta * y),
                           alpha * apply(ch, x) + beta * apply(ch, y),
                           atol=1e-12)


def test_chi_batch_apply():
    channel = random_kraus_channel(3, 2, 5)
    chi = chi_from_kraus(channel, basis_for_dims((3,)))
    batch = np.array([random_density(3, s) for s in range(4)])
    assert chi.apply(batch).shape == (4, 3, 3)
    assert np.allclose(chi.apply(batch), channel.apply(batch), atol=1e-10)


def test_chi_not_hermitian():
    basis = basis_for_dims((2,))
    entries = np.zeros((4, 4), dtype=complex)
    entries[0, 1] = 1
    with pytest.raises(ValueError) as error:
        ChiMatrix(basis, entries)
    error.match("not Hermitian")


def test_chi_wrong_shape():
    with pytest.raises(ValueError) as error:
        ChiMatrix(basis_for_dims((2,)), np.eye(3))
    error.match("does not match basis")


def test_chi_not_finite():
    entries = np.eye(4, dtype=complex)
    entries[1, 1] = np.nan
    with pytest.raises(ValueError) as error:
        ChiMatrix(basis_for_dims((2,)), entries)
    error.match("not finite")


def test_modified_apply_identity_indices():
    channel = target_channel()
    basis = basis_for_dims(DIMS)
    rho = random_density(6, 9)
    assert np.allclose(modified_apply(channel, basis, 0, 0, rho),
                       channel.apply(rho))
    expected = channel.apply(basis[3].conj().T @ rho @ basis[7])
    assert np.allclose(modified_apply(channel, basis, 3, 7, rho), expected)


def test_choi_of_channel():
    choi = choi_from_kraus(random_kraus_channel(6, 4, 8))
    assert choi.dim == 6
    assert np.trace(choi.entries).real == pytest.approx(1.0)
    assert choi.tp_residual() <= 1e-10
    assert choi.min_eigenvalue() >= -1e-10
    assert np.allclose(partial_trace(choi.entries, (6, 6), keep=2),
                       np.eye(6) / 6)


def test_choi_identity_is_maximally_entangled():
    choi = choi_from_kraus(identity_channel(2))
    omega = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(choi.entries, np.outer(omega, omega))


def test_choi_chi_conversions_agree():
    basis = basis_for_dims(DIMS)
    channel = build_random_unitary(6, np.random.default_rng(4))
    chi = chi_from_kraus(channel, basis)
    choi = choi_from_kraus(channel)
    assert np.allclose(choi_from_chi(chi).entries, choi.entries, atol=1e-10)
    assert np.allclose(chi_from_choi(choi, basis).entries, chi.entries,
                       atol=1e-10)
    assert np.allclose(choi_entries_from_chi_entries(chi.entries, basis),
                       choi.entries, atol=1e-10)


def test_choi_invalid_shape():
    with pytest.raises(ValueError) as error:
        ChoiMatrix(np.eye(5))
    error.match("square size")


def test_chi_from_choi_dimension_mismatch():
    with pytest.raises(ValueError) as error:
        chi_from_choi(choi_from_kraus(identity_channel(2)),
                      basis_for_dims((3,)))
    error.match("dimension mismatch")


def test_kraus_from_chi():
    channel = random_kraus_channel(6, 2, 12)
    chi = chi_from_kraus(channel, basis_for_dims(DIMS))
    recovered = kraus_from_chi(chi)
    assert len(recovered.kraus_ops) == 2
    rho = random_density(6, 13)
    assert np.allclose(recovered.apply(rho), channel.apply(rho), atol=1e-10)


def test_kraus_from_chi_not_positive():
    basis = basis_for_dims((2,))
    with pytest.raises(ValueError) as error:
        kraus_from_chi(ChiMatrix(basis, np.diag([1.0, -0.5, 0, 0])))
    error.match("not positive semidefinite")


@pytest.mark.parametrize("spec", [
    {"type": "phase_slab", "d": 6, "phase": 5.42, "support": [0, 1]},
    {"type": "depolarizing", "d": 6, "p": 0.3},
    {"type": "random_unitary", "d": 6, "seed": 7},
    {"type": "identity", "d": 6},
])
def test_channel_from_spec(spec):
    channel = channel_from_spec(json.loads(json.dumps(spec)))
    assert channel.dim == 6
    rebuilt = channel_from_spec(json.loads(json.dumps(
        channel_to_json(channel))))
    rho = random_density(6, 21)
    assert np.allclose(rebuilt.apply(rho), channel.apply(rho), atol=1e-12)


def test_channel_from_spec_random_unitary_seeded():
    spec = {"type": "random_unitary", "d": 3, "seed": 5}
    first = channel_from_spec(spec).kraus_ops
    assert np.array_equal(first, channel_from_spec(spec).kraus_ops)


@pytest.mark.parametrize(["spec", "message"], [
    ({"type": "phase_slab"}, "missing"),
    ({"type": "depolarizing", "d": 6}, "missing 'p'"),
    ({"type": "amplitude_damping", "d": 2}, "unknown channel type"),
])
def test_channel_from_spec_invalid(spec, message):
    with pytest.raises(ValueError) as error:
        channel_from_spec(spec)
    error.match(message)


def test_chi_to_json_missing_entries():
    basis = basis_for_dims((2,))
    entries = np.full((4, 4), np.nan, dtype=complex)
    entries[0, 0] = 1
    obj = json.loads(json.dumps(chi_to_json(basis, entries)))
    assert obj["basis"] == "sylvester-2"
    assert obj["entries"][0][0] == [1.0, 0.0]
    assert obj["entries"][0][1] is None


def test_basis_for_too_many_factors():
    with pytest.raises(ValueError) as error:
        basis_for_dims((2, 3, 5))
    error.match("one or two factors")
