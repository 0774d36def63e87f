# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

import json
from fractions import Fraction

import numpy as np

import pytest

from scipy.stats import unitary_group

from seqpt.algebra import PureState, random_pure_state
from seqpt.channels import (KrausChannel, TARGET_PHASE, basis_for_dims,
                            build_depolarizing, build_phase_slab,
                            build_random_unitary, chi_from_kraus, chi_to_json,
                            identity_channel)
from seqpt.designs import mub_prime, sylvester_basis
from seqpt.seqpt import (ExactSource, FidelityTriple, OUTER_COMBINATION,
                         PRINTED_COMBINATION, SamplePlan, as_source,
                         chi_from_fidelities, chi_from_mean_fidelity,
                         coefficient_index, decompose_outer, design_for_dims,
                         direct_fidelity, element_recipe, fidelity_triple,
                         flat_pair, mean_fidelity_prime, reconstruct,
                         reconstruct_prime, resolve_coefficients, sample_plans)

DIMS = (2, 3)


def random_kraus_channel(d, rank, seed):
    isometry = unitary_group.rvs(d * rank, random_state=seed)[:, :d]
    return KrausChannel(d, isometry.reshape(rank, d, d))


def target_channel():
    return build_phase_slab(6, TARGET_PHASE)


def test_decompose_outer_reassembles():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        alpha = random_pure_state(6, rng).amplitudes
        beta = random_pure_state(6, rng).amplitudes
        decomposition = decompose_outer(alpha, beta)
        assert len(decomposition) == 4
        assert np.max(np.abs(decomposition.matrix() -
                             np.outer(alpha, beta.conj()))) <= 1e-12


def test_decompose_outer_near_parallel():
    rng = np.random.default_rng(2)
    for k in range(100):
        alpha = random_pure_state(6, rng).amplitudes
        other = random_pure_state(6, rng).amplitudes
        beta = np.exp(0.1j * k) * alpha + 1e-7 * other
        beta /= np.linalg.norm(beta)
        decomposition = decompose_outer(alpha, beta)
        assert np.max(np.abs(decomposition.matrix() -
                             np.outer(alpha, beta.conj()))) <= 1e-12


@pytest.mark.parametrize("theta", [0.0, 0.3, np.pi, -2.0])
def test_decompose_outer_parallel(theta):
    alpha = random_pure_state(6, np.random.default_rng(3)).amplitudes
    beta = np.exp(1j * theta) * alpha
    decomposition = decompose_outer(alpha, beta)
    assert len(decomposition) == 1
    assert decomposition.weights[0] == pytest.approx(np.exp(-1j * theta))
    assert np.allclose(decomposition.matrix(), np.outer(alpha, beta.conj()),
                       atol=1e-12)


def test_decompose_outer_orthogonal():
    alpha, beta = np.eye(6)[0], np.eye(6)[3]
    decomposition = decompose_outer(PureState(alpha), PureState(beta))
    assert np.allclose(decomposition.matrix(), np.outer(alpha, beta),
                       atol=1e-12)


def test_printed_combination_does_not_reassemble():
    rng = np.random.default_rng(4)
    alpha = random_pure_state(6, rng).amplitudes
    beta = random_pure_state(6, rng).amplitudes
    printed = decompose_outer(alpha, beta, PRINTED_COMBINATION)
    corrected = decompose_outer(alpha, beta, OUTER_COMBINATION)
    target = np.outer(alpha, beta.conj())
    assert np.max(np.abs(corrected.matrix() - target)) <= 1e-12
    assert np.max(np.abs(printed.matrix() - target)) > 1e-3


def test_decompose_outer_not_normalized():
    with pytest.raises(ValueError) as error:
        decompose_outer(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
    error.match("alpha is not normalized")


def test_decompose_outer_dimension_mismatch():
    with pytest.raises(ValueError) as error:
        decompose_outer(np.eye(2)[0], np.eye(3)[0])
    error.match("cannot be combined")


@pytest.mark.parametrize("channel", [
    target_channel(),
    build_random_unitary(6, np.random.default_rng(5)),
    build_depolarizing(6, 0.3),
], ids=["phase_slab", "random_unitary", "depolarizing"])
def test_full_reconstruction_is_exact(channel):
    estimate = reconstruct(channel, DIMS)
    expected = chi_from_kraus(channel, basis_for_dims(DIMS))
    assert estimate.estimated.all()
    assert np.max(np.abs(estimate.entries - expected.entries)) <= 1e-8
    assert np.all(estimate.stderr == 0)


def test_full_reconstruction_threaded():
    channel = random_kraus_channel(6, 2, 6)
    indices = [(0, 0, 0, 0), (1, 2, 3, 4), (3, 8, 0, 1), (2, 5, 2, 5)]
    serial = reconstruct(channel, DIMS, indices, sample_size=30, seed=3)
    threaded = reconstruct(channel, DIMS, indices, sample_size=30, seed=3,
                           threads=3)
    assert np.array_equal(serial.entries, threaded.entries,
                          equal_nan=True)


def test_full_design_exact_for_any_channel():
    channel = random_kraus_channel(6, 3, 7)
    expected = chi_from_kraus(channel, basis_for_dims(DIMS))
    indices = [(0, 0, 0, 0), (1, 0, 2, 7), (3, 3, 3, 3), (0, 4, 3, 8)]
    estimate = reconstruct(channel, DIMS, indices)
    for (i1, i2, j1, j2) in indices:
        i, j = i1 * 9 + i2, j1 * 9 + j2
        assert estimate.entries[i, j] == pytest.approx(
            expected.entries[i, j], abs=1e-8)
        assert estimate.entries[j, i] == pytest.approx(
            np.conj(expected.entries[i, j]), abs=1e-8)


def test_identity_triple():
    triple = fidelity_triple(identity_channel(6), (0, 0, 0, 0),
                             SamplePlan.full((0, 0, 0, 0), 72),
                             design_for_dims(DIMS))
    assert triple.values == pytest.approx((1, 1, 1))
    estimate = chi_from_fidelities(triple, (0, 0, 0, 0), DIMS)
    assert estimate.value == pytest.approx(1, abs=1e-12)


def test_chi_from_fidelities_constants():
    triple = FidelityTriple(0.5, 0.25 + 0.5j, 0.125)
    estimate = chi_from_fidelities(triple, (0, 1, 2, 3), DIMS)
    expected = (Fraction(12, 6) * Fraction(1, 2) -
                Fraction(3, 6) * Fraction(1, 4) -
                Fraction(4, 6) * Fraction(1, 8))
    assert estimate.value == pytest.approx(float(expected) - 0.25j)
    assert estimate.index == (0, 1, 2, 3)
    assert estimate.stderr == 0


def test_chi_from_fidelities_stderr():
    triple = FidelityTriple(0.5, 0.5, 0.5, 0.01, 0.02, 0.03)
    estimate = chi_from_fidelities(triple, (0, 0, 0, 0), DIMS, 10, 4)
    expected = np.sqrt((2 * 0.01) ** 2 + (0.5 * 0.02) ** 2 +
                       (4 / 6 * 0.03) ** 2)
    assert estimate.stderr == pytest.approx(expected)
    assert estimate.to_json() == {
        "index": [0, 0, 0, 0], "re": estimate.value.real, "im": 0.0,
        "stderr": estimate.stderr, "M": 10, "seed": 4}


@pytest.mark.parametrize(["i", "j", "n"], [
    (0, 1, 0), (1, 0, 5), (3, 20, 17), (9, 11, 40), (35, 2, 71),
    (18, 0, 0)])
def test_off_diagonal_matches_direct(i, j, n):
    channel = random_kraus_channel(6, 2, 8)
    design = design_for_dims(DIMS)
    basis = basis_for_dims(DIMS)
    index = coefficient_index(i, j, DIMS)
    plan = SamplePlan(index, (n,))
    triple = fidelity_triple(channel, index, plan, design, basis)
    expected = direct_fidelity(channel, basis, design, i, j, n)
    assert triple.f_tensor == pytest.approx(expected, abs=1e-10)


def test_diagonal_preparations_stay_in_design():
    design = design_for_dims(DIMS)
    basis = basis_for_dims(DIMS)
    states = design.states
    for i in range(len(basis)):
        for n in range(len(design)):
            recipe = element_recipe(design, basis, i, i, n)
            assert recipe.diagonal
            overlaps = np.abs(states.conj() @ recipe.preparations[0])
            assert np.max(overlaps) == pytest.approx(1, abs=1e-10)


def test_element_recipe_marginals():
    design = design_for_dims(DIMS)
    recipe = element_recipe(design, basis_for_dims(DIMS), 0, 0, 10)
    # element 10 plus the other two states of its second factor basis and
    # the other state of its first factor basis
    assert len(recipe.projectors) == 4
    assert recipe.projector_elements[0] == 10
    assert len(recipe.marginal_1) == 3
    assert len(recipe.marginal_2) == 2
    assert 0 in recipe.marginal_1 and 0 in recipe.marginal_2


def test_estimator_unbiased():
    channel = random_kraus_channel(6, 2, 9)
    design = design_for_dims(DIMS)
    basis = basis_for_dims(DIMS)
    index = (1, 2, 1, 2)
    full = chi_from_fidelities(
        fidelity_triple(channel, index, SamplePlan.full(index, 72), design,
                        basis), index, DIMS).value
    values = []
    for permutation in range(200):
        plan = SamplePlan.draw(index, 10, 72, seed=0,
                               permutation=permutation)
        values.append(chi_from_fidelities(
            fidelity_triple(channel, index, plan, design, basis), index,
            DIMS).value)
    values = np.array(values)
    stderr = np.std(values) / np.sqrt(len(values))
    assert abs(values.mean() - full) <= 4 * stderr + 1e-12


def test_sample_plan_draw_reproducible():
    first = SamplePlan.draw((0, 1, 2, 3), 10, 72, seed=5, permutation=2)
    second = SamplePlan.draw((0, 1, 2, 3), 10, 72, seed=5, permutation=2)
    other = SamplePlan.draw((0, 1, 2, 3), 10, 72, seed=5, permutation=3)
    assert first == second
    assert first.subset != other.subset
    assert first.size == 10
    assert list(first.subset) == sorted(set(first.subset))


@pytest.mark.parametrize("size", [0, 73])
def test_sample_plan_invalid_size(size):
    with pytest.raises(ValueError) as error:
        SamplePlan.draw((0, 0, 0, 0), size, 72)
    error.match("between 1 and 72")


def test_sample_plan_duplicates():
    with pytest.raises(ValueError) as error:
        SamplePlan((0, 0, 0, 0), (1, 1))
    error.match("cannot repeat")


def test_sample_plan_empty():
    with pytest.raises(ValueError) as error:
        SamplePlan((0, 0, 0, 0), ())
    error.match("at least one")


def test_sample_plans_match_reconstruct():
    channel = target_channel()
    pairs = [(0, 1), (9, 10)]
    plans = sample_plans(pairs, DIMS, 7, seed=2, permutation=1)
    estimate = reconstruct(channel, DIMS, [coefficient_index(i, j, DIMS)
                                           for i, j in pairs],
                           sample_size=7, seed=2, permutation=1)
    for plan, est in zip(plans, estimate.estimates):
        assert plan.index == est.index
        assert est.sample_size == 7


def test_flat_pair():
    assert flat_pair((1, 2, 3, 4), DIMS) == (11, 31)
    assert coefficient_index(11, 31, DIMS) == (1, 2, 3, 4)


@pytest.mark.parametrize("index", [(4, 0, 0, 0), (0, 9, 0, 0),
                                   (0, 0, -1, 0)])
def test_flat_pair_invalid(index):
    with pytest.raises(ValueError) as error:
        flat_pair(index, DIMS)
    error.match("invalid coefficient index")


def test_resolve_full():
    pairs = resolve_coefficients("full", DIMS)
    assert len(pairs) == 36 * 37 // 2
    assert pairs[0] == (0, 0)


def test_resolve_support():
    reference = chi_from_kraus(target_channel(), basis_for_dims(DIMS))
    assert len(resolve_coefficients("support", DIMS, reference)) == 21


def test_resolve_support_without_reference():
    with pytest.raises(ValueError) as error:
        resolve_coefficients("support", DIMS)
    error.match("needs a reference")


def test_resolve_explicit_list_folds_mirrors():
    pairs = resolve_coefficients([(1, 2, 3, 4), (3, 4, 1, 2)], DIMS)
    assert pairs == [(11, 31)]


@pytest.mark.parametrize(["selection", "message"], [
    ("diagonal", "unknown coefficient selection"),
    ([], "no coefficients selected"),
    ([(0, 0, 0)], "invalid coefficient index"),
])
def test_resolve_invalid(selection, message):
    with pytest.raises(ValueError) as error:
        resolve_coefficients(selection, DIMS)
    error.match(message)


def test_selective_reconstruction_marks_missing():
    channel = target_channel()
    reference = chi_from_kraus(channel, basis_for_dims(DIMS))
    estimate = reconstruct(channel, DIMS, "support", sample_size=10,
                           reference=reference)
    assert estimate.estimated.sum() == 36
    assert np.isnan(estimate.entries[3, 4])
    chi = estimate.chi()
    assert chi.entries[3, 4] == 0
    report = json.loads(json.dumps(estimate.report()))
    assert len(report["coefficients"]) == 21
    exported = json.loads(json.dumps(chi_to_json(estimate.basis,
                                                 estimate.entries)))
    assert exported["entries"][3][4] is None
    assert exported["entries"][0][0] is not None


def test_support_reconstruction_of_target_is_exact():
    channel = target_channel()
    reference = chi_from_kraus(channel, basis_for_dims(DIMS))
    estimate = reconstruct(channel, DIMS, "support", reference=reference)
    assert np.max(np.abs(estimate.chi().entries - reference.entries)) <= 1e-8


def test_reconstruct_invalid_sample_size():
    with pytest.raises(ValueError) as error:
        reconstruct(target_channel(), DIMS, [(0, 0, 0, 0)], sample_size=100)
    error.match("between 1 and 72")


def test_as_source():
    channel = identity_channel(2)
    assert isinstance(as_source(channel), ExactSource)
    with pytest.raises(TypeError) as error:
        as_source("channel")
    error.match("expected a channel")


def test_fidelity_triple_needs_dims():
    with pytest.raises(ValueError) as error:
        fidelity_triple(identity_channel(6), (0, 0, 0, 0),
                        SamplePlan((0, 0, 0, 0), (0,)))
    error.match("cannot be inferred")


def test_fidelity_triple_wrong_basis():
    with pytest.raises(ValueError) as error:
        fidelity_triple(identity_channel(6), (0, 0, 0, 0),
                        SamplePlan((0, 0, 0, 0), (0,)),
                        design_for_dims(DIMS), sylvester_basis(6))
    error.match("not the product Sylvester basis")


def random_prime_channels(d):
    rng = np.random.default_rng(d)
    channels = [build_random_unitary(d, rng) for _ in range(4)]
    channels += [random_kraus_channel(d, 3, seed) for seed in range(4)]
    channels += [build_depolarizing(d, 0.2), build_depolarizing(d, 0.7)]
    return channels


@pytest.mark.parametrize("d", [2, 3])
def test_prime_path_exact(d):
    basis = sylvester_basis(d)
    for channel in random_prime_channels(d):
        estimate = reconstruct_prime(channel)
        expected = chi_from_kraus(channel, basis)
        assert np.max(np.abs(estimate.entries - expected.entries)) <= 1e-10


def test_prime_path_single_entry():
    channel = build_random_unitary(3, np.random.default_rng(10))
    basis = sylvester_basis(3)
    expected = chi_from_kraus(channel, basis).entries[2, 7]
    f = mean_fidelity_prime(channel, basis, mub_prime(3), 2, 7)
    assert chi_from_mean_fidelity(f, 2, 7, 3) == pytest.approx(expected,
                                                               abs=1e-10)


def test_mean_fidelity_prime_dimension_mismatch():
    with pytest.raises(ValueError) as error:
        mean_fidelity_prime(identity_channel(2), sylvester_basis(3),
                            mub_prime(3), 0, 0)
    error.match("dimension mismatch")
