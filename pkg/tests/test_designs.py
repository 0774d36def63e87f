# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

import itertools
import json

import numpy as np

import pytest

from scipy.stats import unitary_group

from seqpt.designs import (CovarianceError, MubDesign, basis_from_json,
                           basis_to_json, covariance_action, covariance_table,
                           design_from_json, design_to_json, is_prime,
                           mub_prime, product_basis, product_design,
                           sylvester_basis, two_design_residual)

PRIMES = [2, 3, 5]


def random_hermitian(d, rng):
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return m + m.conj().T


@pytest.mark.parametrize("d", PRIMES + [4, 6])
def test_sylvester_trace_orthogonal(d):
    elements = sylvester_basis(d).elements
    gram = np.einsum("mba,nba->mn", elements.conj(), elements)
    assert np.allclose(gram, d * np.eye(d * d), atol=1e-10)


def test_sylvester_qubit_convention():
    basis = sylvester_basis(2)
    x, z = np.array([[0, 1], [1, 0]]), np.diag([1, -1])
    sigma_y = np.array([[0, -1j], [1j, 0]])
    assert np.allclose(basis[basis.flat_index(1, 0)], x)
    assert np.allclose(basis[basis.flat_index(0, 1)], z)
    assert np.allclose(basis[basis.flat_index(1, 1)], -1j * sigma_y)


@pytest.mark.parametrize("d", PRIMES + [4])
def test_sylvester_composition(d):
    basis = sylvester_basis(d)
    omega = np.exp(2j * np.pi / d)
    for k, p, k2, p2 in itertools.product(range(d), repeat=4):
        product = (basis[basis.flat_index(k, p)] @
                   basis[basis.flat_index(k2, p2)])
        expected = omega ** (p * k2) * \
            basis[basis.flat_index((k + k2) % d, (p + p2) % d)]
        assert np.allclose(product, expected, atol=1e-10)


def test_sylvester_invalid_dim():
    with pytest.raises(ValueError) as error:
        sylvester_basis(1)
    error.match("at least 2")


def test_product_basis_index():
    first, second = sylvester_basis(2), sylvester_basis(3)
    basis = product_basis(first, second)
    assert basis.label == "sylvester-2xsylvester-3"
    assert basis.dims == (2, 3)
    for n1, n2 in itertools.product(range(4), range(9)):
        n = basis.flat_index(n1, n2)
        assert n == n1 * 9 + n2
        assert basis.split_index(n) == (n1, n2)
        assert np.array_equal(basis[n], np.kron(first[n1], second[n2]))


def test_flat_index_out_of_range():
    with pytest.raises(ValueError) as error:
        sylvester_basis(3).flat_index(3, 0)
    error.match("out of range")


def test_decompose_basis_element():
    basis = sylvester_basis(3)
    coefficients = basis.decompose(2 * basis[5])
    expected = np.zeros(9)
    expected[5] = 2
    assert np.allclose(coefficients, expected)


@pytest.mark.parametrize(["n", "expected"], [
    (1, False), (2, True), (3, True), (4, False), (5, True), (9, False),
    (11, True)])
def test_is_prime(n, expected):
    assert is_prime(n) is expected


@pytest.mark.parametrize("d", PRIMES)
def test_mub_unbiased(d):
    design = mub_prime(d)
    assert len(design) == d * (d + 1)
    overlaps = np.abs(design.states.conj() @ design.states.T) ** 2
    for (a, b), value in np.ndenumerate(overlaps):
        if a == b:
            assert value == pytest.approx(1, abs=1e-10)
        elif a // d == b // d:
            assert value == pytest.approx(0, abs=1e-10)
        else:
            assert value == pytest.approx(1 / d, abs=1e-10)


@pytest.mark.parametrize("d", PRIMES)
def test_mub_mean_projector(d):
    design = mub_prime(d)
    for states in design.bases:
        mean = np.einsum("ma,mb->ab", states, states.conj()) / d
        assert np.allclose(mean, np.eye(d) / d, atol=1e-12)


@pytest.mark.parametrize("d", PRIMES)
def test_mub_two_design(d):
    rng = np.random.default_rng(d)
    design = mub_prime(d)
    for _ in range(100):
        a, b = random_hermitian(d, rng), random_hermitian(d, rng)
        assert two_design_residual(design, a, b) <= 1e-10


def test_mub_fourier_basis_first():
    d = 5
    assert np.allclose(mub_prime(d).bases[1, 0], np.ones(d) / np.sqrt(d))


@pytest.mark.parametrize("d", [3, 5])
def test_mub_basis_diagonalizes_sylvester_operator(d):
    basis = sylvester_basis(d)
    design = mub_prime(d)
    for j in range(1, d + 1):
        operator = basis[basis.flat_index(1, 2 * (j - 1) % d)]
        for state in design.bases[j]:
            image = operator @ state
            assert abs(abs(np.vdot(state, image)) - 1) < 1e-10


def test_mub_phase_convention():
    for state in mub_prime(3).states:
        first = state[np.flatnonzero(np.abs(state) > 1e-9)[0]]
        assert first.imag == pytest.approx(0, abs=1e-12)
        assert first.real > 0


@pytest.mark.parametrize("d", [1, 4, 6])
def test_mub_not_prime(d):
    with pytest.raises(ValueError) as error:
        mub_prime(d)
    error.match("should be prime")


def test_product_design_labels():
    design = product_design(mub_prime(2), mub_prime(3))
    assert len(design) == 72
    assert design.dims == (2, 3)
    for n in range(len(design)):
        label = design.label(n)
        assert design.index(*label) == n
        assert np.allclose(design.states[n], design.vector(n))
    assert np.allclose(np.linalg.norm(design.states, axis=1), 1)


def test_product_design_index_out_of_range():
    design = product_design(mub_prime(2), mub_prime(3))
    with pytest.raises(ValueError) as error:
        design.label(72)
    error.match("out of range")
    with pytest.raises(ValueError) as error:
        design.index(3, 0, 0, 0)
    error.match("out of range")


@pytest.mark.parametrize("d", PRIMES)
def test_covariance_table_exhaustive(d):
    basis = sylvester_basis(d)
    design = mub_prime(d)
    images, phases = covariance_table(d)
    assert images.shape == (d * d, d + 1, d)
    for n, j, m in itertools.product(range(d * d), range(d + 1), range(d)):
        image = basis[n].conj().T @ design.bases[j, m]
        expected = np.exp(1j * phases[n, j, m]) * \
            design.bases[j, images[n, j, m]]
        assert np.allclose(image, expected, atol=1e-10)


def test_covariance_action_forward():
    basis = sylvester_basis(3)
    design = mub_prime(3)
    action = covariance_action(basis, design, (1, 0), (0, 0))
    # X |0> = |1>
    assert action.image == 1
    assert action.phase == pytest.approx(0, abs=1e-12)
    assert not action.adjoint


def test_covariance_action_incompatible_design():
    bases = np.array(mub_prime(3).bases)
    bases[1] = unitary_group.rvs(3, random_state=11).T
    design = MubDesign(3, bases)
    with pytest.raises(CovarianceError) as error:
        covariance_action(sylvester_basis(3), design, (1, 0), (1, 0))
    error.match("does not map design state")


def test_covariance_action_dimension_mismatch():
    with pytest.raises(ValueError) as error:
        covariance_action(sylvester_basis(2), mub_prime(3), (1, 0), (0, 0))
    error.match("does not match")


def test_two_design_residual_shape_mismatch():
    with pytest.raises(ValueError) as error:
        two_design_residual(mub_prime(3), np.eye(2), np.eye(3))
    error.match("do not match")


@pytest.mark.parametrize("basis", [
    sylvester_basis(3), product_basis(sylvester_basis(2), sylvester_basis(3))],
    ids=["sylvester", "product"])
def test_basis_json(basis):
    obj = json.loads(json.dumps(basis_to_json(basis)))
    assert obj["label"] == basis.label
    loaded = basis_from_json(obj)
    assert loaded.label == basis.label
    assert loaded.dims == basis.dims
    assert np.array_equal(loaded.elements, basis.elements)


def test_basis_json_label_mismatch():
    obj = basis_to_json(sylvester_basis(2))
    obj["label"] = "sylvester-3"
    with pytest.raises(ValueError) as error:
        basis_from_json(obj)
    error.match("does not match")


def test_design_json():
    design = mub_prime(5)
    obj = json.loads(json.dumps(design_to_json(design)))
    assert obj["dim"] == 5
    assert np.array_equal(design_from_json(obj).bases, design.bases)


def test_design_json_missing_bases():
    obj = design_to_json(mub_prime(3))
    del obj["bases"]
    with pytest.raises(ValueError) as error:
        design_from_json(obj)
    error.match("not a serialized design")


def test_design_json_not_unbiased():
    obj = design_to_json(mub_prime(3))
    obj["bases"][1] = obj["bases"][0]
    with pytest.raises(ValueError) as error:
        design_from_json(obj)
    error.match("not mutually unbiased")
