import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from bosonic_effective.errors import ContractViolation, NumericalError
from bosonic_effective.fock import (
    as_hermitian,
    as_unitary,
    exp_i_hermitian,
    gentle_measurement_bound,
    ladder_matrices,
    load_matrix,
    matrix_from_json,
    matrix_to_json,
    principal_log_unitary,
    save_matrix,
    set_tolerances,
    trace_distance_pure,
    trace_distance_states,
    trace_norm,
)

from conftest import random_hermitian, random_state, random_unitary


def eig_trace_norm(m):
    return float(np.sum(np.abs(np.linalg.eigvalsh(m))))


def test_ladder_cutoff_one():
    a, *_ = ladder_matrices(1)
    assert np.array_equal(a, np.array([[0, 1], [0, 0]]))


def test_ladder_entry_sqrt2():
    a, *_ = ladder_matrices(2)
    assert a[1, 2] == pytest.approx(1.41421356, abs=1e-8)


@pytest.mark.parametrize("cutoff", range(0, 33))
def test_truncated_commutator(cutoff):
    *_, q, p = ladder_matrices(cutoff)
    comm = q @ p - p @ q
    expected = 1j * np.eye(cutoff + 1)
    expected[cutoff, cutoff] -= 1j * (cutoff + 1)
    assert np.max(np.abs(comm - expected)) < 1e-12


def test_commutator_cutoff_five_example():
    *_, q, p = ladder_matrices(5)
    proj = np.zeros((6, 6))
    proj[5, 5] = 1
    assert np.allclose(q @ p - p @ q, 1j * (np.eye(6) - 6 * proj), atol=1e-12)


@pytest.mark.parametrize("cutoff", [0, 1, 7, 64])
def test_ladder_structure(cutoff):
    a, adag, n, q, p = ladder_matrices(cutoff)
    assert np.array_equal(adag, a.conj().T)
    assert np.array_equal(n, np.diag(np.diag(n)))
    assert np.array_equal(np.real(np.diag(n)), np.arange(cutoff + 1))
    assert np.allclose(q, (a + adag) / math.sqrt(2))
    assert np.allclose(p, (a - adag) / (1j * math.sqrt(2)))


def test_exp_of_zero_and_diagonal():
    assert np.allclose(exp_i_hermitian(np.zeros((4, 4))), np.eye(4))
    assert np.allclose(exp_i_hermitian(np.diag([0, np.pi])), np.diag([1, -1]), atol=1e-15)


def taylor_exp(m, terms=60):
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


def test_exp_matches_taylor(rng):
    h = random_hermitian(rng, 4)
    u = exp_i_hermitian(h)
    assert np.max(np.abs(u @ u.conj().T - np.eye(4))) < 1e-12
    assert np.max(np.abs(u - taylor_exp(1j * h))) < 1e-9
    lam, w = np.linalg.eigh(h)
    for k in range(4):
        assert np.allclose(u @ w[:, k], np.exp(1j * lam[k]) * w[:, k], atol=1e-12)


def test_log_examples():
    assert np.allclose(principal_log_unitary(np.eye(3)), 0)
    assert np.allclose(principal_log_unitary(np.diag([1, 1j])), np.diag([0, np.pi / 2]), atol=1e-14)


def test_log_spectrum_in_principal_range(rng):
    v = random_unitary(rng, 6)
    lam = np.linalg.eigvalsh(principal_log_unitary(v))
    assert lam.min() >= -1e-12 and lam.max() < 2 * np.pi


def test_log_round_trip_many(rng):
    worst = 0.0
    for _ in range(200):
        dim = int(rng.integers(2, 10))
        v = random_unitary(rng, dim)
        worst = max(worst, np.max(np.abs(exp_i_hermitian(principal_log_unitary(v)) - v)))
    assert worst < 1e-9


def test_log_degenerate_eigenvalues(rng):
    w = random_unitary(rng, 5)
    v = w @ np.diag([1, 1, -1, -1, 1j]) @ w.conj().T
    assert np.max(np.abs(exp_i_hermitian(principal_log_unitary(v)) - v)) < 1e-10


def test_log_rejects_non_unitary():
    with pytest.raises(ContractViolation):
        principal_log_unitary(np.array([[1, 0], [0, 2]]))


def test_as_hermitian_rejects():
    with pytest.raises(ContractViolation):
        as_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ContractViolation):
        as_hermitian(np.ones((2, 3)))
    with pytest.raises(ContractViolation):
        as_unitary(np.array([[np.nan, 0], [0, 1]]))


def test_set_tolerances_round_trip():
    previous = set_tolerances(unitary=1e-3)
    try:
        as_unitary(np.diag([1.0, 1.0 + 1e-4]))
    finally:
        set_tolerances(**previous)
    with pytest.raises(ContractViolation):
        as_unitary(np.diag([1.0, 1.0 + 1e-4]))
    with pytest.raises(ContractViolation):
        set_tolerances(bogus=1.0)


def test_trace_distance_pure_trivial_cases(rng):
    phi = random_state(rng, 3)
    assert trace_distance_pure(np.eye(3), phi) == pytest.approx(0.0, abs=1e-7)
    assert trace_distance_pure(np.zeros((3, 3)), phi) == pytest.approx(1.0)


def test_trace_distance_pure_matches_eigen_oracle(rng):
    worst = 0.0
    for _ in range(500):
        dim = int(rng.integers(2, 7))
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        a /= np.linalg.norm(a, 2) * rng.uniform(1.0, 3.0)
        phi = random_state(rng, dim)
        ap = a @ phi
        oracle = eig_trace_norm(np.outer(ap, ap.conj()) - np.outer(phi, phi.conj()))
        worst = max(worst, abs(trace_distance_pure(a, phi) - oracle))
    assert worst < 1e-10


def test_trace_distance_pure_negative_radicand():
    # a non-normalised "state" breaks the lemma's hypothesis
    with pytest.raises((NumericalError, ContractViolation)):
        trace_distance_pure(np.eye(2), np.array([2.0, 0.0]))


def test_trace_distance_states_examples():
    zero = np.array([1, 0], dtype=complex)
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    assert trace_distance_states(zero, zero) == 0.0
    assert trace_distance_states(zero, np.array([0, 1])) == 1.0
    assert trace_distance_states(plus, zero) == pytest.approx(0.70710678, abs=1e-8)


def test_trace_distance_states_is_half_trace_norm(rng):
    psi, phi = random_state(rng, 5), random_state(rng, 5)
    half = 0.5 * trace_norm(np.outer(psi, psi.conj()) - np.outer(phi, phi.conj()))
    assert trace_distance_states(psi, phi) == pytest.approx(half, abs=1e-12)


def test_gentle_measurement_examples():
    assert gentle_measurement_bound(1.0) == 0.0
    assert gentle_measurement_bound(0.75) == pytest.approx(1.0)
    with pytest.raises(ContractViolation):
        gentle_measurement_bound(1.5)
    with pytest.raises(ContractViolation):
        gentle_measurement_bound(-0.1)


def test_gentle_measurement_dominates(rng):
    for _ in range(500):
        dim = 7
        psi = random_state(rng, dim)
        k = int(rng.integers(0, dim))
        proj = np.diag((np.arange(dim) <= k).astype(float))
        rho = np.outer(psi, psi.conj())
        actual = eig_trace_norm(rho - proj @ rho @ proj)
        overlap = float(np.real(np.trace(proj @ rho)))
        assert actual <= gentle_measurement_bound(overlap) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 2**31 - 1))
def test_matrix_json_round_trip(r, c, seed):
    gen = np.random.default_rng(seed)
    m = gen.normal(size=(r + 1, c + 1)) + 1j * gen.normal(size=(r + 1, c + 1))
    payload = matrix_to_json(m)
    assert payload["row_cutoff"] == r and payload["col_cutoff"] == c
    assert np.array_equal(matrix_from_json(payload), m)


def test_matrix_file_round_trip(tmp_path, rng):
    m = random_unitary(rng, 3)
    save_matrix(tmp_path / "m.json", m)
    assert np.array_equal(load_matrix(tmp_path / "m.json"), m)
    with pytest.raises(ContractViolation):
        matrix_from_json({"row_cutoff": 1, "col_cutoff": 1, "data": [[0, 0]]})


def test_exp_against_scipy(rng):
    h = random_hermitian(rng, 8)
    assert np.allclose(exp_i_hermitian(h), scipy.linalg.expm(1j * h), atol=1e-12)
