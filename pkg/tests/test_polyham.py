import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosonic_effective.errors import ContractViolation
from bosonic_effective.fock import exp_i_hermitian, ladder_matrices, trace_distance_states
from bosonic_effective.polyham import (
    LadderFactor,
    PolyHamiltonian,
    QPPolynomial,
    Term,
    block_residuals,
    eval_matrix,
    expand_qp,
    number_operator,
    prepare_state,
    prepare_state_details,
    qp_matrix,
    synth_hermitian,
    synth_multimode,
    synth_operator,
    synth_rank_one,
    truncation_cutoff,
)
from bosonic_effective.polynomials import RealPolynomial, lagrange_indicator

from conftest import random_hermitian, random_state


def single(term, N):
    return PolyHamiltonian(1, [term], (N,))


def test_rank_one_diagonal_is_indicator():
    term = synth_rank_one(2, 2, 4)
    f = term.factors[0]
    assert (f.dag, f.ann) == (0, 0)
    assert f.poly == lagrange_indicator(2, 4)
    assert term.coeff == 1.0


def test_rank_one_01_example():
    m = eval_matrix(single(synth_rank_one(0, 1, 1), 1), 3)
    expected = np.zeros((4, 4))
    expected[0, 1] = 1.0
    assert np.allclose(m[:2, :2], expected[:2, :2])
    assert np.max(np.abs(m[:2, 2:])) == 0 and np.max(np.abs(m[2:, :2])) == 0
    # (1 - n) a at cutoff 5: entries (i, i+1) = (1 - i) sqrt(i + 1)
    m5 = eval_matrix(single(synth_rank_one(0, 1, 1), 1), 5)
    assert np.count_nonzero(m5[0]) == 1 and m5[0, 1] == 1
    for i in range(2, 5):
        assert m5[i, i + 1] == pytest.approx((1 - i) * math.sqrt(i + 1))


def test_rank_one_20_example():
    term = synth_rank_one(2, 0, 2)
    f = term.factors[0]
    assert (f.dag, f.ann) == (2, 0)
    assert term.coeff == pytest.approx(math.sqrt(1 / 2))
    assert eval_matrix(single(term, 2), 6)[2, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_rank_one_units_against_ladder_products(N):
    # independent oracle: a^dag^r P(n) a^s from truncated matrices at a large cutoff
    big = 4 * N + 10
    a, adag, n, *_ = ladder_matrices(big)
    for i, j in itertools.product(range(N + 1), repeat=2):
        term = synth_rank_one(i, j, N)
        f = term.factors[0]
        pn = np.diag([float(f.poly(k)) for k in range(big + 1)])
        ref = term.coeff * np.linalg.matrix_power(adag, f.dag) @ pn @ np.linalg.matrix_power(a, f.ann)
        got = eval_matrix(single(term, N), big)
        lim = big - 3 * N
        assert np.allclose(got[:lim, :lim], ref[:lim, :lim], rtol=1e-9, atol=1e-9)
        unit = np.zeros((N + 1, N + 1))
        unit[i, j] = 1
        assert np.allclose(got[: N + 1, : N + 1], unit, atol=1e-12)


def test_synth_zero_and_number():
    assert synth_hermitian(np.zeros((3, 3))).terms == []
    p = synth_hermitian(np.diag([0.0, 1.0, 2.0]))
    m = eval_matrix(p, 8)
    # the Lagrange fit of (0, 1, 2) is X itself, so P acts as n everywhere
    assert np.allclose(m, np.diag(np.arange(9.0)), atol=1e-12)
    assert np.allclose(eval_matrix(number_operator(), 3), np.diag([0, 1, 2, 3]))
    assert eval_matrix(PolyHamiltonian(1, [], (2,)), 4).any() == False


def test_synth_rejects_non_hermitian():
    with pytest.raises(ContractViolation):
        synth_hermitian(np.array([[0, 1], [0, 0]]))


def test_random_4x4_block_structure(rng):
    h = random_hermitian(rng, 4)
    p = synth_hermitian(h)
    block, cross = block_residuals(eval_matrix(p, 12), h, (12,), (3,))
    assert block < 1e-10 and cross < 1e-12


@pytest.mark.parametrize("N", range(1, 9))
def test_block_diagonal_and_degree(rng, N):
    for _ in range(5):
        h = random_hermitian(rng, N + 1)
        p = synth_hermitian(h)
        D = 4 * N + 2
        m = eval_matrix(p, D)
        block, cross = block_residuals(m, h, (D,), (N,))
        assert block <= 1e-10 and cross <= 1e-12
        assert p.degree <= 3 * N
        assert np.max(np.abs(m - m.conj().T)) <= 1e-9 * max(1.0, np.max(np.abs(m)))


def test_exponential_identity(rng):
    for N in (1, 3, 6):
        h = random_hermitian(rng, N + 1)
        m = eval_matrix(synth_hermitian(h), 4 * N + 2)
        u = exp_i_hermitian(m)
        assert np.max(np.abs(u[: N + 1, : N + 1] - exp_i_hermitian(h))) < 1e-9


def test_large_block_exactness(rng):
    N = 40
    h = random_hermitian(rng, N + 1)
    p = synth_hermitian(h)
    m = eval_matrix(p, N + p.degree + 2)
    block, cross = block_residuals(m, h, (m.shape[0] - 1,), (N,))
    assert block < 1e-10 and cross == 0.0


def test_linearity(rng):
    h1, h2 = random_hermitian(rng, 4), random_hermitian(rng, 4)
    alpha, beta = 0.7, -1.3
    lhs = eval_matrix(synth_hermitian(alpha * h1 + beta * h2), 10)
    rhs = alpha * eval_matrix(synth_hermitian(h1), 10) + beta * eval_matrix(synth_hermitian(h2), 10)
    scale = np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale


def test_adjoint_closed_term_list(rng):
    p = synth_hermitian(random_hermitian(rng, 3))
    m = eval_matrix(p, 9)
    assert np.allclose(eval_matrix(p.adjoint(), 9), m.conj().T)


def test_synth_operator_non_hermitian(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    p = synth_operator(a)
    block, cross = block_residuals(eval_matrix(p, 9), a, (9,), (2,))
    assert block < 1e-12 and cross == 0.0


def test_multimode_identity():
    p = synth_multimode(np.eye(4), (1, 1))
    m = eval_matrix(p, (3, 3))
    idx = [0, 1, 4, 5]
    assert np.allclose(m[np.ix_(idx, idx)], np.eye(4))


def test_multimode_swap_example():
    a = np.zeros((4, 4))
    a[1, 2] = a[2, 1] = 1  # |01><10| + |10><01|
    p = synth_multimode(a, (1, 1))
    assert len(p.terms) == 2
    m = eval_matrix(p, (3, 3))
    block, cross = block_residuals(m, a, (3, 3), (1, 1))
    assert block < 1e-12 and cross == 0.0


def kron_oracle(a, cutoffs, eval_cutoffs):
    """Sum of Kronecker products of per-mode matrix-unit polynomials."""
    dims = [n + 1 for n in cutoffs]
    index = list(itertools.product(*(range(d) for d in dims)))
    out = 0
    for r, iv in enumerate(index):
        for c, jv in enumerate(index):
            if a[r, c] == 0:
                continue
            mat = np.array([[a[r, c]]], dtype=complex)
            for (i, j), n, D in zip(zip(iv, jv), cutoffs, eval_cutoffs):
                mat = np.kron(mat, eval_matrix(single(synth_rank_one(i, j, n), n), D))
            out = out + mat
    return out


def test_multimode_random_kron_oracle(rng):
    cutoffs = (2, 2)
    h = random_hermitian(rng, 9)
    p = synth_multimode(h, cutoffs)
    m = eval_matrix(p, (5, 5))
    block, cross = block_residuals(m, h, (5, 5), cutoffs)
    assert block < 1e-10 and cross < 1e-12
    assert np.allclose(m, kron_oracle(h, cutoffs, (5, 5)), atol=1e-9)


def test_multimode_rejects_bad_dimension(rng):
    with pytest.raises(ContractViolation):
        synth_multimode(random_hermitian(rng, 5), (1, 1))


def test_json_round_trip(rng):
    p = synth_hermitian(random_hermitian(rng, 5))
    q = PolyHamiltonian.from_json(p.to_json())
    assert np.array_equal(eval_matrix(p, 14), eval_matrix(q, 14))
    payload = p.to_json()
    assert payload["modes"] == 1 and payload["block_cutoffs"] == [4]
    factor = payload["terms"][0]["factors"][0]
    assert {"dag", "num_poly", "ann"} <= set(factor)
    with pytest.raises(ContractViolation):
        PolyHamiltonian.from_json({"modes": 1})


def test_json_float_only_payload(rng):
    # a file without the exact table still loads (coefficients as floats)
    p = synth_hermitian(random_hermitian(rng, 3))
    payload = p.to_json()
    payload.pop("exact_polynomials")
    for t in payload["terms"]:
        for f in t["factors"]:
            f.pop("exact_id", None)
    q = PolyHamiltonian.from_json(payload)
    assert np.allclose(eval_matrix(q, 6)[:4, :4], eval_matrix(p, 6)[:4, :4], atol=1e-9)


# --- (q, p) expansion -----------------------------------------------------


def weyl_oracle(qexp, pexp, cutoff):
    """Weyl-ordered q^a p^b as the average over all distinct orderings."""
    big = cutoff + qexp + pexp + 4
    *_, q, p = ladder_matrices(big)
    letters = [0] * qexp + [1] * pexp
    orders = set(itertools.permutations(letters))
    total = np.zeros((big + 1, big + 1), dtype=complex)
    for order in orders:
        m = np.eye(big + 1, dtype=complex)
        for x in order:
            m = m @ (q if x == 0 else p)
        total += m
    return (total / len(orders))[: cutoff + 1, : cutoff + 1]


def qp_oracle_matrix(qp, cutoff):
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    for ((a, b),), c in qp.monomials.items():
        out += c * weyl_oracle(a, b, cutoff)
    return out


def test_expand_number_operator():
    qp = expand_qp(number_operator())
    assert qp.monomials.keys() == {((2, 0),), ((0, 2),), ((0, 0),)}
    assert qp.monomials[((2, 0),)] == pytest.approx(0.5)
    assert qp.monomials[((0, 2),)] == pytest.approx(0.5)
    assert qp.monomials[((0, 0),)] == pytest.approx(-0.5)


def test_expand_a_plus_adag():
    one = RealPolynomial.constant(1)
    p = PolyHamiltonian(1, [Term(1.0, (LadderFactor(0, one, 1),)), Term(1.0, (LadderFactor(1, one, 0),))], (0,))
    qp = expand_qp(p)
    assert qp.monomials.keys() == {((1, 0),)}
    assert qp.monomials[((1, 0),)] == pytest.approx(math.sqrt(2))


def test_expand_matches_weyl_oracle(rng):
    h = random_hermitian(rng, 3)
    p = synth_hermitian(h)
    qp = expand_qp(p)
    assert qp.degree <= 3 * 2
    assert np.max(np.abs(qp_oracle_matrix(qp, 10) - eval_matrix(p, 10))) < 1e-9
    assert np.max(np.abs(qp_matrix(qp, 10) - eval_matrix(p, 10))) < 1e-9


def test_expand_real_symbol(rng):
    qp = expand_qp(synth_hermitian(random_hermitian(rng, 4)))
    assert max(abs(c.imag) for c in qp.monomials.values()) < 1e-9 * max(abs(c) for c in qp.monomials.values())


def test_multimode_expand_degree(rng):
    p = synth_multimode(random_hermitian(rng, 4), (1, 1))
    qp = expand_qp(p)
    assert qp.degree <= 9 * 1 * 1
    assert np.allclose(qp_matrix(qp, (4, 4)), eval_matrix(p, (4, 4)), atol=1e-9)


def test_qp_json_round_trip(rng):
    qp = expand_qp(synth_hermitian(random_hermitian(rng, 2)))
    back = QPPolynomial.from_json(qp.to_json())
    assert back.monomials.keys() == qp.monomials.keys()


# --- state preparation ----------------------------------------------------


def vacuum_evolution(p, d):
    cutoff = d + p.degree + 2
    u = exp_i_hermitian(eval_matrix(p, cutoff))
    return u[:, 0]


def test_prepare_vacuum():
    p, d = prepare_state([1, 0, 0], 0.1)
    assert d == 0
    assert all(abs(t.coeff) < 1e-15 for t in p.terms) or p.terms == []


def test_prepare_plus_state():
    target = np.array([1, 1]) / math.sqrt(2)
    p, d = prepare_state(target, 0.1)
    assert d == 1
    out = vacuum_evolution(p, d)
    assert abs(np.vdot(target, out[:2])) == pytest.approx(1.0, abs=1e-9)


def test_prepare_geometric_tail():
    target = np.array([0.5**k for k in range(13)])
    target = target / np.linalg.norm(target)
    d = truncation_cutoff(target, 0.05)
    kept = np.cumsum(np.abs(target) ** 2)
    dists = np.sqrt(np.clip(1 - kept, 0, None))
    assert dists[d] <= 0.05 and (d == 0 or dists[d - 1] > 0.05)
    p, d2 = prepare_state(target, 0.05)
    assert d2 == d
    out = vacuum_evolution(p, d)
    assert trace_distance_states(out[: len(target)], target) <= 0.05


def test_prepare_random_targets(rng):
    for _ in range(10):
        target = random_state(rng, int(rng.integers(2, 9)))
        prep = prepare_state_details(target, 0.1)
        out = vacuum_evolution(prep.hamiltonian, prep.cutoff)
        assert abs(np.vdot(prep.truncated_state, out[: prep.cutoff + 1])) == pytest.approx(1.0, abs=1e-9)


def test_prepare_rejects_bad_input():
    with pytest.raises(ContractViolation):
        prepare_state([0, 0], 0.1)
    with pytest.raises(ContractViolation):
        prepare_state([1, 0], 1.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_property_block_exactness(N, seed):
    gen = np.random.default_rng(seed)
    h = random_hermitian(gen, N + 1)
    m = eval_matrix(synth_hermitian(h), 4 * N + 2)
    block, cross = block_residuals(m, h, (4 * N + 2,), (N,))
    assert block <= 1e-10 and cross <= 1e-12
