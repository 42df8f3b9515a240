import numpy as np
import pytest

from bosonic_effective.errors import ContractViolation
from bosonic_effective.gate_compiler import compile_physical
from bosonic_effective.oracles import displacement_oracle, identity_oracle, kerr_oracle, rotation_oracle
from bosonic_effective.solovay_kitaev import default_net, qubit_gateset


@pytest.fixture(scope="module")
def qubit():
    gs = qubit_gateset()
    return gs, default_net(gs)


def test_identity_empty_word(qubit):
    gs, net = qubit
    res = compile_physical(identity_oracle(), 0.01, 0.8, gs, 2, net=net, samples=100)
    assert len(res.word) == 0
    assert res.sampled_worst_distance < 1e-12
    assert res.lift_residual == 0.0


@pytest.mark.parametrize("oracle", [rotation_oracle(0.5), kerr_oracle(0.2), displacement_oracle(0.05)])
def test_small_energy_compiles(qubit, oracle):
    gs, net = qubit
    res = compile_physical(oracle, 0.01, 0.8, gs, 2, net=net, samples=200)
    assert res.sk_error <= 0.8 / 4
    assert res.sampled_worst_distance <= 2 * 0.8
    assert res.min_tail_mass >= res.tail_bound
    assert res.lift_residual <= 1e-8 * max(1, len(res.word))
    payload = res.to_json()
    assert payload["length"] == len(res.word) and payload["N"] == 1


def test_hypothesis_enforced(qubit):
    gs, net = qubit
    with pytest.raises(ContractViolation):
        compile_physical(rotation_oracle(0.5), 0.5, 0.7, gs, 2, net=net)


def test_global_phase_reattached(qubit):
    # rotation by theta on a qubit has det e^{i theta}; the phase is tracked separately
    gs, net = qubit
    res = compile_physical(rotation_oracle(1.0), 0.01, 0.8, gs, 3, net=net, samples=50)
    from bosonic_effective.solovay_kitaev import word_product

    approx = res.global_phase * word_product(res.word.indices, gs)
    target = np.diag([1, np.exp(1j)])
    assert np.max(np.abs(approx - target)) <= 2 * res.sk_error + 1e-9
