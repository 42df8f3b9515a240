"""Compilation of a physical unitary into a lifted gate word.

The oracle is first replaced by a unitary V_N on the qudit H_N (d = N + 1
levels), V_N is approximated modulo its global phase by a Solovay-Kitaev
word over the gate set, and every letter is lifted to a polynomial
Hamiltonian.  The result is checked against the oracle on sampled
energy-constrained states.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateFailure, ContractViolation, ConvergenceFailure, TheoremViolation
from .oracles import UnitaryOracle
from .solovay_kitaev import (
    GateSet,
    GateWord,
    NetDictionary,
    default_net,
    fit_contraction,
    gate_generators,
    lift_residual,
    lift_word,
    lifted_product,
    project_special,
    sk_recurse,
)
from .truncation import _local_ascent, certify, pure_distance, sample_states, truncate_unitary


@dataclass
class PhysicalCompilation:
    """Outcome of :func:`compile_physical`.

    The compiled action is ``global_phase * prod_k exp(i P_k)`` with P_k the
    lifted letters of ``word``; ``generators`` holds one polynomial per gate
    (inverted letters use its negative).
    """

    word: GateWord
    certificate: object
    global_phase: complex
    N: int
    sk_error: float
    lift_residual: float
    sampled_worst_distance: float
    min_tail_mass: float
    tail_bound: float
    sample_cutoff: int
    sk_exponent: float
    sk_constant: float
    generators: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "word": self.word.to_json(),
            "length": len(self.word),
            "global_phase": [self.global_phase.real, self.global_phase.imag],
            "N": self.N,
            "sk_error": self.sk_error,
            "sk_exponent": self.sk_exponent,
            "sk_constant": self.sk_constant,
            "lift_residual": self.lift_residual,
            "sampled_worst_distance": self.sampled_worst_distance,
            "min_tail_mass": self.min_tail_mass,
            "tail_bound": self.tail_bound,
            "sample_cutoff": self.sample_cutoff,
            "certificate": self.certificate.to_json(),
            "timings": self.timings,
        }


def compile_physical(
    oracle: UnitaryOracle,
    E: float,
    epsilon: float,
    gateset: GateSet,
    depth: int,
    *,
    net: NetDictionary | None = None,
    samples: int = 500,
    seed: int = 0,
    sample_cutoff: int | None = None,
) -> PhysicalCompilation:
    """Gate word whose lifted product is 2 eps-close to ``oracle`` on energy-E states.

    Args:
        oracle: physical unitary.
        E: energy bound (mean photon number) of the input states.
        epsilon: target accuracy; the sampled distance must be <= 2 epsilon.
        gateset: gates on H_N; N = gateset.dim - 1 must satisfy N >= 64 E / eps^2.
        depth: Solovay-Kitaev recursion depth.
        net: base-case net (built with the default parameters when omitted).
        samples: number of sampled input states.
        seed: seed of the state sampler.
        sample_cutoff: Fock cutoff of the sampled states (default max(4N, N + 24)).

    Raises:
        ContractViolation: N below 64 E / eps^2, or bad E / epsilon.
        TheoremViolation: V_N (+) I is more than eps from the oracle on the
            samples, or the compiled word is more than 2 eps away.
        ConvergenceFailure: the SK word misses eps / 4.
        CertificateFailure: the lift or the tail bound check fails.
    """
    if not E > 0 or not 0 < epsilon <= 1:
        raise ContractViolation("need E > 0 and epsilon in (0, 1]")
    N = gateset.dim - 1
    if N < 64.0 * E / epsilon**2 - 1e-9:
        raise ContractViolation(f"N = {N} is below 64 E / eps^2 = {64 * E / epsilon**2:.4g}")
    timings = {}
    t0 = time.perf_counter()

    # effective dimension: V_N (+) I must be eps-close on energy-E states
    v_n, r = truncate_unitary(oracle, N, N)
    cert = certify(oracle, v_n, E, epsilon, samples, M=N, N=N, seed=seed, r=r)
    timings["truncate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    target, det_phase = project_special(v_n.block[: N + 1, : N + 1])
    net = default_net(gateset) if net is None else net
    timings["net"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    word = sk_recurse(target, depth, net, strict=False)
    sk_error = word.errors[-1]
    timings["sk"] = time.perf_counter() - t0
    if sk_error > epsilon / 4:
        raise ConvergenceFailure(
            f"SK error {sk_error:.3e} at depth {depth} exceeds eps/4 = {epsilon / 4:.3e} "
            f"(errors by depth: {', '.join(f'{e:.3e}' for e in word.errors)})"
        )
    if len(word.errors) > 2 and min(word.errors) > 1e-12:
        a, c = fit_contraction(np.array([word.errors]))
    else:
        a, c = math.nan, math.nan

    t0 = time.perf_counter()
    generators = gate_generators(gateset)
    lift_word(word, gateset, generators)
    residual = lift_residual(word, 4 * N)
    if residual > 1e-8 * max(1, len(word)):
        raise CertificateFailure(f"lifted product misses the net unitary by {residual:.3e}")
    global_phase = complex(det_phase * word.phase)
    cutoff = max(4 * N, N + 24) if sample_cutoff is None else sample_cutoff
    lifted = global_phase * lifted_product(word, cutoff)
    timings["lift"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed + 1)
    states = sample_states(E, cutoff, samples, rng, markers=(N, N + 1))

    def score(s):
        return pure_distance(oracle.apply(s), lifted @ s)

    dists = score(states)
    worst = int(np.argmax(dists))
    worst_distance = max(float(dists[worst]), _local_ascent(score, states[:, worst], E, rng))
    tail = np.sum(np.abs(states[: N + 1]) ** 2, axis=0) / np.sum(np.abs(states) ** 2, axis=0)
    timings["sample"] = time.perf_counter() - t0
    bound = 1.0 - E / N if N > 0 else 0.0
    if np.any(tail < bound - 1e-12):
        raise CertificateFailure(f"tail bound <psi|Pi_N|psi> >= 1 - E/N violated: {tail.min():.6g} < {bound:.6g}")
    if worst_distance > 2 * epsilon:
        raise TheoremViolation(f"compiled word is {worst_distance:.4g} from the oracle, above 2 eps = {2 * epsilon:.4g}")
    return PhysicalCompilation(
        word=word,
        certificate=cert,
        global_phase=global_phase,
        N=N,
        sk_error=float(sk_error),
        lift_residual=residual,
        sampled_worst_distance=worst_distance,
        min_tail_mass=float(tail.min()),
        tail_bound=bound,
        sample_cutoff=cutoff,
        sk_exponent=float(a),
        sk_constant=float(c),
        generators=generators,
        timings=timings,
    )
