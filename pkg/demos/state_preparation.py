"""Preparing a cat-like superposition from the vacuum with one polynomial Hamiltonian.

Run: python3 demos/state_preparation.py
"""

import math

import numpy as np

from bosonic_effective.fock import exp_i_hermitian, trace_distance_states
from bosonic_effective.polyham import eval_matrix, prepare_state_details
from bosonic_effective.truncation import coherent_state

alpha, cutoff = 1.2, 40
target = coherent_state(alpha, cutoff) + coherent_state(-alpha, cutoff)
target /= np.linalg.norm(target)

for eps in (0.1, 0.01, 0.001):
    prep = prepare_state_details(target, eps)
    p = prep.hamiltonian
    u = exp_i_hermitian(eval_matrix(p, prep.cutoff + p.degree + 2))
    out = np.zeros(cutoff + 1, dtype=complex)
    n = min(len(out), u.shape[0])
    out[:n] = u[:n, 0]
    print(f"eps = {eps:<6} d_eps = {prep.cutoff:>2}  degree {p.degree:>3}  "
          f"distance to target {trace_distance_states(out, target):.2e}")

# the tail mass beyond d_eps is what the distance measures
kept = np.cumsum(np.abs(target) ** 2)
print("\nsqrt(1 - kept mass) by cutoff:", ", ".join(f"{math.sqrt(max(0, 1 - k)):.1e}" for k in kept[:12:2]))
