"""Solovay-Kitaev compilation of a phase rotation over lifted qubit gates.

The qubit H_1 = span{|0>, |1>} is the effective space, which requires
N = 1 >= 64 E / eps^2, i.e. E <= eps^2 / 64.

Run: python3 demos/gate_compilation.py
"""

import numpy as np

from bosonic_effective.errors import ConvergenceFailure
from bosonic_effective.gate_compiler import compile_physical
from bosonic_effective.oracles import get_oracle
from bosonic_effective.solovay_kitaev import default_net, fit_length_exponent, haar_special, qubit_gateset, sk_recurse

gs = qubit_gateset()
net = default_net(gs)
print(f"net: {len(net)} words up to length {net.max_length}, validated worst distance {net.validation_worst:.3f}")

# contraction of the recursion on random targets
targets = haar_special(2, 8, np.random.default_rng(0))
errors = np.array([sk_recurse(t, 3, net).errors for t in targets])
print("mean error by depth:", ", ".join(f"{e:.1e}" for e in np.exp(np.log(errors).mean(axis=0))))

# physical compilation at decreasing eps (depth chosen as the smallest that reaches eps/4)
oracle = get_oracle("rotation:2.0")
lengths, epsilons = [], []
for eps in (0.4, 0.1, 0.025, 0.01):
    E = eps**2 / 64
    for depth in range(5):
        try:
            res = compile_physical(oracle, E, eps, gs, depth, net=net, samples=300)
            break
        except ConvergenceFailure as exc:  # not yet accurate enough at this depth
            last = exc
    else:
        raise last
    lengths.append(len(res.word))
    epsilons.append(eps)
    print(f"eps = {eps:<4} E = {E:.2e} depth {depth} length {len(res.word):>5} "
          f"SK error {res.sk_error:.1e} sampled distance {res.sampled_worst_distance:.3f} <= {2 * eps}")
print(f"fitted c in length ~ log(1/eps)^c: {fit_length_exponent(lengths, epsilons):.2f}")
