"""Certified truncation of a displacement and its one-Hamiltonian compilation.

Run: python3 demos/truncate_and_compile.py
"""

import numpy as np

from bosonic_effective.oracles import get_oracle
from bosonic_effective.pipeline import PipelineConfig, compile_physical_unitary
from bosonic_effective.polyham import expand_qp
from bosonic_effective.truncation import effective_dimension

oracle = get_oracle("displacement:0.3")
E, eps = 0.25, 1.0

# step 1: cutoffs, Gram inequalities, QR truncation, sampled certificate
t = effective_dimension(oracle, E, eps, samples=2000)
c = t.certificate
print(f"M = {c.M}, N = {c.N}, delta = {c.delta:.2e} < 1/2M = {1 / (2 * c.M):.2e}")
print(f"V_N is non-trivial on levels 0..{t.v_n.block_cutoff}; identity above")
print(f"sampled worst distance {c.sampled_worst_distance:.4f} <= eps = {eps} "
      f"(analytic bound {c.analytic_bound:.4f})")

# step 2: one polynomial Hamiltonian P with exp(iP) reproducing V_N on its block
report, p = compile_physical_unitary(PipelineConfig("displacement:0.3", E, eps, samples=2000))
print(f"\n{report.status}: {len(p.terms)} ladder terms, normal-ordered degree {p.degree}")
print(f"  |P - log V_N| on the block  {report.block_residual:.1e}")
print(f"  cross blocks                {report.cross_residual:.1e}")
print(f"  |e^(iP) - V_N| on the block {report.exp_residual:.1e}")
print(f"  sampled distance to D(0.3)  {report.sampled_worst_distance:.4f}")

# a (q, p) view of a smaller compilation; the monomial expansion is badly
# conditioned, so it is shown only for low degree
small, ps = compile_physical_unitary(PipelineConfig("rotation:0.4", 0.25, 1.0, samples=200))
qp = expand_qp(ps)
largest = sorted(qp.monomials.items(), key=lambda kv: -abs(kv[1]))[:5]
print(f"\nrotation:0.4 -> ladder degree {ps.degree}, Weyl (q, p) degree {qp.degree}, "
      f"{len(qp.monomials)} monomials; largest:")
for ((a, b),), coeff in largest:
    print(f"  q^{a} p^{b}: {np.real(coeff):+.3e}")
