"""Block-diagonal polynomial Hamiltonians from finite-dimensional operators.

A polynomial Hamiltonian is kept in normal-ordered ladder form: a sum of
terms ``coeff * prod_k (a_k^dag)^r_k f_k(n_k) a_k^s_k``.  The matrix unit
|i><j| on span{|0>..|N>} is realised by

    sqrt(min(i,j)!/max(i,j)!) (a^dag)^(max-j) P_min(n) a^(max-i)

with ``P_min`` the Lagrange indicator on the nodes 0..N.  Because the
indicator also vanishes at every node above ``min(i, j)``, each realisation
has no matrix elements between span{|0>..|N>} and its complement.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ContractViolation
from .fock import as_hermitian, principal_log_unitary
from .polynomials import RealPolynomial, lagrange_indicator


@dataclass(frozen=True)
class LadderFactor:
    """(a^dag)^dag f(n) a^ann acting on one mode."""

    dag: int
    poly: RealPolynomial
    ann: int

    def __post_init__(self):
        if self.dag < 0 or self.ann < 0:
            raise ContractViolation("ladder powers must be non-negative")

    @property
    def degree(self) -> int:
        """Normal-ordered degree in (a, a^dag); n counts twice."""
        if self.poly.is_zero:
            return 0
        return self.dag + self.ann + 2 * self.poly.degree

    def adjoint(self) -> "LadderFactor":
        return LadderFactor(self.ann, self.poly, self.dag)

    def matrix(self, cutoff: int) -> np.ndarray:
        """Exact matrix elements at ``cutoff`` from factorial ratios.

        <j - s + r| (a^dag)^r f(n) a^s |j> = sqrt(j!/(j-s)!) f(j-s) sqrt((j-s+r)!/(j-s)!)
        """
        return _factor_matrix(self.dag, self.poly, self.ann, cutoff)


def _sqrt_int(value: int) -> float:
    if value.bit_length() < 1000:
        return math.sqrt(value)
    try:
        return math.exp(0.5 * math.log(value))
    except OverflowError:
        return math.inf


@lru_cache(maxsize=1024)
def _sqrt_rising(power: int, length: int) -> np.ndarray:
    """sqrt((k + power)! / k!) for k = 0..length-1, from exact integers."""
    out = np.empty(length, dtype=np.float64)
    value = math.factorial(power)
    for k in range(length):
        out[k] = _sqrt_int(value)
        value = value * (k + 1 + power) // (k + 1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=8192)
def _factor_band(r: int, poly: RealPolynomial, s: int, cutoff: int) -> np.ndarray:
    """Entries <k + r| (a^dag)^r f(n) a^s |k + s> for k = 0, 1, ... within the cutoff."""
    length = max(0, cutoff + 1 - max(r, s))
    values = poly.values_at_integers(cutoff)[:length]
    with np.errstate(invalid="ignore", over="ignore"):
        out = values * _sqrt_rising(s, length) * _sqrt_rising(r, length)
    # exact zeros of f stay zero even where the ladder factor overflows
    out[values == 0.0] = 0.0
    out.setflags(write=False)
    return out


def _factor_matrix(r: int, poly: RealPolynomial, s: int, cutoff: int) -> np.ndarray:
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=np.float64)
    band = _factor_band(r, poly, s, cutoff)
    k = np.arange(band.size)
    out[k + r, k + s] = band
    return out


@dataclass(frozen=True)
class Term:
    """coeff * (tensor product of one LadderFactor per mode)."""

    coeff: complex
    factors: tuple

    @property
    def degree(self) -> int:
        return sum(f.degree for f in self.factors)

    def adjoint(self) -> "Term":
        return Term(complex(self.coeff).conjugate(), tuple(f.adjoint() for f in self.factors))


@dataclass
class PolyHamiltonian:
    """Normal-ordered polynomial in ladder operators over ``modes`` modes.

    ``block_cutoffs[k]`` is the cutoff N_k of the block on which the
    polynomial reproduces its target operator.
    """

    modes: int
    terms: list = field(default_factory=list)
    block_cutoffs: tuple = ()

    def __post_init__(self):
        self.block_cutoffs = tuple(int(n) for n in self.block_cutoffs)
        if self.modes < 1 or len(self.block_cutoffs) != self.modes:
            raise ContractViolation("block_cutoffs must list one cutoff per mode")
        for term in self.terms:
            if len(term.factors) != self.modes:
                raise ContractViolation("every term needs one factor per mode")

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    def mode_degrees(self) -> list[int]:
        return [max((t.factors[k].degree for t in self.terms), default=0) for k in range(self.modes)]

    def scaled(self, alpha: float) -> "PolyHamiltonian":
        terms = [Term(alpha * t.coeff, t.factors) for t in self.terms]
        return PolyHamiltonian(self.modes, terms, self.block_cutoffs)

    def __add__(self, other: "PolyHamiltonian") -> "PolyHamiltonian":
        if self.modes != other.modes:
            raise ContractViolation("mode counts differ")
        cutoffs = tuple(max(a, b) for a, b in zip(self.block_cutoffs, other.block_cutoffs))
        return PolyHamiltonian(self.modes, list(self.terms) + list(other.terms), cutoffs)

    def adjoint(self) -> "PolyHamiltonian":
        return PolyHamiltonian(self.modes, [t.adjoint() for t in self.terms], self.block_cutoffs)

    def to_json(self) -> dict:
        """Polynomial JSON; exact coefficients are stored once per distinct polynomial."""
        terms, exact, exact_ids = [], [], {}
        for t in self.terms:
            factors = []
            for f in t.factors:
                entry = {"dag": f.dag, "num_poly": f.poly.to_json(), "ann": f.ann}
                if f.poly.is_exact and not f.poly.is_zero:
                    if f.poly not in exact_ids:
                        exact_ids[f.poly] = len(exact)
                        exact.append([str(Fraction(c)) for c in f.poly.coefficients])
                    entry["exact_id"] = exact_ids[f.poly]
                factors.append(entry)
            c = complex(t.coeff)
            terms.append({"coeff": [c.real, c.imag], "factors": factors})
        out = {"modes": self.modes, "block_cutoffs": list(self.block_cutoffs), "terms": terms}
        if exact:
            out["exact_polynomials"] = exact
        return out

    @classmethod
    def from_json(cls, payload: dict) -> "PolyHamiltonian":
        try:
            exact = [
                RealPolynomial(tuple(Fraction(c) for c in coeffs))
                for coeffs in payload.get("exact_polynomials", [])
            ]
            interned: dict = {}
            terms = []
            for t in payload["terms"]:
                factors = []
                for f in t["factors"]:
                    if "exact_id" in f:
                        poly = exact[int(f["exact_id"])]
                    else:
                        key = tuple(float(c) for c in f["num_poly"])
                        poly = interned.setdefault(key, RealPolynomial(key))
                    factors.append(LadderFactor(int(f["dag"]), poly, int(f["ann"])))
                terms.append(Term(complex(t["coeff"][0], t["coeff"][1]), tuple(factors)))
            return cls(int(payload["modes"]), terms, tuple(payload["block_cutoffs"]))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ContractViolation(f"malformed polynomial JSON: {exc}") from exc


def number_operator(cutoff: int = 0) -> PolyHamiltonian:
    """n = a^dag a as a single-mode polynomial."""
    factor = LadderFactor(0, RealPolynomial.identity(), 0)
    return PolyHamiltonian(1, [Term(1.0, (factor,))], (cutoff,))


def synth_rank_one(i: int, j: int, N: int) -> Term:
    """Single-mode term realising |i><j| on span{|0>..|N>}, block-diagonally."""
    if not (0 <= i <= N and 0 <= j <= N):
        raise ContractViolation(f"matrix unit ({i}, {j}) outside cutoff {N}")
    lo, hi = min(i, j), max(i, j)
    scale = math.sqrt(math.factorial(lo) / math.factorial(hi))
    factor = LadderFactor(hi - j, lagrange_indicator(lo, N), hi - i)
    return Term(scale, (factor,))


def synth_operator(a, N: int | None = None) -> PolyHamiltonian:
    """Polynomial realising an arbitrary (not necessarily Hermitian) operator A."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {a.shape}")
    N = a.shape[0] - 1 if N is None else N
    if a.shape[0] != N + 1:
        raise ContractViolation(f"matrix side {a.shape[0]} does not match cutoff {N}")
    terms = []
    for i, j in itertools.product(range(N + 1), repeat=2):
        if a[i, j] == 0:
            continue
        unit = synth_rank_one(i, j, N)
        terms.append(Term(complex(a[i, j]) * unit.coeff, unit.factors))
    return PolyHamiltonian(1, terms, (N,))


def synth_hermitian(h) -> PolyHamiltonian:
    """P_H with P_H = H (+) H' block-diagonally; normal-ordered degree <= 3N."""
    h = as_hermitian(h)
    return synth_operator(h)


def synth_multimode(a, cutoffs) -> PolyHamiltonian:
    """Multimode realisation; ``a`` is indexed row-major over modes (mode 1 slowest)."""
    cutoffs = tuple(int(n) for n in cutoffs)
    dims = tuple(n + 1 for n in cutoffs)
    a = as_hermitian(a)
    if a.shape[0] != math.prod(dims):
        raise ContractViolation(f"operator side {a.shape[0]} does not match cutoffs {cutoffs}")
    index = list(itertools.product(*(range(d) for d in dims)))
    units = [
        {(i, j): synth_rank_one(i, j, n) for i in range(n + 1) for j in range(n + 1)} for n in cutoffs
    ]
    terms = []
    for row, ivec in enumerate(index):
        for col, jvec in enumerate(index):
            value = a[row, col]
            if value == 0:
                continue
            coeff = complex(value)
            factors = []
            for k, (i, j) in enumerate(zip(ivec, jvec)):
                unit = units[k][(i, j)]
                coeff *= unit.coeff
                factors.append(unit.factors[0])
            terms.append(Term(coeff, tuple(factors)))
    return PolyHamiltonian(len(cutoffs), terms, cutoffs)


def eval_matrix(p: PolyHamiltonian, cutoffs) -> np.ndarray:
    """Dense matrix of ``p`` on the tensor product of per-mode cutoffs."""
    if isinstance(cutoffs, int):
        cutoffs = (cutoffs,)
    cutoffs = tuple(int(c) for c in cutoffs)
    if len(cutoffs) != p.modes:
        raise ContractViolation(f"need {p.modes} cutoffs, got {len(cutoffs)}")
    if any(c < n for c, n in zip(cutoffs, p.block_cutoffs)):
        raise ContractViolation(f"evaluation cutoffs {cutoffs} below block cutoffs {p.block_cutoffs}")
    dim = math.prod(c + 1 for c in cutoffs)
    out = np.zeros((dim, dim), dtype=np.complex128)
    # entries far outside the block may overflow to inf; they never mix into it
    with np.errstate(invalid="ignore", over="ignore"):
        if p.modes == 1:
            for term in p.terms:
                f = term.factors[0]
                band = _factor_band(f.dag, f.poly, f.ann, cutoffs[0])
                k = np.arange(band.size)
                nz = band != 0.0
                out[k[nz] + f.dag, k[nz] + f.ann] += term.coeff * band[nz]
            return out
        for term in p.terms:
            mat = np.array([[term.coeff]], dtype=np.complex128)
            for factor, c in zip(term.factors, cutoffs):
                mat = np.kron(mat, factor.matrix(c))
            out += mat
    return out


def block_residuals(matrix: np.ndarray, target: np.ndarray, cutoffs, block_cutoffs) -> tuple[float, float]:
    """(max |block - target|, max |cross blocks|) of an evaluated polynomial."""
    cutoffs = tuple(cutoffs)
    grids = np.meshgrid(*(np.arange(c + 1) for c in cutoffs), indexing="ij")
    inside = np.ones(grids[0].shape, dtype=bool)
    for g, n in zip(grids, block_cutoffs):
        inside &= g <= n
    inside = inside.ravel()
    block = matrix[np.ix_(inside, inside)]
    cross = max(
        float(np.max(np.abs(matrix[np.ix_(inside, ~inside)]), initial=0.0)),
        float(np.max(np.abs(matrix[np.ix_(~inside, inside)]), initial=0.0)),
    )
    return float(np.max(np.abs(block - target), initial=0.0)), cross


def block_indices(cutoffs, block_cutoffs) -> np.ndarray:
    """Flat indices of the protected block inside the evaluation space."""
    grids = np.meshgrid(*(np.arange(c + 1) for c in cutoffs), indexing="ij")
    inside = np.ones(grids[0].shape, dtype=bool)
    for g, n in zip(grids, block_cutoffs):
        inside &= g <= n
    return np.flatnonzero(inside.ravel())


# --- (q, p) export ----------------------------------------------------------


@dataclass
class QPPolynomial:
    """Weyl symbol of a polynomial Hamiltonian.

    ``monomials`` maps per-mode exponent tuples ``((q1, p1), (q2, p2), ...)``
    to coefficients; each key stands for the Weyl-symmetrised operator
    product of q_k^qk p_k^pk.
    """

    modes: int
    monomials: dict

    @property
    def degree(self) -> int:
        return max((sum(a + b for a, b in key) for key in self.monomials), default=0)

    def to_json(self) -> dict:
        out = []
        for key in sorted(self.monomials):
            c = complex(self.monomials[key])
            out.append({"exps": [list(e) for e in key], "coeff": [c.real, c.imag]})
        return {"modes": self.modes, "monomials": out}

    @classmethod
    def from_json(cls, payload: dict) -> "QPPolynomial":
        monomials = {}
        for entry in payload["monomials"]:
            key = tuple(tuple(int(x) for x in e) for e in entry["exps"])
            monomials[key] = complex(entry["coeff"][0], entry["coeff"][1])
        modes = payload.get("modes", len(next(iter(monomials), ())) or 1)
        return cls(int(modes), monomials)


@lru_cache(maxsize=None)
def _stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * _stirling2(n - 1, k) + _stirling2(n - 1, k - 1)


def _normal_monomials(factor: LadderFactor) -> dict:
    """(a^dag)^r f(n) a^s as {(m, n): coeff} over normal monomials (a^dag)^m a^n.

    Uses n^c = sum_l S(c, l) (a^dag)^l a^l.
    """
    out: dict = {}
    for c, fc in enumerate(factor.poly.coefficients):
        if fc == 0:
            continue
        for l in range(c + 1):
            s = _stirling2(c, l)
            if s:
                key = (factor.dag + l, factor.ann + l)
                out[key] = out.get(key, 0) + fc * s
    return out


@lru_cache(maxsize=None)
def _symbol_of_normal(m: int, n: int) -> tuple:
    """Weyl symbol of (a^dag)^m a^n as ((qexp, pexp), coeff) pairs.

    (a^dag)^m a^n = sum_t t! C(m,t) C(n,t) (-1/2)^t {(a^dag)^(m-t) a^(n-t)}_Weyl,
    and the Weyl-ordered monomial has symbol conj(alpha)^(m-t) alpha^(n-t)
    with alpha = (q + i p)/sqrt(2).
    """
    poly: dict = {}
    for t in range(min(m, n) + 1):
        weight = math.factorial(t) * math.comb(m, t) * math.comb(n, t) * (-0.5) ** t
        mm, nn = m - t, n - t
        scale = weight * 2.0 ** (-(mm + nn) / 2.0)
        # (q - i p)^mm (q + i p)^nn
        for a in range(mm + 1):
            ca = math.comb(mm, a) * (-1j) ** (mm - a)
            for b in range(nn + 1):
                cb = math.comb(nn, b) * (1j) ** (nn - b)
                key = (a + b, (mm - a) + (nn - b))
                poly[key] = poly.get(key, 0) + scale * ca * cb
    return tuple(poly.items())


def expand_qp(p: PolyHamiltonian, cleanup: float = 1e-13) -> QPPolynomial:
    """Rewrite ``p`` as a Weyl-ordered polynomial in (q_k, p_k).

    A coefficient is dropped when it is below ``cleanup`` times the summed
    magnitude of its own contributions, i.e. zero up to rounding.  Tiny
    top-degree coefficients (Lagrange leading terms) are kept, since they
    dominate far outside the block.

    The monomial basis is badly conditioned: in double precision the
    expansion reproduces the block to ~1e-13 for N = 4 but only ~1e-4 for
    N = 12.  The ladder form remains the exact representation.
    """
    total: dict = {}
    weight: dict = {}
    for term in p.terms:
        per_mode = []
        for factor in term.factors:
            sym: dict = {}
            for (m, n), c in _normal_monomials(factor).items():
                for key, val in _symbol_of_normal(m, n):
                    sym[key] = sym.get(key, 0) + float(c) * val
            per_mode.append(sym)
        for combo in itertools.product(*(d.items() for d in per_mode)):
            key = tuple(k for k, _ in combo)
            val = complex(term.coeff)
            for _, v in combo:
                val *= v
            total[key] = total.get(key, 0) + val
            weight[key] = weight.get(key, 0.0) + abs(val)
    monomials = {k: v for k, v in total.items() if abs(v) > cleanup * weight[k]}
    return QPPolynomial(p.modes, monomials)


@lru_cache(maxsize=None)
def _normal_of_symbol(qexp: int, pexp: int) -> tuple:
    """Normal-ordered form of the Weyl-ordered q^qexp p^pexp.

    Inverse of the map in :func:`_symbol_of_normal`:
    {(a^dag)^m a^n}_Weyl = sum_t t! C(m,t) C(n,t) (1/2)^t (a^dag)^(m-t) a^(n-t).
    """
    # q = (alpha + conj(alpha))/sqrt2, p = (alpha - conj(alpha))/(i sqrt2)
    sym: dict = {}
    for a in range(qexp + 1):
        ca = math.comb(qexp, a)
        for b in range(pexp + 1):
            cb = math.comb(pexp, b) * (-1) ** (pexp - b)
            # alpha^(a+b) conj(alpha)^(qexp-a + pexp-b)
            key = (qexp - a + pexp - b, a + b)
            sym[key] = sym.get(key, 0) + ca * cb
    scale = 2.0 ** (-(qexp + pexp) / 2.0) * (1j) ** (-pexp)
    normal: dict = {}
    for (m, n), c in sym.items():
        for t in range(min(m, n) + 1):
            w = math.factorial(t) * math.comb(m, t) * math.comb(n, t) * 0.5**t
            key = (m - t, n - t)
            normal[key] = normal.get(key, 0) + scale * c * w
    return tuple(normal.items())


def qp_matrix(qp: QPPolynomial, cutoffs) -> np.ndarray:
    """Dense matrix of a Weyl-ordered (q, p) polynomial, exact at every cutoff."""
    if isinstance(cutoffs, int):
        cutoffs = (cutoffs,)
    terms = []
    for key, coeff in qp.monomials.items():
        per_mode = [_normal_of_symbol(a, b) for a, b in key]
        for combo in itertools.product(*per_mode):
            val = complex(coeff)
            factors = []
            for (m, n), c in combo:
                val *= c
                factors.append(LadderFactor(m, RealPolynomial.constant(1), n))
            terms.append(Term(val, tuple(factors)))
    ham = PolyHamiltonian(qp.modes, terms, tuple(0 for _ in range(qp.modes)))
    return eval_matrix(ham, cutoffs)


# --- state preparation ------------------------------------------------------


def truncation_cutoff(target: np.ndarray, epsilon: float) -> int:
    """Smallest d with sqrt(1 - sum_{n<=d} |psi_n|^2) <= epsilon."""
    kept = np.cumsum(np.abs(target) ** 2)
    dist = np.sqrt(np.clip(1.0 - kept, 0.0, None))
    return int(np.argmax(dist <= epsilon + 1e-15))


def householder_preparation(psi: np.ndarray) -> np.ndarray:
    """Unitary whose first column is ``psi`` (a phased Householder reflection)."""
    psi = np.asarray(psi, dtype=np.complex128)
    phase = np.exp(1j * np.angle(psi[0])) if abs(psi[0]) > 0 else 1.0
    rotated = psi / phase
    w = -rotated.copy()
    w[0] += 1.0
    norm_sq = float(np.vdot(w, w).real)
    refl = np.eye(len(psi), dtype=np.complex128)
    if norm_sq > 1e-30:
        refl -= 2.0 * np.outer(w, w.conj()) / norm_sq
    return phase * refl


@dataclass
class PreparedState:
    hamiltonian: PolyHamiltonian
    cutoff: int
    truncated_state: np.ndarray
    generator: np.ndarray


def prepare_state(target, epsilon: float) -> tuple[PolyHamiltonian, int]:
    """Polynomial Hamiltonian whose evolution maps |0> to the truncated target.

    Returns ``(P, d_eps)``; see :func:`prepare_state_details` for the
    intermediate objects.
    """
    prep = prepare_state_details(target, epsilon)
    return prep.hamiltonian, prep.cutoff


def prepare_state_details(target, epsilon: float) -> PreparedState:
    if not (0.0 < epsilon < 1.0):
        raise ContractViolation("epsilon must lie in (0, 1)")
    psi = np.asarray(target, dtype=np.complex128).ravel()
    norm = np.linalg.norm(psi)
    if not np.isfinite(norm) or norm == 0.0:
        raise ContractViolation("target state has zero or non-finite norm")
    psi = psi / norm
    d = truncation_cutoff(psi, epsilon)
    kept = psi[: d + 1] / np.linalg.norm(psi[: d + 1])
    unitary = householder_preparation(kept)
    generator = principal_log_unitary(unitary)
    return PreparedState(synth_hermitian(generator), d, kept, generator)
