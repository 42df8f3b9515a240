"""Certified finite-dimensional truncation of physical unitaries.

Pipeline: :func:`cutoff_params` picks the input cutoff M and output cutoff N
from the energy bound E and accuracy eps; :func:`gram_check` measures the
near-orthonormality of the truncated columns u_0..u_M; :func:`truncate_unitary`
orthonormalises them by Householder QR; :func:`certify` tries to falsify the
resulting accuracy claim on sampled energy-constrained states.

Distances here are Schatten-1 norms ||rho - sigma||_1 between pure states.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import __version__
from .errors import CertificateFailure, ContractViolation, PhysicalityError, TheoremViolation
from .oracles import UnitaryOracle

SLACK = 1e-10


def cutoff_params(E: float, epsilon: float, oracle: UnitaryOracle) -> tuple[int, int]:
    """M = ceil(64 E / eps^2), N = ceil(4 E_U(M) (2 + sqrt(12(12 + 9M)))^2 / eps^2).

    M is raised to at least 2, where delta < 1/(2M) implies the delta <= 3/8
    used by the entry bounds.
    """
    if not E > 0:
        raise ContractViolation("energy bound must be positive")
    if not (0 < epsilon <= 1):
        raise ContractViolation("epsilon must lie in (0, 1]")
    M = max(2, math.ceil(64.0 * E / epsilon**2 - 1e-9))
    profile = oracle.energy_profile(M)
    if not np.isfinite(profile):
        raise PhysicalityError(f"{oracle.name}: non-finite energy profile at M={M}")
    factor = (2.0 + math.sqrt(12.0 * (12.0 + 9.0 * M))) ** 2
    N = max(M, math.ceil(4.0 * profile * factor / epsilon**2 - 1e-9))
    return M, N


def composite_bound(E: float, M: int, N: int, profile_M: float) -> float:
    """4 sqrt(E/M) + sqrt(E_U(M)/N) (2 + sqrt(12(12 + 9M)))."""
    return 4.0 * math.sqrt(E / M) + math.sqrt(profile_M / N) * (2.0 + math.sqrt(12.0 * (12.0 + 9.0 * M)))


@dataclass
class GramReport:
    delta: float
    max_offdiag: float
    min_diag: float
    max_diag: float
    proj_max: float


def gram_check(oracle: UnitaryOracle, M: int, N: int, strict: bool = True) -> GramReport:
    """Measure the Gram matrix of the columns u_0..u_M of Pi_N U Pi_M.

    Checks |<u_i|u_j>| <= delta, 1 - delta <= <u_k|u_k> <= 1 and
    <u_j|P_j|u_j> <= delta with delta = E_U(M)/N, where P_j projects onto
    span(u_0..u_{j-1}).
    """
    if N < M:
        raise ContractViolation(f"N={N} must be at least M={M}")
    delta = oracle.energy_profile(M) / N
    if M > 0 and delta * 2 * M >= 1:
        raise ContractViolation(f"delta={delta:.4g} violates delta < 1/(2M) with M={M}")
    cols = oracle.block(N, M)
    gram = cols.conj().T @ cols
    diag = np.real(np.diag(gram))
    off = np.abs(gram - np.diag(np.diag(gram)))
    max_offdiag = float(off.max(initial=0.0))
    # <u_j|P_j|u_j> is the squared norm of column j of R above the diagonal
    r = scipy.linalg.qr(cols, mode="r")[0]
    proj = [float(np.sum(np.abs(r[:j, j]) ** 2)) for j in range(M + 1)]
    report = GramReport(delta, max_offdiag, float(diag.min()), float(diag.max()), max(proj))
    if strict:
        if max_offdiag > delta + SLACK:
            raise CertificateFailure(f"|<u_i|u_j>| = {max_offdiag:.3e} exceeds delta = {delta:.3e}")
        if report.min_diag < 1 - delta - SLACK or report.max_diag > 1 + SLACK:
            raise CertificateFailure(f"<u_k|u_k> outside [1 - delta, 1] (delta = {delta:.3e})")
        if report.proj_max > delta + SLACK:
            raise CertificateFailure(f"<u_j|P_j|u_j> = {report.proj_max:.3e} exceeds delta = {delta:.3e}")
    return report


@dataclass
class EmbeddedUnitary:
    """V_N = block (+) identity on span{|0>..|cutoff>}.

    ``block`` acts on the first ``block.shape[0]`` levels.  Rows of Pi_N U Pi_M
    beyond the oracle's support are zero, so Householder QR leaves those
    levels untouched and V_N is exactly of this form.
    """

    block: np.ndarray
    cutoff: int

    @property
    def block_cutoff(self) -> int:
        return self.block.shape[0] - 1

    def apply(self, states: np.ndarray) -> np.ndarray:
        """(V_N (+) I) on the columns of ``states``; states beyond the cutoff pass through."""
        states = np.asarray(states, dtype=np.complex128)
        b = self.block.shape[0]
        if states.shape[0] < b:
            pad = [(0, b - states.shape[0])] + [(0, 0)] * (states.ndim - 1)
            states = np.pad(states, pad)
        out = states.copy()
        out[:b] = self.block @ states[:b]
        return out

    def dense(self, cutoff: int | None = None) -> np.ndarray:
        cutoff = self.cutoff if cutoff is None else cutoff
        if cutoff > 5000:
            raise ContractViolation(f"refusing to materialise a {cutoff + 1}-dimensional unitary")
        out = np.eye(cutoff + 1, dtype=np.complex128)
        b = min(self.block.shape[0], cutoff + 1)
        out[:b, :b] = self.block[:b, :b]
        return out


def _householder_qr(cols: np.ndarray, M: int):
    q, r = scipy.linalg.qr(cols, mode="full")
    # column phases so that diag(R) is real and non-negative (Gram-Schmidt convention)
    d = np.diag(r[: M + 1, : M + 1]).copy()
    phases = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    q[:, : M + 1] *= phases[None, :]
    r[: M + 1] *= phases.conj()[:, None]
    return q, r[: M + 1, : M + 1]


@dataclass
class EntryBounds:
    min_diag: float
    max_diag: float
    max_offdiag: float


def r_entry_bounds(r: np.ndarray) -> EntryBounds:
    diag = np.real(np.diag(r))
    off = np.abs(r - np.diag(np.diag(r)))
    return EntryBounds(float(diag.min()), float(diag.max()), float(off.max(initial=0.0)))


def truncate_unitary(oracle: UnitaryOracle, M: int, N: int, delta: float | None = None):
    """Householder QR of Pi_N U Pi_M, completed to a unitary V_N on H_N.

    Returns:
        ``(V_N, R)`` where ``V_N`` is an :class:`EmbeddedUnitary` and ``R`` is
        the (M+1)x(M+1) upper-triangular factor with non-negative diagonal.
    """
    if N < M:
        raise ContractViolation(f"N={N} must be at least M={M}")
    delta = oracle.energy_profile(M) / N if delta is None else delta
    cols = oracle.block(N, M)
    if cols.shape[0] < M + 1:
        cols = np.vstack([cols, np.zeros((M + 1 - cols.shape[0], M + 1), dtype=np.complex128)])
    q, r = _householder_qr(cols, M)
    floor = math.sqrt(max(0.0, 1.0 - 2.0 * delta)) - 1e-8
    if np.real(np.diag(r)).min() < floor:
        raise CertificateFailure(
            f"rank deficiency: min diag(R) = {np.real(np.diag(r)).min():.3e} < sqrt(1 - 2 delta)"
        )
    return EmbeddedUnitary(q, N), r


# --- sampling ---------------------------------------------------------------


def _energy(states: np.ndarray) -> np.ndarray:
    n = np.arange(states.shape[0], dtype=np.float64)
    return np.real(np.einsum("ks,k,ks->s", states.conj(), n, states))


def clamp_energy(states: np.ndarray, E: float, rng: np.random.Generator | None = None) -> np.ndarray:
    """Mix each column with the vacuum so that <n> <= E; keeps columns normalised.

    Since n is diagonal there are no vacuum cross terms:
    <n>(sqrt(1-t)|0> + sqrt(t) chi) = t <n>(chi) for chi orthogonal to |0>.
    """
    states = states / np.linalg.norm(states, axis=0, keepdims=True)
    energy = _energy(states)
    over = energy > E
    if not np.any(over):
        return states
    sub = states[:, over]
    vac = sub[0].copy()
    chi = sub.copy()
    chi[0] = 0.0
    chi_norm = np.linalg.norm(chi, axis=0)
    chi = chi / chi_norm
    chi_energy = _energy(chi)
    scale = np.ones(sub.shape[1]) if rng is None else rng.uniform(0.5, 1.0, sub.shape[1])
    t = np.minimum(1.0, E / chi_energy) * scale
    vac_phase = np.where(np.abs(vac) > 0, vac / np.where(np.abs(vac) > 0, np.abs(vac), 1), 1.0)
    mixed = chi * np.sqrt(t)[None, :]
    mixed[0] = np.sqrt(1.0 - t) * vac_phase
    states = states.copy()
    states[:, over] = mixed
    return states


def coherent_state(alpha: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff + 1)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    mag = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha) + 1e-300) - 0.5 * log_fact)
    if alpha == 0:
        mag = (n == 0).astype(float)
    vec = mag * np.exp(1j * np.angle(alpha) * n)
    return vec / np.linalg.norm(vec)


def sample_states(E: float, cutoff: int, count: int, rng: np.random.Generator, markers=()) -> np.ndarray:
    """Random and adversarial states on span{|0>..|cutoff>} with <n> <= E.

    ``markers`` lists levels (e.g. M, M+1, N+1) at which adversarial seeds
    place the largest tail mass compatible with the energy bound.
    """
    seeds = []
    base = int(math.floor(E))
    for alpha_phase in np.linspace(0, 2 * np.pi, 4, endpoint=False):
        seeds.append(coherent_state(math.sqrt(E) * np.exp(1j * alpha_phase), cutoff))
    for level in sorted({m for m in markers if 0 < m <= cutoff} | {cutoff}):
        if level <= base:
            continue
        mass = min(1.0, (E - base) / (level - base))
        for phase in (0.0, np.pi / 2):
            vec = np.zeros(cutoff + 1, dtype=np.complex128)
            vec[base] = math.sqrt(1 - mass)
            vec[level] = math.sqrt(mass) * np.exp(1j * phase)
            seeds.append(vec)
            # same tail over a superposition of low levels
            low = coherent_state(math.sqrt(max(E - mass * level, 0.0)) * np.exp(1j * phase), cutoff)
            low[level:] = 0
            low = low / np.linalg.norm(low) * math.sqrt(1 - mass)
            low[level] = math.sqrt(mass)
            seeds.append(low)
    seeds = np.array(seeds, dtype=np.complex128).T
    n_random = max(0, count - seeds.shape[1])
    if n_random:
        widths = rng.integers(1, cutoff + 1, size=n_random)
        rates = rng.uniform(0.0, 1.0, size=n_random)
        levels = np.arange(cutoff + 1)[:, None]
        envelope = np.where(levels <= widths[None, :], rates[None, :] ** (levels / max(1.0, E + 1)), 0.0)
        raw = (rng.normal(size=(cutoff + 1, n_random)) + 1j * rng.normal(size=(cutoff + 1, n_random)))
        raw = raw * envelope
        raw[0] += 1e-12
        seeds = np.hstack([clamp_energy(seeds, E), clamp_energy(raw, E, rng)])
    else:
        seeds = clamp_energy(seeds, E)
    return seeds


def pure_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """||xx^H - yy^H||_1 column-wise, valid for unnormalised vectors."""
    rows = max(x.shape[0], y.shape[0])
    if x.shape[0] < rows:
        x = np.pad(x, [(0, rows - x.shape[0])] + [(0, 0)] * (x.ndim - 1))
    if y.shape[0] < rows:
        y = np.pad(y, [(0, rows - y.shape[0])] + [(0, 0)] * (y.ndim - 1))
    nx = np.sum(np.abs(x) ** 2, axis=0)
    ny = np.sum(np.abs(y) ** 2, axis=0)
    ov = np.sum(x.conj() * y, axis=0)
    # (nx + ny)^2 - 4|ov|^2 = (nx - ny)^2 + 4 nx |y - (ov/nx) x|^2, free of cancellation
    coef = np.divide(ov, nx, out=np.zeros_like(ov), where=nx > 0)
    resid = np.sum(np.abs(y - coef * x) ** 2, axis=0)
    return np.sqrt((nx - ny) ** 2 + 4.0 * nx * resid)


def _local_ascent(score, psi, E, rng, steps=150, step=0.2):
    best = psi[:, None]
    best_val = float(score(best)[0])
    for _ in range(steps):
        batch = best + step * (rng.normal(size=(psi.shape[0], 8)) + 1j * rng.normal(size=(psi.shape[0], 8)))
        batch = clamp_energy(batch, E)
        vals = score(batch)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best, best_val = batch[:, i : i + 1], float(vals[i])
        else:
            step *= 0.9
    return best_val


@dataclass
class TruncationCertificate:
    E: float
    epsilon: float
    M: int
    N: int
    delta: float
    gram_max_offdiag: float
    gram_min_diag: float
    sampled_worst_distance: float
    proj_max: float = 0.0
    r_min_diag: float = 1.0
    r_max_offdiag: float = 0.0
    profile_M: float = 0.0
    analytic_bound: float = 0.0
    samples: int = 0
    sample_cutoff: int = 0
    seed: int = 0
    oracle: str = ""
    version: str = field(default=__version__)

    def violations(self) -> list[str]:
        """Broken invariants, each tagged with the inequality it refers to."""
        out = []
        if self.M > 0 and not self.delta < 1.0 / (2 * self.M):
            out.append(f"delta < 1/2M violated: delta={self.delta:.6g}, 1/2M={1 / (2 * self.M):.6g}")
        if self.gram_max_offdiag > self.delta + SLACK:
            out.append("|<u_i|u_j>| <= delta violated")
        if self.gram_min_diag < 1 - self.delta - SLACK:
            out.append("<u_k|u_k> >= 1 - delta violated")
        if self.proj_max > self.delta + SLACK:
            out.append("<u_j|P_j|u_j> <= delta violated")
        if self.r_min_diag < math.sqrt(max(0.0, 1 - 2 * self.delta)) - 1e-8:
            out.append("<e_k|u_k> >= sqrt(1 - 2 delta) violated")
        if self.r_max_offdiag > 4 * self.delta + SLACK:
            out.append("|<e_i|u_j>| <= 4 delta violated")
        if self.sampled_worst_distance > self.epsilon:
            out.append(
                f"sampled distance {self.sampled_worst_distance:.4g} exceeds epsilon {self.epsilon:.4g}"
            )
        return out

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise CertificateFailure("; ".join(problems))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict) -> "TruncationCertificate":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in payload.items() if k in known})


def default_sample_cutoff(M: int, N: int) -> int:
    return min(N + 8, max(2 * M, M + 64))


def sampled_distances(oracle, v_n, states: np.ndarray) -> np.ndarray:
    return pure_distance(oracle.apply(states), v_n.apply(states))


def certify(
    oracle: UnitaryOracle,
    v_n,
    E: float,
    epsilon: float,
    samples: int = 2000,
    *,
    M: int,
    N: int,
    seed: int = 0,
    gram: GramReport | None = None,
    r: np.ndarray | None = None,
    sample_cutoff: int | None = None,
    ascent_steps: int = 150,
) -> TruncationCertificate:
    """Falsification test of the accuracy claim for (V_N (+) I).

    Draws ``samples`` energy-constrained states (random plus adversarial
    seeds), measures ||U psi psi^H U^H - V psi psi^H V^H||_1 and refines the
    worst one by local ascent.  Raises :class:`TheoremViolation` when the
    worst measured distance exceeds ``epsilon``.
    """
    if isinstance(v_n, np.ndarray):
        v_n = EmbeddedUnitary(v_n, v_n.shape[0] - 1)
    rng = np.random.default_rng(seed)
    cutoff = default_sample_cutoff(M, N) if sample_cutoff is None else sample_cutoff
    markers = (M, M + 1, N, N + 1)
    states = sample_states(E, cutoff, samples, rng, markers=markers)
    dists = sampled_distances(oracle, v_n, states)
    worst = int(np.argmax(dists))
    refined = _local_ascent(
        lambda s: sampled_distances(oracle, v_n, s), states[:, worst], E, rng, steps=ascent_steps
    )
    worst_distance = max(float(dists[worst]), refined)
    profile = oracle.energy_profile(M)
    bounds = r_entry_bounds(r) if r is not None else EntryBounds(1.0, 1.0, 0.0)
    cert = TruncationCertificate(
        E=float(E),
        epsilon=float(epsilon),
        M=int(M),
        N=int(N),
        delta=profile / N,
        gram_max_offdiag=gram.max_offdiag if gram else 0.0,
        gram_min_diag=gram.min_diag if gram else 1.0,
        sampled_worst_distance=worst_distance,
        proj_max=gram.proj_max if gram else 0.0,
        r_min_diag=bounds.min_diag,
        r_max_offdiag=bounds.max_offdiag,
        profile_M=profile,
        analytic_bound=composite_bound(E, M, N, profile),
        samples=int(states.shape[1]),
        sample_cutoff=int(cutoff),
        seed=int(seed),
        oracle=oracle.name,
    )
    if worst_distance > epsilon:
        raise TheoremViolation(
            f"{oracle.name}: sampled distance {worst_distance:.4g} exceeds epsilon {epsilon:.4g}"
        )
    return cert


@dataclass
class Truncation:
    v_n: EmbeddedUnitary
    r: np.ndarray
    gram: GramReport
    certificate: TruncationCertificate


def effective_dimension(
    oracle: UnitaryOracle, E: float, epsilon: float, samples: int = 2000, seed: int = 0
) -> Truncation:
    """Full chain: cutoffs, Gram check, QR truncation and sampled certificate."""
    M, N = cutoff_params(E, epsilon, oracle)
    gram = gram_check(oracle, M, N)
    v_n, r = truncate_unitary(oracle, M, N, delta=gram.delta)
    cert = certify(oracle, v_n, E, epsilon, samples, M=M, N=N, seed=seed, gram=gram, r=r)
    cert.validate()
    return Truncation(v_n, r, gram, cert)
