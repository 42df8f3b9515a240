"""End-to-end compilation of a physical unitary into one polynomial Hamiltonian.

Stages: certified truncation to V_N, principal logarithm of V_N's non-trivial
block, block-diagonal polynomial synthesis, then three checks on the result:

(a) the evaluated polynomial reproduces the generator on its block and has
    zero cross blocks;
(b) the exponential of the evaluated polynomial reproduces V_N on the block;
(c) the compiled unitary is eps-close to the oracle on sampled energy-E states.

V_N acts as the identity beyond the rows touched by the oracle's first M + 1
columns, so only that block (cutoff b <= N) is synthesised.  The remaining
columns of V_N are an arbitrary orthonormal completion, so exp(iP) restricted
to H_N is an equally valid truncation.
"""

from __future__ import annotations

import contextlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BosonicError, ConfigurationError, ContractViolation, ResourceLimitError
from .fock import exp_i_hermitian, principal_log_unitary
from .oracles import get_oracle
from .polyham import PolyHamiltonian, block_residuals, eval_matrix, synth_hermitian
from .truncation import (
    TruncationCertificate,
    _local_ascent,
    certify,
    cutoff_params,
    default_sample_cutoff,
    gram_check,
    pure_distance,
    sample_states,
    truncate_unitary,
)

DEFAULT_MAX_BLOCK_CUTOFF = 96


@dataclass
class PipelineConfig:
    """Inputs of :func:`compile_physical_unitary`.

    ``oracle`` is a builtin spec such as ``"displacement:0.3"`` or the path
    of an oracle JSON file.
    """

    oracle: str
    E: float
    epsilon: float
    samples: int = 2000
    rng_seed: int = 0
    poly_path: str | None = None
    report_path: str | None = None
    tol_block: float = 1e-10
    tol_exp: float = 1e-9
    tol_cross: float = 1e-12
    max_block_cutoff: int = DEFAULT_MAX_BLOCK_CUTOFF

    def __post_init__(self):
        if not self.E > 0:
            raise ConfigurationError("E must be positive")
        if not 0 < self.epsilon <= 1:
            raise ConfigurationError("epsilon must lie in (0, 1]")
        if self.samples < 1:
            raise ConfigurationError("samples must be at least 1")


@dataclass
class CompilationReport:
    """Residuals and certificate of one compilation (or re-verification)."""

    oracle: str
    E: float
    epsilon: float
    seed: int
    status: str = "passed"
    certificate: dict = field(default_factory=dict)
    M: int = 0
    N: int = 0
    generator_cutoff: int = 0
    degree: int = 0
    verification_cutoff: int = 0
    block_residual: float = 0.0
    cross_residual: float = 0.0
    exp_residual: float = 0.0
    sampled_worst_distance: float = 0.0
    samples: int = 0
    complement: str = "polynomial"
    tolerances: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    version: str = __version__
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "passed"

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self, timings: bool = True) -> str:
        payload = self.to_json()
        if not timings:
            payload.pop("timings")
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, payload: dict) -> "CompilationReport":
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in payload.items() if k in known})


@contextlib.contextmanager
def stage(name: str, timings: dict):
    """Time a stage and prefix any library error with the stage name."""
    t0 = time.perf_counter()
    try:
        yield
    except BosonicError as exc:
        exc.args = (f"[{name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        exc.stage = name
        raise
    finally:
        timings[name] = round(time.perf_counter() - t0, 6)


def _blockwise_exponential(matrix: np.ndarray, b: int, tol_cross: float):
    """exp(i matrix) from its two diagonal blocks once the cross blocks vanish.

    Returns ``(top, complement)``; ``complement`` is None when the far block
    has non-finite entries (possible for large b, where it is irrelevant).
    """
    cross = max(np.max(np.abs(matrix[: b + 1, b + 1 :]), initial=0.0), np.max(np.abs(matrix[b + 1 :, : b + 1]), initial=0.0))
    if not cross <= tol_cross:
        raise ContractViolation(f"cross blocks are not zero ({cross:.3e}); blockwise exponential invalid")
    top = exp_i_hermitian(matrix[: b + 1, : b + 1])
    far = matrix[b + 1 :, b + 1 :]
    if far.size and not np.all(np.isfinite(far)):
        return top, None
    far = 0.5 * (far + far.conj().T)
    return top, exp_i_hermitian(far) if far.size else np.zeros((0, 0))


def _compiled_action(top: np.ndarray, complement):
    """Operator acting as ``top`` on the block and ``complement`` (or I) beyond it."""
    b = top.shape[0]

    def apply(states: np.ndarray) -> np.ndarray:
        out = np.array(states, dtype=np.complex128)
        if out.shape[0] < b:
            out = np.pad(out, [(0, b - out.shape[0]), (0, 0)])
        out[:b] = top @ out[:b]
        if complement is not None and complement.size:
            k = min(out.shape[0] - b, complement.shape[0])
            out[b : b + k] = complement[:k, :k] @ out[b : b + k]
        return out

    return apply


def _sampled_distance(oracle, action, E, cutoff, samples, seed, markers):
    rng = np.random.default_rng(seed)
    states = sample_states(E, cutoff, samples, rng, markers=markers)

    def score(s):
        return pure_distance(oracle.apply(s), action(s))

    dists = score(states)
    worst = int(np.argmax(dists))
    return max(float(dists[worst]), _local_ascent(score, states[:, worst], E, rng)), states.shape[1]


def _check_polynomial(p, h, v_block, report, oracle, E, epsilon, samples, seed, M, N, tol):
    """Checks (a)-(c) shared by compilation and verification; fills ``report``."""
    b = h.shape[0] - 1
    degree = p.degree
    d_ver = b + degree + 2
    mat = eval_matrix(p, d_ver)
    block, cross = block_residuals(mat, h, (d_ver,), (b,))
    report.verification_cutoff = d_ver
    report.block_residual = float(block)
    report.cross_residual = float(cross)
    if not block <= tol["block"]:
        report.failures.append(f"block equality |P - H| <= {tol['block']:g} violated: {block:.3e}")
    if not cross <= tol["cross"]:
        report.failures.append(f"cross blocks |Pi_N P (1 - Pi_N)| <= {tol['cross']:g} violated: {cross:.3e}")
        return
    top, complement = _blockwise_exponential(mat, b, tol["cross"])
    report.exp_residual = float(np.max(np.abs(top - v_block)))
    if not report.exp_residual <= tol["exp"]:
        report.failures.append(f"exponential identity |e^(iP) - V_N| <= {tol['exp']:g} violated: {report.exp_residual:.3e}")
    report.complement = "polynomial" if complement is not None else "identity (complement block overflows)"
    cutoff = max(default_sample_cutoff(M, N), b + 1)
    worst, count = _sampled_distance(
        oracle, _compiled_action(top, complement), E, cutoff, samples, seed, (M, M + 1, b, b + 1)
    )
    report.sampled_worst_distance = worst
    report.samples = count
    if worst > epsilon:
        report.failures.append(f"sampled distance <= eps violated: {worst:.4g} > {epsilon:.4g}")


def _truncate(oracle, E, epsilon, samples, seed, timings):
    with stage("truncate", timings):
        M, N = cutoff_params(E, epsilon, oracle)
        gram = gram_check(oracle, M, N)
        v_n, r = truncate_unitary(oracle, M, N, delta=gram.delta)
        cert = certify(oracle, v_n, E, epsilon, samples, M=M, N=N, seed=seed, gram=gram, r=r)
        cert.validate()
    return M, N, v_n, cert


def compile_physical_unitary(config: PipelineConfig) -> tuple[CompilationReport, PolyHamiltonian]:
    """Polynomial Hamiltonian P with exp(iP) eps-close to the oracle on energy-E states.

    Writes ``config.poly_path`` and ``config.report_path`` when given.

    Raises:
        ResourceLimitError: the block of V_N exceeds ``config.max_block_cutoff``.
        BosonicError: any stage failure, its message prefixed by the stage.
    """
    timings: dict = {}
    tol = {"block": config.tol_block, "exp": config.tol_exp, "cross": config.tol_cross}
    with stage("oracle", timings):
        oracle = get_oracle(config.oracle)
    M, N, v_n, cert = _truncate(oracle, config.E, config.epsilon, config.samples, config.rng_seed, timings)
    b = v_n.block_cutoff
    if b > config.max_block_cutoff:
        raise ResourceLimitError(
            f"[synth] V_N acts non-trivially on levels 0..{b}, above the synthesis limit "
            f"{config.max_block_cutoff} (raise it with --max-block-cutoff)"
        )
    with stage("log", timings):
        v_block = v_n.block[: b + 1, : b + 1]
        h = principal_log_unitary(v_block)
    with stage("synth", timings):
        p = synth_hermitian(h)
    report = CompilationReport(
        oracle=config.oracle,
        E=float(config.E),
        epsilon=float(config.epsilon),
        seed=int(config.rng_seed),
        certificate=cert.to_json(),
        M=M,
        N=N,
        generator_cutoff=b,
        degree=p.degree,
        tolerances=tol,
    )
    with stage("verify", timings):
        _check_polynomial(p, h, v_block, report, oracle, config.E, config.epsilon, config.samples, config.rng_seed, M, N, tol)
    report.status = "failed" if report.failures else "passed"
    report.timings = timings
    if config.poly_path:
        Path(config.poly_path).write_text(json.dumps(p.to_json(), sort_keys=True) + "\n")
    if config.report_path:
        Path(config.report_path).write_text(report.dumps())
    return report, p


def verify(poly_path, report_path, samples: int | None = None, tolerances: dict | None = None) -> CompilationReport:
    """Re-check shipped artifacts without trusting any stored residual.

    The certificate's invariants are re-checked as stored (so a forged delta
    is caught), V_N is recomputed from the oracle with the stored (M, N), and
    checks (a)-(c) are re-run at cutoff b + degree + 2 with the stored seed.
    """
    timings: dict = {}
    with stage("load", timings):
        try:
            stored = CompilationReport.from_json(json.loads(Path(report_path).read_text()))
            p = PolyHamiltonian.from_json(json.loads(Path(poly_path).read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ContractViolation(f"cannot read artifacts: {exc}") from exc
        cert = TruncationCertificate.from_json(stored.certificate)
        oracle = get_oracle(stored.oracle)
    tol = {"block": 1e-10, "exp": 1e-9, "cross": 1e-12}
    tol.update(stored.tolerances or {})
    tol.update(tolerances or {})
    samples = stored.samples if samples is None else samples
    report = CompilationReport(
        oracle=stored.oracle,
        E=stored.E,
        epsilon=stored.epsilon,
        seed=stored.seed,
        certificate=cert.to_json(),
        M=cert.M,
        N=cert.N,
        degree=p.degree,
        tolerances=tol,
    )
    report.failures.extend(f"certificate: {v}" for v in cert.violations())
    with stage("truncate", timings):
        v_n, _ = truncate_unitary(oracle, cert.M, cert.N)
    b = v_n.block_cutoff
    report.generator_cutoff = b
    if p.block_cutoffs != (b,):
        report.failures.append(f"polynomial block cutoff {p.block_cutoffs} does not match V_N block cutoff {b}")
    else:
        with stage("verify", timings):
            v_block = v_n.block[: b + 1, : b + 1]
            h = principal_log_unitary(v_block)
            _check_polynomial(p, h, v_block, report, oracle, stored.E, stored.epsilon, samples, stored.seed, cert.M, cert.N, tol)
    report.status = "failed" if report.failures else "passed"
    report.timings = timings
    return report

