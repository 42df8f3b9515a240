"""Truncated Fock-space linear algebra.

Matrices are plain ``numpy`` arrays acting on span{|0>, ..., |cutoff>}; the
cutoff is ``shape[0] - 1``.  The ``as_*`` helpers validate the structural
invariants (Hermitian, unitary, normalised) and return complex128 copies.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ContractViolation, NumericalError

TOLERANCES = {
    "hermitian": 1e-12,
    "unitary": 1e-10,
    "state": 1e-12,
    "radicand": 1e-12,
}


def set_tolerances(**overrides: float) -> dict:
    """Override construction tolerances globally; returns the previous values."""
    unknown = set(overrides) - set(TOLERANCES)
    if unknown:
        raise ContractViolation(f"unknown tolerance keys: {sorted(unknown)}")
    previous = dict(TOLERANCES)
    TOLERANCES.update({k: float(v) for k, v in overrides.items()})
    return previous


def _square(matrix) -> np.ndarray:
    arr = np.array(matrix, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("matrix has non-finite entries")
    return arr


def cutoff_of(matrix: np.ndarray) -> int:
    return matrix.shape[0] - 1


def hermiticity_error(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0))


def unitarity_error(matrix: np.ndarray) -> float:
    eye = np.eye(matrix.shape[1])
    return float(np.max(np.abs(matrix.conj().T @ matrix - eye), initial=0.0))


def as_hermitian(matrix, tol: float | None = None) -> np.ndarray:
    """Validate Hermiticity and return the exactly Hermitian part.

    The tolerance is relative to ``max(1, max|A_ij|)``: evaluated polynomial
    Hamiltonians carry entries of order 1e10 in their complement block.
    """
    arr = _square(matrix)
    tol = TOLERANCES["hermitian"] if tol is None else tol
    scale = max(1.0, float(np.max(np.abs(arr), initial=0.0)))
    err = hermiticity_error(arr)
    if err > tol * scale:
        raise ContractViolation(f"matrix is not Hermitian (max |A - A^H| = {err:.3e})")
    return 0.5 * (arr + arr.conj().T)


def as_unitary(matrix, tol: float | None = None) -> np.ndarray:
    arr = _square(matrix)
    tol = TOLERANCES["unitary"] if tol is None else tol
    err = unitarity_error(arr)
    if err > tol:
        raise ContractViolation(f"matrix is not unitary (max |U^H U - I| = {err:.3e})")
    return arr


def as_state(amplitudes, tol: float | None = None) -> np.ndarray:
    vec = np.array(amplitudes, dtype=np.complex128).ravel()
    tol = TOLERANCES["state"] if tol is None else tol
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or abs(norm - 1.0) > tol:
        raise ContractViolation(f"state is not normalised (norm = {norm!r})")
    return vec


def basis_state(n: int, cutoff: int) -> np.ndarray:
    vec = np.zeros(cutoff + 1, dtype=np.complex128)
    vec[n] = 1.0
    return vec


def projector(n: int, cutoff: int) -> np.ndarray:
    """Pi_n = sum_{k<=n} |k><k| embedded at a larger cutoff."""
    return np.diag((np.arange(cutoff + 1) <= n).astype(np.complex128))


def embed(matrix: np.ndarray, cutoff: int) -> np.ndarray:
    """Place ``matrix`` in the top-left corner of a zero matrix at ``cutoff``."""
    out = np.zeros((cutoff + 1, cutoff + 1), dtype=np.complex128)
    r, c = matrix.shape
    out[:r, :c] = matrix
    return out


def direct_sum_identity(matrix: np.ndarray, cutoff: int) -> np.ndarray:
    """``matrix`` (+) I up to ``cutoff``."""
    out = np.eye(cutoff + 1, dtype=np.complex128)
    r = matrix.shape[0]
    out[:r, :r] = matrix
    return out


def ladder_matrices(cutoff: int):
    """Truncated ladder operators at ``cutoff``.

    Returns:
        ``(a, adag, n, q, p)`` with ``q = (a + adag)/sqrt(2)`` and
        ``p = (a - adag)/(i sqrt(2))``.  Couplings to |cutoff+1> are dropped.
    """
    if cutoff < 0:
        raise ContractViolation("cutoff must be non-negative")
    a = np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=np.float64)), 1).astype(np.complex128)
    adag = a.conj().T
    n = np.diag(np.arange(cutoff + 1, dtype=np.float64)).astype(np.complex128)
    q = (a + adag) / np.sqrt(2.0)
    p = (a - adag) / (1j * np.sqrt(2.0))
    return a, adag, n, q, p


def _eigh(h: np.ndarray):
    try:
        return np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(h)
        raise NumericalError(f"Hermitian eigendecomposition failed (condition number {cond:.3e})") from exc


def exp_i_hermitian(h) -> np.ndarray:
    """e^{iH} through the Hermitian eigendecomposition H = W diag(lam) W^H."""
    h = as_hermitian(h)
    lam, w = _eigh(h)
    return (w * np.exp(1j * lam)) @ w.conj().T


def _unitary_eigen(v: np.ndarray):
    # Complex Schur form of a normal matrix is diagonal with a unitary basis,
    # which stays orthonormal for degenerate eigenvalues (unlike eig).
    t, z = scipy.linalg.schur(v, output="complex")
    return np.diag(t), z


def principal_log_unitary(v) -> np.ndarray:
    """Hermitian generator H with e^{iH} = V and spectrum in [0, 2*pi)."""
    v = as_unitary(v)
    eigvals, z = _unitary_eigen(v)
    phases = np.mod(np.angle(eigvals), 2.0 * np.pi)
    phases[phases > 2.0 * np.pi - 1e-13] = 0.0
    h = (z * phases) @ z.conj().T
    return 0.5 * (h + h.conj().T)


def centered_log_unitary(v) -> np.ndarray:
    """Like :func:`principal_log_unitary` but with spectrum in (-pi, pi].

    Used for near-identity unitaries, where the generator should be small.
    """
    v = as_unitary(v)
    eigvals, z = _unitary_eigen(v)
    phases = np.angle(eigvals)
    h = (z * phases) @ z.conj().T
    return 0.5 * (h + h.conj().T)


def trace_norm(matrix: np.ndarray) -> float:
    """Schatten-1 norm of a Hermitian matrix via its eigenvalues."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (matrix + matrix.conj().T)))))


def trace_distance_pure(a, phi) -> float:
    """||A|phi><phi|A^H - |phi><phi|||_1 for normalised phi, in closed form.

    Returns sqrt((1 + <phi|A^H A|phi>)^2 - 4 |<phi|A|phi>|^2).
    """
    a = np.asarray(a, dtype=np.complex128)
    phi = as_state(phi, tol=1e-9)
    if a.ndim != 2 or a.shape[1] != phi.shape[0]:
        raise ContractViolation(f"incompatible shapes {a.shape} and {phi.shape}")
    a_phi = a @ phi
    if a.shape[0] != a.shape[1]:
        raise ContractViolation("operator must act on the state's own space")
    norm_sq = float(np.vdot(a_phi, a_phi).real)
    overlap = np.vdot(phi, a_phi)
    radicand = (1.0 + norm_sq) ** 2 - 4.0 * abs(overlap) ** 2
    if radicand < 0.0:
        if radicand < -TOLERANCES["radicand"]:
            raise NumericalError(f"negative radicand {radicand:.3e}; input contracts are broken")
        radicand = 0.0
    return float(np.sqrt(radicand))


def trace_distance_states(psi, phi) -> float:
    """D(psi, phi) = sqrt(1 - |<psi|phi>|^2) for normalised pure states.

    This is half the Schatten-1 distance between the projectors.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    if psi.shape != phi.shape:
        raise ContractViolation(f"state shapes differ: {psi.shape} vs {phi.shape}")
    fid = min(1.0, abs(np.vdot(psi, phi)) ** 2)
    return float(np.sqrt(1.0 - fid))


def gentle_measurement_bound(overlap: float) -> float:
    """Upper bound 2*sqrt(1 - Tr(Pi rho)) on ||rho - Pi rho Pi||_1."""
    slack = 1e-12
    if overlap < -slack or overlap > 1.0 + slack:
        raise ContractViolation(f"overlap {overlap!r} outside [0, 1]")
    return 2.0 * float(np.sqrt(max(0.0, 1.0 - min(overlap, 1.0))))


# --- JSON matrix format -----------------------------------------------------


def matrix_to_json(matrix: np.ndarray) -> dict:
    arr = np.asarray(matrix, dtype=np.complex128)
    flat = arr.ravel()
    return {
        "row_cutoff": int(arr.shape[0] - 1),
        "col_cutoff": int(arr.shape[1] - 1),
        # repr of a Python float round-trips exactly (up to 17 significant digits)
        "data": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(payload: dict) -> np.ndarray:
    try:
        rows = int(payload["row_cutoff"]) + 1
        cols = int(payload["col_cutoff"]) + 1
        data = np.asarray(payload["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractViolation(f"malformed matrix JSON: {exc}") from exc
    if data.shape != (rows * cols, 2):
        raise ContractViolation(f"matrix JSON has {data.shape[0]} entries, expected {rows * cols}")
    return (data[:, 0] + 1j * data[:, 1]).reshape(rows, cols)


def save_matrix(path, matrix: np.ndarray) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(matrix)))


def load_matrix(path) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text()))
