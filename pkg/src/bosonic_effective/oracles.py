"""Column access to physical unitaries in the Fock basis.

An oracle exposes the matrix elements <i|U|j> and an upper bound on the
energy profile E_U(n) = sup_{psi in H_n} <psi|U^dag n U|psi>.  Oracles built
from a truncated generator compute U at a reference cutoff that grows on
demand; rows beyond the reference cutoff are treated as zero and the
declared tail allowance is added to the profile.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .errors import ContractViolation, PhysicalityError, ResourceLimitError
from .fock import as_unitary, matrix_from_json

MAX_REFERENCE_CUTOFF = 6000
EDGE_TOLERANCE = 1e-15
SUPPORT_TOLERANCE = 1e-16


class UnitaryOracle:
    """Base class; subclasses implement :meth:`block` and :meth:`energy_profile`."""

    name = "oracle"

    def block(self, row_cutoff: int, col_cutoff: int) -> np.ndarray:
        """Columns 0..col_cutoff restricted to rows 0..row_cutoff.

        May return fewer than ``row_cutoff + 1`` rows; omitted rows are zero
        to working precision.
        """
        raise NotImplementedError

    def energy_profile(self, n: int) -> float:
        raise NotImplementedError

    def column(self, j: int, row_cutoff: int) -> np.ndarray:
        blk = self.block(row_cutoff, j)[:, j]
        out = np.zeros(row_cutoff + 1, dtype=np.complex128)
        out[: len(blk)] = blk
        return out

    def apply(self, states: np.ndarray) -> np.ndarray:
        """U applied to the columns of ``states`` (shape (K+1,) or (K+1, S))."""
        states = np.asarray(states, dtype=np.complex128)
        k = states.shape[0] - 1
        blk = self.block(self.output_rows(k), k)
        return blk @ states

    def output_rows(self, col_cutoff: int) -> int:
        """Row cutoff large enough to hold U|n> for n <= col_cutoff."""
        return col_cutoff

    def _check_profile(self, n: int, value: float) -> float:
        if not np.isfinite(value) or value < 0:
            raise PhysicalityError(f"{self.name}: energy profile at n={n} is {value!r}")
        return float(value)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class DiagonalOracle(UnitaryOracle):
    """U|n> = exp(i phase(n)) |n>; the energy profile is exactly n."""

    def __init__(self, name: str, phase):
        self.name = name
        self._phase = phase

    def phases(self, upto: int) -> np.ndarray:
        return np.array([self._phase(n) for n in range(upto + 1)], dtype=np.float64)

    def block(self, row_cutoff, col_cutoff):
        rows = min(row_cutoff, col_cutoff)
        out = np.zeros((rows + 1, col_cutoff + 1), dtype=np.complex128)
        idx = np.arange(rows + 1)
        out[idx, idx] = np.exp(1j * self.phases(rows))
        return out

    def energy_profile(self, n):
        return self._check_profile(n, float(n))


class GeneratorOracle(UnitaryOracle):
    """U = exp(iH) with H given as a sparse function of the truncation cutoff.

    Only the requested columns are computed, by ``expm_multiply`` on the
    truncated generator at a reference cutoff.  The reference cutoff doubles
    until the requested columns have negligible weight near the truncation
    edge.
    """

    def __init__(self, name: str, generator, tail_allowance: float = 1e-6, min_reference: int = 200):
        self.name = name
        self._generator = generator
        self.tail_allowance = tail_allowance
        self.min_reference = min_reference
        self._reference = -1
        self._columns = None
        self._profile: dict[int, float] = {}

    @property
    def reference_cutoff(self) -> int:
        return self._reference

    def _ensure(self, col_cutoff: int) -> np.ndarray:
        if self._columns is not None and self._columns.shape[1] > col_cutoff:
            return self._columns
        ncols = max(col_cutoff + 1, 2 * (self._columns.shape[1] if self._columns is not None else 0))
        cutoff = int(math.ceil(max(self.min_reference, 2 * ncols + 100, self._reference) / 50.0) * 50)
        while True:
            if cutoff > MAX_REFERENCE_CUTOFF:
                raise ResourceLimitError(
                    f"{self.name}: reference cutoff {cutoff} exceeds limit {MAX_REFERENCE_CUTOFF}"
                )
            gen = scipy.sparse.csr_matrix(self._generator(cutoff))
            start = np.zeros((cutoff + 1, ncols), dtype=np.complex128)
            start[np.arange(ncols), np.arange(ncols)] = 1.0
            cols = scipy.sparse.linalg.expm_multiply(1j * gen, start)
            if np.max(np.abs(cols[cutoff - 20 :])) < EDGE_TOLERANCE:
                break
            cutoff *= 2
        self._columns, self._reference = cols, cutoff
        return cols

    def support(self, col_cutoff: int) -> int:
        """Last row with a non-negligible entry in columns 0..col_cutoff."""
        u = self._ensure(col_cutoff)
        rows = np.flatnonzero(np.max(np.abs(u[:, : col_cutoff + 1]), axis=1) > SUPPORT_TOLERANCE)
        return int(rows[-1]) if rows.size else 0

    def output_rows(self, col_cutoff):
        return self.support(col_cutoff)

    def block(self, row_cutoff, col_cutoff):
        u = self._ensure(col_cutoff)
        rows = min(row_cutoff, self.support(col_cutoff))
        return u[: rows + 1, : col_cutoff + 1].copy()

    def energy_profile(self, n):
        if n not in self._profile:
            u = self._ensure(n)
            cols = u[:, : n + 1]
            number = np.arange(u.shape[0], dtype=np.float64)
            gram = cols.conj().T @ (number[:, None] * cols)
            top = float(np.linalg.eigvalsh(0.5 * (gram + gram.conj().T))[-1])
            self._profile[n] = self._check_profile(n, top + self.tail_allowance)
        return self._profile[n]


class MatrixOracle(UnitaryOracle):
    """Oracle backed by a fixed matrix at a declared reference cutoff.

    ``profile`` tabulates the energy-profile bound for n = 0, 1, ...; rows
    and columns beyond the reference cutoff are not available.
    """

    def __init__(self, name: str, matrix: np.ndarray, profile):
        self.name = name
        self.matrix = as_unitary(matrix, tol=1e-8)
        self.profile = [float(v) for v in profile]
        if any(b < a for a, b in zip(self.profile, self.profile[1:])):
            raise PhysicalityError(f"{name}: tabulated energy profile is not non-decreasing")

    @property
    def reference_cutoff(self) -> int:
        return self.matrix.shape[0] - 1

    def block(self, row_cutoff, col_cutoff):
        if col_cutoff > self.reference_cutoff:
            raise ResourceLimitError(
                f"{self.name}: column {col_cutoff} beyond reference cutoff {self.reference_cutoff}"
            )
        return self.matrix[: min(row_cutoff, self.reference_cutoff) + 1, : col_cutoff + 1].copy()

    def output_rows(self, col_cutoff):
        return self.reference_cutoff

    def energy_profile(self, n):
        if n >= len(self.profile):
            raise PhysicalityError(f"{self.name}: energy profile not tabulated at n={n}")
        return self._check_profile(n, self.profile[n])

    @classmethod
    def from_json(cls, payload: dict, name: str | None = None) -> "MatrixOracle":
        try:
            matrix = matrix_from_json(payload["matrix"])
            profile = payload["energy_profile"]
        except KeyError as exc:
            raise ContractViolation(f"oracle file is missing {exc}") from exc
        return cls(name or payload.get("name", "file"), matrix, profile)

    def to_json(self) -> dict:
        from .fock import matrix_to_json

        return {"name": self.name, "matrix": matrix_to_json(self.matrix), "energy_profile": self.profile}


def sparse_annihilation(cutoff: int):
    return scipy.sparse.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=np.float64)), 1, format="csr")


def identity_oracle() -> DiagonalOracle:
    oracle = DiagonalOracle("identity", lambda n: 0.0)
    return oracle


def rotation_oracle(theta: float = 0.5) -> DiagonalOracle:
    return DiagonalOracle(f"rotation:{theta:g}", lambda n: theta * n)


def kerr_oracle(theta: float = 0.3) -> DiagonalOracle:
    return DiagonalOracle(f"kerr:{theta:g}", lambda n: theta * n * n)


def displacement_oracle(alpha: complex = 0.3) -> GeneratorOracle:
    """D(alpha) = exp(alpha a^dag - conj(alpha) a) = exp(iH), H = -i(alpha a^dag - conj(alpha) a)."""

    def generator(cutoff):
        a = sparse_annihilation(cutoff)
        return -1j * (alpha * a.T - np.conj(alpha) * a)

    return GeneratorOracle(f"displacement:{alpha:g}", generator)


def squeezing_oracle(r: float = 0.2) -> GeneratorOracle:
    """S(r) = exp((r/2)(a^2 - a^dag^2)) = exp(iH), H = -i(r/2)(a^2 - a^dag^2)."""

    def generator(cutoff):
        a = sparse_annihilation(cutoff)
        return -0.5j * r * (a @ a - a.T @ a.T)

    return GeneratorOracle(f"squeezing:{r:g}", generator)


_FACTORIES = {
    "identity": lambda *p: identity_oracle(),
    "rotation": rotation_oracle,
    "kerr": kerr_oracle,
    "displacement": displacement_oracle,
    "squeezing": squeezing_oracle,
}


def builtin_oracles() -> list[UnitaryOracle]:
    return [
        identity_oracle(),
        rotation_oracle(0.5),
        kerr_oracle(0.3),
        displacement_oracle(0.3),
        squeezing_oracle(0.2),
    ]


def get_oracle(spec: str) -> UnitaryOracle:
    """Resolve ``name[:param]`` (e.g. ``displacement:0.3``) or a JSON oracle file."""
    path = Path(spec)
    if spec.endswith(".json") or path.is_file():
        if not path.is_file():
            raise ContractViolation(f"oracle file {spec} not found")
        return MatrixOracle.from_json(json.loads(path.read_text()), name=path.stem)
    name, _, param = spec.partition(":")
    if name not in _FACTORIES:
        raise ContractViolation(f"unknown oracle {name!r}; choose from {sorted(_FACTORIES)}")
    if param:
        return _FACTORIES[name](float(param))
    return _FACTORIES[name]()
