"""Qudit Solovay-Kitaev compilation over finite gate sets in SU(d).

The base case is a nearest-neighbour lookup in an epsilon-net of short gate
words.  Each recursion level corrects the current approximation W of U by a
balanced group commutator B C B^dag C^dag of the residual U W^dag, with B and C
themselves approximated one level down.  Approximations are tracked modulo
the centre of SU(d): a word approximates ``phase * product`` with ``phase`` a
d-th root of unity.

Word convention: the letters (g_0, g_1, ..., g_{L-1}) denote the product
G_{g_0} G_{g_1} ... G_{g_{L-1}}, so the last letter acts first on a state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.stats

from .errors import ConfigurationError, ContractViolation, ConvergenceFailure, NumericalError, ResourceLimitError
from .fock import as_unitary, centered_log_unitary, matrix_from_json, matrix_to_json, principal_log_unitary
from .polyham import synth_hermitian

DET_TOLERANCE = 1e-10
MAX_NET_ENTRIES = 3_000_000


def op_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, ord=2))


def project_special(u: np.ndarray) -> tuple[np.ndarray, complex]:
    """Split U = phase * V with det V = 1, using the principal d-th root of det U."""
    d = u.shape[0]
    phase = np.exp(1j * np.angle(np.linalg.det(u)) / d)
    return u / phase, complex(phase)


def centre_phases(d: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(d) / d)


def phase_distance(u: np.ndarray, v: np.ndarray) -> tuple[float, complex]:
    """min_k ||U - w^k V|| over the centre of SU(d), with the minimising phase w^k."""
    best, best_phase = math.inf, 1.0 + 0j
    for w in centre_phases(u.shape[0]):
        dist = op_norm(u - w * v)
        if dist < best:
            best, best_phase = dist, complex(w)
    return best, best_phase


# --- gate sets ----------------------------------------------------------------


@dataclass
class GateSet:
    """Finite set of det-1 unitaries over a d-level space; inverses are implicit."""

    gates: list
    names: list

    def __post_init__(self):
        if not self.gates:
            raise ContractViolation("a gate set needs at least one gate")
        if len(self.names) != len(self.gates):
            raise ContractViolation("one name per gate required")
        self.gates = [as_unitary(g) for g in self.gates]
        d = self.gates[0].shape[0]
        for name, g in zip(self.names, self.gates):
            if g.shape[0] != d:
                raise ContractViolation(f"gate {name} has dimension {g.shape[0]}, expected {d}")
            det = np.linalg.det(g)
            if abs(det - 1) > DET_TOLERANCE:
                raise ContractViolation(f"gate {name} has determinant {det:.6g}, expected 1")

    @property
    def dim(self) -> int:
        return self.gates[0].shape[0]

    def letter(self, index: int, inverted: bool) -> np.ndarray:
        g = self.gates[index]
        return g.conj().T if inverted else g

    def letters(self) -> list[tuple[int, bool]]:
        return [(i, inv) for i in range(len(self.gates)) for inv in (False, True)]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "gates": [{"name": n, "matrix": matrix_to_json(g)} for n, g in zip(self.names, self.gates)],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "GateSet":
        try:
            gates = [matrix_from_json(g["matrix"]) for g in payload["gates"]]
            names = [str(g.get("name", f"g{i}")) for i, g in enumerate(payload["gates"])]
        except (KeyError, TypeError) as exc:
            raise ContractViolation(f"malformed gate-set JSON: {exc}") from exc
        gs = cls(gates, names)
        if "dim" in payload and int(payload["dim"]) != gs.dim:
            raise ContractViolation(f"declared dim {payload['dim']} does not match gates ({gs.dim})")
        return gs


def _hadamard_t():
    h = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    t = np.diag([1, np.exp(1j * np.pi / 4)])
    return project_special(h)[0], project_special(t)[0]


def embed_two_level(u: np.ndarray, d: int, level: int) -> np.ndarray:
    """2x2 unitary acting on levels (level, level + 1) of a d-level space."""
    out = np.eye(d, dtype=np.complex128)
    out[level : level + 2, level : level + 2] = u
    return out


def qubit_gateset() -> GateSet:
    """Hadamard and T with their phases fixed so that det = 1."""
    h, t = _hadamard_t()
    return GateSet([h, t], ["H", "T"])


def qudit_gateset(d: int) -> GateSet:
    """Det-1 Hadamard and T on every adjacent pair of levels of a d-level space."""
    if d < 2:
        raise ContractViolation("qudit dimension must be at least 2")
    if d == 2:
        return qubit_gateset()
    h, t = _hadamard_t()
    gates, names = [], []
    for level in range(d - 1):
        gates += [embed_two_level(h, d, level), embed_two_level(t, d, level)]
        names += [f"H{level}{level + 1}", f"T{level}{level + 1}"]
    return GateSet(gates, names)


BUILTIN_GATESETS = {"qubit-ht": lambda: qubit_gateset(), "qutrit-ht": lambda: qudit_gateset(3)}


def get_gateset(spec: str) -> GateSet:
    """Builtin name (``qubit-ht``, ``qutrit-ht``, ``qudit-ht:<d>``) or a JSON file."""
    if spec in BUILTIN_GATESETS:
        return BUILTIN_GATESETS[spec]()
    if spec.startswith("qudit-ht:"):
        return qudit_gateset(int(spec.split(":", 1)[1]))
    path = Path(spec)
    if not path.is_file():
        raise ContractViolation(f"unknown gate set {spec!r}")
    return GateSet.from_json(json.loads(path.read_text()))


# --- words ----------------------------------------------------------------------


def invert_letters(letters) -> list:
    return [(i, not inv) for i, inv in reversed(letters)]


def word_product(letters, gateset: GateSet) -> np.ndarray:
    out = np.eye(gateset.dim, dtype=np.complex128)
    for i, inv in letters:
        out = out @ gateset.letter(i, inv)
    return out


@dataclass
class GateWord:
    """Sequence of (gate index, inverted) letters approximating ``phase * net_unitary``.

    ``errors[k]`` is the operator-norm error (modulo the centre) of the
    depth-k approximation along the main recursion chain.
    """

    indices: list
    net_unitary: np.ndarray
    phase: complex = 1.0 + 0j
    errors: list = field(default_factory=list)
    lifted: list | None = None

    def __len__(self):
        return len(self.indices)

    def to_json(self) -> dict:
        out = {
            "indices": [[int(i), bool(inv)] for i, inv in self.indices],
            "net_unitary": matrix_to_json(self.net_unitary),
            "phase": [float(np.real(self.phase)), float(np.imag(self.phase))],
            "errors": [float(e) for e in self.errors],
        }
        return out

    @classmethod
    def from_json(cls, payload: dict) -> "GateWord":
        try:
            return cls(
                indices=[(int(i), bool(inv)) for i, inv in payload["indices"]],
                net_unitary=matrix_from_json(payload["net_unitary"]),
                phase=complex(*payload.get("phase", [1.0, 0.0])),
                errors=[float(e) for e in payload.get("errors", [])],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractViolation(f"malformed word JSON: {exc}") from exc


# --- epsilon net ---------------------------------------------------------------------


def _features(mats: np.ndarray) -> np.ndarray:
    flat = mats.reshape(mats.shape[0], -1)
    return np.concatenate([flat.real, flat.imag], axis=1)


def _canonical(mats: np.ndarray) -> np.ndarray:
    """Representative of each matrix modulo the centre: maximise Re(w tr U)."""
    d = mats.shape[1]
    w = centre_phases(d)
    tr = np.trace(mats, axis1=1, axis2=2)
    k = np.argmax(np.real(tr[:, None] * w[None, :]), axis=1)
    return mats * w[k][:, None, None]


@dataclass
class NetMatch:
    letters: list
    unitary: np.ndarray
    distance: float
    phase: complex


@dataclass
class NetDictionary:
    """Enumerated short words with nearest-neighbour lookup modulo the centre.

    With ``prefix_length > 0`` a query searches the products P E of a prefix
    word P (length <= prefix_length) and an enumerated entry E, so the
    covered set grows multiplicatively.  Candidates are ranked by Frobenius
    distance, which for unitaries is a single matrix product
    (||R - E||_F^2 = 2d - 2 Re tr(R^dag E)), then re-ranked in operator norm.
    Scores are computed in single precision; the re-ranking is exact.
    """

    gateset: GateSet
    epsilon0: float
    max_length: int
    parents: np.ndarray
    letters: np.ndarray
    unitaries: np.ndarray
    lengths: np.ndarray
    prefix_length: int = 0
    validation_worst: float = math.nan

    def __post_init__(self):
        # Re tr(R^dag E) is the dot product of the real feature vectors
        self._feat_t = np.ascontiguousarray(_features(self.unitaries).T.astype(np.float32))
        self.prefixes = np.flatnonzero(self.lengths <= self.prefix_length)
        self._prefix_adj = self.unitaries[self.prefixes].conj().transpose(0, 2, 1)

    def __len__(self):
        return len(self.parents)

    def word(self, entry: int) -> list:
        out = []
        while entry > 0:
            code = int(self.letters[entry])
            out.append((code // 2, bool(code % 2)))
            entry = int(self.parents[entry])
        return out[::-1]

    def save(self, path) -> None:
        """Write the enumeration to an ``.npz`` file (the gate set is stored as JSON)."""
        np.savez_compressed(
            path,
            gateset=json.dumps(self.gateset.to_json()),
            params=np.array([self.epsilon0, self.max_length, self.prefix_length, self.validation_worst]),
            parents=self.parents,
            letters=self.letters,
            unitaries=self.unitaries,
            lengths=self.lengths,
        )

    @classmethod
    def load(cls, path) -> "NetDictionary":
        with np.load(path) as data:
            eps0, max_len, pre, worst = data["params"]
            return cls(
                GateSet.from_json(json.loads(str(data["gateset"]))),
                float(eps0),
                int(max_len),
                data["parents"],
                data["letters"],
                data["unitaries"],
                data["lengths"],
                int(pre),
                float(worst),
            )

    def nearest(self, target: np.ndarray, chunk: int = 2**22) -> NetMatch:
        """Closest covered word W with target ~ phase * W in operator norm."""
        return self.candidates(target, 1, chunk=chunk)[0]

    def candidates(self, target: np.ndarray, count: int, shortlist: int = 256, chunk: int = 2**22) -> list[NetMatch]:
        """Up to ``count`` covered words closest to ``target``, nearest first.

        Since ||X||_2 <= ||X||_F <= sqrt(d) ||X||_2, every word at least as
        close in operator norm as the Frobenius-nearest one lies within
        sqrt(d) times the best Frobenius distance.  That ball (at most
        ``shortlist`` of its Frobenius-closest members) is re-ranked in
        operator norm, so the first result is the exact nearest word
        whenever the ball is not truncated.
        """
        d = self.gateset.dim
        phases = centre_phases(d)
        # residuals P^dag (target / w) for every prefix P and centre phase w
        shifted = target[None] * np.conj(phases)[:, None, None]
        residual = np.einsum("pij,cjk->pcik", self._prefix_adj, shifted).reshape(-1, d, d)
        res_feat = _features(residual).astype(np.float32)
        rows = max(1, chunk // len(self))
        row_best = np.concatenate(
            [(res_feat[lo : lo + rows] @ self._feat_t).max(axis=1) for lo in range(0, len(residual), rows)]
        )
        # Re tr(R^dag E) >= d - d (d - best) is the sqrt(d) Frobenius ball
        radius_sq = d * (d - float(row_best.max()))
        while True:
            threshold = d - radius_sq - 1e-4
            live = np.flatnonzero(row_best >= threshold)
            kept_rows, kept_cols, kept_scores = [], [], []
            for lo in range(0, len(live), rows):
                sel = live[lo : lo + rows]
                scores = res_feat[sel] @ self._feat_t
                r, c = np.nonzero(scores >= threshold)
                kept_rows.append(sel[r])
                kept_cols.append(c)
                kept_scores.append(scores[r, c])
            r, c, sc = (np.concatenate(x) for x in (kept_rows, kept_cols, kept_scores))
            # widen the ball until it holds enough alternatives
            if len(sc) >= min(4 * count, len(self)) or count == 1 or radius_sq >= 2 * d:
                break
            radius_sq = min(4 * radius_sq + 1e-3, 2 * d)
        if len(sc) > shortlist:
            top = np.argpartition(-sc, shortlist - 1)[:shortlist]
            r, c = r[top], c[top]
        dists = np.linalg.norm(self.unitaries[c] - residual[r], ord=2, axis=(1, 2))
        out = []
        for n in np.argsort(dists, kind="stable")[:count]:
            pre = int(self.prefixes[r[n] // d])
            entry = int(c[n])
            letters = self.word(pre) + self.word(entry)
            out.append(
                NetMatch(letters, self.unitaries[pre] @ self.unitaries[entry], float(dists[n]), complex(phases[r[n] % d]))
            )
        return out


def haar_special(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    mats = scipy.stats.unitary_group.rvs(d, size=count, random_state=rng)
    mats = np.asarray(mats).reshape(count, d, d)
    return np.stack([project_special(m)[0] for m in mats])


def build_net(
    gateset: GateSet,
    epsilon0: float,
    max_length: int,
    *,
    prefix_length: int = 0,
    validation_samples: int = 500,
    seed: int = 0,
    validate: bool = True,
    max_entries: int = MAX_NET_ENTRIES,
) -> NetDictionary:
    """Breadth-first enumeration of words up to ``max_length - prefix_length``.

    Words whose canonical products fall into an already occupied grid cell
    (side epsilon0 / (4 sqrt(2 d^2)) in the real feature space, so colliding
    products are within epsilon0/4 in Frobenius norm) are dropped and not
    extended.  Lookups combine a prefix of length <= ``prefix_length`` with an
    enumerated word, so every covered word has length <= ``max_length``.  The
    net is then checked against Haar-random targets in SU(d).

    Raises:
        ConfigurationError: some validation target is farther than epsilon0.
        ResourceLimitError: the enumeration exceeds ``max_entries``.
    """
    if not 0 <= prefix_length <= max_length - prefix_length:
        raise ContractViolation("prefix_length must lie in [0, max_length / 2]")
    d = gateset.dim
    n_feat = 2 * d * d
    cell = epsilon0 / (4.0 * math.sqrt(n_feat))
    letter_codes = np.array([2 * i + int(inv) for i, inv in gateset.letters()])
    letter_mats = np.stack([gateset.letter(i, inv) for i, inv in gateset.letters()])

    def keys(mats):
        q = np.floor(_features(_canonical(mats)) / cell).astype(np.int64)
        return [row.tobytes() for row in q]

    ident = np.eye(d, dtype=np.complex128)[None]
    seen = set(keys(ident))
    parents, letters, lengths, unitaries = [0], [-1], [0], [ident[0]]
    frontier_idx = np.array([0])
    frontier = ident
    for level in range(1, max_length - prefix_length + 1):
        if frontier.shape[0] == 0:
            break
        cand = np.einsum("fij,gjk->fgik", frontier, letter_mats).reshape(-1, d, d)
        par = np.repeat(frontier_idx, len(letter_codes))
        code = np.tile(letter_codes, frontier.shape[0])
        # skip immediate cancellation g g^-1
        last = np.array(letters)[par]
        keep = ~((last >= 0) & (last // 2 == code // 2) & (last % 2 != code % 2))
        cand, par, code = cand[keep], par[keep], code[keep]
        new_idx = []
        for n, key in enumerate(keys(cand)):
            if key not in seen:
                seen.add(key)
                new_idx.append(n)
        if len(parents) + len(new_idx) > max_entries:
            raise ResourceLimitError(f"epsilon-net exceeds {max_entries} entries")
        new_idx = np.array(new_idx, dtype=np.int64)
        start = len(parents)
        parents.extend(par[new_idx].tolist())
        letters.extend(code[new_idx].tolist())
        lengths.extend([level] * len(new_idx))
        unitaries.extend(cand[new_idx])
        frontier = cand[new_idx]
        frontier_idx = np.arange(start, start + len(new_idx))
    net = NetDictionary(
        gateset,
        epsilon0,
        max_length,
        np.array(parents),
        np.array(letters),
        np.stack(unitaries),
        np.array(lengths),
        prefix_length,
    )
    if validate:
        targets = haar_special(d, validation_samples, np.random.default_rng(seed))
        worst = max(net.nearest(t).distance for t in targets)
        net.validation_worst = worst
        if worst > epsilon0:
            raise ConfigurationError(
                f"gate set is not dense enough: a Haar target is {worst:.3g} from the net "
                f"(epsilon0 = {epsilon0}, max_length = {max_length}, {len(net)} entries)"
            )
    return net


# (epsilon0, max_length, prefix_length) known to validate for the builtin gate sets
DEFAULT_NET_PARAMS = {2: (0.15, 16, 0), 3: (0.5, 9, 2)}


_DEFAULT_NETS: dict = {}


def default_net(gateset: GateSet, **kwargs) -> NetDictionary:
    """build_net with the default parameters for the gate set's dimension.

    Nets built without extra arguments are cached per gate set for the
    lifetime of the process.
    """
    if gateset.dim not in DEFAULT_NET_PARAMS:
        raise ConfigurationError(
            f"no default net for d={gateset.dim}; pass epsilon0 and max_length explicitly"
        )
    eps0, length, pre = DEFAULT_NET_PARAMS[gateset.dim]
    if kwargs:
        return build_net(gateset, eps0, length, prefix_length=pre, **kwargs)
    key = json.dumps(gateset.to_json(), sort_keys=True)
    if key not in _DEFAULT_NETS:
        _DEFAULT_NETS[key] = build_net(gateset, eps0, length, prefix_length=pre)
    return _DEFAULT_NETS[key]


# --- balanced group commutators ------------------------------------------------------------

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


def _su2_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i angle/2 axis . sigma)."""
    gen = sum(a * s for a, s in zip(axis, _PAULI))
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * gen


def _su2_axis_angle(u: np.ndarray) -> tuple[np.ndarray, float]:
    c = float(np.real(np.trace(u)) / 2)
    vec = np.array([float(np.real(1j * np.trace(u @ s)) / 2) for s in _PAULI])
    norm = np.linalg.norm(vec)
    angle = 2 * math.atan2(norm, c)
    axis = vec / norm if norm > 1e-300 else np.array([0.0, 0.0, 1.0])
    return axis, angle


def _gc_qubit(delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis, theta = _su2_axis_angle(delta)
    if theta < 1e-15:
        return np.eye(2, dtype=np.complex128), np.eye(2, dtype=np.complex128)
    # rotations by phi about x and y commute to a rotation by theta when
    # sin(theta/2) = 2 sin^2(phi/2) sqrt(1 - sin^4(phi/2)), i.e. sin^2(phi/2) = sin(theta/4)
    phi = 2 * math.asin(math.sqrt(math.sin(theta / 4)))
    b = _su2_rotation(np.array([1.0, 0.0, 0.0]), phi)
    c = _su2_rotation(np.array([0.0, 1.0, 0.0]), phi)
    m_axis, _ = _su2_axis_angle(b @ c @ b.conj().T @ c.conj().T)
    cross = np.cross(m_axis, axis)
    sin_a, cos_a = np.linalg.norm(cross), float(np.dot(m_axis, axis))
    if sin_a < 1e-14:
        if cos_a > 0:
            s = np.eye(2, dtype=np.complex128)
        else:
            perp = np.cross(m_axis, [1.0, 0.0, 0.0] if abs(m_axis[0]) < 0.9 else [0.0, 1.0, 0.0])
            s = _su2_rotation(perp / np.linalg.norm(perp), math.pi)
    else:
        s = _su2_rotation(cross / sin_a, math.atan2(sin_a, cos_a))
    return s @ b @ s.conj().T, s @ c @ s.conj().T


def zero_diagonal_basis(a: np.ndarray) -> np.ndarray:
    """Unitary V such that V^dag A V has zero diagonal, for traceless Hermitian A."""
    d = a.shape[0]
    sub = np.eye(d, dtype=np.complex128)
    vectors = []
    for _ in range(d - 1):
        w, v = np.linalg.eigh(sub.conj().T @ a @ sub)
        lo, hi = w[0], w[-1]
        if hi - lo < 1e-300:
            x = v[:, 0]
        else:
            x = math.sqrt(max(0.0, -lo) / (hi - lo)) * v[:, -1] + math.sqrt(max(0.0, hi) / (hi - lo)) * v[:, 0]
            x = x / np.linalg.norm(x)
        vectors.append(sub @ x)
        q, _ = np.linalg.qr(np.column_stack([x, np.eye(len(x), dtype=np.complex128)]))
        sub = sub @ q[:, 1 : len(x)]
    vectors.append(sub[:, 0])
    return np.column_stack(vectors)


def _balanced_pair(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Traceless Hermitian F, G with [F, G] = -iA and ||F|| = ||G||."""
    d = a.shape[0]
    v = zero_diagonal_basis(a)
    at = v.conj().T @ a @ v
    g = np.arange(d) - (d - 1) / 2.0
    gap = g[None, :] - g[:, None]
    np.fill_diagonal(gap, 1.0)
    ft = -1j * at / gap
    np.fill_diagonal(ft, 0.0)
    f = v @ ft @ v.conj().T
    gm = (v * g) @ v.conj().T
    nf, ng = op_norm(f), op_norm(gm)
    if nf == 0:
        return np.zeros_like(f), np.zeros_like(gm)
    s = math.sqrt(ng / nf)
    return f * s, gm / s


def _to_coords(h: np.ndarray) -> np.ndarray:
    """Real coordinates of a traceless Hermitian matrix."""
    iu = np.triu_indices(h.shape[0], 1)
    return np.concatenate([h[iu].real, h[iu].imag, np.real(np.diag(h))[:-1]])


def _from_coords(x: np.ndarray, d: int) -> np.ndarray:
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    h = np.zeros((d, d), dtype=np.complex128)
    h[iu] = x[:m] + 1j * x[m : 2 * m]
    h = h + h.conj().T
    diag = np.append(x[2 * m :], -np.sum(x[2 * m :]))
    h[np.diag_indices(d)] = diag
    return h


def _gc_general(delta: np.ndarray, tol: float = 1e-13, max_iter: int = 30):
    d = delta.shape[0]
    goal = centered_log_unitary(delta)
    goal -= np.trace(goal) / d * np.eye(d)
    n = d * d - 1

    def pair(x):
        return scipy.linalg.expm(1j * _from_coords(x[:n], d)), scipy.linalg.expm(1j * _from_coords(x[n:], d))

    def residual(x):
        b, c = pair(x)
        return _to_coords(centered_log_unitary(b @ c @ b.conj().T @ c.conj().T) - goal)

    f, g = _balanced_pair(goal)
    x = np.concatenate([_to_coords(f), _to_coords(g)])
    # Gauss-Newton from the first-order solution; minimal-norm steps keep F, G balanced
    for _ in range(max_iter):
        r = residual(x)
        if np.max(np.abs(r)) <= tol:
            break
        h = 1e-6
        jac = np.column_stack(
            [(residual(x + h * e) - residual(x - h * e)) / (2 * h) for e in np.eye(2 * n)]
        )
        x = x + np.linalg.lstsq(jac, -r, rcond=None)[0]
    return pair(x)


def gc_decompose(delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Balanced group commutator: B C B^dag C^dag = Delta with ||B - I||, ||C - I|| ~ ||Delta - I||^(1/2).

    Qubits use the closed-form rotation construction.  For d > 2 the
    traceless generator A of Delta is brought to zero diagonal, which makes
    the first-order commutator equation [F, G] = -iA solvable with G diagonal
    in that basis; Gauss-Newton steps on (F, G) then remove the higher-order
    mismatch.

    Raises:
        ContractViolation: ||Delta - I|| > 0.5 or det(Delta) != 1.
        NumericalError: the product identity fails to 1e-10.
    """
    delta = as_unitary(delta)
    d = delta.shape[0]
    if op_norm(delta - np.eye(d)) > 0.5:
        raise ContractViolation(f"||Delta - I|| = {op_norm(delta - np.eye(d)):.3g} exceeds 0.5")
    if abs(np.linalg.det(delta) - 1) > 1e-9:
        raise ContractViolation("Delta must have determinant 1")
    b, c = _gc_qubit(delta) if d == 2 else _gc_general(delta)
    residual = op_norm(b @ c @ b.conj().T @ c.conj().T - delta)
    if residual > 1e-10:
        raise NumericalError(f"group commutator residual {residual:.3e} exceeds 1e-10")
    return b, c


# --- recursion --------------------------------------------------------------------------------


def _commutant(delta: np.ndarray, count: int) -> list:
    """Identity plus ``count`` fixed unitaries commuting with Delta (phases in its eigenbasis)."""
    _, z = scipy.linalg.schur(delta, output="complex")
    d = delta.shape[0]
    out = [np.eye(d, dtype=np.complex128)]
    for t in range(1, count + 1):
        theta = np.pi * t * (np.arange(d) + 1) / (count + 1)
        out.append((z * np.exp(1j * theta)) @ z.conj().T)
    return out


def sk_recurse(
    target: np.ndarray,
    depth: int,
    net: NetDictionary,
    *,
    max_depth: int = 8,
    retries: int = 8,
    alternatives: int = 8,
    strict: bool = True,
) -> GateWord:
    """Depth-``depth`` Solovay-Kitaev approximation of a special-unitary target.

    The returned word satisfies target ~ phase * product(word) with ``phase``
    in the centre.  Its length is at most 5^depth * net.max_length.

    A level whose commutator correction does not improve on the previous
    approximation retries with B, C conjugated by unitaries commuting with
    the residual (the product identity is unchanged), up to ``retries``
    times.  At depth 1 the next ``alternatives`` nearest net entries are
    also tried as starting points.  Otherwise the previous approximation is
    kept.

    Raises:
        ContractViolation: target not special unitary.
        ConvergenceFailure: depth above ``max_depth``, or (when ``strict``)
            the error along the main chain stops contracting.
    """
    target = as_unitary(target)
    gs = net.gateset
    eye = np.eye(gs.dim)
    if target.shape[0] != gs.dim:
        raise ContractViolation(f"target dimension {target.shape[0]} does not match gate set ({gs.dim})")
    if abs(np.linalg.det(target) - 1) > 1e-9:
        raise ContractViolation("target must have determinant 1")
    if depth < 0 or depth > max_depth:
        raise ConvergenceFailure(f"depth {depth} outside [0, {max_depth}]")

    errors: list[float] = []

    def improve(u, n, letters, w, phase):
        # one Solovay-Kitaev step on top of (letters, w); None if nothing improves
        err0 = op_norm(u - phase * w)
        delta = project_special(u @ (phase * w).conj().T)[0]
        if op_norm(delta - eye) > 0.5:
            return None
        b0, c0 = gc_decompose(delta)
        for s in _commutant(delta, retries):
            b, c = s @ b0 @ s.conj().T, s @ c0 @ s.conj().T
            lb, wb, _ = recurse(b, n - 1, False)
            lc, wc, _ = recurse(c, n - 1, False)
            new_w = wb @ wc @ wb.conj().T @ wc.conj().T @ w
            err = op_norm(u - phase * new_w)
            if err < err0:
                return err, lb + lc + invert_letters(lb) + invert_letters(lc) + letters, new_w
        return None

    def recurse(u, n, main):
        if n == 0:
            match = net.nearest(u)
            if main:
                errors.append(match.distance)
            return match.letters, match.unitary, match.phase
        letters, w, phase = recurse(u, n - 1, main)
        step = improve(u, n, letters, w, phase)
        if step is None and n == 1:
            # the net entry may sit where the residual is too fine for the
            # net; start from the next-nearest entries instead
            for alt in net.candidates(u, alternatives + 1)[1:]:
                step = improve(u, n, alt.letters, alt.unitary, alt.phase)
                if step is not None and step[0] < op_norm(u - phase * w):
                    phase = alt.phase
                    break
                step = None
        if step is None:
            step = (op_norm(u - phase * w), letters, w)
        if main:
            errors.append(step[0])
        return step[1], step[2], phase

    letters, _, phase = recurse(target, depth, True)
    net_unitary = word_product(letters, gs)
    word = GateWord(letters, net_unitary, phase, errors)
    if strict:
        for k in range(1, len(errors)):
            if errors[k] >= errors[k - 1] and errors[k - 1] > 1e-12:
                raise ConvergenceFailure(
                    f"error stopped contracting at depth {k}: {errors[k - 1]:.3e} -> {errors[k]:.3e} "
                    f"(errors by depth: {', '.join(f'{e:.3e}' for e in errors)})"
                )
    return word


def fit_contraction(errors: np.ndarray) -> tuple[float, float]:
    """Fit log e_k = log c + a log e_{k-1} on per-depth mean log errors.

    Args:
        errors: array (targets, depths) of operator-norm errors.

    Returns:
        ``(a, c)``; the SK contract is a = 3/2.
    """
    logs = np.log(np.maximum(np.asarray(errors, dtype=np.float64), 1e-300)).mean(axis=0)
    x, y = logs[:-1], logs[1:]
    if len(x) == 1:
        return float(y[0] / x[0]), 1.0
    a, logc = np.polyfit(x, y, 1)
    return float(a), float(np.exp(logc))


def fit_length_exponent(lengths, epsilons) -> float:
    """Exponent c in length ~ log(1/eps)^c from a least-squares fit in log-log."""
    x = np.log(np.log(1.0 / np.asarray(epsilons, dtype=np.float64)))
    y = np.log(np.maximum(np.asarray(lengths, dtype=np.float64), 1.0))
    if len(x) < 2 or np.ptp(x) == 0:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


# --- lifting ---------------------------------------------------------------------------------


def gate_generators(gateset: GateSet) -> list:
    """Polynomial Hamiltonian P_k with e^{iP_k} = G_k (+) G_k' for every gate."""
    return [synth_hermitian(principal_log_unitary(g)) for g in gateset.gates]


def lift_word(word: GateWord, gateset: GateSet, generators: list | None = None) -> GateWord:
    """Attach one polynomial Hamiltonian per letter; inverted letters use -P."""
    generators = gate_generators(gateset) if generators is None else generators
    negated = {}
    lifted = []
    for i, inv in word.indices:
        if inv:
            if i not in negated:
                negated[i] = generators[i].scaled(-1.0)
            lifted.append(negated[i])
        else:
            lifted.append(generators[i])
    word.lifted = lifted
    return word


def lifted_product(word: GateWord, cutoff: int) -> np.ndarray:
    """prod_k exp(i eval(P_k)) at ``cutoff``, in word order."""
    from .fock import exp_i_hermitian
    from .polyham import eval_matrix

    if word.lifted is None:
        raise ContractViolation("word has not been lifted")
    cache = {}
    out = np.eye(cutoff + 1, dtype=np.complex128)
    for p in word.lifted:
        key = id(p)
        if key not in cache:
            cache[key] = exp_i_hermitian(eval_matrix(p, cutoff))
        out = out @ cache[key]
    return out


def lift_residual(word: GateWord, cutoff: int | None = None) -> float:
    """max |block of the lifted product - net_unitary|."""
    d = word.net_unitary.shape[0]
    cutoff = 4 * (d - 1) if cutoff is None else cutoff
    cutoff = max(cutoff, d - 1)
    prod = lifted_product(word, cutoff)
    return float(np.max(np.abs(prod[:d, :d] - word.net_unitary)))
