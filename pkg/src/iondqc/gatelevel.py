"""Gate-level n-qubit modular DQC1 and its exact reference evaluations.

Register layout: one control qubit, then an n-qubit X register, then an
n-qubit Y register, flattened as ``idx = c * N**2 + x * N + y`` with
N = 2**n.  A register string l = l_{n-1}...l_0 is the integer ``x`` written
in binary, so gate-list qubit q is the bit of weight 2**q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from . import rng as rngmod
from .errors import ContractViolation
from .protocol import PAULI, EstimateResult, UnitarySpec

MAX_QUBITS = 6

SINGLE_QUBIT = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "X": PAULI[1],
    "Z": PAULI[3],
    "S": np.diag([1, 1j]),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]),
}
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def _check_n(n: int) -> None:
    if not 1 <= n <= MAX_QUBITS:
        raise ContractViolation(f"register size must be within 1..{MAX_QUBITS}, got {n}")


def _bits(s: Union[str, int], n: int) -> int:
    if isinstance(s, str):
        if len(s) != n or set(s) - {"0", "1"}:
            raise ContractViolation(f"expected an {n}-bit string, got {s!r}")
        return int(s, 2)
    if not 0 <= int(s) < 2 ** n:
        raise ContractViolation(f"register value {s} does not fit in {n} bits")
    return int(s)


# -- gate lists ----------------------------------------------------------------

def _place(n: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    """Kronecker product with ops[q] on qubit q (weight 2**q) and identity elsewhere."""
    factors = [ops.get(q, np.eye(2)) for q in reversed(range(n))]
    return reduce(np.kron, factors)


def gate_matrix(n: int, gate: dict) -> np.ndarray:
    name = gate.get("gate")
    t = int(gate["target"])
    if not 0 <= t < n:
        raise ContractViolation(f"target {t} outside {n}-qubit register")
    if name in SINGLE_QUBIT:
        return _place(n, {t: SINGLE_QUBIT[name]})
    if name == "pauli_rotation":
        axis = int(gate["axis"])
        if axis not in PAULI:
            raise ContractViolation("pauli axis must be 1, 2 or 3")
        return _place(n, {t: expm(-0.5j * float(gate["angle"]) * PAULI[axis])})
    if name in ("CX", "CZ"):
        c = int(gate["control"])
        if not 0 <= c < n or c == t:
            raise ContractViolation(f"bad control index {c} for target {t}")
        flip = PAULI[1] if name == "CX" else PAULI[3]
        return _place(n, {c: P0}) + _place(n, {c: P1, t: flip})
    raise ContractViolation(f"unknown gate {name!r}")


def unitary_from_gates(n: int, gates: Sequence[dict]) -> np.ndarray:
    """Product of the listed gates, first gate applied first."""
    _check_n(n)
    u = np.eye(2 ** n, dtype=complex)
    for g in gates:
        u = gate_matrix(n, g) @ u
    return u


def as_matrix(u) -> np.ndarray:
    m = u.matrix() if isinstance(u, UnitarySpec) else np.asarray(u, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] & (m.shape[0] - 1) or m.shape[0] < 2:
        raise ContractViolation(f"expected a 2^n square matrix, got shape {m.shape}")
    if np.abs(m.conj().T @ m - np.eye(m.shape[0])).max() > 1e-9:
        raise ContractViolation("u is not unitary within 1e-9")
    return m


def n_of(u: np.ndarray) -> int:
    return int(round(math.log2(u.shape[0])))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# -- register states -----------------------------------------------------------

@dataclass(frozen=True)
class RegisterState:
    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        _check_n(self.n)
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** (2 * self.n + 1),):
            raise ContractViolation("amplitude vector does not match register size")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, n: int, c: int, x: Union[str, int], y: Union[str, int]) -> "RegisterState":
        N = 2 ** n
        amps = np.zeros(2 * N * N, dtype=complex)
        amps[c * N * N + _bits(x, n) * N + _bits(y, n)] = 1.0
        return cls(amps, n)

    def blocks(self) -> np.ndarray:
        """Amplitudes as (control, x, y)."""
        N = 2 ** self.n
        return self.amplitudes.reshape(2, N, N)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def sigma1(self) -> float:
        b = self.blocks()
        return float(2 * np.real(np.vdot(b[0], b[1])))


def _with_blocks(state: RegisterState, b: np.ndarray) -> RegisterState:
    return RegisterState(b.reshape(-1), state.n)


def h_control(state: RegisterState) -> RegisterState:
    b = state.blocks()
    return _with_blocks(state, np.stack([b[0] + b[1], b[0] - b[1]]) / math.sqrt(2))


def u_on_x(state: RegisterState, u: np.ndarray) -> RegisterState:
    return _with_blocks(state, np.einsum("ij,cjy->ciy", u, state.blocks()))


def cswap_apply(state: RegisterState) -> RegisterState:
    b = state.blocks().copy()
    b[1] = b[1].T
    return _with_blocks(state, b)


# -- CSWAP on registers ----------------------------------------------------------

def _perm_matrix(dest: np.ndarray) -> np.ndarray:
    """Matrix sending basis index i to dest[i]."""
    p = np.zeros((dest.size, dest.size))
    p[dest, np.arange(dest.size)] = 1.0
    return p


def cswap_monolithic(n: int) -> np.ndarray:
    _check_n(n)
    N = 2 ** n
    c, x, y = np.unravel_index(np.arange(2 * N * N), (2, N, N))
    dest = np.where(c == 1, c * N * N + y * N + x, c * N * N + x * N + y)
    return _perm_matrix(dest)


def cswap_pair(n: int, bit: int) -> np.ndarray:
    """Controlled swap of bit ``bit`` of the X register with the same bit of Y."""
    N = 2 ** n
    c, x, y = np.unravel_index(np.arange(2 * N * N), (2, N, N))
    xb, yb = (x >> bit) & 1, (y >> bit) & 1
    diff = (xb ^ yb) & c
    x2 = x ^ (diff << bit)
    y2 = y ^ (diff << bit)
    return _perm_matrix(c * N * N + x2 * N + y2)


def cswap_pairs(n: int) -> np.ndarray:
    _check_n(n)
    return reduce(np.matmul, [cswap_pair(n, b) for b in range(n)])


def cswap_n(n: int, construction: str = "monolithic") -> np.ndarray:
    if construction == "monolithic":
        return cswap_monolithic(n)
    if construction == "pairs":
        return cswap_pairs(n)
    raise ContractViolation(f"unknown construction {construction!r}")


# -- circuits --------------------------------------------------------------------

def c_lm_circuit(n: int, l: Union[str, int], m: Union[str, int]) -> RegisterState:
    """(|0>|l>|m> + |1>|m>|l>)/sqrt2 via H on control, bit-setting NOTs, then CSWAP."""
    state = RegisterState.basis(n, 0, 0, 0)
    state = h_control(state)
    N = 2 ** n
    lx, my = _bits(l, n), _bits(m, n)
    perm = np.arange(N)
    b = state.blocks()[:, perm ^ lx][:, :, perm ^ my]
    state = _with_blocks(state, b)
    return cswap_apply(state)


def branch_sigma1(u: np.ndarray, l: int, m: int) -> float:
    n = n_of(u)
    return cswap_apply(u_on_x(c_lm_circuit(n, l, m), u)).sigma1()


def gate_level_exact(u) -> float:
    """Exact <sigma_1> averaged over all 4**n preparations."""
    u = as_matrix(u)
    N = u.shape[0]
    return float(np.mean([branch_sigma1(u, l, m) for l in range(N) for m in range(N)]))


def modular_dqc1_gate_level(u, pairs: int, shots_per_pair: int = 1, seed: int = 0) -> EstimateResult:
    """Sampled estimate of |tr(u)/2^n|^2 from ``pairs`` uniformly drawn (l, m).

    With one shot per pair the pooled standard error is exact.  With more,
    shots within a pair are correlated through the shared (l, m), so the
    standard error is taken from the spread of per-pair means instead.
    """
    u = as_matrix(u)
    if pairs < 1 or shots_per_pair < 1:
        raise ContractViolation("pairs and shots_per_pair must be positive")
    N = u.shape[0]
    sums = np.empty(pairs)
    for k in range(pairs):
        l, m = rngmod.substream(seed, rngmod.GATE_PAIR, k).integers(N, size=2)
        e = branch_sigma1(u, int(l), int(m))
        p_plus = min(max((1 + e) / 2, 0.0), 1.0)
        plus = rngmod.substream(seed, rngmod.GATE_SHOTS, k).binomial(shots_per_pair, p_plus)
        sums[k] = 2 * plus - shots_per_pair
    total = pairs * shots_per_pair
    mean = float(sums.sum() / total)
    if shots_per_pair == 1:
        se = float(np.std(sums, ddof=1) / math.sqrt(total)) if total > 1 else 0.0
    else:
        se = float(np.std(sums / shots_per_pair, ddof=1) / math.sqrt(pairs)) if pairs > 1 else 0.0
    return EstimateResult(mean, se, total, "uniform")


def direct_trace(u) -> float:
    u = as_matrix(u)
    return float(abs(np.trace(u) / u.shape[0]) ** 2)


def standard_dqc1(u) -> tuple[float, float]:
    """(Re T, Im T) from controlled-u on |+> with a maximally mixed register."""
    u = as_matrix(u)
    N = u.shape[0]
    plus = np.full((2, 2), 0.5, dtype=complex)
    rho = np.kron(plus, np.eye(N) / N)
    cu = np.block([[np.eye(N), np.zeros((N, N))], [np.zeros((N, N)), u]])
    rho = cu @ rho @ cu.conj().T
    s1 = np.kron(PAULI[1], np.eye(N))
    s2 = np.kron(PAULI[2], np.eye(N))
    return float(np.real(np.trace(rho @ s1))), float(np.real(np.trace(rho @ s2)))


# -- inserted phases -------------------------------------------------------------

@dataclass(frozen=True)
class InsertedPhases:
    """Diagonal +-1 phase insertions.

    ``z1`` acts on control, X and Y; ``z2`` on control and X; ``z3`` defaults
    to ``z1``.  All are stored as their diagonals.
    """

    z1: np.ndarray
    z2: np.ndarray
    z3: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("z1", "z2", "z3"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v).reshape(-1)
            if np.iscomplexobj(v):
                if np.abs(v.imag).max(initial=0.0) > 0:
                    raise ContractViolation(f"{name} must have diagonal entries +-1")
                v = v.real
            v = v.astype(float)
            if not np.all(np.isin(v, (-1.0, 1.0))):
                raise ContractViolation(f"{name} must have diagonal entries +-1")
            object.__setattr__(self, name, v)
        if self.z1.size != 2 * self.z2.size ** 2 // 4:
            raise ContractViolation("z1 must act on control+X+Y and z2 on control+X")
        if self.z3 is not None and self.z3.size != self.z1.size:
            raise ContractViolation("z3 must match z1 in size")

    @property
    def n(self) -> int:
        return int(round(math.log2(self.z2.size // 2)))

    @classmethod
    def identity(cls, n: int) -> "InsertedPhases":
        N = 2 ** n
        return cls(np.ones(2 * N * N), np.ones(2 * N))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "InsertedPhases":
        N = 2 ** n
        return cls(rng.choice([-1.0, 1.0], 2 * N * N), rng.choice([-1.0, 1.0], 2 * N))

    def lam(self) -> np.ndarray:
        """Lambda = F0 z1 z2 F0 (diagonal); its control blocks are Lambda_0, Lambda_1."""
        f0 = cswap_monolithic(self.n)
        N = 2 ** self.n
        z2full = np.kron(self.z2, np.ones(N))
        return f0 @ np.diag(self.z1 * z2full) @ f0


def phase_invariance_check(u, phases: InsertedPhases) -> float:
    """Exact <sigma_1> of F0 Z1 Z2 U_X Z2^dag Z3^dag F0 acting on |+><+| (x) I/N^2."""
    u = as_matrix(u)
    n = n_of(u)
    if phases.n != n:
        raise ContractViolation("phase insertions and u act on different register sizes")
    N = 2 ** n
    f0 = cswap_monolithic(n)
    z1 = np.diag(phases.z1)
    z3 = np.diag(phases.z3 if phases.z3 is not None else phases.z1)
    z2 = np.diag(np.kron(phases.z2, np.ones(N)))
    u_x = np.kron(np.eye(2), np.kron(u, np.eye(N)))
    a = f0 @ z1 @ z2 @ u_x @ z2.conj().T @ z3.conj().T @ f0
    rho0 = np.kron(np.full((2, 2), 0.5), np.eye(N * N) / (N * N))
    rho = a @ rho0 @ a.conj().T
    return float(np.real(np.trace(rho @ np.kron(PAULI[1], np.eye(N * N)))))
