"""Dense state-vector engine for one ion: 4 internal levels times two Fock modes.

Basis index convention is ``idx = c * (n_x * n_y) + x * n_y + y`` with the
internal level ``c`` ordered as ``|0_C>, |1_C>, |+Z_C>, |-Z_C>``.  Operators
are plain complex ``numpy`` arrays over the same index.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Tuple

import numpy as np

from .errors import ContractViolation

ZERO, ONE, PLUS_Z, MINUS_Z = 0, 1, 2, 3
N_INTERNAL = 4
INTERNAL_LABELS = ("0", "1", "+Z", "-Z")
DEFAULT_FOCK = 4

DARK, BRIGHT = "dark", "bright"


def dimension(n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> int:
    return N_INTERNAL * n_x * n_y


def index(c: int, x: int, y: int, n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> int:
    if not (0 <= c < N_INTERNAL and 0 <= x < n_x and 0 <= y < n_y):
        raise ContractViolation(f"basis label ({c}, {x}, {y}) outside truncation ({n_x}, {n_y})")
    return c * n_x * n_y + x * n_y + y


def computational_indices(n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> list[int]:
    """Indices of |c x y> for c, x, y in {0, 1}, ordered |000>, |001>, ..., |111>."""
    return [index(c, x, y, n_x, n_y) for c in (0, 1) for x in (0, 1) for y in (0, 1)]


# -- operators ---------------------------------------------------------------

def annihilation(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def internal_ketbra(i: int, j: int) -> np.ndarray:
    m = np.zeros((N_INTERNAL, N_INTERNAL), dtype=complex)
    m[i, j] = 1.0
    return m


def on_internal(op: np.ndarray, n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> np.ndarray:
    """Lift a 4x4 internal operator to the full space (identity on both modes)."""
    return np.kron(op, np.eye(n_x * n_y))


def mode_x(n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> np.ndarray:
    """a_X on the full space."""
    return np.kron(np.eye(N_INTERNAL), np.kron(annihilation(n_x), np.eye(n_y)))


def mode_y(n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> np.ndarray:
    """a_Y on the full space."""
    return np.kron(np.eye(N_INTERNAL), np.kron(np.eye(n_x), annihilation(n_y)))


def is_unitary(u: np.ndarray, tol: float = 1e-9) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()) < tol


def expm_antihermitian(g: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Return exp(g) for anti-Hermitian ``g`` via the eigendecomposition of i*g.

    The result is unitary to rounding because the eigenvectors of the
    Hermitian matrix i*g are orthonormal.
    """
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ContractViolation("generator must be a square matrix")
    if g.size and np.abs(g + g.conj().T).max() > tol:
        raise ContractViolation("generator is not anti-Hermitian")
    h = 1j * g
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def compare_up_to_global_phase(a, b) -> float:
    """Max-norm distance between ``a`` and ``b`` after removing a global phase.

    The phase is taken from the largest-magnitude entry of ``b``.
    Accepts arrays or :class:`IonState` values.
    """
    a = a.amplitudes if isinstance(a, IonState) else np.asarray(a)
    b = b.amplitudes if isinstance(b, IonState) else np.asarray(b)
    if a.shape != b.shape:
        raise ContractViolation(f"shape mismatch {a.shape} vs {b.shape}")
    k = int(np.argmax(np.abs(b)))
    bk = b.flat[k]
    if abs(bk) == 0:
        raise ContractViolation("reference is identically zero")
    ak = a.flat[k]
    phase = ak / abs(ak) / (bk / abs(bk)) if abs(ak) > 0 else 1.0
    return float(np.abs(a - phase * b).max())


# -- states --------------------------------------------------------------------

@dataclass(frozen=True)
class IonState:
    amplitudes: np.ndarray
    n_x: int = DEFAULT_FOCK
    n_y: int = DEFAULT_FOCK

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (dimension(self.n_x, self.n_y),):
            raise ContractViolation(
                f"amplitude vector of length {amps.shape} does not match dims ({self.n_x}, {self.n_y})"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, c: int, x: int, y: int, n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> "IonState":
        amps = np.zeros(dimension(n_x, n_y), dtype=complex)
        amps[index(c, x, y, n_x, n_y)] = 1.0
        return cls(amps, n_x, n_y)

    @classmethod
    def ground(cls, n_x: int = DEFAULT_FOCK, n_y: int = DEFAULT_FOCK) -> "IonState":
        return cls.basis(ZERO, 0, 0, n_x, n_y)

    @classmethod
    def from_components(
        cls,
        components: Mapping[Tuple[int, int, int], complex],
        n_x: int = DEFAULT_FOCK,
        n_y: int = DEFAULT_FOCK,
        normalize: bool = True,
    ) -> "IonState":
        amps = np.zeros(dimension(n_x, n_y), dtype=complex)
        for (c, x, y), amp in components.items():
            amps[index(c, x, y, n_x, n_y)] += amp
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(amps, n_x, n_y)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to (internal, x, y)."""
        return self.amplitudes.reshape(N_INTERNAL, self.n_x, self.n_y)

    def internal_populations(self) -> np.ndarray:
        return (np.abs(self.tensor()) ** 2).sum(axis=(1, 2))

    def mode_populations(self) -> tuple[np.ndarray, np.ndarray]:
        p = np.abs(self.tensor()) ** 2
        return p.sum(axis=(0, 2)), p.sum(axis=(0, 1))

    def leakage(self, level: int = 3) -> float:
        """Total population with either mode at Fock index >= ``level``."""
        p = np.abs(self.tensor()) ** 2
        return float(p.sum() - p[:, :level, :level].sum())

    def amplitude(self, c: int, x: int, y: int) -> complex:
        return complex(self.amplitudes[index(c, x, y, self.n_x, self.n_y)])


def apply_unitary(state: IonState, u: np.ndarray) -> IonState:
    u = np.asarray(u)
    if u.shape != (state.dim, state.dim):
        raise ContractViolation(f"operator of shape {u.shape} cannot act on dim {state.dim}")
    return IonState(u @ state.amplitudes, state.n_x, state.n_y)


def dark_probability(state: IonState) -> float:
    """Population of |0_C>; all F=1 levels (|1>, |+Z>, |-Z>) fluoresce."""
    return float(state.internal_populations()[ZERO])


def measure_internal_bright(state: IonState, rng: np.random.Generator) -> tuple[str, IonState]:
    """Projective fluorescence measurement; returns the outcome and collapsed state."""
    p_dark = min(max(dark_probability(state), 0.0), 1.0)
    outcome = DARK if rng.random() < p_dark else BRIGHT
    t = state.tensor().copy()
    if outcome == DARK:
        t[1:] = 0.0
    else:
        t[0] = 0.0
    amps = t.reshape(-1)
    return outcome, IonState(amps / np.linalg.norm(amps), state.n_x, state.n_y)


# -- exact mode ----------------------------------------------------------------

@dataclass(frozen=True)
class DensityOperator:
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", np.asarray(self.entries, dtype=complex))

    @classmethod
    def mixture(cls, states, weights=None) -> "DensityOperator":
        vecs = [s.amplitudes if isinstance(s, IonState) else np.asarray(s) for s in states]
        if weights is None:
            weights = np.full(len(vecs), 1.0 / len(vecs))
        rho = sum(w * np.outer(v, v.conj()) for w, v in zip(weights, vecs))
        return cls(rho)

    def evolve(self, u: np.ndarray) -> "DensityOperator":
        return DensityOperator(u @ self.entries @ u.conj().T)

    def expectation(self, obs: np.ndarray) -> float:
        return float(np.real(np.trace(self.entries @ obs)))

    def validate(self, tol: float = 1e-9) -> None:
        rho = self.entries
        if abs(np.trace(rho) - 1) > tol:
            raise ContractViolation("density operator trace differs from 1")
        if np.abs(rho - rho.conj().T).max() > tol:
            raise ContractViolation("density operator not Hermitian")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -tol:
            raise ContractViolation("density operator has negative eigenvalues")
