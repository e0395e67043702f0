"""Composite gates built from primitive pulses.

Every gate here is an ordered pulse list (time order, first pulse applied
first) with an optional analytic target on a small computational subspace.
Targets hold up to a global phase; where a sequence differs from the textbook
gate by a diagonal sign, the sign is stored in ``phase_convention`` and the
matching ``Z`` matrix below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from . import statevec as sv
from .errors import LeakageError, ParameterError
from .pulses import (
    Pulse,
    carrier,
    pulse_unitary,
    sideband_x,
    sideband_y,
    zeeman_minus,
    zeeman_plus,
)

PI = math.pi
SQRT2 = math.sqrt(2.0)

# Diagonal signs over the 8-dim computational basis |c x y>, y fastest.
# F(0) realizes CSWAP followed by Z3 (sign on |1_C 0_X 1_Y>).
Z3 = np.diag([1, 1, 1, 1, 1, -1, 1, 1]).astype(complex)
# Preparation mixture: sign on |1_C 1_X 0_Y> from the minus in psi'_{0,1}.
# Written before the swap instead, the same sign sits on |1_C 0_X 1_Y>:
# Z1 @ CSWAP == CSWAP @ Z3.
Z1 = np.diag([1, 1, 1, 1, 1, 1, -1, 1]).astype(complex)
# Outsourcing identity, basis |0_C0_X>, |1_C0_X>, |0_C1_X>, |1_C1_X>.
Z2 = np.diag([1, -1, 1, 1]).astype(complex)

CSWAP = np.eye(8, dtype=complex)[:, [0, 1, 2, 3, 4, 6, 5, 7]]


def _matmul_sequence(pulses: Iterable[Pulse], n_x: int, n_y: int) -> np.ndarray:
    u = np.eye(sv.dimension(n_x, n_y), dtype=complex)
    for p in pulses:
        u = pulse_unitary(p, n_x, n_y) @ u
    return u


@dataclass(frozen=True)
class CompositeGate:
    name: str
    pulses: tuple[Pulse, ...]
    target: Optional[np.ndarray] = None
    target_basis: Optional[tuple[tuple[int, int, int], ...]] = None
    phase_convention: str = ""
    parts: tuple[str, ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def matrix(self, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> np.ndarray:
        key = (n_x, n_y)
        if key not in self._cache:
            u = _matmul_sequence(self.pulses, n_x, n_y)
            u.setflags(write=False)
            self._cache[key] = u
        return self._cache[key]

    def apply(self, state: sv.IonState) -> sv.IonState:
        return sv.apply_unitary(state, self.matrix(state.n_x, state.n_y))

    def apply_stepwise(self, state: sv.IonState) -> sv.IonState:
        for p in self.pulses:
            state = sv.apply_unitary(state, pulse_unitary(p, state.n_x, state.n_y))
        return state

    def restricted(self, basis=None, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> np.ndarray:
        basis = basis if basis is not None else self.target_basis
        idx = [sv.index(c, x, y, n_x, n_y) for c, x, y in basis]
        return self.matrix(n_x, n_y)[np.ix_(idx, idx)]

    def target_deviation(self, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> float:
        if self.target is None:
            raise ValueError(f"{self.name} has no analytic target")
        return sv.compare_up_to_global_phase(self.restricted(None, n_x, n_y), self.target)

    def instructions(self) -> list[str]:
        return [f"{self.name}: {p.label()}" for p in self.pulses]

    def __len__(self) -> int:
        return len(self.pulses)


def compose(name: str, *gates: CompositeGate, target=None, target_basis=None, phase_convention="") -> CompositeGate:
    pulses: list[Pulse] = []
    for g in gates:
        pulses.extend(g.pulses)
    return CompositeGate(
        name, tuple(pulses), target, target_basis, phase_convention, tuple(g.name for g in gates)
    )


def _gate(name: str, pulses: Sequence, **kw) -> CompositeGate:
    flat: list[Pulse] = []
    parts: list[str] = []
    for item in pulses:
        if isinstance(item, CompositeGate):
            flat.extend(item.pulses)
            parts.append(item.name)
        else:
            flat.append(item)
            parts.append(str(item))
    return CompositeGate(name, tuple(flat), parts=tuple(parts), **kw)


# -- microwave synthesis -------------------------------------------------------

def sigma_theta_phi(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [
            [-math.cos(theta), math.sin(theta) * np.exp(1j * phi)],
            [math.sin(theta) * np.exp(-1j * phi), math.cos(theta)],
        ]
    )


def euler_unitary(chi: float, theta: float, phi: float) -> np.ndarray:
    """exp(-i chi sigma_{theta,phi} / 2) as a 2x2 matrix."""
    return expm(-0.5j * chi * sigma_theta_phi(theta, phi))


def synth_u(chi: float, theta: float, phi: float) -> CompositeGate:
    """Three carrier pulses realizing exp(-i chi sigma_{theta,phi}/2) on |0_C>, |1_C>."""
    return _gate(
        f"U({chi!r},{theta!r},{phi!r})",
        [
            carrier(PI / 2 - theta, phi + PI / 2),
            carrier(chi, phi),
            carrier(PI / 2 - theta, phi - PI / 2),
        ],
        target=euler_unitary(chi, theta, phi),
        target_basis=((0, 0, 0), (1, 0, 0)),
    )


# -- modified SWAP ---------------------------------------------------------------

@dataclass(frozen=True)
class SwapParams:
    alpha: float
    gamma: float


_CSC = 1.0 / math.sin(PI / SQRT2)
_COT = 1.0 / math.tan(PI / SQRT2)


def swap_params(chi: float, phi: float) -> SwapParams:
    if not 0.0 <= chi <= PI:
        raise ParameterError(f"modified SWAP needs chi in [0, pi], got {chi}")
    a_arg = _CSC * math.sin(chi / 4)
    g_arg = _COT * math.tan(chi / 4)
    if not (-1.0 <= a_arg <= 1.0 and -1.0 <= g_arg <= 1.0):
        raise ParameterError(f"arccos argument out of range at chi={chi}")
    return SwapParams(math.acos(a_arg), phi - math.acos(g_arg))


def s_matrix(chi: float, phi: float) -> np.ndarray:
    """Two-qubit target over |0_C0>, |1_C0>, |0_C1>, |1_C1> of the chosen mode."""
    c, s = math.cos(chi / 2), math.sin(chi / 2)
    m = np.eye(4, dtype=complex)
    m[0, 0] = m[3, 3] = c
    m[0, 3] = -s * np.exp(1j * phi)
    m[3, 0] = s * np.exp(-1j * phi)
    return m


def _s_mode(mode: str, chi: float, phi: float) -> CompositeGate:
    sp = swap_params(chi, phi)
    side = sideband_x if mode == "X" else sideband_y
    if mode == "X":
        basis = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0))
    else:
        basis = ((0, 0, 0), (1, 0, 0), (0, 0, 1), (1, 0, 1))
    return _gate(
        f"S_{mode}({chi!r},{phi!r})",
        [
            side(PI / SQRT2, sp.gamma),
            side(SQRT2 * PI, 2 * sp.alpha + sp.gamma),
            side(PI / SQRT2, sp.gamma),
        ],
        target=s_matrix(chi, phi),
        target_basis=basis,
    )


def s_x(chi: float, phi: float) -> CompositeGate:
    return _s_mode("X", chi, phi)


def s_y(chi: float, phi: float) -> CompositeGate:
    return _s_mode("Y", chi, phi)


# -- controlled swap -----------------------------------------------------------

def f_matrix(phi: float) -> np.ndarray:
    m = np.eye(8, dtype=complex)
    m[5, 5] = m[6, 6] = 0.0
    m[5, 6] = -np.exp(1j * phi)
    m[6, 5] = np.exp(-1j * phi)
    return m


COMPUTATIONAL_BASIS = tuple((c, x, y) for c in (0, 1) for x in (0, 1) for y in (0, 1))


def f_gate(phi: float = 0.0) -> CompositeGate:
    """Shelve |0_C> in the Zeeman levels and swap |1_C 0_X 1_Y> <-> |1_C 1_X 0_Y>.

    The X-sideband pulses are the two halves of S_X(pi, phi) with the
    -Z -> +Z shelving hop in the middle.
    """
    sp = swap_params(PI, phi)
    a2g = 2 * sp.alpha + sp.gamma
    pulses = [
        zeeman_minus(PI, 0.0),
        sideband_y(PI, PI),
        sideband_x(PI / SQRT2, sp.gamma),
        sideband_x(PI / SQRT2, a2g),
        zeeman_plus(PI, PI),
        zeeman_minus(PI, PI),
        zeeman_plus(PI, 0.0),
        sideband_x(PI / SQRT2, a2g),
        sideband_x(PI / SQRT2, sp.gamma),
        sideband_y(PI, 0.0),
        zeeman_plus(PI, PI),
    ]
    return _gate(
        f"F({phi!r})",
        pulses,
        target=f_matrix(phi),
        target_basis=COMPUTATIONAL_BASIS,
        phase_convention="F(0) = Z3 @ CSWAP, Z3 = diag(1,1,1,1,1,-1,1,1)",
    )


# -- preprocessing ---------------------------------------------------------------

_PRE_SEQUENCES = {
    (0, 0): [carrier(PI / 2, -PI / 2)],
    (0, 1): [
        carrier(PI / 2, -PI / 2), carrier(PI, PI / 2), zeeman_minus(PI, 0), carrier(PI, -PI / 2),
        sideband_y(PI, 0), carrier(PI, PI / 2), zeeman_minus(PI, 0), sideband_x(PI, 0),
        zeeman_minus(PI, PI),
    ],
    (1, 0): [
        carrier(PI / 2, -PI / 2), carrier(PI, PI / 2), zeeman_minus(PI, 0), carrier(PI, -PI / 2),
        sideband_x(PI, 0), carrier(PI, PI / 2), zeeman_minus(PI, 0), sideband_y(PI, PI),
        zeeman_minus(PI, PI),
    ],
    (1, 1): [
        sideband_x(PI, 0), carrier(PI, PI / 2), sideband_y(PI, PI), carrier(PI, PI / 2),
        carrier(PI / 2, -PI / 2),
    ],
}

_PRE_TARGETS = {
    (0, 0): {(0, 0, 0): 1, (1, 0, 0): 1},
    (0, 1): {(0, 0, 1): 1, (1, 1, 0): -1},
    (1, 0): {(0, 1, 0): 1, (1, 0, 1): 1},
    (1, 1): {(0, 1, 1): 1, (1, 1, 1): 1},
}


def preprocess_target(l: int, m: int, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> sv.IonState:
    return sv.IonState.from_components(_PRE_TARGETS[(l, m)], n_x, n_y)


def preprocess_circuit(l: int, m: int) -> CompositeGate:
    if (l, m) not in _PRE_SEQUENCES:
        raise ValueError(f"l and m must be bits, got ({l}, {m})")
    return _gate(f"C'({l},{m})", _PRE_SEQUENCES[(l, m)])


# -- |1_C 1_X 1_Y> population readout --------------------------------------------

def p_x(phi: float = 0.0) -> CompositeGate:
    return _gate(
        f"P_X({phi!r})",
        [sideband_x(PI / 2, phi), sideband_x(PI / SQRT2, phi + PI / 2), sideband_x(PI / 2, phi)],
    )


def p_y(phi: float = 0.0) -> CompositeGate:
    return _gate(
        f"P_Y({phi!r})",
        [sideband_y(PI / 2, phi), sideband_y(PI / SQRT2, phi + PI / 2), sideband_y(PI / 2, phi)],
    )


class Measure111Mapper:
    """Maps |1_C 1_X 1_Y> to the dark level and the other 7 basis states to bright."""

    def __init__(self):
        self.gate = _gate("M111", [p_x(0.0), carrier(PI, -PI / 2), p_y(0.0)])

    @property
    def name(self) -> str:
        return self.gate.name

    @property
    def pulses(self):
        return self.gate.pulses

    def matrix(self, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> np.ndarray:
        return self.gate.matrix(n_x, n_y)

    def check_precondition(self, state: sv.IonState, tol: float = 1e-9) -> None:
        leak = state.leakage(level=2)
        if leak > tol:
            raise LeakageError(f"population {leak:.3g} at Fock level >= 2 before |111> readout")

    def apply(self, state: sv.IonState) -> sv.IonState:
        self.check_precondition(state)
        return self.gate.apply(state)


def measure_111_mapper() -> Measure111Mapper:
    return Measure111Mapper()


def hadamard_readout() -> CompositeGate:
    """Basis change for the sigma_1 readout: maps |+> to the dark |0_C>."""
    return _gate("H", [carrier(PI / 2, PI / 2)])


# -- truth-table preparation and analysis rows ----------------------------------

def parse_label(label: str) -> dict[tuple[int, int, int], complex]:
    """'011' -> {|011>: 1}; '000+100' -> equal superposition; '000+i100' with phase i."""
    if "+" not in label:
        a, b, rel = label, None, None
    else:
        a, b = label.split("+")
        rel = 1j if b.startswith("i") else 1.0
        b = b.lstrip("i")
    comps = {tuple(int(ch) for ch in a): 1.0}
    if b is not None:
        comps[tuple(int(ch) for ch in b)] = rel
    return comps


def label_state(label: str, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> sv.IonState:
    return sv.IonState.from_components(parse_label(label), n_x, n_y)


def _R0(chi, phi):
    return carrier(chi, phi)


def _RX(chi, phi):
    return sideband_x(chi, phi)


def _RY(chi, phi):
    return sideband_y(chi, phi)


def _RmZ(chi, phi):
    return zeeman_minus(chi, phi)


HALF_PI = PI / 2
_SHELVED_SWAP = lambda first, second: [  # noqa: E731
    _RmZ(HALF_PI, -HALF_PI), first(PI, 0), _R0(PI, HALF_PI), _RmZ(PI, HALF_PI), second, _RmZ(PI, -HALF_PI)
]

# Preparations from |0_C 0_X 0_Y>, in table order.
R_I_ROWS: list[tuple[str, list]] = [
    ("001", [_RY(PI, 0), _R0(PI, HALF_PI)]),
    ("010", [_RX(PI, 0), _R0(PI, HALF_PI)]),
    ("011", [_RX(PI, 0), _R0(PI, HALF_PI), _RY(PI, 0), _R0(PI, HALF_PI)]),
    ("100", [_R0(PI, -HALF_PI)]),
    ("101", [_RY(PI, 0)]),
    ("110", [_RX(PI, 0)]),
    ("111", [_RX(PI, 0), _R0(PI, HALF_PI), _RY(PI, 0)]),
    ("000+100", [_R0(HALF_PI, -HALF_PI)]),
    ("000+101", [_RY(HALF_PI, 0)]),
    ("000+110", [_RX(HALF_PI, 0)]),
    ("001+110", _SHELVED_SWAP(_RY, _RX(PI, 0))),
    ("001+111", [_RY(PI, 0), _R0(PI, HALF_PI), _RX(HALF_PI, 0)]),
    ("010+101", _SHELVED_SWAP(_RX, _RY(PI, 0))),
    ("010+111", [_RX(PI, 0), _R0(PI, HALF_PI), _RY(HALF_PI, 0)]),
    ("011+111", [_RX(PI, 0), _R0(PI, HALF_PI), _RY(PI, 0), _R0(HALF_PI, HALF_PI)]),
    ("000+i100", [_R0(HALF_PI, PI)]),
    ("000+i101", [_RY(HALF_PI, -HALF_PI)]),
    ("000+i110", [_RX(HALF_PI, -HALF_PI)]),
    ("001+i110", _SHELVED_SWAP(_RY, _RX(PI, -HALF_PI))),
    ("001+i111", [_RY(PI, 0), _R0(PI, HALF_PI), _RX(HALF_PI, -HALF_PI)]),
    ("010+i101", _SHELVED_SWAP(_RX, _RY(PI, -HALF_PI))),
    ("010+i111", [_RX(PI, 0), _R0(PI, HALF_PI), _RY(HALF_PI, -HALF_PI)]),
    ("011+i111", [_RX(PI, 0), _R0(PI, HALF_PI), _RY(PI, -HALF_PI), _R0(HALF_PI, 0)]),
]


def _ro_rows():
    SX, SY = s_x, s_y
    return [
        ("000", [SX(PI, 0), _R0(PI, HALF_PI), SY(PI, 0)]),
        ("001", [SX(PI, 0)]),
        ("010", [SY(PI, 0)]),
        ("011", [_R0(PI, -HALF_PI)]),
        ("100", [_R0(PI, HALF_PI), SX(PI, 0), _R0(PI, HALF_PI), SY(PI, 0)]),
        ("101", [_R0(PI, HALF_PI), SX(PI, 0)]),
        ("110", [_R0(PI, HALF_PI), SY(PI, 0)]),
        ("000+100", [_R0(HALF_PI, HALF_PI), SX(PI, 0), _R0(PI, HALF_PI), SY(PI, 0)]),
        ("000+101", [SY(HALF_PI, 0), _R0(PI, HALF_PI), SX(PI, 0)]),
        ("000+110", [SX(HALF_PI, 0), _R0(PI, HALF_PI), SY(PI, 0)]),
        ("001+101", [_R0(HALF_PI, HALF_PI), SX(PI, 0)]),
        ("001+111", [SX(HALF_PI, 0)]),
        ("010+110", [_R0(HALF_PI, HALF_PI), SY(PI, 0)]),
        ("010+111", [SY(HALF_PI, 0)]),
        ("011+111", [_R0(HALF_PI, -HALF_PI)]),
        ("000+i100", [_R0(HALF_PI, 0), SX(PI, 0), _R0(PI, HALF_PI), SY(PI, 0)]),
        ("000+i101", [SY(HALF_PI, -HALF_PI), _R0(PI, HALF_PI), SX(PI, 0)]),
        ("000+i110", [SX(HALF_PI, -HALF_PI), _R0(PI, HALF_PI), SY(PI, 0)]),
        ("001+i101", [_R0(HALF_PI, 0), SX(PI, 0)]),
        ("001+i111", [SX(HALF_PI, -HALF_PI)]),
        ("010+i110", [_R0(HALF_PI, 0), SY(PI, 0)]),
        ("010+i111", [SY(HALF_PI, -HALF_PI)]),
        ("011+i111", [_R0(HALF_PI, PI)]),
    ]


R_O_ROWS: list[tuple[str, list]] = _ro_rows()

_R_I = {label: seq for label, seq in R_I_ROWS}
_R_I["000"] = []
_R_O = {label: seq for label, seq in R_O_ROWS}
_R_O["111"] = []


def _row_key(rows: list, key) -> str:
    if isinstance(key, (int, np.integer)):
        if not 0 <= key < len(rows):
            raise KeyError(f"row index {key} outside table of {len(rows)} rows")
        return rows[key][0]
    return key


def r_i(key) -> CompositeGate:
    """Preparation of a table state from |0_C 0_X 0_Y>; ``key`` is a row index or label."""
    label = _row_key(R_I_ROWS, key)
    if label not in _R_I:
        raise KeyError(f"no preparation row for {label!r}")
    return _gate(f"R_i[{label}]", _R_I[label])


def r_o(key) -> CompositeGate:
    """Maps a table state onto |1_C 1_X 1_Y>; ``key`` is a row index or label."""
    label = _row_key(R_O_ROWS, key)
    if label not in _R_O:
        raise KeyError(f"no analysis row for {label!r}")
    return _gate(f"R_o[{label}]", _R_O[label])


def r_o_uses_only_protected_gates(key) -> bool:
    """True when the analysis row is built only from carriers and S_X / S_Y blocks."""
    label = _row_key(R_O_ROWS, key)
    return all(
        (isinstance(item, CompositeGate) and item.name.startswith(("S_X", "S_Y")))
        or (isinstance(item, Pulse) and item.kind.value == "R0")
        for item in _R_O[label]
    )


def library() -> list:
    """Every named sequence, for bulk invariant checks."""
    gates: list = [
        synth_u(0.7, 0.4, -1.1),
        s_x(PI, 0), s_x(PI, PI), s_x(PI / 2, 0), s_x(PI / 2, -PI / 2),
        s_y(PI, 0), s_y(PI / 2, 0), s_y(PI / 2, -PI / 2),
        f_gate(0.0),
        p_x(0.0), p_y(0.0),
        measure_111_mapper().gate,
        hadamard_readout(),
    ]
    gates += [preprocess_circuit(l, m) for l in (0, 1) for m in (0, 1)]
    gates += [r_i(label) for label, _ in R_I_ROWS]
    gates += [r_o(label) for label, _ in R_O_ROWS]
    return gates
