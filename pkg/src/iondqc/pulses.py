"""Primitive microwave and Raman pulses.

Carrier and Zeeman pulses (microwave) rotate |0_C> against |1_C> or |+-Z_C>
with the motion untouched::

    R(chi, phi) = exp[-(i chi / 2)(e^{-i phi} |t><0| + h.c.)]

Blue-sideband pulses (Raman) couple |0_C, n> to |1_C, n+1> of one mode::

    R_X(chi, phi) = exp[(chi / 2)(e^{-i phi} s+ a_X^dag - e^{i phi} s- a_X)]

with s+ = |1_C><0_C|.  The two families carry different prefactors and the
generators below keep both exactly as written.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import statevec as sv


class PulseKind(enum.Enum):
    CARRIER = "R0"
    ZEEMAN_PLUS = "R+Z"
    ZEEMAN_MINUS = "R-Z"
    SIDEBAND_X = "RX"
    SIDEBAND_Y = "RY"


_MICROWAVE_TARGET = {
    PulseKind.CARRIER: sv.ONE,
    PulseKind.ZEEMAN_PLUS: sv.PLUS_Z,
    PulseKind.ZEEMAN_MINUS: sv.MINUS_Z,
}


def _wrap(phi: float) -> float:
    w = math.remainder(phi, 2 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class Pulse:
    kind: PulseKind
    chi: float
    phi: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.chi) or not math.isfinite(self.phi):
            raise ValueError("pulse angles must be finite")

    @property
    def canonical_phi(self) -> float:
        """Phase reduced to (-pi, pi]; display only, generators use the raw value."""
        return _wrap(self.phi)

    def label(self) -> str:
        return f"{self.kind.value}({self.chi!r},{self.phi!r})"

    def __str__(self) -> str:
        return f"{self.kind.value}({self.chi:.6g}, {self.canonical_phi:.6g})"


def carrier(chi, phi=0.0) -> Pulse:
    return Pulse(PulseKind.CARRIER, chi, phi)


def zeeman_plus(chi, phi=0.0) -> Pulse:
    return Pulse(PulseKind.ZEEMAN_PLUS, chi, phi)


def zeeman_minus(chi, phi=0.0) -> Pulse:
    return Pulse(PulseKind.ZEEMAN_MINUS, chi, phi)


def sideband_x(chi, phi=0.0) -> Pulse:
    return Pulse(PulseKind.SIDEBAND_X, chi, phi)


def sideband_y(chi, phi=0.0) -> Pulse:
    return Pulse(PulseKind.SIDEBAND_Y, chi, phi)


def pulse_generator(p: Pulse, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> np.ndarray:
    """Anti-Hermitian exponent of the pulse on the full truncated space."""
    if p.kind in _MICROWAVE_TARGET:
        t = _MICROWAVE_TARGET[p.kind]
        h = np.exp(-1j * p.phi) * sv.internal_ketbra(t, sv.ZERO)
        h = h + h.conj().T
        return sv.on_internal(-0.5j * p.chi * h, n_x, n_y)

    a = sv.mode_x(n_x, n_y) if p.kind is PulseKind.SIDEBAND_X else sv.mode_y(n_x, n_y)
    motion_id = np.eye(n_x * n_y)
    s_plus = np.kron(sv.internal_ketbra(sv.ONE, sv.ZERO), motion_id)
    s_minus = np.kron(sv.internal_ketbra(sv.ZERO, sv.ONE), motion_id)
    return 0.5 * p.chi * (
        np.exp(-1j * p.phi) * s_plus @ a.conj().T - np.exp(1j * p.phi) * s_minus @ a
    )


@lru_cache(maxsize=4096)
def _cached_unitary(kind: PulseKind, chi: float, phi: float, n_x: int, n_y: int) -> np.ndarray:
    u = sv.expm_antihermitian(pulse_generator(Pulse(kind, chi, phi), n_x, n_y))
    u.setflags(write=False)
    return u


def pulse_unitary(p: Pulse, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK) -> np.ndarray:
    """exp of :func:`pulse_generator`; cached and returned read-only."""
    return _cached_unitary(p.kind, float(p.chi), float(p.phi), n_x, n_y)
