"""The modular DQC1 client on a single trapped ion.

The client prepares one of four correlated states, swaps the control and
X-mode qubits with S_X(pi, 0), hands the ion to the server (which may act
only on |0_C>, |1_C>), undoes the swap with S_X(pi, pi), applies the
controlled swap F(0) and reads out sigma_1 on the control.  Averaged over the
four preparations, <sigma_1> = |tr(U)/2|^2.  Decoherence on the client side
scales this by the survival probability lambda, which an identity-server run
calibrates away.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from . import rng as rngmod
from . import sequences as sq
from . import statevec as sv
from .errors import ContractViolation, ServerContractError

PAULI = {
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}
# sigma_{theta,phi} angles reproducing each Pauli matrix exactly.
PAULI_EULER = {1: (math.pi / 2, 0.0), 2: (math.pi / 2, -math.pi / 2), 3: (math.pi, 0.0)}

BRANCHES = ((0, 0), (0, 1), (1, 0), (1, 1))
ENUMERATED, UNIFORM = "enumerated", "uniform"


# -- interface and server ------------------------------------------------------

@dataclass(frozen=True)
class InterfaceSpec:
    """Subsystem and basis through which client and server exchange the qubit."""

    subsystem: str = "control"
    levels: tuple[int, ...] = (sv.ZERO, sv.ONE)
    labels: tuple[str, ...] = ("0_C", "1_C")

    def __post_init__(self):
        if len(self.levels) != len(self.labels):
            raise ContractViolation("interface levels and labels differ in length")
        if len(set(self.levels)) != len(self.levels) or len(set(self.labels)) != len(self.labels):
            raise ContractViolation("interface basis labels must be distinct")

    @property
    def dim(self) -> int:
        return len(self.levels)

    def to_wire(self) -> dict:
        return {"subsystem": self.subsystem, "levels": list(self.levels)}


CONTROL_INTERFACE = InterfaceSpec()


@dataclass(frozen=True)
class UnitarySpec:
    """Server-side description of U.  The client never reads this."""

    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("identity", "pauli_rotation", "euler", "matrix", "gates")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ContractViolation(f"unknown unitary type {self.kind!r}")
        if self.kind == "matrix":
            m = np.asarray(self.params["matrix"], dtype=complex)
            if not sv.is_unitary(m):
                raise ContractViolation("raw matrix is not unitary within 1e-9")
        if self.kind == "pauli_rotation" and int(self.params["axis"]) not in PAULI:
            raise ContractViolation("pauli axis must be 1, 2 or 3")

    @classmethod
    def identity(cls) -> "UnitarySpec":
        return cls("identity")

    @classmethod
    def pauli_rotation(cls, axis: int, chi: float) -> "UnitarySpec":
        return cls("pauli_rotation", {"axis": int(axis), "chi": float(chi)})

    @classmethod
    def euler(cls, chi: float, theta: float, phi: float) -> "UnitarySpec":
        return cls("euler", {"chi": float(chi), "theta": float(theta), "phi": float(phi)})

    @classmethod
    def raw(cls, matrix) -> "UnitarySpec":
        return cls("matrix", {"matrix": np.asarray(matrix, dtype=complex)})

    @classmethod
    def gates(cls, n: int, gates: Sequence[dict]) -> "UnitarySpec":
        return cls("gates", {"n": int(n), "gates": list(gates)})

    @property
    def n_qubits(self) -> int:
        if self.kind == "gates":
            return int(self.params["n"])
        if self.kind == "matrix":
            return int(round(math.log2(np.asarray(self.params["matrix"]).shape[0])))
        return 1

    def matrix(self) -> np.ndarray:
        p = self.params
        if self.kind == "identity":
            return np.eye(2, dtype=complex)
        if self.kind == "pauli_rotation":
            return expm(-0.5j * p["chi"] * PAULI[p["axis"]])
        if self.kind == "euler":
            return sq.euler_unitary(p["chi"], p["theta"], p["phi"])
        if self.kind == "matrix":
            return np.asarray(p["matrix"], dtype=complex)
        from .gatelevel import unitary_from_gates

        return unitary_from_gates(p["n"], p["gates"])

    def euler_angles(self) -> Optional[tuple[float, float, float]]:
        if self.kind == "identity":
            return (0.0, 0.0, 0.0)
        if self.kind == "pauli_rotation":
            theta, phi = PAULI_EULER[self.params["axis"]]
            return (self.params["chi"], theta, phi)
        if self.kind == "euler":
            return (self.params["chi"], self.params["theta"], self.params["phi"])
        return None

    # file format: JSON object, complex entries as [re, im]
    def to_dict(self) -> dict:
        d: dict[str, Any] = {"type": self.kind}
        for k, v in self.params.items():
            if k == "matrix":
                d[k] = [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(v)]
            else:
                d[k] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UnitarySpec":
        d = dict(d)
        kind = d.pop("type", None)
        d.pop("realization", None)
        if kind is None:
            raise ContractViolation("unitary spec needs a 'type' field")
        if kind == "matrix":
            d["matrix"] = np.array([[complex(re, im) for re, im in row] for row in d["matrix"]])
        if kind == "pauli_rotation":
            d = {"axis": int(d["axis"]), "chi": float(d["chi"])}
        if kind == "euler":
            d = {k: float(d[k]) for k in ("chi", "theta", "phi")}
        return cls(kind, d)


def load_unitary_spec(path) -> tuple[UnitarySpec, str]:
    """Read a unitary spec file; returns the spec and its requested realization."""
    doc = json.loads(Path(path).read_text())
    return UnitarySpec.from_dict(doc), doc.get("realization", "matrix")


class ServerHandle:
    """Black-box service that applies U through the agreed interface.

    Subclasses implement :meth:`apply`.  ``descriptor`` is for humans and
    logs; client code never branches on it.
    """

    interface: InterfaceSpec = CONTROL_INTERFACE
    descriptor: Any = None

    def apply(self, state: sv.IonState) -> sv.IonState:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def internal_operator(u2: np.ndarray, interface: InterfaceSpec = CONTROL_INTERFACE) -> np.ndarray:
    """Embed a unitary on the interface levels into the 4 internal levels."""
    m = np.eye(sv.N_INTERNAL, dtype=complex)
    lv = list(interface.levels)
    m[np.ix_(lv, lv)] = u2
    return m


def apply_internal(amplitudes: np.ndarray, op4: np.ndarray) -> np.ndarray:
    """Act with a 4x4 internal operator on a full amplitude vector, motion untouched."""
    t = amplitudes.reshape(sv.N_INTERNAL, -1)
    return (op4 @ t).reshape(-1)


class LocalServer(ServerHandle):
    """In-process server.

    ``realization="matrix"`` applies U directly; ``"pulses"`` drives the
    three-carrier microwave sequence for U's Euler form (equal to U up to a
    global phase).
    """

    def __init__(self, spec: UnitarySpec, realization: str = "matrix"):
        self.descriptor = spec
        self.realization = realization
        if spec.n_qubits != 1:
            raise ContractViolation("the ion's control interface carries one qubit")
        if realization == "matrix":
            self._op4 = internal_operator(spec.matrix())
        elif realization == "pulses":
            angles = spec.euler_angles()
            if angles is None:
                raise ContractViolation(f"no pulse realization for {spec.kind!r} servers")
            self._op4 = np.array(sq.synth_u(*angles).matrix(1, 1))
        else:
            raise ContractViolation(f"unknown realization {realization!r}")

    def apply(self, state: sv.IonState) -> sv.IonState:
        return sv.IonState(apply_internal(state.amplitudes, self._op4), state.n_x, state.n_y)


def identity_server() -> LocalServer:
    return LocalServer(UnitarySpec.identity())


# -- noise, results, trace -----------------------------------------------------

@dataclass(frozen=True)
class NoiseConfig:
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ContractViolation(f"survival probability must lie in [0, 1], got {self.lam}")


NOISELESS = NoiseConfig(1.0)


@dataclass(frozen=True)
class EstimateResult:
    raw_mean: float
    stderr: float
    shots: int
    schedule: str
    lambda_hat: Optional[float] = None

    @property
    def calibrated(self) -> Optional[float]:
        if self.lambda_hat is None or self.lambda_hat <= 0:
            return None
        return self.raw_mean / self.lambda_hat

    @property
    def calibrated_stderr(self) -> Optional[float]:
        if self.lambda_hat is None or self.lambda_hat <= 0:
            return None
        return self.stderr / self.lambda_hat

    def with_calibration(self, lambda_hat: float) -> "EstimateResult":
        return EstimateResult(self.raw_mean, self.stderr, self.shots, self.schedule, lambda_hat)


def summarize(outcomes: np.ndarray, schedule: str) -> EstimateResult:
    outcomes = np.asarray(outcomes, dtype=float)
    n = outcomes.size
    mean = float(outcomes.mean())
    se = float(outcomes.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateResult(mean, se, n, schedule)


class InstructionTrace:
    """Append-only log of client actions, hashed as it grows."""

    def __init__(self, keep: bool = False):
        self._hash = hashlib.sha256()
        self.keep = keep
        self.lines: list[str] = []
        self.count = 0

    def record(self, line: str) -> None:
        self._hash.update(line.encode())
        self._hash.update(b"\n")
        self.count += 1
        if self.keep:
            self.lines.append(line)

    def extend(self, lines) -> None:
        for line in lines:
            self.record(line)

    def digest(self) -> str:
        return self._hash.hexdigest()

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


# -- the client ----------------------------------------------------------------

class ModularClient:
    """Fixed, U-independent pulse program around one server call."""

    def __init__(self, n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK):
        self.n_x, self.n_y = n_x, n_y
        self.swap_in = sq.s_x(math.pi, 0.0)
        self.swap_out = sq.s_x(math.pi, math.pi)
        self.cswap = sq.f_gate(0.0)
        self.readout = sq.hadamard_readout()
        self.pre_gates = {b: sq.preprocess_circuit(*b) for b in BRANCHES}
        ground = sv.IonState.ground(n_x, n_y)
        self._delivered = {
            b: self.swap_in.apply(self.pre_gates[b].apply(ground)) for b in BRANCHES
        }
        self._post = (
            self.readout.matrix(n_x, n_y) @ self.cswap.matrix(n_x, n_y) @ self.swap_out.matrix(n_x, n_y)
        )
        self._pre_lines = {
            b: self.pre_gates[b].instructions() + self.swap_in.instructions() for b in BRANCHES
        }
        self._post_lines = (
            self.swap_out.instructions() + self.cswap.instructions() + self.readout.instructions()
        )

    def delivered_state(self, l: int, m: int) -> sv.IonState:
        """State handed to the server for branch (l, m)."""
        return self._delivered[(l, m)]

    def receive(self, server: ServerHandle, state: sv.IonState) -> sv.IonState:
        out = server.apply(state)
        if not isinstance(out, sv.IonState) or out.dim != state.dim:
            raise ServerContractError("server returned a state of the wrong shape")
        norm = out.norm()
        if abs(norm - 1.0) > 1e-6:
            raise ServerContractError(f"server returned a state with norm {norm:.9f}")
        return sv.IonState(out.amplitudes / norm, out.n_x, out.n_y)

    def finish(self, returned: sv.IonState) -> sv.IonState:
        """Post-processing up to (not including) fluorescence detection."""
        return sv.IonState(self._post @ returned.amplitudes, returned.n_x, returned.n_y)

    def run_shot(
        self,
        server: ServerHandle,
        l: int,
        m: int,
        noise: NoiseConfig,
        rng: np.random.Generator,
        trace: Optional[InstructionTrace] = None,
    ) -> int:
        if trace is not None:
            trace.record(f"branch {l}{m}")
            trace.extend(self._pre_lines[(l, m)])
            iface = server.interface
            trace.record(f"call server {iface.subsystem}{list(iface.levels)}")
            trace.extend(self._post_lines)
            trace.record("detect dark=+1 bright=-1")
        returned = self.receive(server, self._delivered[(l, m)])
        final = self.finish(returned)
        result, _ = sv.measure_internal_bright(final, rng)
        outcome = 1 if result == sv.DARK else -1
        # Depolarized shots carry no information: fair coin.
        if rng.random() >= noise.lam:
            outcome = 1 if rng.random() < 0.5 else -1
        return outcome


_DEFAULT_CLIENT: Optional[ModularClient] = None


def default_client() -> ModularClient:
    global _DEFAULT_CLIENT
    if _DEFAULT_CLIENT is None:
        _DEFAULT_CLIENT = ModularClient()
    return _DEFAULT_CLIENT


def run_shot(server, l, m, noise=NOISELESS, rng=None, trace=None) -> int:
    rng = rng if rng is not None else np.random.default_rng()
    return default_client().run_shot(server, l, m, noise, rng, trace)


def schedule_branch(i: int, shots: int, schedule: str, seed: int) -> tuple[int, int]:
    if schedule == ENUMERATED:
        return BRANCHES[i // (shots // 4)]
    return BRANCHES[int(rngmod.substream(seed, rngmod.SCHEDULE, i).integers(4))]


def _check_schedule(shots: int, schedule: str) -> None:
    if schedule not in (ENUMERATED, UNIFORM):
        raise ContractViolation(f"unknown schedule {schedule!r}")
    if shots < 1:
        raise ContractViolation("need at least one shot")
    if schedule == ENUMERATED and (shots < 4 or shots % 4):
        raise ContractViolation("enumerated schedule needs a positive multiple of 4 shots")


def shot_outcome(
    server: ServerHandle,
    i: int,
    shots: int,
    noise: NoiseConfig,
    seed: int,
    schedule: str = ENUMERATED,
    unitary_index: int = 0,
    trace: Optional[InstructionTrace] = None,
    client: Optional[ModularClient] = None,
) -> int:
    """Outcome of shot ``i``; depends only on (seed, unitary_index, i, schedule)."""
    client = client or default_client()
    l, m = schedule_branch(i, shots, schedule, seed)
    stream = rngmod.substream(seed, rngmod.MEASURE, unitary_index, i)
    return client.run_shot(server, l, m, noise, stream, trace)


def estimate_trace(
    server: ServerHandle,
    shots: int = 4000,
    noise: NoiseConfig = NOISELESS,
    seed: int = 0,
    schedule: str = ENUMERATED,
    unitary_index: int = 0,
    trace: Optional[InstructionTrace] = None,
) -> EstimateResult:
    """Estimate |T(U)|^2 by repeated shots against ``server``.

    The enumerated schedule runs shots/4 shots for each preparation (l, m);
    the uniform schedule draws (l, m) per shot.
    """
    _check_schedule(shots, schedule)
    client = default_client()
    outcomes = np.empty(shots)
    for i in range(shots):
        outcomes[i] = shot_outcome(server, i, shots, noise, seed, schedule, unitary_index, trace, client)
    return summarize(outcomes, schedule)


@dataclass(frozen=True)
class Calibration:
    lambda_hat: float
    stderr: float
    shots: int
    seed: int

    @property
    def half_width(self) -> float:
        """95% confidence half-width."""
        return 1.96 * self.stderr

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "stderr": self.stderr,
            "half_width_95": self.half_width,
            "shots": self.shots,
            "seed": self.seed,
        }


def calibrate(shots: int = 10000, noise: NoiseConfig = NOISELESS, seed: int = 0,
              schedule: str = ENUMERATED) -> Calibration:
    """Run against the built-in identity server; lambda_hat = raw mean."""
    res = estimate_trace(identity_server(), shots, noise, seed, schedule)
    return Calibration(res.raw_mean, res.stderr, shots, seed)


def exact_expectation(u, noise: NoiseConfig = NOISELESS) -> float:
    """Exact <sigma_1> by density-operator evolution over the four branches.

    ``u`` may be a :class:`UnitarySpec`, a 2x2 array or any server handle;
    a server is called once per branch, which is exact because the branch
    mixture is evolved linearly.
    """
    if isinstance(u, ServerHandle):
        server = u
    elif isinstance(u, UnitarySpec):
        server = LocalServer(u)
    else:
        server = LocalServer(UnitarySpec.raw(u))
    client = default_client()
    rho = exact_final_state(server, noise, client)
    obs = np.diag([1.0 if i < client.n_x * client.n_y else -1.0 for i in range(rho.entries.shape[0])])
    return rho.expectation(obs)


def exact_final_state(server: ServerHandle, noise: NoiseConfig = NOISELESS,
                      client: Optional[ModularClient] = None) -> sv.DensityOperator:
    """Density operator right after the readout basis change."""
    client = client or default_client()
    before = [client.swap_out.apply(client.receive(server, client.delivered_state(*b))) for b in BRANCHES]
    rho = sv.DensityOperator.mixture(before).evolve(np.asarray(client.cswap.matrix(client.n_x, client.n_y)))
    comp = sv.computational_indices(client.n_x, client.n_y)
    mixed = np.zeros_like(rho.entries)
    mixed[comp, comp] = 1.0 / len(comp)
    rho = sv.DensityOperator(noise.lam * rho.entries + (1 - noise.lam) * mixed)
    return rho.evolve(np.asarray(client.readout.matrix(client.n_x, client.n_y)))


def required_shots(epsilon: float, lam: float = 1.0, c: float = 1.0) -> int:
    """ceil(c / (lambda^2 epsilon^2)); c = 1 bounds the variance of a +-1 outcome."""
    if epsilon <= 0:
        raise ContractViolation("epsilon must be positive")
    if not 0 < lam <= 1:
        raise ContractViolation("lambda must lie in (0, 1]")
    # Round away float noise before the ceiling (e.g. 1/0.1**2 = 100.00000000000001).
    return int(math.ceil(round(c / (lam * lam * epsilon * epsilon), 9)))


# -- the benchmark set -----------------------------------------------------------

BENCH_CHIS = tuple(k * math.pi / 6 for k in range(7))


@dataclass(frozen=True)
class BenchUnitary:
    label: str
    chi: float
    spec: UnitarySpec

    @property
    def theory(self) -> float:
        return math.cos(self.chi / 2) ** 2


def benchmark_unitaries() -> list[BenchUnitary]:
    """19 rotations exp(-i chi sigma_k / 2); the shared chi = 0 identity appears once."""
    out = [BenchUnitary("I", 0.0, UnitarySpec.identity())]
    for axis in (1, 2, 3):
        for chi in BENCH_CHIS[1:]:
            out.append(BenchUnitary(f"sigma{axis}", chi, UnitarySpec.pauli_rotation(axis, chi)))
    return out
