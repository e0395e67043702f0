"""Truth-table measurement of the pulse-level controlled swap F(0).

Each population cell prepares an input with R_i from |0_C 0_X 0_Y>, applies
F(0), maps the chosen output state onto |1_C 1_X 1_Y> with R_o, moves that
onto the dark level with the |111> mapper and counts dark shots.  Relative
phases of the eight unit-modulus elements come from four cells per input
superposition combined through a two-argument arctangent.
"""
from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng as rngmod
from . import sequences as sq
from . import statevec as sv
from .errors import ContractViolation

LABELS = tuple(f"{c}{x}{y}" for c, x, y in sq.COMPUTATIONAL_BASIS)
IDEAL_F = sq.Z3 @ sq.CSWAP
IDEAL_OUTPUT = {i: int(np.argmax(np.abs(IDEAL_F[:, i]))) for i in range(8)}

# (l, m) and (k, q) of <l|F|m> and <k|F|q>; the first element is the phase reference.
PHASE_PAIRS = (
    (("000", "000"), ("100", "100")),
    (("000", "000"), ("101", "110")),
    (("000", "000"), ("110", "101")),
    (("001", "001"), ("101", "110")),
    (("001", "001"), ("111", "111")),
    (("010", "010"), ("110", "101")),
    (("010", "010"), ("111", "111")),
    (("011", "011"), ("111", "111")),
)
PREP_PHASES = (0.0, math.pi / 2)


def _wrap(theta: float) -> float:
    w = math.remainder(theta, 2 * math.pi)
    return math.pi if w == -math.pi else w


def circular_mean(angles) -> float:
    return _wrap(cmath.phase(sum(cmath.exp(1j * a) for a in angles)))


def pair_label(pair) -> str:
    (l, m), (k, q) = pair
    return f"<{l}|F|{m}>~<{k}|F|{q}>"


@dataclass(frozen=True)
class TomographyNoise:
    """Depolarization around F(0): survival lam_f, else a uniformly random basis state."""

    lam_f: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam_f <= 1.0:
            raise ContractViolation(f"lambda_f must lie in [0, 1], got {self.lam_f}")


class TruthTableRunner:
    """Holds the F(0) matrix and analysis gates; ``f_full`` may be swapped for tests."""

    def __init__(self, f_full: Optional[np.ndarray] = None,
                 n_x: int = sv.DEFAULT_FOCK, n_y: int = sv.DEFAULT_FOCK):
        self.n_x, self.n_y = n_x, n_y
        self.f_full = np.asarray(f_full) if f_full is not None else np.asarray(sq.f_gate(0.0).matrix(n_x, n_y))
        self.mapper = sq.measure_111_mapper()
        self._mapper_m = np.asarray(self.mapper.matrix(n_x, n_y))
        self._basis = [sv.IonState.basis(c, x, y, n_x, n_y) for c, x, y in sq.COMPUTATIONAL_BASIS]

    def _dark(self, after_f: sv.IonState, output_row: str) -> float:
        s = sq.r_o(output_row).apply(after_f)
        self.mapper.check_precondition(s)
        return sv.dark_probability(sv.apply_unitary(s, self._mapper_m))

    def cell_probabilities(self, input_row: str, output_row: str) -> tuple[float, np.ndarray]:
        """Dark probability with F intact, and for each random-basis replacement."""
        prepared = sq.r_i(input_row).apply(sv.IonState.ground(self.n_x, self.n_y))
        ideal = self._dark(sv.apply_unitary(prepared, self.f_full), output_row)
        mixed = np.array([self._dark(b, output_row) for b in self._basis])
        return ideal, mixed

    def population(self, input_row: str, output_row: str, shots: int,
                   noise: TomographyNoise, rng: np.random.Generator) -> float:
        if shots < 1:
            raise ContractViolation("shots must be positive")
        ideal, mixed = self.cell_probabilities(input_row, output_row)
        survive = rng.random(shots) < noise.lam_f
        replaced = rng.integers(8, size=shots)
        p = np.where(survive, ideal, mixed[replaced])
        return float(np.count_nonzero(rng.random(shots) < p) / shots)

    def exact_population(self, input_row: str, output_row: str, noise: TomographyNoise) -> float:
        ideal, mixed = self.cell_probabilities(input_row, output_row)
        return noise.lam_f * ideal + (1 - noise.lam_f) * float(mixed.mean())


_DEFAULT: Optional[TruthTableRunner] = None


def default_runner() -> TruthTableRunner:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = TruthTableRunner()
    return _DEFAULT


def population(input_row, output_row, shots, noise=TomographyNoise(), rng=None, runner=None) -> float:
    runner = runner or default_runner()
    rng = rng if rng is not None else np.random.default_rng()
    return runner.population(_label(input_row), _label(output_row), shots, noise, rng)


def _label(row) -> str:
    return LABELS[row] if isinstance(row, (int, np.integer)) else row


def _phase_cells(l, k, m, q):
    """(input row, [outputs l, k, l+k, l+ik]) for each prep phase."""
    outs = [l, k, f"{l}+{k}", f"{l}+i{k}"]
    return [(f"{m}+{q}", outs), (f"{m}+i{q}", outs)]


def _check_major(l, k, m, q):
    for a, b in ((l, m), (k, q)):
        if abs(abs(IDEAL_F[LABELS.index(a), LABELS.index(b)]) - 1) > 1e-9:
            raise ContractViolation(f"<{a}|F|{b}> is not a unit-modulus element")
    if l == k or m == q:
        raise ContractViolation("phase pair needs distinct rows and columns")


def combine_phase(p_l: float, p_k: float, p_plus: float, p_plus_i: float, prep_phase: float) -> float:
    """arg(<k|F|q> / <l|F|m>) from the four populations of one preparation."""
    re = 2 * p_plus - p_l - p_k
    im = 2 * p_plus_i - p_l - p_k
    return _wrap(math.atan2(im, re) - prep_phase)


@dataclass(frozen=True)
class PhaseResult:
    phase: float
    per_prep: tuple[float, float]
    populations: tuple[tuple[float, ...], tuple[float, ...]]


def phase_pair(l, k, m, q, shots, noise=TomographyNoise(), rng=None, runner=None,
               cell_rngs=None) -> PhaseResult:
    """Relative phase of <k|F|q> against <l|F|m>, averaged over two preparations."""
    l, k, m, q = (_label(v) for v in (l, k, m, q))
    _check_major(l, k, m, q)
    runner = runner or default_runner()
    rng = rng if rng is not None else np.random.default_rng()
    pops, per = [], []
    for j, ((inp, outs), prep) in enumerate(zip(_phase_cells(l, k, m, q), PREP_PHASES)):
        gens = cell_rngs[4 * j:4 * j + 4] if cell_rngs is not None else [rng] * 4
        try:
            p = tuple(runner.population(inp, o, shots, noise, g) for o, g in zip(outs, gens))
        except KeyError as exc:
            raise ContractViolation(f"no table row for phase pair: {exc}") from None
        pops.append(p)
        per.append(combine_phase(*p, prep))
    return PhaseResult(circular_mean(per), tuple(per), tuple(pops))


def element_phases(pair_phases: list[float]) -> dict[str, float]:
    """Chain the eight relative measurements into phases of the eight major elements."""
    p = pair_phases
    # keyed by input column: <101|F|110> is the element of input 110
    e = {"000": 0.0, "100": p[0], "110": p[1], "101": p[2]}
    e["001"] = e["110"] - p[3]
    e["111"] = e["001"] + p[4]
    e["010"] = e["101"] - p[5]
    # p[6] repeats the 111-010 relation; it is reported, not used in the chain.
    e["011"] = e["111"] - p[7]
    outs = {o: LABELS[IDEAL_OUTPUT[LABELS.index(o)]] for o in LABELS}
    return {f"<{outs[i]}|F|{i}>": _wrap(e[i]) for i in LABELS}


@dataclass(frozen=True)
class TruthTable:
    populations: np.ndarray
    pair_phases: dict[str, float]
    phases: dict[str, float]
    shots_per_cell: int
    seed: Optional[int] = None
    lam_f: float = 1.0
    prep_spread: dict[str, float] = field(default_factory=dict)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.sqrt(np.clip(self.populations, 0.0, None))

    def to_dict(self) -> dict:
        return {
            "labels": list(LABELS),
            "amplitudes": [[float(v) for v in row] for row in self.amplitudes],
            "populations": [[float(v) for v in row] for row in self.populations],
            "pair_phases": self.pair_phases,
            "phases": self.phases,
            "phase_convention": "arg of <out|F|in> relative to <000|F|000>, atan2(imag, real)",
            "shots_per_cell": self.shots_per_cell,
            "seed": self.seed,
            "lambda_f": self.lam_f,
        }


def full_truth_table(shots_per_cell: int, noise: TomographyNoise = TomographyNoise(), seed: int = 0,
                     runner: Optional[TruthTableRunner] = None, workers: int = 1) -> TruthTable:
    """64 population cells plus the eight phase pairs, each cell on its own substream.

    ``populations[o, i]`` is the probability of output ``o`` for input ``i``.
    """
    if shots_per_cell < 1:
        raise ContractViolation("shots_per_cell must be positive")
    runner = runner or default_runner()

    def cell(job):
        cid, i, o = job
        return cid, runner.population(LABELS[i], LABELS[o], shots_per_cell, noise,
                                      rngmod.substream(seed, rngmod.TOMO_CELL, cid))

    jobs = [(8 * i + o, i, o) for i in range(8) for o in range(8)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(cell, jobs))
    else:
        results = [cell(j) for j in jobs]
    pops = np.zeros((8, 8))
    for cid, p in results:
        i, o = divmod(cid, 8)
        pops[o, i] = p

    pair_phases, spread, chain = {}, {}, []
    for n, pair in enumerate(PHASE_PAIRS):
        (l, m), (k, q) = pair
        gens = [rngmod.substream(seed, rngmod.TOMO_CELL, 64 + 8 * n + j) for j in range(8)]
        res = phase_pair(l, k, m, q, shots_per_cell, noise, runner=runner, cell_rngs=gens)
        pair_phases[pair_label(pair)] = res.phase
        spread[pair_label(pair)] = abs(_wrap(res.per_prep[0] - res.per_prep[1]))
        chain.append(res.phase)
    return TruthTable(pops, pair_phases, element_phases(chain), shots_per_cell, seed, noise.lam_f, spread)


@dataclass(frozen=True)
class FidelityReport:
    classical_fidelity: float
    per_input: tuple[float, ...]
    half_widths: tuple[float, ...]
    half_width: float

    def to_dict(self) -> dict:
        return {
            "classical_fidelity": self.classical_fidelity,
            "per_input": dict(zip(LABELS, self.per_input)),
            "half_widths_95": dict(zip(LABELS, self.half_widths)),
            "half_width_95": self.half_width,
        }


def classical_fidelity(t: TruthTable) -> FidelityReport:
    """Mean over the 8 basis inputs of the probability of the ideal output."""
    per = tuple(float(t.populations[IDEAL_OUTPUT[i], i]) for i in range(8))
    var = [p * (1 - p) / t.shots_per_cell for p in per]
    hw = tuple(1.96 * math.sqrt(v) for v in var)
    return FidelityReport(float(np.mean(per)), per, hw, 1.96 * math.sqrt(sum(var)) / 8)


def rotated_swap_block(theta: float, runner: Optional[TruthTableRunner] = None) -> np.ndarray:
    """F(0) with the elements <101|F|110> and <110|F|101> multiplied by e^{i theta}."""
    runner = runner or default_runner()
    d = np.ones(runner.f_full.shape[0], dtype=complex)
    for c, x, y in ((1, 0, 1), (1, 1, 0)):
        d[sv.index(c, x, y, runner.n_x, runner.n_y)] = np.exp(1j * theta)
    return d[:, None] * runner.f_full


def lambda_f_for_fidelity(fidelity: float) -> float:
    """Survival giving classical fidelity ``fidelity``: F = lam + (1 - lam)/8."""
    return (fidelity - 0.125) / 0.875
