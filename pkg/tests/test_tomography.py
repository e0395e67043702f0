import math

import numpy as np
import pytest

from iondqc import tomography as tomo
from iondqc.errors import ContractViolation

PI = math.pi
NOISELESS = tomo.TomographyNoise(1.0)


def circ_dist(a, b):
    return abs(math.remainder(a - b, 2 * PI))


@pytest.fixture(scope="module")
def noiseless_table():
    return tomo.full_truth_table(1000, NOISELESS, seed=3)


def test_swapped_cell_population():
    rng = np.random.default_rng(0)
    assert tomo.population("110", "101", 500, NOISELESS, rng) == pytest.approx(1.0)
    assert tomo.population("000", "111", 500, NOISELESS, rng) == pytest.approx(0.0)


def test_depolarized_diagonal_population():
    runner = tomo.default_runner()
    lam = 0.7
    assert runner.exact_population("000", "000", tomo.TomographyNoise(lam)) == pytest.approx(lam + (1 - lam) / 8)
    p = tomo.population("000", "000", 20000, tomo.TomographyNoise(lam), np.random.default_rng(1))
    q = lam + (1 - lam) / 8
    assert abs(p - q) < 4 * math.sqrt(q * (1 - q) / 20000)


def test_exact_populations_match_ideal_gate():
    runner = tomo.default_runner()
    for i, inp in enumerate(tomo.LABELS):
        for o, out in enumerate(tomo.LABELS):
            expected = abs(tomo.IDEAL_F[o, i]) ** 2
            assert runner.exact_population(inp, out, NOISELESS) == pytest.approx(expected, abs=1e-9)


def test_noiseless_table_pattern(noiseless_table):
    pattern = np.abs(tomo.IDEAL_F)
    assert np.array_equal(noiseless_table.amplitudes, pattern)


def test_columns_normalized(noiseless_table):
    shots = noiseless_table.shots_per_cell
    assert np.abs(noiseless_table.populations.sum(axis=0) - 1).max() < 4 / math.sqrt(shots)


@pytest.mark.parametrize("pair", tomo.PHASE_PAIRS, ids=tomo.pair_label)
def test_noiseless_pair_phases(pair, noiseless_table):
    (l, m), (k, q) = pair
    expected = np.angle(tomo.IDEAL_F[tomo.LABELS.index(k), tomo.LABELS.index(q)]
                        / tomo.IDEAL_F[tomo.LABELS.index(l), tomo.LABELS.index(m)])
    got = noiseless_table.pair_phases[tomo.pair_label(pair)]
    assert circ_dist(got, expected) < 4 / math.sqrt(noiseless_table.shots_per_cell)


def test_negative_element_phase_is_pi(noiseless_table):
    assert circ_dist(noiseless_table.phases["<101|F|110>"], PI) < 0.15
    others = [v for k, v in noiseless_table.phases.items() if k != "<101|F|110>"]
    assert max(circ_dist(v, 0.0) for v in others) < 0.2
    assert noiseless_table.phases["<000|F|000>"] == 0.0


def test_two_preparations_agree(noiseless_table):
    bound = 4 / math.sqrt(noiseless_table.shots_per_cell)
    assert max(noiseless_table.prep_spread.values()) < 2 * bound


@pytest.mark.parametrize("theta", [PI / 4, -PI / 4, 3 * PI / 4, -3 * PI / 4])
def test_arctangent_covers_all_quadrants(theta):
    runner = tomo.TruthTableRunner(tomo.rotated_swap_block(theta))
    res = tomo.phase_pair("000", "110", "000", "101", 4000, NOISELESS, np.random.default_rng(5), runner)
    assert circ_dist(res.phase, theta) < 0.1
    res = tomo.phase_pair("000", "101", "000", "110", 4000, NOISELESS, np.random.default_rng(6), runner)
    assert circ_dist(res.phase, theta + PI) < 0.1


def test_combine_phase_exact():
    # a = 1/sqrt2, b = e^{i 0.3}/sqrt2 after a real preparation
    a, b = 1 / math.sqrt(2), np.exp(0.3j) / math.sqrt(2)
    p_l, p_k = abs(a) ** 2, abs(b) ** 2
    p_plus = abs(a + b) ** 2 / 2
    p_plus_i = abs(a - 1j * b) ** 2 / 2
    assert tomo.combine_phase(p_l, p_k, p_plus, p_plus_i, 0.0) == pytest.approx(0.3)


def test_non_major_pair_rejected():
    with pytest.raises(ContractViolation):
        tomo.phase_pair("000", "101", "000", "101", 10)
    with pytest.raises(ContractViolation):
        tomo.phase_pair("000", "000", "000", "000", 10)


def test_fidelity_ideal_and_uniform(noiseless_table):
    assert tomo.classical_fidelity(noiseless_table).classical_fidelity == 1.0
    uniform = tomo.TruthTable(np.full((8, 8), 1 / 8), {}, {}, 100)
    assert tomo.classical_fidelity(uniform).classical_fidelity == pytest.approx(0.125)


def test_fidelity_is_mean_of_per_input():
    t = tomo.full_truth_table(200, tomo.TomographyNoise(0.5), seed=1)
    rep = tomo.classical_fidelity(t)
    assert rep.classical_fidelity == pytest.approx(np.mean(rep.per_input))
    assert len(rep.half_widths) == 8


def test_headline_fidelity():
    lam_f = tomo.lambda_f_for_fidelity(0.85)
    assert lam_f == pytest.approx(0.8286, abs=1e-4)
    t = tomo.full_truth_table(2000, tomo.TomographyNoise(0.8286), seed=8)
    assert abs(tomo.classical_fidelity(t).classical_fidelity - 0.85) < 0.02


def test_deterministic_and_worker_independent():
    a = tomo.full_truth_table(100, tomo.TomographyNoise(0.9), seed=4)
    b = tomo.full_truth_table(100, tomo.TomographyNoise(0.9), seed=4, workers=4)
    assert np.array_equal(a.populations, b.populations)
    assert a.pair_phases == b.pair_phases


def test_report_document():
    t = tomo.full_truth_table(50, seed=2)
    doc = t.to_dict()
    assert len(doc["amplitudes"]) == 8 and len(doc["amplitudes"][0]) == 8
    assert len(doc["phases"]) == 8 and len(doc["pair_phases"]) == 8
    assert doc["seed"] == 2 and doc["shots_per_cell"] == 50


def test_noise_range():
    with pytest.raises(ContractViolation):
        tomo.TomographyNoise(-0.1)
    with pytest.raises(ContractViolation):
        tomo.full_truth_table(0)
