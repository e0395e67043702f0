import math

import numpy as np
import pytest

from iondqc import sequences as sq
from iondqc import statevec as sv
from iondqc.errors import LeakageError, ParameterError
from iondqc.gatelevel import random_unitary
from iondqc.protocol import internal_operator

PI = math.pi
CHI_GRID = np.linspace(0, PI, 7)
PHI_GRID = np.linspace(-PI, PI, 8, endpoint=False)
X_BASIS = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0))
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)


def restrict(u, basis):
    idx = [sv.index(*b) for b in basis]
    return np.asarray(u)[np.ix_(idx, idx)]


def control_op(u2):
    return sv.on_internal(internal_operator(u2))


@pytest.mark.parametrize("chi", CHI_GRID)
@pytest.mark.parametrize("phi", PHI_GRID)
def test_modified_swap_matches_target(chi, phi):
    assert sq.s_x(chi, phi).target_deviation() < 1e-9
    assert sq.s_y(chi, phi).target_deviation() < 1e-9


def test_modified_swap_rejects_bad_angle():
    with pytest.raises(ParameterError):
        sq.swap_params(PI + 0.1, 0.0)


def test_controlled_swap_is_cswap_then_z3():
    f = sq.f_gate(0.0).restricted()
    assert sv.compare_up_to_global_phase(f, sq.Z3 @ sq.CSWAP) < 1e-9
    # the other matrix ordering puts the sign on the wrong element
    assert sv.compare_up_to_global_phase(f, sq.CSWAP @ sq.Z3) > 1.0
    assert np.allclose(sq.Z1 @ sq.CSWAP, sq.CSWAP @ sq.Z3)


@pytest.mark.parametrize("phi", [0.0, 0.4, -2.0, PI])
def test_controlled_swap_family(phi):
    assert sq.f_gate(phi).target_deviation() < 1e-9


def test_controlled_swap_unitary_on_full_space():
    assert sv.is_unitary(sq.f_gate(0.0).matrix(), 1e-10)


@pytest.mark.parametrize("seed", range(50))
def test_outsourcing_identity(seed):
    u = random_unitary(2, np.random.default_rng(seed))
    uc = control_op(u)
    swap_in = np.asarray(sq.s_x(PI, 0).matrix())
    swap_out = np.asarray(sq.s_x(PI, PI).matrix())
    # S_X(pi, pi) first, then U, then S_X(pi, 0): conjugate lands on X
    first = restrict(swap_in @ uc @ swap_out, X_BASIS)
    assert sv.compare_up_to_global_phase(first, sq.Z2 @ np.kron(u.conj(), np.eye(2)) @ sq.Z2) < 1e-9
    # the order the client runs: S_X(pi, 0) first; U lands on X conjugated by sigma_1
    second = restrict(swap_out @ uc @ swap_in, X_BASIS)
    assert sv.compare_up_to_global_phase(second, sq.Z2 @ np.kron(SIGMA1 @ u @ SIGMA1, np.eye(2)) @ sq.Z2) < 1e-9


@pytest.mark.parametrize("chi,theta,phi", [(0.7, 0.4, -1.1), (PI, PI / 2, 0.0), (PI / 3, PI, 0.0), (2.0, 1.0, 2.5)])
def test_microwave_synthesis(chi, theta, phi):
    g = sq.synth_u(chi, theta, phi)
    assert g.target_deviation() < 1e-9
    assert sv.compare_up_to_global_phase(sq.euler_unitary(chi, theta, phi),
                                         sq.synth_u(chi, theta, phi).target) < 1e-12


@pytest.mark.parametrize("lm", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_preparation_circuits(lm):
    out = sq.preprocess_circuit(*lm).apply(sv.IonState.ground())
    assert sv.compare_up_to_global_phase(out, sq.preprocess_target(*lm)) < 1e-9


@pytest.mark.parametrize("lm", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_preparation_sign_is_z1(lm):
    l, m = lm
    psi = np.zeros(8, dtype=complex)
    psi[4 * 0 + 2 * l + m] += 1 / math.sqrt(2)
    psi[4 * 1 + 2 * m + l] += 1 / math.sqrt(2)
    target = sq.preprocess_target(l, m).amplitudes[sv.computational_indices()]
    assert np.abs(sq.Z1 @ psi - target).max() < 1e-12
    plus_lm = np.zeros(8, dtype=complex)
    plus_lm[2 * l + m] = plus_lm[4 + 2 * l + m] = 1 / math.sqrt(2)
    assert np.abs(sq.CSWAP @ sq.Z3 @ plus_lm - target).max() < 1e-12


@pytest.mark.parametrize("label", [r[0] for r in sq.R_I_ROWS] + ["000"])
def test_preparation_rows(label):
    out = sq.r_i(label).apply(sv.IonState.ground())
    assert sv.compare_up_to_global_phase(out, sq.label_state(label)) < 1e-9


@pytest.mark.parametrize("label", [r[0] for r in sq.R_O_ROWS] + ["111"])
def test_analysis_rows(label):
    out = sq.r_o(label).apply(sq.label_state(label))
    assert sv.compare_up_to_global_phase(out, sv.IonState.basis(1, 1, 1)) < 1e-9


@pytest.mark.parametrize("label", [r[0] for r in sq.R_O_ROWS])
def test_analysis_rows_avoid_bare_sidebands(label):
    assert sq.r_o_uses_only_protected_gates(label)


def test_row_lookup_by_index_and_errors():
    assert sq.r_i(0).name == "R_i[001]"
    with pytest.raises(KeyError):
        sq.r_o("000+i001")
    with pytest.raises(KeyError):
        sq.r_i(99)


@pytest.mark.parametrize("c,x,y", sq.COMPUTATIONAL_BASIS)
def test_111_mapper(c, x, y):
    out = sq.measure_111_mapper().apply(sv.IonState.basis(c, x, y))
    p_dark = sv.dark_probability(out)
    assert p_dark == pytest.approx(1.0 if (c, x, y) == (1, 1, 1) else 0.0, abs=1e-9)


@pytest.mark.parametrize("pulse_pair,mode", [(sq.p_x, "x"), (sq.p_y, "y")])
def test_p_gates_swap_both_ladders(pulse_pair, mode):
    g = pulse_pair(0.0)
    pairs = [((0, 0), (1, 1)), ((0, 1), (1, 2))]
    for (c0, n0), (c1, n1) in pairs:
        start = (c0, n0, 0) if mode == "x" else (c0, 0, n0)
        end = (c1, n1, 0) if mode == "x" else (c1, 0, n1)
        out = g.apply(sv.IonState.basis(*start))
        assert abs(out.amplitude(*end)) == pytest.approx(1.0, abs=1e-9)


def test_111_mapper_refuses_leaky_state():
    with pytest.raises(LeakageError):
        sq.measure_111_mapper().apply(sv.IonState.basis(0, 2, 0))


def test_hadamard_readout_maps_plus_to_dark():
    plus = sv.IonState.from_components({(0, 0, 0): 1, (1, 0, 0): 1})
    minus = sv.IonState.from_components({(0, 0, 0): 1, (1, 0, 0): -1})
    h = sq.hadamard_readout()
    assert sv.dark_probability(h.apply(plus)) == pytest.approx(1.0)
    assert sv.dark_probability(h.apply(minus)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("gate", sq.library(), ids=lambda g: g.name)
def test_no_leakage_from_computational_inputs(gate):
    for c, x, y in sq.COMPUTATIONAL_BASIS:
        assert gate.apply(sv.IonState.basis(c, x, y)).leakage(level=3) < 1e-9


@pytest.mark.parametrize("gate", [sq.f_gate(0.0), sq.s_x(PI, 0), sq.r_o("000+i110"), sq.preprocess_circuit(0, 1)],
                         ids=lambda g: g.name)
def test_stepwise_equals_precomposed(gate):
    s = sq.label_state("001+i110")
    assert np.abs(gate.apply(s).amplitudes - gate.apply_stepwise(s).amplitudes).max() < 1e-12


def test_larger_truncation_changes_nothing_on_computational_inputs():
    f4 = sq.f_gate(0.0).restricted(n_x=4, n_y=4)
    f6 = sq.f_gate(0.0).restricted(n_x=6, n_y=6)
    assert np.abs(f4 - f6).max() < 1e-9


def test_label_parsing():
    assert sq.parse_label("011") == {(0, 1, 1): 1.0}
    assert sq.parse_label("000+i110") == {(0, 0, 0): 1.0, (1, 1, 0): 1j}
