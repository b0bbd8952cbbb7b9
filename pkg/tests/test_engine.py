"""Engine-level checks: gate algebra, measurement semantics, backend parity."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghznet.engine import (
    DENSE_QUBIT_CAP,
    BackendError,
    DenseCapError,
    EngineError,
    GhzRegister,
    IDENTITY,
    PAULI_Z,
    RegisterError,
    phase_gate,
    random_diagonal_circuit,
)

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def rng(seed=0):
    return np.random.default_rng(seed)


# ----------------------------------------------------------------------
# creation


def test_create_phase_register():
    reg = GhzRegister(4)
    assert reg.arity == 4
    assert reg.theta_over_pi == Fraction(0)
    assert not reg.consumed


def test_create_invalid_arity():
    with pytest.raises(RegisterError):
        GhzRegister(1)


def test_create_dense_ghz3_amplitudes():
    reg = GhzRegister(3, backend="dense")
    amps = dict((i, complex(re, im)) for i, re, im in reg.export_amplitudes())
    assert set(amps) == {0, 7}
    assert amps[0] == pytest.approx(1 / np.sqrt(2))
    assert amps[7] == pytest.approx(1 / np.sqrt(2))


def test_dense_cap():
    with pytest.raises(DenseCapError):
        GhzRegister(DENSE_QUBIT_CAP + 1, backend="dense")


# ----------------------------------------------------------------------
# diagonal gates


def test_pauli_z_flips_phase():
    reg = GhzRegister(3)
    reg.apply_diagonal(2, PAULI_Z)
    assert reg.theta_over_pi == Fraction(1)


def test_two_half_phase_gates_compose_to_pi():
    reg = GhzRegister(3)
    reg.apply_diagonal(1, phase_gate(1))
    reg.apply_diagonal(3, phase_gate(1))
    # each shifts by -pi/2; -pi is pi mod 2*pi
    assert reg.theta_over_pi == Fraction(1)


def test_z_squared_is_identity():
    reg = GhzRegister(2)
    reg.apply_diagonal(1, PAULI_Z)
    reg.apply_diagonal(2, PAULI_Z)
    assert reg.theta_over_pi == Fraction(0)


def test_gate_out_of_range():
    reg = GhzRegister(2)
    with pytest.raises(RegisterError):
        reg.apply_diagonal(3, PAULI_Z)


def test_gate_after_terminal_measurement_rejected():
    reg = GhzRegister(2)
    reg.hadamard_all_then_measure(rng())
    with pytest.raises(RegisterError):
        reg.apply_diagonal(1, PAULI_Z)


def test_diagonal_noop_on_collapsed():
    reg = GhzRegister.collapsed(3, 1)
    reg.apply_diagonal(1, PAULI_Z)
    assert reg.measure_computational(2, rng()) == 1


# ----------------------------------------------------------------------
# computational measurement


def test_ghz_correlation_phase_backend():
    reg = GhzRegister(6)
    g = rng(5)
    first = reg.measure_computational(2, g)
    for q in (5, 1, 6):
        assert reg.measure_computational(q, g) == first


def test_collapsed_register_measures_deterministically():
    reg = GhzRegister.collapsed(4, 1)
    assert all(reg.measure_computational(q, rng()) == 1 for q in range(1, 5))


def test_dense_measurement_collapses_to_all_equal():
    # GHZ(3): measuring qubit 1 leaves |bbb| exactly, outcome ~ 1/2 each.
    seen = set()
    for seed in range(40):
        reg = GhzRegister(3, backend="dense")
        b = reg.measure_computational(1, rng(seed))
        seen.add(b)
        amps = dict((i, complex(re, im)) for i, re, im in reg.export_amplitudes())
        assert set(amps) == {7 if b else 0}
        assert abs(amps[7 if b else 0]) == pytest.approx(1.0)
        # remaining qubits agree
        assert reg.measure_computational(2, rng()) == b
        assert reg.measure_computational(3, rng()) == b
    assert seen == {0, 1}


def test_dense_measurement_rate_is_half():
    hits = sum(
        GhzRegister(3, backend="dense").measure_computational(2, rng(s))
        for s in range(400)
    )
    assert abs(hits / 400 - 0.5) < 3 * 0.5 / 20  # 3 sigma at p=1/2, N=400


# ----------------------------------------------------------------------
# hadamard-all-then-measure


def test_even_parity_law_theta_zero():
    g = rng(1)
    for _ in range(200):
        reg = GhzRegister(4)
        bits = reg.hadamard_all_then_measure(g)
        assert sum(bits) % 2 == 0
        assert reg.consumed


def test_odd_parity_law_theta_pi():
    g = rng(2)
    for _ in range(200):
        reg = GhzRegister(4)
        reg.apply_diagonal(2, PAULI_Z)
        bits = reg.hadamard_all_then_measure(g)
        assert sum(bits) % 2 == 1


def test_parity_law_dense_backend():
    g = rng(3)
    for _ in range(100):
        reg = GhzRegister(3, backend="dense")
        reg.apply_diagonal(1, PAULI_Z)
        assert sum(reg.hadamard_all_then_measure(g)) % 2 == 1


def test_half_phase_gives_half_even_parity():
    # theta = pi/2: phase backend closed form against the dense oracle.
    phase = GhzRegister(3)
    phase.apply_diagonal(2, phase_gate(1))
    dense = GhzRegister(3, backend="dense")
    dense.apply_diagonal(2, phase_gate(1))
    pd_phase = phase.exact_parity_distribution()
    pd_dense = dense.exact_parity_distribution()
    assert pd_phase.p_even == pytest.approx(0.5, abs=1e-12)
    assert pd_dense.p_even == pytest.approx(pd_phase.p_even, abs=1e-12)


def test_collapsed_h_measure_gives_uniform_bits():
    g = rng(4)
    samples = [GhzRegister.collapsed(4, 1).hadamard_all_then_measure(g) for _ in range(600)]
    parities = [sum(b) % 2 for b in samples]
    # uniform bits: odd parity about half the time
    assert abs(sum(parities) / len(parities) - 0.5) < 3 * 0.5 / np.sqrt(600)
    ones = sum(sum(b) for b in samples) / (4 * len(samples))
    assert abs(ones - 0.5) < 3 * 0.5 / np.sqrt(4 * 600)


def test_consumed_register_rejects_second_terminal_measure():
    reg = GhzRegister(2)
    reg.hadamard_all_then_measure(rng())
    with pytest.raises(RegisterError):
        reg.hadamard_all_then_measure(rng())


def test_dense_sequential_h_measure_matches_atomic_parity_law():
    # Per-qubit H + measurement must follow the same parity law as the
    # atomic operation (theta = pi/2 gives even parity half the time).
    g = rng(7)
    odd = 0
    trials = 2000
    for _ in range(trials):
        reg = GhzRegister(3, backend="dense")
        reg.apply_diagonal(3, phase_gate(1))
        bits = []
        for q in (1, 2, 3):
            reg.apply_hadamard(q)
            bits.append(reg.measure_computational(q, g))
        odd += sum(bits) % 2
    assert abs(odd / trials - 0.5) < 3 * 0.5 / np.sqrt(trials)


# ----------------------------------------------------------------------
# exact parity distribution


def test_exact_parity_trivial_values():
    assert GhzRegister(3).exact_parity_distribution() == (1.0, 0.0)
    flipped = GhzRegister(3)
    flipped.apply_diagonal(1, PAULI_Z)
    assert flipped.exact_parity_distribution() == (0.0, 1.0)
    assert GhzRegister.collapsed(3, 0).exact_parity_distribution() == (0.5, 0.5)


def test_exact_parity_does_not_consume():
    reg = GhzRegister(3)
    reg.exact_parity_distribution()
    assert not reg.consumed
    reg.hadamard_all_then_measure(rng())


# ----------------------------------------------------------------------
# arbitrary unitaries (dense only)


def test_identity_unitary_is_noop():
    reg = GhzRegister(2, backend="dense")
    before = reg.export_amplitudes()
    reg.apply_unitary_1q(1, np.eye(2))
    assert reg.export_amplitudes() == before


def test_hadamard_then_measure_on_dense_bell_pair():
    # After H on qubit 1 of GHZ(2) the state is (|00>+|10>+|01>-|11>)/2:
    # outcome 0 leaves |0>(|0>+|1>)/sqrt(2), outcome 1 leaves |1>(|0>-|1>)/sqrt(2).
    for seed in range(30):
        reg = GhzRegister(2, backend="dense")
        reg.apply_hadamard(1)
        b = reg.measure_computational(1, rng(seed))
        amps = np.zeros(4, dtype=complex)
        for i, re, im in reg.export_amplitudes():
            amps[i] = complex(re, im)
        root_half = 1 / np.sqrt(2)
        if b == 0:
            expected = np.array([root_half, root_half, 0, 0])
        else:
            expected = np.array([0, 0, root_half, -root_half])
        assert np.allclose(amps, expected, atol=1e-12)


def test_diag_z_negates_all_ones_amplitude():
    reg = GhzRegister(3, backend="dense")
    reg.apply_unitary_1q(2, np.diag([1, -1]).astype(complex))
    amps = dict((i, complex(re, im)) for i, re, im in reg.export_amplitudes())
    assert amps[7] == pytest.approx(-1 / np.sqrt(2))
    assert amps[0] == pytest.approx(1 / np.sqrt(2))


def test_non_unitary_rejected():
    reg = GhzRegister(2, backend="dense")
    with pytest.raises(EngineError):
        reg.apply_unitary_1q(1, np.array([[1, 0], [0, 2]], dtype=complex))


def test_unitary_on_phase_backend_rejected():
    reg = GhzRegister(2)
    with pytest.raises(BackendError):
        reg.apply_unitary_1q(1, H)


def test_norm_preserved_under_random_unitaries():
    g = rng(11)
    reg = GhzRegister(4, backend="dense")
    for _ in range(50):
        theta = g.random() * 2 * np.pi
        u = np.array(
            [
                [np.cos(theta), -np.sin(theta)],
                [np.sin(theta), np.cos(theta)],
            ],
            dtype=complex,
        )
        reg.apply_unitary_1q(int(g.integers(1, 5)), u)
    assert abs(reg.norm() - 1.0) < 1e-9


# ----------------------------------------------------------------------
# ancillas and CNOT (adversary support)


def test_cnot_extends_ghz_onto_ancilla():
    reg = GhzRegister(2, backend="dense")
    anc = reg.add_ancilla()
    assert anc == 3
    reg.apply_cnot(2, anc)
    amps = dict((i, complex(re, im)) for i, re, im in reg.export_amplitudes())
    # (|000> + |111>)/sqrt(2): ancilla copies the GHZ branch
    assert set(amps) == {0, 7}


def test_ancilla_measurable_after_terminal_measurement():
    g = rng(13)
    reg = GhzRegister(2, backend="dense")
    anc = reg.add_ancilla()
    reg.apply_cnot(1, anc)
    reg.hadamard_all_then_measure(g)
    bit = reg.measure_computational(anc, g)
    assert bit in (0, 1)


def test_ancilla_cap():
    reg = GhzRegister(DENSE_QUBIT_CAP, backend="dense")
    with pytest.raises(DenseCapError):
        reg.add_ancilla()


def test_ancilla_requires_dense():
    with pytest.raises(BackendError):
        GhzRegister(2).add_ancilla()


# ----------------------------------------------------------------------
# backend equivalence and gate-set properties


def test_backend_equivalence_random_circuits():
    g = rng(17)
    for _ in range(150):
        arity = int(g.integers(2, 9))
        circuit = random_diagonal_circuit(arity, int(g.integers(0, 51)), g)
        phase = GhzRegister(arity)
        dense = GhzRegister(arity, backend="dense")
        for qubit, gate in circuit:
            phase.apply_diagonal(qubit, gate)
            dense.apply_diagonal(qubit, gate)
        pp = phase.exact_parity_distribution()
        pd = dense.exact_parity_distribution()
        assert abs(pp.p_even - pd.p_even) < 1e-9
        assert abs(pd.p_even + pd.p_odd - 1.0) < 1e-12


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(1, 4), st.integers(0, 2), st.integers(0, 5)),
        max_size=30,
    ),
    st.randoms(use_true_random=False),
)
def test_gate_order_independence(moves, pyrandom):
    gates = []
    for qubit, kind, gparam in moves:
        gate = [IDENTITY, PAULI_Z, phase_gate(gparam)][kind]
        gates.append((qubit, gate))
    reg = GhzRegister(4)
    for qubit, gate in gates:
        reg.apply_diagonal(qubit, gate)
    shuffled = list(gates)
    pyrandom.shuffle(shuffled)
    reg2 = GhzRegister(4)
    for qubit, gate in shuffled:
        reg2.apply_diagonal(qubit, gate)
    assert reg.theta_over_pi == reg2.theta_over_pi


@settings(max_examples=40, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=20))
def test_phase_gate_zero_matches_pauli_z(picks):
    with_z = GhzRegister(3)
    with_g0 = GhzRegister(3)
    dense_g0 = GhzRegister(3, backend="dense")
    for flip in picks:
        if flip:
            with_z.apply_diagonal(1, PAULI_Z)
            with_g0.apply_diagonal(1, phase_gate(0))
            dense_g0.apply_diagonal(1, phase_gate(0))
    a = with_z.exact_parity_distribution()
    b = with_g0.exact_parity_distribution()
    c = dense_g0.exact_parity_distribution()
    assert abs(a.p_even - b.p_even) < 1e-12
    assert abs(a.p_even - c.p_even) < 1e-9


def test_hamming_parity_law_integer_multiples():
    g = rng(23)
    for t in range(6):
        reg = GhzRegister(5)
        for _ in range(t):
            reg.apply_diagonal(1, PAULI_Z)
        bits = reg.hadamard_all_then_measure(g)
        assert sum(bits) % 2 == t % 2
