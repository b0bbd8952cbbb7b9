"""Attack detection rates, anonymity games and their calibration ablations.

Derived detection physics used below (confirmed by the exact per-state
oracle in ghznet.verify.check_failure_probs):

* computational-basis intercept-resend collapses a register to |b..b>,
  which always passes the h=0 test and fails the h=1 test with probability
  1/2, so each security test detects with probability 1/4 and the abort
  rate after S tests is 1 - (3/4)**S;
* random-basis intercept-resend (and random-frame entangle-resend) on a
  5-party register is detected per test with probability 295/512, so the
  abort rate is 1 - (217/512)**S, which dominates 1 - 2**-S.
"""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from ghznet.adversary import (
    AttackReport,
    CSV_HEADER,
    GameSetupError,
    make_entangle_hook,
    make_intercept_hook,
    mount_entangle_resend,
    mount_intercept_resend,
    play_coalition_game,
    play_tp_trace_game,
    qan_coalition_posterior,
    trace_posterior,
)
from ghznet.engine import BackendError, DenseCapError, GhzRegister
from ghznet.netsim import Network, party_view
from ghznet.protocols import ProtocolConfig, run_qan
from ghznet.verify import check_failure_probs


def three_sigma(p, trials):
    return 3 * math.sqrt(p * (1 - p) / trials)


def dense_cfg(n=4, checks=0, seed=0, **kw):
    return ProtocolConfig(
        n_parties=n, keep_count=1, check_rounds=checks, backend="dense",
        seed=seed, record_transcript=False, **kw,
    )


# ----------------------------------------------------------------------
# per-state detection oracle (exact, no protocol loop involved)


def test_oracle_computational_intercept_state():
    reg = GhzRegister(5, backend="dense")
    rng = np.random.default_rng(3)
    for q in range(2, 6):  # transit qubits; qubit 1 stays with the preparer
        reg.measure_computational(q, rng)
    p0, p1 = check_failure_probs(reg)
    assert p0 == pytest.approx(0.0, abs=1e-12)
    assert p1 == pytest.approx(0.5, abs=1e-12)


def test_oracle_zframe_entangle_state():
    reg = GhzRegister(5, backend="dense")
    for q in range(2, 6):
        anc = reg.add_ancilla()
        reg.apply_cnot(q, anc)
    p0, p1 = check_failure_probs(reg)
    assert p0 == pytest.approx(0.0, abs=1e-12)
    assert p1 == pytest.approx(0.5, abs=1e-12)


def test_oracle_xframe_entangle_single_qubit():
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    reg = GhzRegister(4, backend="dense")
    anc = reg.add_ancilla()
    reg.apply_unitary_1q(2, h)
    reg.apply_cnot(2, anc)
    reg.apply_unitary_1q(2, h)
    p0, p1 = check_failure_probs(reg)
    assert p0 == pytest.approx(0.5, abs=1e-12)
    assert p1 == pytest.approx(0.0, abs=1e-12)


def test_oracle_random_basis_average_matches_closed_form():
    # Monte Carlo over Eve's basis draws, exact detection per drawn state;
    # expectation must match the derived 295/512 for 5 parties.
    rng = np.random.default_rng(17)
    total = 0.0
    draws = 800
    for _ in range(draws):
        reg = GhzRegister(5, backend="dense")
        net = Network(5, seed=int(rng.integers(0, 2**31)), backend="dense")
        reg.register_id = 1
        stash = {}
        hook = make_intercept_hook(1.0, "random", stash)
        for q in range(2, 6):
            hook(net, reg, q, q)
        p0, p1 = check_failure_probs(reg)
        total += 0.5 * (p0 + p1)
    expected = 295 / 512
    assert abs(total / draws - expected) < 0.03


# ----------------------------------------------------------------------
# intercept-resend experiments


def test_intercept_requires_dense_backend():
    cfg = ProtocolConfig(n_parties=4, backend="phase")
    with pytest.raises(BackendError):
        mount_intercept_resend(cfg, trials=1)


def test_intercept_fraction_zero_no_detection():
    report = mount_intercept_resend(dense_cfg(checks=3), fraction=0.0, trials=120)
    assert report.detection_rate == 0.0
    assert report.detected == 0


def test_intercept_computational_matches_derived_curve():
    s = 3
    trials = 1500
    expected = 1 - (3 / 4) ** s
    report = mount_intercept_resend(
        dense_cfg(checks=s, seed=5), basis="computational", trials=trials
    )
    assert abs(report.detection_rate - expected) < three_sigma(expected, trials)


def test_intercept_random_basis_beats_paper_floor():
    s = 2
    trials = 1500
    expected = 1 - (217 / 512) ** s
    report = mount_intercept_resend(
        dense_cfg(n=5, checks=s, seed=6), basis="random", trials=trials
    )
    assert abs(report.detection_rate - expected) < three_sigma(expected, trials)
    floor = 1 - 2 ** -s
    assert report.detection_rate >= floor - three_sigma(floor, trials)


def test_intercept_no_checks_reads_nothing():
    # S=0: never detected, but the collapsed registers carry no secret
    cfg = dense_cfg(n=4, checks=0, seed=7, secret_bits=1, secrets={1: "0", 2: "0"})
    trials = 700
    report = mount_intercept_resend(cfg, basis="computational", trials=trials)
    assert report.detection_rate == 0.0
    assert report.undetected_trials == trials
    assert abs(report.empirical_rate - 0.5) < three_sigma(0.5, trials)
    assert abs(report.z_score) < 3.0


# ----------------------------------------------------------------------
# entangle-resend experiments


def test_entangle_zframe_matches_derived_curve():
    s = 2
    trials = 1200
    expected = 1 - (3 / 4) ** s
    report = mount_entangle_resend(dense_cfg(checks=s, seed=9), trials=trials)
    assert abs(report.detection_rate - expected) < three_sigma(expected, trials)


def test_entangle_random_frame_beats_paper_floor():
    s = 5
    trials = 1200
    report = mount_entangle_resend(
        dense_cfg(n=5, checks=s, seed=10), frame="random", trials=trials
    )
    floor = 1 - 2 ** -s
    assert report.detection_rate >= floor - three_sigma(floor, trials)


def test_entangle_no_targets_chance_inference():
    cfg = dense_cfg(n=4, checks=2, seed=11, secret_bits=1, secrets={2: "0", 3: "0"})
    trials = 500
    report = mount_entangle_resend(cfg, fraction=0.0, trials=trials)
    assert report.detection_rate == 0.0
    assert abs(report.empirical_rate - 0.5) < three_sigma(0.5, trials)


def test_entangle_inference_stays_at_chance_when_undetected():
    cfg = dense_cfg(n=4, checks=1, seed=12, secret_bits=1, secrets={1: "0", 2: "0"})
    report = mount_entangle_resend(cfg, trials=900)
    assert report.undetected_trials > 200
    n = report.notes["inference_guesses"]
    assert abs(report.empirical_rate - 0.5) < three_sigma(0.5, n)


def test_entangle_arity_cap_configuration_error():
    cfg = dense_cfg(n=8, checks=1, seed=13, secrets={1: "0", 2: "1"})
    with pytest.raises(DenseCapError):
        mount_entangle_resend(cfg, trials=2)


# ----------------------------------------------------------------------
# coalition game


def test_coalition_chance_small_coalition():
    cfg = ProtocolConfig(n_parties=4, flip_probability=1.0, seed=21)
    trials = 1500
    report = play_coalition_game(cfg, {2}, "identify_notifier", trials=trials)
    assert report.chance_level == pytest.approx(1 / 3)
    assert abs(report.empirical_rate - 1 / 3) < three_sigma(1 / 3, trials)


def test_coalition_chance_at_claim_boundary():
    cfg = ProtocolConfig(n_parties=5, flip_probability=1.0, seed=22)
    trials = 1200
    report = play_coalition_game(cfg, {1, 2, 3}, "identify_notified", trials=trials)
    assert report.chance_level == pytest.approx(0.5)
    assert abs(report.empirical_rate - 0.5) < three_sigma(0.5, trials)


def test_coalition_of_all_but_one_wins_trivially():
    cfg = ProtocolConfig(n_parties=4, flip_probability=1.0, seed=23)
    report = play_coalition_game(cfg, {1, 2, 3}, "identify_notifier", trials=50)
    assert report.empirical_rate == 1.0


def test_coalition_ill_posed_when_no_candidates():
    cfg = ProtocolConfig(n_parties=4)
    with pytest.raises(GameSetupError):
        play_coalition_game(cfg, {1, 2, 3, 4}, "identify_notifier", trials=5)


def test_coalition_gate_reveal_ablation_wins():
    cfg = ProtocolConfig(n_parties=4, flip_probability=1.0, seed=24)
    report = play_coalition_game(
        cfg, {4}, "identify_notifier", trials=120, reveal_gates=True
    )
    assert report.empirical_rate == 1.0


def test_coalition_posterior_exactly_flat():
    cfg = ProtocolConfig(
        n_parties=5, repetitions=3, flip_probability=0.5,
        notify_requests={4: 5}, seed=25,
    )
    out = run_qan(cfg)
    for objective in ("identify_notifier", "identify_notified"):
        for members in ({1}, {1, 2}, {1, 2, 3}):
            posterior = qan_coalition_posterior(
                out.events, 5, members, objective, 0.5
            )
            uniform = Fraction(1, 5 - len(members))
            assert all(w == uniform for w in posterior.values())


def test_coalition_posterior_flat_under_descending_order():
    cfg = ProtocolConfig(n_parties=4, flip_probability=1.0, seed=26)
    trials = 600
    report = play_coalition_game(
        cfg, {3}, "identify_notifier", trials=trials, order="descending"
    )
    assert abs(report.empirical_rate - 1 / 3) < three_sigma(1 / 3, trials)


def test_coalition_secret_recovery_chance():
    cfg = ProtocolConfig(n_parties=4, secrets={1: "0", 2: "0"}, seed=27)
    trials = 800
    report = play_coalition_game(cfg, {3, 4}, "recover_secret", trials=trials)
    assert abs(report.empirical_rate - 0.5) < three_sigma(0.5, trials)


def test_coalition_secret_recovery_rejects_competitor_member():
    cfg = ProtocolConfig(n_parties=4, secrets={1: "0", 2: "0"})
    with pytest.raises(GameSetupError):
        play_coalition_game(cfg, {2, 3}, "recover_secret", trials=5)


# ----------------------------------------------------------------------
# third-party trace game


def test_trace_game_sits_at_chance():
    cfg = ProtocolConfig(n_parties=4, seed=31)
    trials = 2000
    report = play_tp_trace_game(cfg, trials=trials)
    assert report.trials == trials
    assert abs(report.empirical_rate - 0.5) < three_sigma(0.5, trials)


def test_trace_posterior_exactly_half():
    cfg = ProtocolConfig(n_parties=4, secret_bits=1, secrets={1: "1", 2: "0"}, seed=32)
    from ghznet.protocols import run_aqpc_two

    verdict = run_aqpc_two(cfg)
    view = party_view(verdict.events, verdict.announced_by)
    posterior = trace_posterior(view, [1, 2], cfg.secrets)
    assert posterior == {1: Fraction(1, 2), 2: Fraction(1, 2)}


def test_trace_reveal_k_ablation_wins():
    cfg = ProtocolConfig(n_parties=4, seed=33)
    report = play_tp_trace_game(cfg, trials=300, reveal_k=True)
    assert report.empirical_rate == 1.0


def test_trace_single_trial_report_well_formed():
    cfg = ProtocolConfig(n_parties=3, seed=34)
    report = play_tp_trace_game(cfg, trials=1)
    assert report.trials == 1
    assert report.successes in (0, 1)


def test_trace_equal_secrets_skipped():
    cfg = ProtocolConfig(n_parties=3, secret_bits=1, secrets={1: "1", 2: "1"}, seed=35)
    report = play_tp_trace_game(cfg, trials=10)
    assert report.trials == 0
    assert report.notes["skipped_equal_secret_trials"] == 10


def test_trace_posterior_rejects_equal_bits():
    with pytest.raises(GameSetupError):
        trace_posterior([], [1, 2], {1: "1", 2: "1"})


# ----------------------------------------------------------------------
# report serialization


def test_report_serialization_roundtrip():
    report = AttackReport(
        attack="tp_trace", params={"n_parties": 4}, trials=100, successes=52,
        empirical_rate=0.52, chance_level=0.5, z_score=0.4,
    )
    rec = json.loads(report.to_json())
    assert rec["attack"] == "tp_trace"
    assert rec["trials"] == 100
    row = report.to_csv_row()
    assert row.count(",") == CSV_HEADER.count(",")
    assert row.startswith("tp_trace,")
