"""Attack models and quantitative anonymity / traceless / detection games.

Tampering attacks (intercept-resend, entangle-resend) run against resource
sharing on the dense backend and report how often the security check
aborts, plus whether the adversary's measured bits predict any protocol
secret on undetected runs (they must not).

Guessing games (coalition, third-party trace) are read-only over completed
transcripts: the adversary computes an exact Bayesian posterior over its
legitimate view by enumerating hidden assignments, which is the strongest
passive strategy.  Ablations that reveal the hidden variable (the
notifier's coin, or the masking bit) must drive each game to success rate
1.0; that calibrates the harness.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import sqrt
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .engine import BackendError, GhzRegister
from .netsim import Network, derive_seed, party_view
from .protocols import (
    ConfigError,
    ProtocolConfig,
    run_aqpc_two,
    run_qan,
    run_resource_sharing,
)

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


class GameSetupError(Exception):
    """Ill-posed guessing game (e.g. the target sits inside the coalition)."""


@dataclass(frozen=True)
class AttackSpec:
    """Which attack to mount and with what options (mirrors config files)."""

    kind: str  # intercept_resend | entangle_resend | coalition | tp_trace
    options: dict = field(default_factory=dict)


CSV_HEADER = "attack,params,trials,rate,chance,z"


@dataclass
class AttackReport:
    """Outcome statistics of one attack experiment.

    For guessing games, ``successes / trials`` is the empirical success
    rate against ``chance_level``.  For tampering attacks the headline
    number is ``detection_rate``; the success fields then describe the
    secret-inference game over the undetected runs.
    """

    attack: str
    params: dict
    trials: int
    successes: int
    empirical_rate: float
    chance_level: float
    z_score: float
    detection_rate: Optional[float] = None
    detected: int = 0
    undetected_trials: int = 0
    notes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    def to_csv_row(self) -> str:
        params = json.dumps(self.params, sort_keys=True).replace(",", ";")
        return (
            f"{self.attack},{params},{self.trials},"
            f"{self.empirical_rate:.6f},{self.chance_level:.6f},{self.z_score:.3f}"
        )


def _z_score(successes: int, trials: int, chance: float) -> float:
    if trials == 0 or chance <= 0.0 or chance >= 1.0:
        return 0.0
    return (successes - trials * chance) / sqrt(trials * chance * (1.0 - chance))


# ----------------------------------------------------------------------
# tampering hooks


def make_intercept_hook(fraction: float, basis: str, stash: Dict[int, List[int]]):
    """Measure in-transit qubits and forward the post-measurement state.

    basis "computational" measures every targeted qubit in the Z basis;
    basis "random" picks Z or X per qubit (X realised as H, measure, H).
    """
    if basis not in ("computational", "random"):
        raise ConfigError(f"unknown intercept basis {basis!r}")

    def hook(net: Network, reg: GhzRegister, qubit: int, owner: int) -> None:
        if fraction < 1.0 and net.adversary_rng.random() >= fraction:
            return
        use_x = basis == "random" and int(net.adversary_rng.integers(0, 2)) == 1
        if use_x:
            reg.apply_unitary_1q(qubit, _H)
        bit = reg.measure_computational(qubit, net.physics_rng)
        if use_x:
            reg.apply_unitary_1q(qubit, _H)
        stash.setdefault(reg.register_id, []).append(bit)
        net.log_tampered(
            reg, qubit, "intercept_resend", basis="x" if use_x else "z", bit=bit
        )

    return hook


def make_entangle_hook(
    frame: str, fraction: float, stash: Dict[int, List[Tuple[GhzRegister, int]]]
):
    """Entangle a fresh ancilla with each targeted in-transit qubit.

    frame "zframe" copies the computational value (plain CNOT); frame
    "random" conjugates the control by H half the time, copying the
    Hadamard-basis value instead.
    """
    if frame not in ("zframe", "random"):
        raise ConfigError(f"unknown entangling frame {frame!r}")

    def hook(net: Network, reg: GhzRegister, qubit: int, owner: int) -> None:
        if fraction < 1.0 and net.adversary_rng.random() >= fraction:
            return
        use_x = frame == "random" and int(net.adversary_rng.integers(0, 2)) == 1
        anc = reg.add_ancilla()
        if use_x:
            reg.apply_unitary_1q(qubit, _H)
        reg.apply_cnot(qubit, anc)
        if use_x:
            reg.apply_unitary_1q(qubit, _H)
        stash.setdefault(reg.register_id, []).append((reg, anc))
        net.log_tampered(
            reg, qubit, "entangle_resend", frame="x" if use_x else "z", ancilla=anc
        )

    return hook


# ----------------------------------------------------------------------
# tampering experiments


def _require_dense(config: ProtocolConfig) -> None:
    if config.backend != "dense":
        raise BackendError(
            "tampering attacks break the GHZ structure and need backend='dense'"
        )


def _secret_inference(
    config: ProtocolConfig, eve_bits: Dict[int, List[int]], encode_regs
) -> Tuple[int, int]:
    """Guess the first competitor's bits from Eve's parity statistic."""
    comps = sorted(config.secrets)
    target = comps[0]
    correct = 0
    total = 0
    for j in range(config.secret_bits):
        reg = encode_regs[j]
        bits = eve_bits.get(reg.register_id, [])
        guess = 0
        for b in bits:
            guess ^= b
        correct += guess == int(config.secrets[target][j])
        total += 1
    return correct, total


def _random_secrets(config: ProtocolConfig, rng: np.random.Generator) -> Dict[int, str]:
    """Fresh uniform secrets for the configured competitors.

    The inference game must measure whether Eve's data predicts secrets
    she has never seen, so secret values are redrawn per trial; the
    configured secrets only nominate who competes."""
    comps = sorted(config.secrets)
    return {
        c: "".join(str(int(rng.integers(0, 2))) for _ in range(config.secret_bits))
        for c in comps
    }


def _tamper_experiment(
    config: ProtocolConfig,
    attack: str,
    params: dict,
    trials: int,
    hook_factory,
    read_eve_bits,
    trial_offset: int = 0,
) -> AttackReport:
    """Shared trial loop for the tampering attacks.

    Without configured secrets: pure detection against one shared pool.
    With two competitors configured: both comparison pools are attacked
    and, when the check misses, the comparison runs and Eve guesses the
    first competitor's (randomly redrawn) secret bits.

    Trial t is fully determined by (config.seed, t), so disjoint trial
    ranges can run in parallel and merge.
    """
    _require_dense(config)
    run_comparison = len(config.secrets) >= 2
    detected = 0
    undetected = 0
    inference_hits = 0
    inference_total = 0
    for t in range(trial_offset, trial_offset + trials):
        stash: dict = {}
        hook = hook_factory(stash)
        cfg = replace(config, seed=derive_seed(config.seed, t))
        if not run_comparison:
            out = run_resource_sharing(cfg, hook)
            if not out.shared:
                detected += 1
            else:
                undetected += 1
            continue
        secrets_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(13, t))
        )
        cfg = replace(cfg, secrets=_random_secrets(config, secrets_rng))
        net = Network(
            cfg.n_parties, include_tp=True, seed=cfg.seed,
            backend="dense", record=cfg.record_transcript,
        )
        share_f = run_resource_sharing(
            cfg, hook, network=net,
            count=cfg.secret_bits + cfg.check_rounds, include_tp=False,
        )
        if not share_f.shared:
            detected += 1
            continue
        share_g = run_resource_sharing(
            cfg, hook, network=net,
            count=cfg.secret_bits + cfg.check_rounds, include_tp=True,
        )
        if not share_g.shared:
            detected += 1
            continue
        undetected += 1
        run_aqpc_two(
            cfg, f_registers=share_f.registers, g_registers=share_g.registers,
            network=net,
        )
        eve_bits = read_eve_bits(stash, t)
        hits, total = _secret_inference(cfg, eve_bits, share_g.registers)
        inference_hits += hits
        inference_total += total
    rate = inference_hits / inference_total if inference_total else 0.0
    return AttackReport(
        attack=attack,
        params=params,
        trials=trials,
        successes=inference_hits,
        empirical_rate=rate,
        chance_level=0.5,
        z_score=_z_score(inference_hits, inference_total, 0.5),
        detection_rate=detected / trials if trials else 0.0,
        detected=detected,
        undetected_trials=undetected,
        notes={"inference_guesses": inference_total},
    )


def mount_intercept_resend(
    config: ProtocolConfig,
    fraction: float = 1.0,
    basis: str = "computational",
    trials: int = 1000,
    trial_offset: int = 0,
) -> AttackReport:
    """Intercept-resend against resource sharing (plus comparison when
    secrets are configured, to score secret inference on undetected runs)."""
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("fraction must lie in [0, 1]")
    if basis not in ("computational", "random"):
        raise ConfigError(f"unknown intercept basis {basis!r}")
    return _tamper_experiment(
        config,
        attack="intercept_resend",
        params={"fraction": fraction, "basis": basis,
                "check_rounds": config.check_rounds, "n_parties": config.n_parties},
        trials=trials,
        hook_factory=lambda stash: make_intercept_hook(fraction, basis, stash),
        read_eve_bits=lambda stash, t: stash,
        trial_offset=trial_offset,
    )


def mount_entangle_resend(
    config: ProtocolConfig,
    frame: str = "zframe",
    fraction: float = 1.0,
    trials: int = 1000,
    trial_offset: int = 0,
) -> AttackReport:
    """Entangle-resend: CNOT onto fresh ancillas in transit, ancillas
    measured only after all announcements."""
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError("fraction must lie in [0, 1]")
    if frame not in ("zframe", "random"):
        raise ConfigError(f"unknown entangling frame {frame!r}")

    def read_ancillas(stash, t):
        eve_rng = np.random.default_rng(
            np.random.SeedSequence(derive_seed(config.seed, t), spawn_key=(999,))
        )
        eve_bits: Dict[int, List[int]] = {}
        for rid, pairs in stash.items():
            for reg, anc in pairs:
                eve_bits.setdefault(rid, []).append(
                    reg.measure_computational(anc, eve_rng)
                )
        return eve_bits

    return _tamper_experiment(
        config,
        attack="entangle_resend",
        params={"frame": frame, "fraction": fraction,
                "check_rounds": config.check_rounds, "n_parties": config.n_parties},
        trials=trials,
        hook_factory=lambda stash: make_entangle_hook(frame, fraction, stash),
        read_eve_bits=read_ancillas,
        trial_offset=trial_offset,
    )


# ----------------------------------------------------------------------
# exact posteriors over views (the enumeration oracles)


def _qan_view_data(view, n_parties: int, members: Set[int]):
    """Reconstruct per-run register bits and any visible phase-flip gates."""
    bits: Dict[Tuple[int, int], Dict[int, int]] = {}
    gates: Dict[int, Set[Tuple[int, int]]] = {}
    saw_foreign_gates = False
    for e in view:
        if e.kind == "broadcast_bit":
            rid = e.payload["register"]
            run, j = (rid - 1) // n_parties, (rid - 1) % n_parties + 1
            bits.setdefault((run, j), {})[e.actor] = e.payload["bit"]
        elif e.kind == "measurement" and e.payload.get("basis") == "h":
            rid = e.payload["register"]
            run, j = (rid - 1) // n_parties, (rid - 1) % n_parties + 1
            bits.setdefault((run, j), {})[e.actor] = e.payload["bit"]
        elif e.kind == "gate_applied":
            rid = e.payload["register"]
            run, j = (rid - 1) // n_parties, (rid - 1) % n_parties + 1
            if e.actor not in members:
                saw_foreign_gates = True
            if e.payload["gate"] == "pauli_z":
                gates.setdefault(run, set()).add((j, e.actor))
            else:
                gates.setdefault(run, set())
    n_runs = 1 + max((run for run, _ in bits), default=0)
    observed_parity: Dict[Tuple[int, int], int] = {}
    for (run, j), per_party in bits.items():
        if len(per_party) == n_parties:
            parity = 0
            for b in per_party.values():
                parity ^= b
            observed_parity[(run, j)] = parity
    return n_runs, observed_parity, gates, saw_foreign_gates


def qan_coalition_posterior(
    events,
    n_parties: int,
    members: Iterable[int],
    objective: str,
    flip_probability: float,
    view_is_prefiltered: bool = False,
) -> Dict[int, Fraction]:
    """Exact posterior over the notifier (or the notified party) from a
    coalition's view of an anonymous-notification transcript.

    Enumerates every hidden assignment (sender, receiver, per-run coin)
    consistent with the view, in exact rational arithmetic.
    """
    members = set(members)
    if objective not in ("identify_notifier", "identify_notified"):
        raise GameSetupError(f"unknown objective {objective!r}")
    candidates = [a for a in range(1, n_parties + 1) if a not in members]
    if not candidates:
        raise GameSetupError("no candidates left outside the coalition")
    view = events if view_is_prefiltered else party_view(events, members)
    n_runs, observed_parity, gates, gates_visible = _qan_view_data(
        view, n_parties, members
    )
    p = Fraction(flip_probability)

    def run_weight(s: int, r: int, run: int) -> Fraction:
        weight = Fraction(0)
        for coin in (0, 1):
            w = p if coin else 1 - p
            if w == 0:
                continue
            ok = True
            for j in members:
                want = coin if j == r else 0
                if observed_parity.get((run, j), want) != want:
                    ok = False
                    break
            if ok and gates_visible:
                expected = {(r, s)} if coin else set()
                if gates.get(run, set()) != expected:
                    ok = False
            if ok:
                weight += w
        return weight

    likelihood: Dict[Tuple[int, int], Fraction] = {}
    for s in candidates:
        for r in candidates:
            acc = Fraction(1)
            for run in range(n_runs):
                acc *= run_weight(s, r, run)
            likelihood[(s, r)] = acc
    posterior: Dict[int, Fraction] = {c: Fraction(0) for c in candidates}
    for (s, r), weight in likelihood.items():
        key = s if objective == "identify_notifier" else r
        posterior[key] += weight
    total = sum(posterior.values())
    if total == 0:
        raise GameSetupError("view inconsistent with every hidden assignment")
    return {c: w / total for c, w in posterior.items()}


def trace_posterior(
    events,
    competitors: Sequence[int],
    secrets: Dict[int, str],
    bit_index: int = 0,
    revealed_k: Optional[int] = None,
) -> Dict[int, Fraction]:
    """Posterior, from the third party's view, over which competitor applied
    the phase flip for one compared bit (secrets known, masking bit hidden).

    Both masking-bit values explain the announced parities equally well, so
    the posterior is uniform unless k is revealed.
    """
    a, b = sorted(competitors)
    b1, b2 = int(secrets[a][bit_index]), int(secrets[b][bit_index])
    if b1 == b2:
        raise GameSetupError("equal secret bits introduce no phase to trace")
    weights: Dict[int, Fraction] = {a: Fraction(0), b: Fraction(0)}
    for k in (0, 1):
        if revealed_k is not None and k != revealed_k:
            continue
        # party x applies the flip iff its bit differs from k
        applier = a if b1 != k else b
        weights[applier] += Fraction(1, 2)
    total = sum(weights.values())
    return {x: w / total for x, w in weights.items()}


# ----------------------------------------------------------------------
# guessing games


def play_coalition_game(
    config: ProtocolConfig,
    members: Iterable[int],
    objective: str,
    trials: int = 1000,
    reveal_gates: bool = False,
    order: str = "ascending",
    trial_offset: int = 0,
) -> AttackReport:
    """Honest-but-curious coalition guesses the notifier or the notified
    party of an anonymous-notification run from its pooled view."""
    members = set(members)
    agents = set(range(1, config.n_parties + 1))
    if not members <= agents:
        raise GameSetupError("coalition members must be agents")
    candidates = sorted(agents - members)
    if not candidates:
        raise GameSetupError("coalition covers all parties; game is ill-posed")
    if objective == "recover_secret":
        return _play_secret_recovery_game(config, members, trials, trial_offset)
    if objective not in ("identify_notifier", "identify_notified"):
        raise GameSetupError(f"unknown objective {objective!r}")
    successes = 0
    for t in range(trial_offset, trial_offset + trials):
        game_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(7, t))
        )
        notifier = int(candidates[game_rng.integers(0, len(candidates))])
        receiver = int(candidates[game_rng.integers(0, len(candidates))])
        cfg = replace(
            config,
            seed=derive_seed(config.seed, t),
            notify_requests={notifier: receiver},
            record_transcript=True,
        )
        net = None
        if order != "ascending":
            net = Network(cfg.n_parties, seed=cfg.seed, backend=cfg.backend, order=order)
        out = run_qan(cfg, network=net)
        if reveal_gates:
            view = party_view(out.events, members) + [
                e for e in out.events if e.kind == "gate_applied" and e.actor not in members
            ]
        else:
            view = party_view(out.events, members)
        posterior = qan_coalition_posterior(
            view, cfg.n_parties, members, objective,
            cfg.flip_probability, view_is_prefiltered=True,
        )
        best = max(posterior.values())
        guess = min(c for c, w in posterior.items() if w == best)
        truth = notifier if objective == "identify_notifier" else receiver
        successes += guess == truth
    chance = 1.0 / len(candidates)
    return AttackReport(
        attack="coalition",
        params={"members": sorted(members), "objective": objective,
                "n_parties": config.n_parties, "reveal_gates": reveal_gates,
                "order": order},
        trials=trials,
        successes=successes,
        empirical_rate=successes / trials if trials else 0.0,
        chance_level=chance,
        z_score=_z_score(successes, trials, chance),
    )


def _play_secret_recovery_game(
    config: ProtocolConfig, members: Set[int], trials: int, trial_offset: int = 0
) -> AttackReport:
    """Non-competing coalition tries to read a competitor's secret bit out
    of a two-party comparison run."""
    comps = sorted(config.secrets) if config.secrets else [1, 2]
    if len(comps) != 2:
        raise GameSetupError("secret recovery game runs on two competitors")
    if members & set(comps):
        raise GameSetupError("coalition must not contain a competitor")
    a, b = comps
    successes = 0
    for t in range(trial_offset, trial_offset + trials):
        game_rng = np.random.default_rng(
            np.random.SeedSequence(config.seed, spawn_key=(8, t))
        )
        b1, b2 = int(game_rng.integers(0, 2)), int(game_rng.integers(0, 2))
        cfg = replace(
            config,
            seed=derive_seed(config.seed, t),
            secrets={a: str(b1), b: str(b2)},
            secret_bits=1,
            record_transcript=True,
        )
        verdict = run_aqpc_two(cfg)
        view = party_view(verdict.events, members)
        announced = [e for e in view if e.kind == "verdict_announce"]
        equal = announced[0].payload["overall"] == "equal" if announced else None
        # posterior over b1 given the verdict: both values stay equally
        # likely, since the verdict only fixes b1 XOR b2
        weights = {0: Fraction(0), 1: Fraction(0)}
        for h1 in (0, 1):
            for h2 in (0, 1):
                if equal is not None and ((h1 == h2) != equal):
                    continue
                weights[h1] += Fraction(1, 4)
        guess = 0 if weights[0] >= weights[1] else 1
        successes += guess == b1
    return AttackReport(
        attack="coalition",
        params={"members": sorted(members), "objective": "recover_secret",
                "n_parties": config.n_parties},
        trials=trials,
        successes=successes,
        empirical_rate=successes / trials if trials else 0.0,
        chance_level=0.5,
        z_score=_z_score(successes, trials, 0.5),
    )


def play_tp_trace_game(
    config: ProtocolConfig,
    trials: int = 1000,
    reveal_k: bool = False,
    trial_offset: int = 0,
) -> AttackReport:
    """The third party, knowing both secret bits differ, guesses which
    competitor applied the phase flip.  Without the masking bit the answer
    is information-theoretically a coin toss."""
    comps = sorted(config.secrets) if config.secrets else [1, 2]
    if len(comps) != 2:
        raise GameSetupError("trace game runs on two competitors")
    a, b = comps
    successes = 0
    played = 0
    skipped = 0
    for t in range(trial_offset, trial_offset + trials):
        if config.secrets:
            b1, b2 = int(config.secrets[a][0]), int(config.secrets[b][0])
        else:
            game_rng = np.random.default_rng(
                np.random.SeedSequence(config.seed, spawn_key=(9, t))
            )
            b1 = int(game_rng.integers(0, 2))
            b2 = 1 - b1
        if b1 == b2:
            skipped += 1
            continue
        cfg = replace(
            config,
            seed=derive_seed(config.seed, t),
            secrets={a: str(b1), b: str(b2)},
            secret_bits=1,
            record_transcript=True,
        )
        verdict = run_aqpc_two(cfg)
        true_applier = None
        k_value = None
        for e in verdict.events:
            if e.kind == "gate_applied" and e.payload["gate"] == "pauli_z":
                true_applier = e.actor
            if e.kind == "measurement" and e.payload.get("basis") == "z":
                k_value = e.payload["bit"]
        posterior = trace_posterior(
            party_view(verdict.events, verdict.announced_by),
            comps,
            cfg.secrets,
            revealed_k=k_value if reveal_k else None,
        )
        best = max(posterior.values())
        guess = min(x for x, w in posterior.items() if w == best)
        successes += guess == true_applier
        played += 1
    return AttackReport(
        attack="tp_trace",
        params={"competitors": comps, "n_parties": config.n_parties,
                "reveal_k": reveal_k},
        trials=played,
        successes=successes,
        empirical_rate=successes / played if played else 0.0,
        chance_level=0.5,
        z_score=_z_score(successes, played, 0.5),
        notes={"skipped_equal_secret_trials": skipped},
    )
