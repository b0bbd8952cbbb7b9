"""The anonymous-notification and private-comparison protocols.

All protocols run on a :class:`~ghznet.netsim.Network` and share the same
primitive: a phase flip on one qubit of a shared GHZ register changes the
parity of the Hadamard-basis outcomes of *all* holders, without any local
trace of who applied it.

* ``run_qan``: any party flips the phase of the register dedicated to its
  receiver (with a configurable probability, repeated over several runs);
  everyone broadcasts their Hadamard-basis bits and each party checks the
  parity of its own register.
* ``run_resource_sharing``: a preparer distributes GHZ registers; randomly
  chosen registers are sacrificed to test either the all-equal law
  (computational basis) or the even-parity law (Hadamard basis).
* ``run_modified_qan``: receiver-only anonymity; the third party notifies
  competitors through dedicated (n+1)-partite registers and returns each
  party its masked parity.
* ``run_aqpc_two`` / ``run_aqpc_multi``: private equality comparison of
  secret bitstrings, masked by a shared random bit measured from a
  dedicated GHZ register so encodings stay untraceable.
* ``run_full_pipeline``: sharing, notification and comparison composed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

from .engine import GhzRegister, IDENTITY, PAULI_Z, phase_gate
from .netsim import Event, Network

AdversaryHook = Callable[[Network, GhzRegister, int, int], None]


class ConfigError(Exception):
    """Invalid or inconsistent protocol configuration."""


def phase_levels(n_parties: int) -> int:
    """Highest phase-gate level used in multi-party comparison: ceil(log2 n)."""
    if n_parties < 2:
        raise ConfigError("phase levels defined for n >= 2")
    return (n_parties - 1).bit_length()


def registers_per_bit(n_parties: int) -> int:
    """Comparison registers consumed per message bit: 2 * (ceil(log2 n) + 1)."""
    return 2 * (phase_levels(n_parties) + 1)


@dataclass
class ProtocolConfig:
    """Run parameters shared by all protocols.

    Fields mirror the configuration-file schema one to one.
    """

    n_parties: int
    repetitions: int = 1           # notification runs per protocol execution
    keep_count: int = 1            # registers retained after resource sharing
    check_rounds: int = 0          # sacrificed registers for the security check
    secret_bits: int = 1           # length of each competitor's secret
    flip_probability: float = 1.0  # probability a notifier actually flips
    notify_requests: Dict[int, int] = field(default_factory=dict)
    tp_targets: Tuple[int, ...] = ()
    secrets: Dict[int, str] = field(default_factory=dict)
    backend: str = "phase"
    seed: int = 0
    preparer: int = 1
    record_transcript: bool = True

    def validate(self) -> None:
        if self.n_parties < 2:
            raise ConfigError("n_parties must be >= 2")
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ConfigError("flip_probability must lie in [0, 1]")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.check_rounds < 0:
            raise ConfigError("check_rounds must be >= 0")
        if self.keep_count < 1:
            raise ConfigError("keep_count must be >= 1")
        if self.secret_bits < 1:
            raise ConfigError("secret_bits must be >= 1")
        if self.backend not in ("phase", "dense"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        agents = set(range(1, self.n_parties + 1))
        if not 1 <= self.preparer <= self.n_parties:
            raise ConfigError("preparer must be an agent index")
        for sender, receiver in self.notify_requests.items():
            if sender not in agents or receiver not in agents:
                raise ConfigError(
                    f"notify request {sender}->{receiver} outside agent range"
                )
        if not set(self.tp_targets) <= agents:
            raise ConfigError("tp_targets must be agents")
        for party, secret in self.secrets.items():
            if party not in agents:
                raise ConfigError(f"secret holder {party} is not an agent")
            if len(secret) != self.secret_bits or set(secret) - {"0", "1"}:
                raise ConfigError(
                    f"secret of party {party} must be {self.secret_bits} bits of 0/1"
                )


@dataclass
class QanOutcome:
    notified: Dict[int, bool]
    per_run_parities: List[Dict[int, int]]
    events: List[Event]


@dataclass
class ShareOutcome:
    shared: bool
    registers: List[GhzRegister]
    abort_reason: Optional[str]
    checks: List[dict]
    events: List[Event]
    network: Network


@dataclass
class Verdict:
    per_bit: List[bool]  # True where the compared bits are equal
    overall: bool
    announced_by: int
    bit_parities: List  # per-bit parity statistic(s) the TP computed
    events: List[Event]


@dataclass
class PipelineOutcome:
    completed: bool
    abort_stage: Optional[str]
    abort_reason: Optional[str]
    notified: Dict[int, bool]
    verdict: Optional[Verdict]
    events: List[Event]


# ----------------------------------------------------------------------
# anonymous notification (sender and receiver anonymity)


def run_qan(config: ProtocolConfig, network: Optional[Network] = None) -> QanOutcome:
    """Anonymous notification over n shared n-partite GHZ registers per run.

    Register j is dedicated to notifying party j.  A party wishing to
    notify r flips the phase of register r (probability
    ``flip_probability``) on its own particle; everybody Hadamard-measures
    everything and broadcasts all bits except the one from their own
    register.  Party j is notified when its register parity is odd in any
    of the ``repetitions`` runs.
    """
    config.validate()
    if config.n_parties < 3:
        raise ConfigError("anonymous notification needs n >= 3")
    net = network or Network(
        config.n_parties,
        seed=config.seed,
        backend=config.backend,
        record=config.record_transcript,
    )
    n = config.n_parties
    agents = net.agent_indices()
    per_run: List[Dict[int, int]] = []

    for _ in range(config.repetitions):
        regs = [net.new_register(n) for _ in range(n)]
        net.deal_particles(regs, origin=None)
        bits: Dict[Tuple[int, int], int] = {}

        def gate_action(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                target = config.notify_requests.get(party)
                for j, reg in enumerate(regs, start=1):
                    gate = IDENTITY
                    if j == target and nn.party_rng(party).random() < config.flip_probability:
                        gate = PAULI_Z
                    nn.apply_gate(reg, party, gate)

            return act

        def measure_action(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                for j, reg in enumerate(regs, start=1):
                    bits[(party, j)] = nn.h_measure_own(reg, party)

            return act

        def broadcast_action(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                for j, reg in enumerate(regs, start=1):
                    if j != party:
                        nn.broadcast(reg.register_id, bits[(party, j)])

            return act

        net.run_rounds(
            [
                [(p, gate_action(p)) for p in agents],
                [(p, measure_action(p)) for p in agents],
                [(p, broadcast_action(p)) for p in agents],
            ]
        )
        parities = {
            j: _xor(bits[(i, j)] for i in agents) for j in range(1, n + 1)
        }
        per_run.append(parities)

    notified = {
        j: any(run[j] == 1 for run in per_run) for j in range(1, n + 1)
    }
    return QanOutcome(notified, per_run, net.events)


def _xor(values) -> int:
    acc = 0
    for v in values:
        acc ^= v
    return acc


# ----------------------------------------------------------------------
# resource sharing with security check


def run_resource_sharing(
    config: ProtocolConfig,
    adversary_hook: Optional[AdversaryHook] = None,
    *,
    network: Optional[Network] = None,
    count: Optional[int] = None,
    include_tp: bool = False,
    preparer_state: str = "ghz",
    scripted_refusals: Optional[Set[Tuple[int, int]]] = None,
) -> ShareOutcome:
    """Prepare and distribute GHZ registers, then sacrifice ``check_rounds``
    of them to test consistency.

    Each check publicly picks an untested register and a basis bit h; with
    h = 0 all computational outcomes must agree, with h = 1 the Hadamard
    outcomes must have even parity.  Any violation (or scripted refusal to
    announce) aborts the run.  Survivors are returned in dealing order.
    """
    config.validate()
    total = count if count is not None else config.keep_count + config.check_rounds
    s_rounds = config.check_rounds
    if total - s_rounds < 1:
        raise ConfigError(
            f"nothing left to share: {total} registers, {s_rounds} checks"
        )
    net = network or Network(
        config.n_parties,
        include_tp=include_tp,
        seed=config.seed,
        backend=config.backend,
        record=config.record_transcript,
    )
    preparer = config.preparer
    arity = config.n_parties + (1 if net.tp_index is not None and include_tp else 0)

    regs = []
    for _ in range(total):
        if preparer_state == "ghz":
            regs.append(net.new_register(arity))
        elif preparer_state == "all_zero":
            state = GhzRegister.collapsed(arity, 0, backend=config.backend)
            regs.append(net.new_register(arity, state=state))
        else:
            raise ConfigError(f"unknown preparer_state {preparer_state!r}")
    net.deal_particles(regs, origin=preparer, adversary_hook=adversary_hook)

    holders = net.agent_indices()
    if include_tp and net.tp_index is not None:
        holders = holders + [net.tp_index]
    candidates = [a for a in net.agent_indices() if a != preparer]
    refusals = scripted_refusals or set()

    untested = list(range(total))
    checks: List[dict] = []
    schedule = []
    for check_no in range(s_rounds):
        announcer = int(candidates[net.scheduler_rng.integers(0, len(candidates))])
        pick = int(net.party_rng(announcer).integers(0, len(untested)))
        reg = regs[untested.pop(pick)]
        h = int(net.party_rng(announcer).integers(0, 2))
        record = {"register": reg.register_id, "h": h, "bits": {}, "consistent": None}
        checks.append(record)

        def announce(nn: Network, reg=reg, h=h) -> None:
            nn.security_announce(reg.register_id, h)

        def measure_and_tell(party: int, reg=reg, h=h, record=record, check_no=check_no):
            def act(nn: Network) -> None:
                if (party, check_no) in refusals:
                    return
                qubit = party
                bit = (
                    nn.h_measure_own(reg, qubit)
                    if h == 1
                    else nn.measure(reg, qubit)
                )
                record["bits"][party] = bit
                nn.broadcast(reg.register_id, bit)

            return act

        def evaluate(nn: Network, record=record, h=h) -> None:
            bits = record["bits"]
            if len(bits) != len(holders):
                record["consistent"] = False
                nn.abort_notice("missing announcement")
                nn.abort_run("missing announcement")
                return
            values = list(bits.values())
            if h == 0:
                ok = len(set(values)) == 1
            else:
                ok = _xor(values) == 0
            record["consistent"] = ok
            if not ok:
                reason = (
                    "computational outcomes disagree"
                    if h == 0
                    else "hadamard parity odd"
                )
                nn.abort_notice(reason)
                nn.abort_run(reason)

        schedule.append([(announcer, announce)])
        schedule.append([(preparer, measure_and_tell(preparer))])
        schedule.append(
            [(p, measure_and_tell(p)) for p in holders if p != preparer]
        )
        schedule.append([(announcer, evaluate)])

    net.run_rounds(schedule)
    if net.abort_reason is not None:
        return ShareOutcome(False, [], net.abort_reason, checks, net.events, net)
    survivors = [regs[i] for i in sorted(untested)]
    return ShareOutcome(True, survivors, None, checks, net.events, net)


# ----------------------------------------------------------------------
# receiver-only anonymity: the third party notifies competitors


def run_modified_qan(
    config: ProtocolConfig, network: Optional[Network] = None
) -> QanOutcome:
    """Notification driven by the third party over (n+1)-partite registers.

    Only the TP applies phase flips (on its own particle of register j to
    notify party j).  Agents report their bits to the TP over directed
    channels; the TP returns each party the XOR of everyone else's bits so
    only party j itself can complete (and learn) its own parity.
    """
    config.validate()
    net = network or Network(
        config.n_parties,
        include_tp=True,
        seed=config.seed,
        backend=config.backend,
        record=config.record_transcript,
    )
    if net.tp_index is None:
        raise ConfigError("the modified notification protocol needs a third party")
    n = config.n_parties
    tp = net.tp_index
    agents = net.agent_indices()
    targets = set(config.tp_targets)
    per_run: List[Dict[int, int]] = []

    for _ in range(config.repetitions):
        regs = [net.new_register(n + 1) for _ in range(n)]
        net.deal_particles(regs, origin=None)
        bits: Dict[Tuple[int, int], int] = {}
        aggregates: Dict[int, int] = {}

        def tp_gate(nn: Network) -> None:
            for j, reg in enumerate(regs, start=1):
                gate = IDENTITY
                if j in targets and nn.party_rng(tp).random() < config.flip_probability:
                    gate = PAULI_Z
                nn.apply_gate(reg, tp, gate)

        def measure_action(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                for j, reg in enumerate(regs, start=1):
                    bits[(party, j)] = nn.h_measure_own(reg, party)

            return act

        def report_action(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                for j, reg in enumerate(regs, start=1):
                    if j != party:
                        nn.send_directed(tp, reg.register_id, bits[(party, j)])

            return act

        def tp_aggregate(nn: Network) -> None:
            for j, reg in enumerate(regs, start=1):
                agg = _xor(bits[(i, j)] for i in agents if i != j) ^ bits[(tp, j)]
                aggregates[j] = agg
                nn.send_directed(j, reg.register_id, agg)

        net.run_rounds(
            [
                [(tp, tp_gate)],
                [(p, measure_action(p)) for p in agents + [tp]],
                [(p, report_action(p)) for p in agents],
                [(tp, tp_aggregate)],
            ]
        )
        parities = {j: aggregates[j] ^ bits[(j, j)] for j in range(1, n + 1)}
        per_run.append(parities)

    notified = {j: any(run[j] == 1 for run in per_run) for j in range(1, n + 1)}
    return QanOutcome(notified, per_run, net.events)


# ----------------------------------------------------------------------
# private comparison, two competitors


def _ensure_dealt(net: Network, regs: Sequence[GhzRegister]) -> None:
    fresh = [r for r in regs if (r.register_id, 1) not in net.ownership]
    if fresh:
        net.deal_particles(fresh, origin=None)


def _register_resources(
    net: Network, provided: Optional[Sequence[GhzRegister]], count: int, arity: int
) -> List[GhzRegister]:
    if provided is None:
        return [net.new_register(arity) for _ in range(count)]
    if len(provided) < count:
        raise ConfigError(
            f"need {count} prepared registers of arity {arity}, got {len(provided)}"
        )
    regs = list(provided[:count])
    for reg in regs:
        if reg.arity != arity:
            raise ConfigError(
                f"register {reg.register_id} has arity {reg.arity}, expected {arity}"
            )
        if reg.register_id not in net.registers:
            net.new_register(arity, state=reg)
    return regs


def run_aqpc_two(
    config: ProtocolConfig,
    *,
    f_registers: Optional[Sequence[GhzRegister]] = None,
    g_registers: Optional[Sequence[GhzRegister]] = None,
    network: Optional[Network] = None,
    competitors: Optional[Sequence[int]] = None,
) -> Verdict:
    """Equality comparison of two secret bitstrings.

    Per bit: the competitors first measure a shared n-partite register to
    obtain a common masking bit k, then encode on the (n+1)-partite
    register (identity for bit==k, phase flip otherwise, i.e. the gate
    roles swap with k).  Everyone Hadamard-measures and reports to the TP,
    whose total parity equals b1 XOR b2 exactly.
    """
    config.validate()
    comps = sorted(competitors if competitors is not None else config.secrets)
    if len(comps) != 2:
        raise ConfigError(f"two-party comparison needs exactly 2 competitors, got {len(comps)}")
    for c in comps:
        if c not in config.secrets:
            raise ConfigError(f"competitor {c} has no secret configured")
    net = network or Network(
        config.n_parties,
        include_tp=True,
        seed=config.seed,
        backend=config.backend,
        record=config.record_transcript,
    )
    if net.tp_index is None:
        raise ConfigError("comparison needs a third party")
    n, m = config.n_parties, config.secret_bits
    tp = net.tp_index
    agents = net.agent_indices()
    f_regs = _register_resources(net, f_registers, m, n)
    g_regs = _register_resources(net, g_registers, m, n + 1)
    _ensure_dealt(net, f_regs)
    _ensure_dealt(net, g_regs)

    a, b = comps
    parities: List[int] = []
    for j in range(m):
        f_reg, g_reg = f_regs[j], g_regs[j]
        k_bits: Dict[int, int] = {}
        z_bits: Dict[int, int] = {}

        def mask_measure(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                k_bits[party] = nn.measure(f_reg, party)

            return act

        def encode(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                bit = int(config.secrets[party][j])
                gate = PAULI_Z if bit != k_bits[party] else IDENTITY
                nn.apply_gate(g_reg, party, gate)

            return act

        def h_measure(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                z_bits[party] = nn.h_measure_own(g_reg, party)

            return act

        def report(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                nn.send_directed(tp, g_reg.register_id, z_bits[party])

            return act

        net.run_rounds(
            [
                [(p, mask_measure(p)) for p in comps],
                [(p, encode(p)) for p in comps],
                [(p, h_measure(p)) for p in agents + [tp]],
                [(p, report(p)) for p in agents],
            ]
        )
        parities.append(_xor(z_bits[p] for p in agents + [tp]))

    per_bit = [p == 0 for p in parities]
    overall = all(per_bit)

    def announce(nn: Network) -> None:
        nn.verdict_announce(
            {"per_bit": ["equal" if e else "not_equal" for e in per_bit],
             "overall": "equal" if overall else "not_equal"}
        )

    net.run_rounds([[(tp, announce)]])
    return Verdict(per_bit, overall, tp, parities, net.events)


# ----------------------------------------------------------------------
# private comparison, more than two competitors


def bit_equality_decision(d_by_branch: Dict[int, List[int]]) -> bool:
    """A message bit is equal across competitors iff some branch's parity
    row is all zero."""
    return any(all(v == 0 for v in row) for row in d_by_branch.values())


def run_aqpc_multi(
    config: ProtocolConfig,
    *,
    f_registers: Optional[Sequence[GhzRegister]] = None,
    q_registers: Optional[Sequence[GhzRegister]] = None,
    network: Optional[Network] = None,
    competitors: Optional[Sequence[int]] = None,
) -> Verdict:
    """Equality comparison of p >= 2 secrets using graded phase gates.

    Per message bit, competitors share a masking bit k, then encode each
    secret bit twice per phase level g (0..ceil(log2 n)): with the phase
    gate on the branch selected by k for bit 1, and with roles reversed on
    the other branch.  The TP checks, for each branch, whether every
    level's total parity is zero; some branch is all-zero exactly when all
    secrets agree.
    """
    config.validate()
    comps = sorted(competitors if competitors is not None else config.secrets)
    if len(comps) < 2:
        raise ConfigError("multi-party comparison needs at least 2 competitors")
    for c in comps:
        if c not in config.secrets:
            raise ConfigError(f"competitor {c} has no secret configured")
    net = network or Network(
        config.n_parties,
        include_tp=True,
        seed=config.seed,
        backend=config.backend,
        record=config.record_transcript,
    )
    if net.tp_index is None:
        raise ConfigError("comparison needs a third party")
    n, m = config.n_parties, config.secret_bits
    tp = net.tp_index
    agents = net.agent_indices()
    levels = phase_levels(n) + 1  # g runs over 0..ceil(log2 n)
    per_bit_regs = 2 * levels

    f_regs = _register_resources(net, f_registers, m, n)
    q_flat = _register_resources(net, q_registers, m * per_bit_regs, n + 1)
    _ensure_dealt(net, f_regs)
    _ensure_dealt(net, q_flat)
    # layout: for bit j, branch k, level g -> q_flat[(j * 2 + k) * levels + g]
    q_reg = lambda j, k, g: q_flat[(j * 2 + k) * levels + g]

    per_bit: List[bool] = []
    d_stats: List[Dict[int, List[int]]] = []
    for j in range(m):
        f_reg = f_regs[j]
        k_bits: Dict[int, int] = {}
        z_bits: Dict[Tuple[int, int, int], int] = {}

        def mask_measure(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                k_bits[party] = nn.measure(f_reg, party)

            return act

        def encode(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                bit = int(config.secrets[party][j])
                k = k_bits[party]
                for g in range(levels):
                    on_k = phase_gate(g) if bit == 1 else IDENTITY
                    on_not_k = phase_gate(g) if bit == 0 else IDENTITY
                    nn.apply_gate(q_reg(j, k, g), party, on_k)
                    nn.apply_gate(q_reg(j, 1 - k, g), party, on_not_k)

            return act

        def h_measure(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                for k in (0, 1):
                    for g in range(levels):
                        z_bits[(party, k, g)] = nn.h_measure_own(q_reg(j, k, g), party)

            return act

        def report(party: int) -> Callable[[Network], None]:
            def act(nn: Network) -> None:
                for k in (0, 1):
                    for g in range(levels):
                        nn.send_directed(
                            tp, q_reg(j, k, g).register_id, z_bits[(party, k, g)]
                        )

            return act

        net.run_rounds(
            [
                [(p, mask_measure(p)) for p in comps],
                [(p, encode(p)) for p in comps],
                [(p, h_measure(p)) for p in agents + [tp]],
                [(p, report(p)) for p in agents],
            ]
        )
        d_rows = {
            k: [_xor(z_bits[(p, k, g)] for p in agents + [tp]) for g in range(levels)]
            for k in (0, 1)
        }
        d_stats.append(d_rows)
        per_bit.append(bit_equality_decision(d_rows))

    overall = all(per_bit)

    def announce(nn: Network) -> None:
        nn.verdict_announce(
            {"per_bit": ["equal" if e else "not_equal" for e in per_bit],
             "overall": "equal" if overall else "not_equal"}
        )

    net.run_rounds([[(tp, announce)]])
    return Verdict(per_bit, overall, tp, d_stats, net.events)


# ----------------------------------------------------------------------
# full pipeline


def run_full_pipeline(
    config: ProtocolConfig, adversary_hook: Optional[AdversaryHook] = None
) -> PipelineOutcome:
    """Share resources, notify competitors, compare their secrets.

    Any sharing abort, or fewer than two notified competitors, stops the
    pipeline with a stage tag.
    """
    config.validate()
    planned = sorted(set(config.tp_targets))
    if len(planned) < 2:
        raise ConfigError("pipeline needs at least 2 planned competitors")
    for c in planned:
        if c not in config.secrets:
            raise ConfigError(f"planned competitor {c} has no secret configured")
    net = Network(
        config.n_parties,
        include_tp=True,
        seed=config.seed,
        backend=config.backend,
        record=config.record_transcript,
    )
    m = config.secret_bits
    pool = (
        m
        if len(planned) == 2
        else m * registers_per_bit(config.n_parties)
    )

    share_f = run_resource_sharing(
        config,
        adversary_hook,
        network=net,
        count=m + config.check_rounds,
        include_tp=False,
    )
    if not share_f.shared:
        return PipelineOutcome(
            False, "sharing_f", share_f.abort_reason, {}, None, net.events
        )
    share_q = run_resource_sharing(
        config,
        adversary_hook,
        network=net,
        count=pool + config.check_rounds,
        include_tp=True,
    )
    if not share_q.shared:
        return PipelineOutcome(
            False, "sharing_q", share_q.abort_reason, {}, None, net.events
        )

    notification = run_modified_qan(config, network=net)
    competitors = sorted(j for j, hit in notification.notified.items() if hit)
    if len(competitors) < 2:
        return PipelineOutcome(
            False,
            "notification",
            f"comparison needs >= 2 competitors, got {len(competitors)}",
            notification.notified,
            None,
            net.events,
        )

    if len(competitors) == 2:
        verdict = run_aqpc_two(
            config,
            f_registers=share_f.registers,
            g_registers=share_q.registers,
            network=net,
            competitors=competitors,
        )
    else:
        verdict = run_aqpc_multi(
            config,
            f_registers=share_f.registers,
            q_registers=share_q.registers,
            network=net,
            competitors=competitors,
        )
    return PipelineOutcome(True, None, None, notification.notified, verdict, net.events)
