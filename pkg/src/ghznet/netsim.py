"""Parties, authenticated classical channels, a tamper-able quantum channel,
round scheduling and transcript capture.

A run owns one :class:`Network`.  All randomness flows through named
sub-generators spawned from the run seed (``SeedSequence(seed,
spawn_key=(stream,))``), so equal (config, seed) pairs give byte-identical
transcripts.  Within a round, parties act in ascending index order; the
ordering is a scheduler artifact, not protocol information, and can be
flipped for ordering-sensitivity experiments.

Message senders are always the party the scheduler is currently running,
so a foreign sender field cannot be forged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .engine import DiagonalGate, GhzRegister

SOURCE = 0       # actor id for the external GHZ source
ADVERSARY = -1   # actor id for channel tampering

_STREAM_PHYSICS = 0
_STREAM_SCHEDULER = 1
_STREAM_ADVERSARY = 2
_STREAM_PARTY_BASE = 100

PUBLIC_KINDS = frozenset(
    {
        "broadcast_bit",
        "security_announce",
        "abort_notice",
        "verdict_announce",
        "abort",
        "run_complete",
        "run_failed",
    }
)


class NetworkError(Exception):
    """Channel misuse: bad receivers, malformed particle assignments."""


def derive_seed(master_seed: int, index: int) -> int:
    """Per-trial seed: fold the 64-bit state of SeedSequence(master, (index,))."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    a, b = (int(x) for x in ss.generate_state(2))
    return (a << 32) | b


class RunFailedError(Exception):
    """A party state machine raised during a scheduled round."""


@dataclass(frozen=True)
class PartyId:
    index: int
    role: str = "agent"  # "agent" or "tp"

    @property
    def is_tp(self) -> bool:
        return self.role == "tp"


@dataclass(slots=True)
class Event:
    seq: int
    round: int
    kind: str
    actor: Optional[int]
    payload: dict
    private: bool

    def to_record(self) -> dict:
        return {
            "seq": self.seq,
            "round": self.round,
            "kind": self.kind,
            "actor": self.actor,
            "payload": self.payload,
            "private": self.private,
        }


def to_ndjson(events: Iterable[Event]) -> str:
    """One JSON object per event, newline-delimited."""
    return "\n".join(json.dumps(e.to_record(), sort_keys=True) for e in events)


def visible_to(event: Event, observer: int) -> bool:
    if event.kind in PUBLIC_KINDS:
        return True
    if event.kind == "directed_bit":
        return observer in (event.actor, event.payload["receiver"])
    if event.kind == "qubit_sent":
        return observer in (event.actor, event.payload["to"])
    if event.kind == "qubit_tampered":
        return observer == ADVERSARY
    # gate_applied / measurement: only the acting party
    return observer == event.actor


def party_view(events: Sequence[Event], observer: Union[int, Iterable[int]]) -> List[Event]:
    """Events an observer (or a coalition pooling its views) may see."""
    if isinstance(observer, int):
        members = (observer,)
    else:
        members = tuple(observer)
    return [e for e in events if any(visible_to(e, m) for m in members)]


def check_view_soundness(events: Sequence[Event], party_indices: Iterable[int]) -> None:
    """No view may contain a foreign private event; raises on violation."""
    for p in party_indices:
        for e in party_view(events, p):
            if e.private and e.actor != p:
                raise AssertionError(
                    f"party {p} sees private event {e.kind} of actor {e.actor}"
                )


def check_conservation(events: Sequence[Event]) -> None:
    """Every dealt qubit is measured at most once by the parties."""
    counts: Dict[Tuple[int, int], int] = {}
    for e in events:
        if e.kind == "measurement":
            key = (e.payload["register"], e.payload["qubit"])
            counts[key] = counts.get(key, 0) + 1
            if counts[key] > 1:
                raise AssertionError(f"qubit {key} measured more than once")


# Schedule: list of rounds; a round is a list of (actor index, action).
Action = Callable[["Network"], None]
Round = List[Tuple[int, Action]]


class Network:
    """Scheduler, channels and transcript for one protocol run."""

    def __init__(
        self,
        n_agents: int,
        include_tp: bool = False,
        seed: int = 0,
        backend: str = "phase",
        record: bool = True,
        order: str = "ascending",
    ):
        if n_agents < 2:
            raise NetworkError("a network needs at least two agents")
        if order not in ("ascending", "descending"):
            raise NetworkError(f"unknown round order {order!r}")
        self.n_agents = n_agents
        self.backend = backend
        self.record = record
        self.order = order
        self.parties = [PartyId(i) for i in range(1, n_agents + 1)]
        self.tp_index: Optional[int] = None
        if include_tp:
            self.tp_index = n_agents + 1
            self.parties.append(PartyId(self.tp_index, "tp"))
        self.events: List[Event] = []
        self.round_no = 0
        self.current_actor: Optional[int] = None
        self.abort_reason: Optional[str] = None
        self._seq = 0
        self._next_register_id = 1
        self.registers: Dict[int, GhzRegister] = {}
        self.ownership: Dict[Tuple[int, int], int] = {}
        self._h_bits: Dict[int, Dict[int, int]] = {}
        self._seed = seed
        self._rngs: Dict[int, np.random.Generator] = {}

    # ------------------------------------------------------------------
    # rng streams

    def _stream(self, stream_id: int) -> np.random.Generator:
        if stream_id not in self._rngs:
            ss = np.random.SeedSequence(self._seed, spawn_key=(stream_id,))
            self._rngs[stream_id] = np.random.default_rng(ss)
        return self._rngs[stream_id]

    @property
    def physics_rng(self) -> np.random.Generator:
        return self._stream(_STREAM_PHYSICS)

    @property
    def scheduler_rng(self) -> np.random.Generator:
        return self._stream(_STREAM_SCHEDULER)

    @property
    def adversary_rng(self) -> np.random.Generator:
        return self._stream(_STREAM_ADVERSARY)

    def party_rng(self, index: int) -> np.random.Generator:
        return self._stream(_STREAM_PARTY_BASE + index)

    # ------------------------------------------------------------------
    # registers and dealing

    def agent_indices(self) -> List[int]:
        return list(range(1, self.n_agents + 1))

    def party_indices(self) -> List[int]:
        ids = self.agent_indices()
        if self.tp_index is not None:
            ids.append(self.tp_index)
        return ids

    def new_register(self, arity: int, state: Optional[GhzRegister] = None) -> GhzRegister:
        rid = self._next_register_id
        self._next_register_id += 1
        if state is None:
            reg = GhzRegister(arity, backend=self.backend, register_id=rid)
        else:
            reg = state
            reg.register_id = rid
        self.registers[rid] = reg
        return reg

    def deal_particles(
        self,
        registers: Sequence[GhzRegister],
        assignment: Optional[Dict[Tuple[int, int], int]] = None,
        origin: Optional[int] = None,
        adversary_hook: Optional[Callable[["Network", GhzRegister, int, int], None]] = None,
    ) -> Dict[Tuple[int, int], int]:
        """Distribute register qubits to parties, logging channel traffic.

        ``assignment`` maps (register_id, qubit) to a party index and must
        cover every qubit of every register exactly once; by default qubit i
        goes to party i.  Qubits already at ``origin`` do not transit.  The
        adversary hook runs once per in-transit qubit.
        """
        if assignment is None:
            assignment = {}
            for reg in registers:
                for q in range(1, reg.arity + 1):
                    assignment[(reg.register_id, q)] = q
        expected = {
            (reg.register_id, q) for reg in registers for q in range(1, reg.arity + 1)
        }
        if set(assignment) != expected:
            missing = expected - set(assignment)
            extra = set(assignment) - expected
            raise NetworkError(
                f"assignment must cover each qubit exactly once "
                f"(missing {sorted(missing)[:4]}, extra {sorted(extra)[:4]})"
            )
        valid = set(self.party_indices())
        for key, owner in assignment.items():
            if owner not in valid:
                raise NetworkError(f"qubit {key} assigned to unknown party {owner}")
        for reg in registers:
            for q in range(1, reg.arity + 1):
                owner = assignment[(reg.register_id, q)]
                self.ownership[(reg.register_id, q)] = owner
                if origin is not None and owner == origin:
                    continue
                self._log(
                    "qubit_sent",
                    origin if origin is not None else SOURCE,
                    {"register": reg.register_id, "qubit": q, "to": owner},
                    private=False,
                )
                if adversary_hook is not None:
                    adversary_hook(self, reg, q, owner)
        return dict(self.ownership)

    # ------------------------------------------------------------------
    # transcript

    def _log(self, kind: str, actor: Optional[int], payload: dict, private: bool) -> None:
        if not self.record:
            return
        self.events.append(Event(self._seq, self.round_no, kind, actor, payload, private))
        self._seq += 1

    def log_tampered(self, register: GhzRegister, qubit: int, attack: str, **info) -> None:
        payload = {"register": register.register_id, "qubit": qubit, "attack": attack}
        payload.update(info)
        self._log("qubit_tampered", ADVERSARY, payload, private=True)

    # ------------------------------------------------------------------
    # classical channel (senders fixed to the scheduled actor)

    def broadcast(self, register_id: int, bit: int) -> None:
        self._log(
            "broadcast_bit",
            self.current_actor,
            {"register": register_id, "bit": int(bit)},
            private=False,
        )

    def send_directed(self, receiver: int, register_id: int, bit: int) -> None:
        if receiver == self.current_actor:
            raise NetworkError("directed message to self is rejected")
        if receiver not in self.party_indices():
            raise NetworkError(f"unknown receiver {receiver}")
        self._log(
            "directed_bit",
            self.current_actor,
            {"receiver": receiver, "register": register_id, "bit": int(bit)},
            private=False,  # visibility restricted by kind, not the flag
        )

    def security_announce(self, register_id: int, h: int) -> None:
        self._log(
            "security_announce",
            self.current_actor,
            {"register": register_id, "h": int(h)},
            private=False,
        )

    def abort_notice(self, reason: str) -> None:
        self._log("abort_notice", self.current_actor, {"reason": reason}, private=False)

    def verdict_announce(self, payload: dict) -> None:
        self._log("verdict_announce", self.current_actor, dict(payload), private=False)

    def abort_run(self, reason: str) -> None:
        self.abort_reason = reason
        self._log("abort", self.current_actor, {"reason": reason}, private=False)

    # ------------------------------------------------------------------
    # quantum operations, logged for the acting party

    def apply_gate(self, reg: GhzRegister, qubit: int, gate: DiagonalGate) -> None:
        reg.apply_diagonal(qubit, gate)
        self._log(
            "gate_applied",
            self.current_actor,
            {"register": reg.register_id, "qubit": qubit, "gate": gate.kind, "g": gate.g},
            private=True,
        )

    def measure(self, reg: GhzRegister, qubit: int) -> int:
        bit = reg.measure_computational(qubit, self.physics_rng)
        self._log(
            "measurement",
            self.current_actor,
            {"register": reg.register_id, "qubit": qubit, "bit": bit, "basis": "z"},
            private=True,
        )
        return bit

    def h_measure_own(self, reg: GhzRegister, qubit: int) -> int:
        """Apply H to the party's qubit and measure it.

        The register's joint Hadamard-basis outcome is sampled once (exact
        in both backends); each party collects its own bit.
        """
        rid = reg.register_id
        if rid not in self._h_bits:
            bits = reg.hadamard_all_then_measure(self.physics_rng)
            self._h_bits[rid] = {q + 1: b for q, b in enumerate(bits)}
        bit = self._h_bits[rid][qubit]
        self._log(
            "gate_applied",
            self.current_actor,
            {"register": rid, "qubit": qubit, "gate": "hadamard", "g": 0},
            private=True,
        )
        self._log(
            "measurement",
            self.current_actor,
            {"register": rid, "qubit": qubit, "bit": bit, "basis": "h"},
            private=True,
        )
        return bit

    # ------------------------------------------------------------------
    # scheduler

    def run_rounds(self, schedule: Sequence[Round]) -> List[Event]:
        """Execute rounds in order; an abort ends the run after its round."""
        reverse = self.order == "descending"
        for rnd in schedule:
            self.round_no += 1
            for actor, action in sorted(rnd, key=lambda t: t[0], reverse=reverse):
                self.current_actor = actor
                try:
                    action(self)
                except Exception as exc:  # noqa: BLE001 - diagnostic capture
                    diagnostic = f"party {actor} raised {type(exc).__name__}: {exc}"
                    self._log("run_failed", actor, {"diagnostic": diagnostic}, False)
                    raise RunFailedError(diagnostic) from exc
                finally:
                    self.current_actor = None
            if self.abort_reason is not None:
                break
        self._log("run_complete", None, {}, private=False)
        return self.events
