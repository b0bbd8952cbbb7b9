"""Exact simulation of GHZ registers under diagonal gates plus a final
Hadamard-and-measure step.

Two interchangeable backends:

* ``phase``: a register is fully described by its arity and the relative
  phase theta in ``(|0..0> + e^{i theta} |1..1>) / sqrt(2)``.  theta is kept
  as an exact ``Fraction`` multiple of pi, since every gate in the protocol
  set shifts it by ``pi / 2**g``.  Computational measurement collapses the
  register to ``|b..b>``.
* ``dense``: a full statevector of ``2**arity`` complex amplitudes (capped
  at 16 qubits).  Supports arbitrary single-qubit unitaries, CNOTs and
  per-qubit measurement, which the adversary harness needs for tampering
  that breaks the GHZ structure.

Gate conventions: ``U_Z = diag(1, -1)`` adds pi to the relative phase;
the parameterised phase gate with parameter g is
``diag(e^{i phi/2}, e^{-i phi/2})`` with ``phi = pi / 2**g``, so it shifts
the relative phase by ``-phi``.  Only the phase mod 2*pi is observable, and
``g = 0`` acts like ``U_Z`` up to global phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import cos, pi
from typing import NamedTuple, Optional, Tuple

import numpy as np

DENSE_QUBIT_CAP = 16

_H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


class EngineError(Exception):
    """Base class for register misuse and backend errors."""


class RegisterError(EngineError):
    """Invalid arity, bad qubit index, or use of a consumed register."""


class BackendError(EngineError):
    """Operation not supported by the selected backend."""


class DenseCapError(EngineError):
    """Statevector would exceed the dense-backend qubit cap."""


@dataclass(frozen=True)
class DiagonalGate:
    """One of the diagonal gates the protocols use.

    kind is "identity", "pauli_z" or "phase"; g is only meaningful for
    kind == "phase".
    """

    kind: str
    g: int = 0

    def phase_shift(self) -> Fraction:
        """Shift applied to the relative phase, in units of pi."""
        if self.kind == "identity":
            return Fraction(0)
        if self.kind == "pauli_z":
            return Fraction(1)
        if self.kind == "phase":
            return Fraction(-1, 2 ** self.g)
        raise ValueError(f"unknown gate kind {self.kind!r}")

    def matrix(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(2, dtype=complex)
        if self.kind == "pauli_z":
            return np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
        if self.kind == "phase":
            half = pi / 2 ** (self.g + 1)
            return np.array(
                [[np.exp(1j * half), 0.0], [0.0, np.exp(-1j * half)]],
                dtype=complex,
            )
        raise ValueError(f"unknown gate kind {self.kind!r}")


IDENTITY = DiagonalGate("identity")
PAULI_Z = DiagonalGate("pauli_z")


def phase_gate(g: int) -> DiagonalGate:
    """Phase gate with angle pi / 2**g; g = 0 matches PAULI_Z observably."""
    if g < 0:
        raise ValueError("phase-gate parameter must be >= 0")
    return DiagonalGate("phase", g)


class ParityDistribution(NamedTuple):
    p_even: float
    p_odd: float


def _unitary_deviation(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix @ matrix.conj().T - np.eye(2))))


class GhzRegister:
    """A single shared GHZ resource.

    Qubit indices are 1-based: qubit i is held by party i under the
    canonical dealing used throughout.  A register is consumed by the
    terminal Hadamard-and-measure step; ancillas attached by an adversary
    stay measurable afterwards.
    """

    def __init__(self, arity: int, backend: str = "phase", register_id: int = 0):
        if arity < 2:
            raise RegisterError(f"register arity must be >= 2, got {arity}")
        if backend not in ("phase", "dense"):
            raise BackendError(f"unknown backend {backend!r}")
        if backend == "dense" and arity > DENSE_QUBIT_CAP:
            raise DenseCapError(
                f"dense backend capped at {DENSE_QUBIT_CAP} qubits, got {arity}"
            )
        self.register_id = register_id
        self.arity = arity
        self.backend = backend
        self.consumed = False
        self._theta: Optional[Fraction] = None  # units of pi
        self._bit: Optional[int] = None
        self._amps: Optional[np.ndarray] = None
        self._n_anc = 0
        if backend == "phase":
            self._theta = Fraction(0)
        else:
            amps = np.zeros(2 ** arity, dtype=complex)
            amps[0] = amps[-1] = 1.0 / np.sqrt(2.0)
            self._amps = amps

    # ------------------------------------------------------------------
    # alternate constructors

    @classmethod
    def with_phase(
        cls, arity: int, theta_over_pi: Fraction, backend: str = "phase", register_id: int = 0
    ) -> "GhzRegister":
        """Register in (|0..0> + e^{i theta}|1..1>)/sqrt(2), theta given in pi units."""
        reg = cls(arity, backend=backend, register_id=register_id)
        if backend == "phase":
            reg._theta = Fraction(theta_over_pi) % 2
        else:
            reg._amps[-1] *= np.exp(1j * pi * float(theta_over_pi))
        return reg

    @classmethod
    def collapsed(
        cls, arity: int, bit: int, backend: str = "phase", register_id: int = 0
    ) -> "GhzRegister":
        """Register already collapsed to |b..b> (e.g. measured earlier)."""
        if bit not in (0, 1):
            raise RegisterError("collapsed bit must be 0 or 1")
        reg = cls(arity, backend=backend, register_id=register_id)
        if backend == "phase":
            reg._theta = None
            reg._bit = bit
        else:
            amps = np.zeros(2 ** arity, dtype=complex)
            amps[-1 if bit else 0] = 1.0
            reg._amps = amps
            reg._bit = bit
        return reg

    # ------------------------------------------------------------------
    # inspection

    @property
    def is_collapsed(self) -> bool:
        return self._bit is not None and self.backend == "phase"

    @property
    def theta_over_pi(self) -> Optional[Fraction]:
        """Relative phase in pi units (phase backend, not collapsed)."""
        return self._theta

    @property
    def total_qubits(self) -> int:
        return self.arity + self._n_anc

    @property
    def ancilla_indices(self) -> Tuple[int, ...]:
        return tuple(range(self.arity + 1, self.total_qubits + 1))

    def export_amplitudes(self) -> list:
        """Dense statevector as (index, re, im) triples, for debugging."""
        if self._amps is None:
            raise BackendError("amplitude export requires the dense backend")
        return [
            (i, float(a.real), float(a.imag))
            for i, a in enumerate(self._amps)
            if a != 0
        ]

    def norm(self) -> float:
        if self._amps is None:
            return 1.0
        return float(np.linalg.norm(self._amps))

    # ------------------------------------------------------------------
    # internal dense helpers

    def _check_qubit(self, qubit: int, allow_ancilla: bool = False) -> None:
        top = self.total_qubits if allow_ancilla else self.arity
        if not 1 <= qubit <= top:
            raise RegisterError(
                f"qubit index {qubit} out of range 1..{top} "
                f"(register {self.register_id})"
            )

    def _check_live(self, qubit: int = 1) -> None:
        # Ancilla operations stay legal after the terminal measurement.
        if self.consumed and qubit <= self.arity:
            raise RegisterError(
                f"register {self.register_id} already terminally measured"
            )

    def _bit_shift(self, qubit: int) -> int:
        return self.total_qubits - qubit

    def _apply_matrix(self, qubit: int, matrix: np.ndarray) -> None:
        m = self.total_qubits
        left = 1 << (qubit - 1)
        right = 1 << (m - qubit)
        v = self._amps.reshape(left, 2, right)
        self._amps = np.einsum("ab,ibj->iaj", matrix, v).reshape(-1)

    # ------------------------------------------------------------------
    # operations

    def apply_diagonal(self, qubit: int, gate: DiagonalGate) -> None:
        """Apply identity / Z / phase gate on one qubit.

        No-op on a collapsed register (diagonal gates only change the
        global phase of |b..b>).
        """
        self._check_live(qubit)
        self._check_qubit(qubit)
        if self.backend == "phase":
            if self._bit is not None:
                return
            self._theta = (self._theta + gate.phase_shift()) % 2
        else:
            self._apply_matrix(qubit, gate.matrix())

    def apply_unitary_1q(self, qubit: int, matrix: np.ndarray) -> None:
        """Arbitrary single-qubit unitary; dense backend only."""
        if self.backend != "dense":
            raise BackendError(
                "non-diagonal single-qubit unitaries require the dense "
                "backend; the phase backend is valid only for the "
                "diagonal-gates-plus-final-Hadamard structure"
            )
        self._check_live(qubit)
        self._check_qubit(qubit, allow_ancilla=True)
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (2, 2) or _unitary_deviation(matrix) > 1e-9:
            raise EngineError("matrix is not unitary within 1e-9")
        self._apply_matrix(qubit, matrix)

    def apply_hadamard(self, qubit: int) -> None:
        self.apply_unitary_1q(qubit, _H_MATRIX)

    def apply_cnot(self, control: int, target: int) -> None:
        """CNOT between two qubits of the dense statevector."""
        if self.backend != "dense":
            raise BackendError("CNOT requires the dense backend")
        self._check_live(min(control, target))
        self._check_qubit(control, allow_ancilla=True)
        self._check_qubit(target, allow_ancilla=True)
        if control == target:
            raise RegisterError("CNOT control and target must differ")
        c_shift = self._bit_shift(control)
        t_shift = self._bit_shift(target)
        idx = np.arange(self._amps.shape[0])
        # CNOT permutes basis states by an involution, so gathering with the
        # flipped indices is its own inverse.
        flipped = np.where((idx >> c_shift) & 1 == 1, idx ^ (1 << t_shift), idx)
        self._amps = self._amps[flipped]

    def add_ancilla(self) -> int:
        """Append a |0> ancilla qubit (dense backend); returns its index."""
        if self.backend != "dense":
            raise BackendError("ancillas require the dense backend")
        if self.total_qubits + 1 > DENSE_QUBIT_CAP:
            raise DenseCapError(
                f"adding an ancilla would exceed the {DENSE_QUBIT_CAP}-qubit cap"
            )
        self._amps = np.kron(self._amps, np.array([1.0, 0.0], dtype=complex))
        self._n_anc += 1
        return self.total_qubits

    def measure_computational(self, qubit: int, rng: np.random.Generator) -> int:
        """Projective computational-basis measurement of one qubit.

        On a phase-backend register the first measurement collapses the
        whole register to |b..b>; later measurements return the same bit.
        """
        self._check_live(qubit)
        self._check_qubit(qubit, allow_ancilla=True)
        if self.backend == "phase":
            if self._bit is None:
                self._bit = int(rng.integers(0, 2))
                self._theta = None
            return self._bit
        shift = self._bit_shift(qubit)
        idx = np.arange(self._amps.shape[0])
        mask_one = ((idx >> shift) & 1).astype(bool)
        p_one = float(np.sum(np.abs(self._amps[mask_one]) ** 2))
        outcome = int(rng.random() < p_one)
        keep = mask_one if outcome else ~mask_one
        post = np.where(keep, self._amps, 0.0)
        norm = np.linalg.norm(post)
        if norm == 0.0:
            raise EngineError("measurement projected onto a zero state")
        self._amps = post / norm
        return outcome

    def hadamard_all_then_measure(self, rng: np.random.Generator) -> Tuple[int, ...]:
        """Apply H to every (nominal) qubit, then measure them all.

        Returns the bits for qubits 1..arity and consumes the register.
        Attached ancillas are untouched by the Hadamards and stay live.
        """
        self._check_live()
        self.consumed = True
        if self.backend == "phase":
            if self._bit is not None:
                # H on |b..b> gives uniform independent outcomes.
                return tuple(int(b) for b in rng.integers(0, 2, size=self.arity))
            parity = self._sample_parity(rng)
            bits = [int(b) for b in rng.integers(0, 2, size=self.arity - 1)]
            bits.append(parity ^ (sum(bits) & 1))
            return tuple(bits)
        for q in range(1, self.arity + 1):
            self._apply_matrix(q, _H_MATRIX)
        n_anc = self._n_anc
        probs = np.abs(self._amps.reshape(2 ** self.arity, 2 ** n_anc)) ** 2
        cum = np.cumsum(probs.sum(axis=1))
        outcome = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        keep = np.zeros_like(self._amps)
        lo = outcome * 2 ** n_anc
        keep[lo : lo + 2 ** n_anc] = self._amps[lo : lo + 2 ** n_anc]
        norm = np.linalg.norm(keep)
        self._amps = keep / norm
        return tuple((outcome >> (self.arity - q)) & 1 for q in range(1, self.arity + 1))

    def _sample_parity(self, rng: np.random.Generator) -> int:
        t = self._theta
        if t.denominator == 1:
            return t.numerator % 2
        p_even = cos(pi * float(t) / 2.0) ** 2
        return int(rng.random() >= p_even)

    def exact_parity_distribution(self) -> ParityDistribution:
        """Exact outcome-parity law of hadamard_all_then_measure.

        Does not consume or modify the register.  A collapsed register
        yields (1/2, 1/2).
        """
        if self.consumed:
            raise RegisterError(
                f"register {self.register_id} already terminally measured"
            )
        if self.backend == "phase":
            if self._bit is not None:
                return ParityDistribution(0.5, 0.5)
            t = self._theta
            if t.denominator == 1:
                return (
                    ParityDistribution(1.0, 0.0)
                    if t.numerator % 2 == 0
                    else ParityDistribution(0.0, 1.0)
                )
            p_even = cos(pi * float(t) / 2.0) ** 2
            return ParityDistribution(p_even, 1.0 - p_even)
        saved = self._amps
        try:
            for q in range(1, self.arity + 1):
                self._apply_matrix(q, _H_MATRIX)
            probs = np.abs(self._amps.reshape(2 ** self.arity, 2 ** self._n_anc)) ** 2
            marginal = probs.sum(axis=1)
        finally:
            self._amps = saved
        idx = np.arange(2 ** self.arity)
        parities = np.array([bin(x).count("1") & 1 for x in idx], dtype=bool)
        p_odd = float(marginal[parities].sum())
        return ParityDistribution(1.0 - p_odd, p_odd)


def random_diagonal_circuit(
    arity: int, n_gates: int, rng: np.random.Generator, max_g: int = 4
) -> list:
    """Random (qubit, gate) sequence over the diagonal gate set."""
    seq = []
    for _ in range(n_gates):
        qubit = int(rng.integers(1, arity + 1))
        kind = int(rng.integers(0, 3))
        if kind == 0:
            gate = IDENTITY
        elif kind == 1:
            gate = PAULI_Z
        else:
            gate = phase_gate(int(rng.integers(0, max_g + 1)))
        seq.append((qubit, gate))
    return seq
