"""Exhaustive small-instance oracles for the simulator's core claims.

Every check here is an independent route to a result the protocols also
produce: exact statevector arithmetic instead of sampling, exhaustive
enumeration instead of Monte Carlo, rational posteriors instead of
empirical success rates.  ``run_all`` powers the CLI ``verify`` command.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import List, Sequence, Tuple

import numpy as np

from .engine import GhzRegister, phase_gate, random_diagonal_circuit
from .adversary import qan_coalition_posterior, trace_posterior
from .netsim import party_view
from .protocols import (
    ProtocolConfig,
    phase_levels,
    run_aqpc_multi,
    run_aqpc_two,
    run_qan,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_failure_probs(reg: GhzRegister) -> Tuple[float, float]:
    """Exact probability that a security test fails on this register.

    Returns (p_fail given h=0, p_fail given h=1): the h=0 test requires all
    computational outcomes equal, the h=1 test requires even Hadamard
    parity.  Ancillas are marginalised out.
    """
    if reg.backend == "phase":
        if reg.is_collapsed:
            return 0.0, 0.5
        pd = reg.exact_parity_distribution()
        return 0.0, pd.p_odd
    n = reg.arity
    n_anc = reg.total_qubits - n
    amps = np.zeros(2 ** reg.total_qubits, dtype=complex)
    for i, re_, im in reg.export_amplitudes():
        amps[i] = complex(re_, im)
    marginal = (np.abs(amps.reshape(2 ** n, 2 ** n_anc)) ** 2).sum(axis=1)
    p_pass_h0 = float(marginal[0] + marginal[2 ** n - 1])
    p_fail_h1 = reg.exact_parity_distribution().p_odd
    return 1.0 - p_pass_h0, float(p_fail_h1)


# ----------------------------------------------------------------------
# individual checks


def check_backend_equivalence(
    n_circuits: int = 1000, seed: int = 20240, tolerance: float = 1e-9
) -> CheckResult:
    """Phase backend vs dense statevector on random diagonal circuits."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_circuits):
        arity = int(rng.integers(2, 9))
        circuit = random_diagonal_circuit(arity, int(rng.integers(0, 51)), rng)
        phase = GhzRegister(arity)
        dense = GhzRegister(arity, backend="dense")
        for qubit, gate in circuit:
            phase.apply_diagonal(qubit, gate)
            dense.apply_diagonal(qubit, gate)
        dev = abs(
            phase.exact_parity_distribution().p_even
            - dense.exact_parity_distribution().p_even
        )
        worst = max(worst, dev)
        if dev >= tolerance:
            return CheckResult(
                "backend_equivalence",
                False,
                f"circuit {i} (arity {arity}) deviates by {dev:.3e}",
            )
    return CheckResult(
        "backend_equivalence",
        True,
        f"{n_circuits} circuits, worst deviation {worst:.3e}",
    )


def check_two_party_truth_table(
    n_values: Sequence[int] = (3, 4, 5, 6),
    backends: Sequence[str] = ("phase", "dense"),
) -> CheckResult:
    """Verdict must equal (b1 == b2) for every bit pair, mask and size."""
    cases = 0
    for backend in backends:
        for n in n_values:
            for b1, b2, k in product((0, 1), repeat=3):
                cfg = ProtocolConfig(
                    n_parties=n,
                    secret_bits=1,
                    secrets={1: str(b1), 2: str(b2)},
                    backend=backend,
                    seed=cases,
                )
                masks = [GhzRegister.collapsed(n, k, backend=backend)]
                verdict = run_aqpc_two(cfg, f_registers=masks)
                if verdict.overall is not (b1 == b2):
                    return CheckResult(
                        "two_party_truth_table",
                        False,
                        f"n={n} backend={backend} b1={b1} b2={b2} k={k} "
                        f"gave {verdict.overall}",
                    )
                cases += 1
    return CheckResult("two_party_truth_table", True, f"{cases} cases exact")


def check_multi_party_enumeration(
    group_sizes: Sequence[int] = (2, 3),
    n_parties: int = 4,
    seeds_per_case: int = 5,
    backend: str = "phase",
) -> CheckResult:
    """Multi-party verdict equals all-secrets-identical for every vector."""
    cases = 0
    for p in group_sizes:
        holders = list(range(1, p + 1))
        for vec in range(2 ** p):
            bits = [(vec >> i) & 1 for i in range(p)]
            secrets = {h: str(b) for h, b in zip(holders, bits)}
            expected = len(set(bits)) == 1
            for seed in range(seeds_per_case):
                cfg = ProtocolConfig(
                    n_parties=n_parties, secret_bits=1, secrets=secrets,
                    backend=backend, seed=seed,
                )
                verdict = run_aqpc_multi(cfg)
                if verdict.overall is not expected:
                    return CheckResult(
                        "multi_party_enumeration",
                        False,
                        f"p={p} secrets={secrets} seed={seed} gave {verdict.overall}",
                    )
                cases += 1
    return CheckResult("multi_party_enumeration", True, f"{cases} runs exact")


def check_branch_divisibility(max_group: int = 8) -> CheckResult:
    """No spurious all-zero parity row: for 0 < t < p encoders, the level
    g = (2-adic valuation of t) gives a certainly-odd parity, and it lies
    within the configured level range."""
    for p in range(2, max_group + 1):
        levels = phase_levels(p) + 1
        for t in range(1, p):
            deterministic_level = None
            for g in range(levels):
                reg = GhzRegister(max(p, 2) + 1)
                for _ in range(t):
                    reg.apply_diagonal(1, phase_gate(g))
                pd = reg.exact_parity_distribution()
                if pd.p_odd == 1.0:
                    deterministic_level = g
                    break
            if deterministic_level is None:
                return CheckResult(
                    "branch_divisibility",
                    False,
                    f"no certainly-odd level for t={t} of p={p}",
                )
            v = (t & -t).bit_length() - 1  # 2-adic valuation
            if deterministic_level != v:
                return CheckResult(
                    "branch_divisibility",
                    False,
                    f"t={t}: expected level {v}, found {deterministic_level}",
                )
    return CheckResult(
        "branch_divisibility", True, f"group sizes 2..{max_group} covered"
    )


def check_coalition_posterior_flat(
    n_values: Sequence[int] = (4, 5, 6),
    tolerance: float = 1e-9,
    seed: int = 99,
) -> CheckResult:
    """Exact posterior over notifier/notified is uniform for every
    coalition that leaves at least one candidate (sizes up to n-2 checked)."""
    worst = Fraction(0)
    for n in n_values:
        for c in range(1, n - 1):
            members = set(range(1, c + 1))
            candidates = [a for a in range(1, n + 1) if a not in members]
            cfg = ProtocolConfig(
                n_parties=n,
                repetitions=2,
                flip_probability=0.5,
                notify_requests={candidates[-1]: candidates[0]},
                seed=seed + n * 10 + c,
            )
            out = run_qan(cfg)
            for objective in ("identify_notifier", "identify_notified"):
                posterior = qan_coalition_posterior(
                    out.events, n, members, objective, cfg.flip_probability
                )
                uniform = Fraction(1, len(candidates))
                dev = max(abs(w - uniform) for w in posterior.values())
                worst = max(worst, dev)
                if float(dev) >= tolerance:
                    return CheckResult(
                        "coalition_posterior_flat",
                        False,
                        f"n={n} coalition={sorted(members)} {objective}: "
                        f"deviation {float(dev):.3e}",
                    )
    return CheckResult(
        "coalition_posterior_flat",
        True,
        f"max deviation {float(worst):.1e} (exact rational arithmetic)",
    )


def check_trace_posterior_exact(n_values: Sequence[int] = (3, 4, 5, 6)) -> CheckResult:
    """The third party's posterior over the phase applier is exactly
    (1/2, 1/2) whenever the secrets differ, for both secret orders."""
    for n in n_values:
        for b1 in (0, 1):
            b2 = 1 - b1
            cfg = ProtocolConfig(
                n_parties=n, secret_bits=1,
                secrets={1: str(b1), 2: str(b2)}, seed=n,
            )
            verdict = run_aqpc_two(cfg)
            view = party_view(verdict.events, verdict.announced_by)
            posterior = trace_posterior(view, [1, 2], cfg.secrets)
            if posterior[1] != Fraction(1, 2) or posterior[2] != Fraction(1, 2):
                return CheckResult(
                    "trace_posterior_exact",
                    False,
                    f"n={n} b1={b1}: posterior {posterior}",
                )
    return CheckResult("trace_posterior_exact", True, "exactly (1/2, 1/2) throughout")


def run_all(fast: bool = False, seed: int = 20240) -> List[CheckResult]:
    """The oracle suite behind the CLI ``verify`` command."""
    return [
        check_backend_equivalence(n_circuits=200 if fast else 1000, seed=seed),
        check_two_party_truth_table(n_values=(3, 4) if fast else (3, 4, 5, 6)),
        check_multi_party_enumeration(seeds_per_case=2 if fast else 5),
        check_branch_divisibility(),
        check_coalition_posterior_flat(n_values=(4,) if fast else (4, 5, 6)),
        check_trace_posterior_exact(),
    ]
