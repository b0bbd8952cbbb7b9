"""Batch experiment runner for the protocols and the adversary harness.

Commands
--------
notify   anonymous notification (plain, or TP-driven when tp_targets set)
share    resource sharing with the security check
compare  private comparison (two-party, multi-party, or the full pipeline)
attack   intercept-resend / entangle-resend / coalition / tp-trace games
sweep    regenerate the quantitative claim tables over parameter grids
verify   run the exhaustive oracle suite; exit 0 only if everything holds

Reproducibility: trial i runs with seed derived from (master seed, i); all
result records carry their trial seed, files are ordered by trial index,
and reruns with the same command line are byte-identical.  ``--workers``
splits the trial range; aggregation is order-independent.

Exit codes: 0 success, 1 verify failure, 2 configuration error, 3 protocol
abort in single-run mode.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import sqrt
from typing import Dict, List, Optional, Sequence

from .adversary import (
    AttackReport,
    AttackSpec,
    CSV_HEADER,
    GameSetupError,
    mount_entangle_resend,
    mount_intercept_resend,
    play_coalition_game,
    play_tp_trace_game,
)
from .engine import BackendError, EngineError
from .netsim import NetworkError, derive_seed
from .protocols import (
    ConfigError,
    ProtocolConfig,
    run_aqpc_multi,
    run_aqpc_two,
    run_full_pipeline,
    run_modified_qan,
    run_qan,
)
from .verify import run_all

SCHEMA_VERSION = 1

CSV_COLUMNS = {
    "notify": ["trial", "seed", "notified"],
    "share": ["trial", "seed", "shared", "abort_reason"],
    "compare": ["trial", "seed", "overall", "per_bit", "abort_stage"],
}


@dataclass
class ExperimentSpec:
    command: str
    config: ProtocolConfig
    attack: Optional[AttackSpec] = None
    trials: int = 1
    output_path: Optional[str] = None
    fmt: str = "json"
    workers: int = 1

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.fmt not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.config.validate()


# ----------------------------------------------------------------------
# config plumbing


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _parse_notify_requests(text: str) -> Dict[int, int]:
    requests = {}
    for pair in filter(None, (p.strip() for p in text.split(","))):
        sender, _, receiver = pair.partition(":")
        requests[int(sender)] = int(receiver)
    return requests


def _parse_secrets(text: str) -> Dict[int, str]:
    secrets = {}
    for pair in filter(None, (p.strip() for p in text.split(","))):
        party, _, bits = pair.partition("=")
        secrets[int(party)] = bits
    return secrets


def _parse_int_list(text: str) -> List[int]:
    return [int(x) for x in filter(None, (p.strip() for p in text.split(",")))]


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(ProtocolConfig)}


def build_config(ns: argparse.Namespace, file_cfg: dict) -> ProtocolConfig:
    """Config-file values first, command-line flags override."""
    unknown = set(file_cfg) - _CONFIG_FIELDS - {"attack"}
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    values = {k: v for k, v in file_cfg.items() if k in _CONFIG_FIELDS}
    if "notify_requests" in values:
        values["notify_requests"] = {
            int(k): int(v) for k, v in values["notify_requests"].items()
        }
    if "secrets" in values:
        values["secrets"] = {int(k): str(v) for k, v in values["secrets"].items()}
    if "tp_targets" in values:
        values["tp_targets"] = tuple(int(x) for x in values["tp_targets"])
    overrides = {
        "n_parties": ns.n,
        "repetitions": getattr(ns, "repetitions", None),
        "keep_count": getattr(ns, "keep", None),
        "check_rounds": getattr(ns, "checks", None),
        "secret_bits": getattr(ns, "secret_bits", None),
        "flip_probability": getattr(ns, "flip_probability", None),
        "preparer": getattr(ns, "preparer", None),
        "backend": ns.backend,
        "seed": ns.seed,
    }
    if getattr(ns, "notify", None) is not None:
        overrides["notify_requests"] = _parse_notify_requests(ns.notify)
    if getattr(ns, "tp_targets", None) is not None:
        overrides["tp_targets"] = tuple(_parse_int_list(ns.tp_targets))
    if getattr(ns, "secrets", None) is not None:
        secrets = _parse_secrets(ns.secrets)
        overrides["secrets"] = secrets
        if secrets and getattr(ns, "secret_bits", None) is None:
            overrides["secret_bits"] = len(next(iter(secrets.values())))
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "n_parties" not in values:
        raise ConfigError("n_parties is required (flag --n or config file)")
    values.setdefault("record_transcript", False)  # batch runs skip transcripts
    return ProtocolConfig(**values)


# ----------------------------------------------------------------------
# per-trial protocol records (module level so worker processes can pickle)


def _trial_config(cfg_dict: dict, trial: int) -> ProtocolConfig:
    cfg = ProtocolConfig(**cfg_dict)
    return dataclasses.replace(cfg, seed=derive_seed(cfg.seed, trial))


def _notify_record(cfg_dict: dict, trial: int) -> dict:
    cfg = _trial_config(cfg_dict, trial)
    out = run_modified_qan(cfg) if cfg.tp_targets else run_qan(cfg)
    return {
        "schema_version": SCHEMA_VERSION,
        "protocol": "modified_qan" if cfg.tp_targets else "qan",
        "trial": trial,
        "seed": cfg.seed,
        "notified": {str(k): bool(v) for k, v in sorted(out.notified.items())},
    }


def _share_record(cfg_dict: dict, trial: int) -> dict:
    cfg = _trial_config(cfg_dict, trial)
    from .protocols import run_resource_sharing

    out = run_resource_sharing(cfg)
    return {
        "schema_version": SCHEMA_VERSION,
        "protocol": "resource_sharing",
        "trial": trial,
        "seed": cfg.seed,
        "shared": out.shared,
        "abort_reason": out.abort_reason,
        "kept": len(out.registers),
    }


def _compare_record(cfg_dict: dict, trial: int, pipeline: bool) -> dict:
    cfg = _trial_config(cfg_dict, trial)
    record = {
        "schema_version": SCHEMA_VERSION,
        "trial": trial,
        "seed": cfg.seed,
        "abort_stage": None,
    }
    if pipeline:
        out = run_full_pipeline(cfg)
        record["protocol"] = "pipeline"
        record["abort_stage"] = out.abort_stage
        if out.completed:
            record["overall"] = "equal" if out.verdict.overall else "not_equal"
            record["per_bit"] = [
                "equal" if e else "not_equal" for e in out.verdict.per_bit
            ]
        else:
            record["overall"] = None
            record["per_bit"] = None
            record["abort_reason"] = out.abort_reason
        return record
    if len(cfg.secrets) == 2:
        verdict = run_aqpc_two(cfg)
        record["protocol"] = "comparison_two"
    else:
        verdict = run_aqpc_multi(cfg)
        record["protocol"] = "comparison_multi"
    record["overall"] = "equal" if verdict.overall else "not_equal"
    record["per_bit"] = ["equal" if e else "not_equal" for e in verdict.per_bit]
    return record


_TRIAL_RUNNERS = {
    "notify": _notify_record,
    "share": _share_record,
}


def _run_trial_range(command: str, cfg_dict: dict, trials: Sequence[int], **kw) -> List[dict]:
    if command == "compare":
        return [_compare_record(cfg_dict, t, kw["pipeline"]) for t in trials]
    runner = _TRIAL_RUNNERS[command]
    return [runner(cfg_dict, t) for t in trials]


def _collect_records(spec: ExperimentSpec, **kw) -> List[dict]:
    cfg_dict = dataclasses.asdict(spec.config)
    all_trials = list(range(spec.trials))
    if spec.workers == 1 or spec.trials < 4:
        return _run_trial_range(spec.command, cfg_dict, all_trials, **kw)
    chunks = [all_trials[i :: spec.workers] for i in range(spec.workers)]
    records: List[dict] = []
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        futures = [
            pool.submit(_run_trial_range, spec.command, cfg_dict, chunk, **kw)
            for chunk in chunks
            if chunk
        ]
        for fut in futures:
            records.extend(fut.result())
    records.sort(key=lambda r: r["trial"])
    return records


# ----------------------------------------------------------------------
# output writing


def _rate_ci(successes: int, trials: int) -> dict:
    rate = successes / trials if trials else 0.0
    half = 1.96 * sqrt(rate * (1 - rate) / trials) if trials else 0.0
    return {"rate": rate, "ci_low": rate - half, "ci_high": rate + half}


def _flatten_for_csv(record: dict, columns: List[str]) -> str:
    cells = []
    for col in columns:
        value = record.get(col)
        if isinstance(value, dict):
            value = ";".join(f"{k}:{int(v)}" for k, v in sorted(value.items()))
        elif isinstance(value, list):
            value = ";".join(str(v) for v in value)
        cells.append("" if value is None else str(value))
    return ",".join(cells)


def _write_records(path: Optional[str], fmt: str, command: str, records: List[dict],
                   summary: Optional[dict] = None) -> None:
    if path is None:
        return
    lines: List[str] = []
    if fmt == "json":
        lines = [json.dumps(r, sort_keys=True) for r in records]
        if summary is not None:
            lines.append(json.dumps(summary, sort_keys=True))
    else:
        columns = CSV_COLUMNS.get(command)
        if columns is None:
            lines = [CSV_HEADER] + records_csv_rows(records)
        else:
            lines = [",".join(columns)]
            lines += [_flatten_for_csv(r, columns) for r in records]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def records_csv_rows(records: List[dict]) -> List[str]:
    rows = []
    for r in records:
        params = json.dumps(r.get("params", {}), sort_keys=True).replace(",", ";")
        rows.append(
            f"{r['attack']},{params},{r['trials']},"
            f"{r['empirical_rate']:.6f},{r['chance_level']:.6f},{r['z_score']:.3f}"
        )
    return rows


# ----------------------------------------------------------------------
# commands


def cmd_notify(spec: ExperimentSpec) -> int:
    records = _collect_records(spec)
    n = spec.config.n_parties
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "summary",
        "command": "notify",
        "trials": spec.trials,
        "per_party": {},
    }
    for j in range(1, n + 1):
        hits = sum(r["notified"][str(j)] for r in records)
        summary["per_party"][str(j)] = _rate_ci(hits, spec.trials)
    _write_records(spec.output_path, spec.fmt, "notify", records, summary)
    targets = set(spec.config.notify_requests.values()) | set(spec.config.tp_targets)
    for j in sorted(targets) or range(1, n + 1):
        s = summary["per_party"][str(j)]
        print(
            f"party {j}: notified rate {s['rate']:.4f} "
            f"(95% CI {s['ci_low']:.4f}..{s['ci_high']:.4f})"
        )
    return 0


def cmd_share(spec: ExperimentSpec) -> int:
    if spec.config.check_rounds == 0:
        print("warning: check_rounds=0 disables the security check", file=sys.stderr)
    records = _collect_records(spec)
    aborts = sum(not r["shared"] for r in records)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "summary",
        "command": "share",
        "trials": spec.trials,
        "abort": _rate_ci(aborts, spec.trials),
    }
    _write_records(spec.output_path, spec.fmt, "share", records, summary)
    s = summary["abort"]
    print(
        f"abort rate {s['rate']:.4f} (95% CI {s['ci_low']:.4f}..{s['ci_high']:.4f}) "
        f"over {spec.trials} trials"
    )
    if spec.trials == 1 and aborts:
        return 3
    return 0


def cmd_compare(spec: ExperimentSpec, pipeline: bool) -> int:
    records = _collect_records(spec, pipeline=pipeline)
    equal = sum(r["overall"] == "equal" for r in records)
    aborted = sum(r.get("abort_stage") is not None for r in records)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "summary",
        "command": "compare",
        "trials": spec.trials,
        "equal": _rate_ci(equal, spec.trials),
        "aborted_trials": aborted,
    }
    _write_records(spec.output_path, spec.fmt, "compare", records, summary)
    print(
        f"verdict 'equal' in {equal}/{spec.trials} trials; {aborted} aborted"
    )
    if spec.trials == 1:
        if aborted:
            return 3
        print(f"overall verdict: {records[0]['overall']}")
    return 0


def _merge_reports(parts: List[AttackReport]) -> AttackReport:
    first = parts[0]
    trials = sum(p.trials for p in parts)
    successes = sum(p.successes for p in parts)
    detected = sum(p.detected for p in parts)
    undetected = sum(p.undetected_trials for p in parts)
    guesses = sum(p.notes.get("inference_guesses", 0) for p in parts)
    from .adversary import _z_score

    denominator = guesses if guesses else trials
    if first.detection_rate is None:
        rate = successes / trials if trials else 0.0
        z = _z_score(successes, trials, first.chance_level)
        detection = None
    else:
        rate = successes / guesses if guesses else 0.0
        z = _z_score(successes, guesses, first.chance_level)
        detection = detected / trials if trials else 0.0
    return AttackReport(
        attack=first.attack,
        params=first.params,
        trials=trials,
        successes=successes,
        empirical_rate=rate,
        chance_level=first.chance_level,
        z_score=z,
        detection_rate=detection,
        detected=detected,
        undetected_trials=undetected,
        notes={"inference_guesses": guesses} if guesses else dict(first.notes),
    )


def _run_attack(spec: ExperimentSpec, offset: int, trials: int) -> AttackReport:
    kind = spec.attack.kind
    options = spec.attack.options
    cfg = spec.config
    if kind == "intercept_resend":
        return mount_intercept_resend(
            cfg,
            fraction=options.get("fraction", 1.0),
            basis=options.get("basis", "computational"),
            trials=trials,
            trial_offset=offset,
        )
    if kind == "entangle_resend":
        return mount_entangle_resend(
            cfg,
            frame=options.get("frame", "zframe"),
            fraction=options.get("fraction", 1.0),
            trials=trials,
            trial_offset=offset,
        )
    if kind == "coalition":
        return play_coalition_game(
            cfg,
            members=options.get("members", []),
            objective=options.get("objective", "identify_notifier"),
            trials=trials,
            reveal_gates=options.get("reveal_gates", False),
            trial_offset=offset,
        )
    if kind == "tp_trace":
        return play_tp_trace_game(
            cfg,
            trials=trials,
            reveal_k=options.get("reveal_k", False),
            trial_offset=offset,
        )
    raise ConfigError(f"unknown attack {kind!r}")


def _run_attack_part(spec_dict: dict, offset: int, trials: int) -> AttackReport:
    spec = ExperimentSpec(
        command="attack",
        config=ProtocolConfig(**spec_dict["config"]),
        attack=AttackSpec(spec_dict["kind"], spec_dict["options"]),
    )
    return _run_attack(spec, offset, trials)


def cmd_attack(spec: ExperimentSpec) -> int:
    if spec.workers == 1 or spec.trials < 4:
        report = _run_attack(spec, 0, spec.trials)
    else:
        base = spec.trials // spec.workers
        sizes = [base + (i < spec.trials % spec.workers) for i in range(spec.workers)]
        offsets = [sum(sizes[:i]) for i in range(spec.workers)]
        spec_dict = {
            "config": dataclasses.asdict(spec.config),
            "kind": spec.attack.kind,
            "options": spec.attack.options,
        }
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [
                pool.submit(_run_attack_part, spec_dict, off, size)
                for off, size in zip(offsets, sizes)
                if size
            ]
            report = _merge_reports([f.result() for f in futures])
    record = json.loads(report.to_json())
    record["schema_version"] = SCHEMA_VERSION
    if spec.output_path:
        if spec.fmt == "json":
            with open(spec.output_path, "w", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        else:
            with open(spec.output_path, "w", encoding="utf-8") as fh:
                fh.write(CSV_HEADER + "\n" + report.to_csv_row() + "\n")
    if report.detection_rate is not None:
        print(
            f"{report.attack}: detection rate {report.detection_rate:.4f} "
            f"over {report.trials} trials"
        )
        if report.notes.get("inference_guesses"):
            print(
                f"secret inference on undetected runs: {report.empirical_rate:.4f} "
                f"(chance {report.chance_level})"
            )
    else:
        print(
            f"{report.attack}: success {report.empirical_rate:.4f} "
            f"(chance {report.chance_level:.4f}, z {report.z_score:+.2f}) "
            f"over {report.trials} trials"
        )
    return 0


def cmd_verify(fast: bool) -> int:
    results = run_all(fast=fast)
    failures = 0
    for res in results:
        status = "pass" if res.passed else "FAIL"
        print(f"[{status}] {res.name}: {res.detail}")
        failures += not res.passed
    return 0 if failures == 0 else 1


def cmd_sweep(spec: ExperimentSpec, grids: Sequence[str]) -> int:
    """Quantitative claim tables over standard parameter grids."""
    records: List[dict] = []
    trials = spec.trials
    seed = spec.config.seed

    if "detection" in grids:
        for s in range(1, 9):
            cfg = ProtocolConfig(
                n_parties=5, keep_count=1, check_rounds=s, backend="dense",
                seed=seed, record_transcript=False,
            )
            report = mount_intercept_resend(cfg, basis="random", trials=trials)
            records.append(
                {
                    "table": "detection",
                    "check_rounds": s,
                    "trials": trials,
                    "abort_rate": report.detection_rate,
                    "floor": 1 - 2 ** -s,
                }
            )
    if "notification" in grids:
        for p_z in (0.25, 0.5, 1.0):
            for k in (1, 5, 10):
                hits = 0
                for t in range(trials):
                    cfg = ProtocolConfig(
                        n_parties=4, repetitions=k, flip_probability=p_z,
                        notify_requests={1: 3}, seed=derive_seed(seed, t),
                        record_transcript=False,
                    )
                    hits += run_qan(cfg).notified[3]
                records.append(
                    {
                        "table": "notification",
                        "flip_probability": p_z,
                        "repetitions": k,
                        "trials": trials,
                        "rate": hits / trials,
                        "closed_form": 1 - (1 - p_z) ** k,
                    }
                )
    if "anonymity" in grids:
        for n in (4, 5, 6):
            for c in range(1, n - 1):
                for objective in ("identify_notifier", "identify_notified"):
                    cfg = ProtocolConfig(
                        n_parties=n, flip_probability=1.0, seed=seed,
                    )
                    report = play_coalition_game(
                        cfg, set(range(1, c + 1)), objective, trials=trials
                    )
                    records.append(
                        {
                            "table": "anonymity",
                            "n_parties": n,
                            "coalition_size": c,
                            "objective": objective,
                            "trials": trials,
                            "success_rate": report.empirical_rate,
                            "chance": report.chance_level,
                            "z": report.z_score,
                        }
                    )
    if "trace" in grids:
        cfg = ProtocolConfig(n_parties=4, seed=seed)
        report = play_tp_trace_game(cfg, trials=trials)
        ablation = play_tp_trace_game(cfg, trials=max(trials // 10, 1), reveal_k=True)
        records.append(
            {
                "table": "trace",
                "trials": trials,
                "success_rate": report.empirical_rate,
                "chance": 0.5,
                "ablation_success": ablation.empirical_rate,
            }
        )

    for rec in records:
        rec["schema_version"] = SCHEMA_VERSION
    if spec.output_path:
        with open(spec.output_path, "w", encoding="utf-8") as fh:
            if spec.fmt == "json":
                fh.write("\n".join(json.dumps(r, sort_keys=True) for r in records) + "\n")
            else:
                keys = sorted({k for r in records for k in r})
                fh.write(",".join(keys) + "\n")
                for r in records:
                    fh.write(",".join(str(r.get(k, "")) for k in keys) + "\n")
    for rec in records:
        print(json.dumps(rec, sort_keys=True))
    return 0


# ----------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file mirroring the run-parameter fields")
    parser.add_argument("--trials", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--backend", choices=["phase", "dense"], default=None)
    parser.add_argument("--output", default=None, help="result file path")
    parser.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--n", type=int, default=None, help="number of agents")


def _protocol_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--repetitions", type=int, default=None)
    parser.add_argument("--keep", type=int, default=None, help="registers kept after sharing")
    parser.add_argument("--checks", type=int, default=None, help="security-check rounds")
    parser.add_argument("--secret-bits", dest="secret_bits", type=int, default=None)
    parser.add_argument(
        "--flip-probability", dest="flip_probability", type=float, default=None
    )
    parser.add_argument("--preparer", type=int, default=None)
    parser.add_argument("--notify", default=None, help="sender:receiver pairs, e.g. 1:3,2:4")
    parser.add_argument("--tp-targets", dest="tp_targets", default=None, help="e.g. 2,4")
    parser.add_argument("--secrets", default=None, help="party=bits pairs, e.g. 2=0110,4=0110")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghznet",
        description="GHZ-state anonymous-protocol simulator and adversary harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("notify", "share", "compare"):
        p = sub.add_parser(name)
        _add_common(p)
        _protocol_flags(p)
    sub.choices["compare"].add_argument(
        "--pipeline", action="store_true",
        help="run sharing + notification + comparison end to end",
    )

    p_attack = sub.add_parser("attack")
    _add_common(p_attack)
    _protocol_flags(p_attack)
    p_attack.add_argument(
        "--attack",
        dest="attack_kind",
        choices=["intercept-resend", "entangle-resend", "coalition", "tp-trace"],
        default=None,
    )
    p_attack.add_argument("--fraction", type=float, default=None)
    p_attack.add_argument("--basis", choices=["computational", "random"], default=None)
    p_attack.add_argument("--frame", choices=["zframe", "random"], default=None)
    p_attack.add_argument("--members", default=None, help="coalition members, e.g. 1,2")
    p_attack.add_argument(
        "--objective",
        choices=["identify_notifier", "identify_notified", "recover_secret"],
        default=None,
    )
    p_attack.add_argument("--reveal-gates", action="store_true")
    p_attack.add_argument("--reveal-k", action="store_true")

    p_sweep = sub.add_parser("sweep")
    _add_common(p_sweep)
    p_sweep.add_argument(
        "--grid",
        default="detection,notification,anonymity,trace",
        help="comma-separated subset of detection,notification,anonymity,trace",
    )

    p_verify = sub.add_parser("verify")
    p_verify.add_argument("--fast", action="store_true")
    return parser


def _build_attack_spec(ns: argparse.Namespace, file_cfg: dict) -> AttackSpec:
    file_attack = file_cfg.get("attack", {})
    kind = (
        ns.attack_kind.replace("-", "_")
        if ns.attack_kind
        else file_attack.get("kind")
    )
    if not kind:
        raise ConfigError("attack command needs --attack or an attack entry in the config")
    options = dict(file_attack.get("options", {}))
    if ns.fraction is not None:
        options["fraction"] = ns.fraction
    if ns.basis is not None:
        options["basis"] = ns.basis
    if ns.frame is not None:
        options["frame"] = ns.frame
    if ns.members is not None:
        options["members"] = _parse_int_list(ns.members)
    if ns.objective is not None:
        options["objective"] = ns.objective
    if ns.reveal_gates:
        options["reveal_gates"] = True
    if ns.reveal_k:
        options["reveal_k"] = True
    if "members" in options:
        options["members"] = set(int(m) for m in options["members"])
    return AttackSpec(kind, options)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    ns = parser.parse_args(argv)
    try:
        if ns.command == "verify":
            return cmd_verify(ns.fast)
        file_cfg = _load_config_file(ns.config)
        if ns.seed is None:
            ns.seed = file_cfg.get("seed", 0)
        if ns.command == "sweep" and ns.n is None and "n_parties" not in file_cfg:
            ns.n = 4  # sweep grids fix their own sizes; config n is unused
        config = build_config(ns, file_cfg)
        spec = ExperimentSpec(
            command=ns.command,
            config=config,
            trials=ns.trials,
            output_path=ns.output,
            fmt=ns.fmt,
            workers=ns.workers,
        )
        if ns.command == "attack":
            spec.attack = _build_attack_spec(ns, file_cfg)
        spec.validate()
        if ns.command == "notify":
            return cmd_notify(spec)
        if ns.command == "share":
            return cmd_share(spec)
        if ns.command == "compare":
            return cmd_compare(spec, pipeline=ns.pipeline)
        if ns.command == "attack":
            return cmd_attack(spec)
        if ns.command == "sweep":
            grids = [g.strip() for g in ns.grid.split(",") if g.strip()]
            unknown = set(grids) - {"detection", "notification", "anonymity", "trace"}
            if unknown:
                raise ConfigError(f"unknown sweep grids: {sorted(unknown)}")
            return cmd_sweep(spec, grids)
        raise ConfigError(f"unknown command {ns.command!r}")
    except (
        ConfigError,
        BackendError,
        EngineError,
        GameSetupError,
        NetworkError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
