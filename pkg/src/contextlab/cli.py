"""Command-line scenarios.

Subcommands::

    verify-square   square algebra checks
    run-ks          line products, histograms and X_KS for one or all roster states
    permutations    all temporal orders of every line and the 36 combined X_KS values
    dhv             disturbance-corrected inequality on the y<->z square
    hv-bounds       classical bounds by enumeration and random model sweep
    synthesize      mapping sequences for all observables of both squares

Data records go to ``--output`` (or stdout) as CSV or JSON lines; a human
summary goes to stderr. Settings resolve as command line > ``--config``
file (YAML) > defaults, with ``CONTEXTLAB_SEED`` as the seed fallback.
Exit codes: 0 success, 1 invariant or acceptance failure, 2 bad config.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml

from contextlab import estimators as est
from contextlab.hvmodels import (
    DisturbanceModel,
    assignments_matching_signs,
    brute_force_chsh_bound,
    brute_force_ks_bound,
    quantum_line_signs,
    random_model_sweep,
)
from contextlab.observables import (
    LINES,
    PauliObservable,
    commutes,
    default_square,
    line_name,
    line_product,
    within_line_pairs,
    NotProportionalToIdentity,
)
from contextlab.qcore import QuantumState, prepare_dhv_state, state_roster
from contextlab.simkernel import NOISE_PROFILES, DetectionModel, NoiseModel, make_backend
from contextlab.synthesis import SynthesisFailed, SynthesisProblem, synthesize_mapping

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

CSV_HEADER = ("scenario", "state", "line", "order", "n", "product_mean", "product_stderr") + est.HIST_LABELS
SYNTH_HEADER = ("square", "position", "observable", "readout_qubit", "restarts_used", "residual", "sequence")
BOUNDS_HEADER = ("quantity", "value", "bound", "ok")
SQUARE_HEADER = ("square", "check", "subject", "value", "ok")

SCENARIOS = ("verify-square", "run-ks", "permutations", "dhv", "hv-bounds", "synthesize")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "run-ks"
    state: str = "psi1"
    backend: str = "circuit"
    noise_profile: str = "paper-2009"
    noise: dict = field(default_factory=dict)
    shots_per_line: int = est.DEFAULT_SHOTS
    seed: int = 0
    output: str | None = None
    format: str = "csv"
    swap: bool = False
    models: int = 10_000
    tolerance: float = 1e-6

    def validate(self) -> RunConfig:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.backend not in ("ideal", "circuit"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.noise_profile not in NOISE_PROFILES:
            raise ConfigError(f"unknown noise profile {self.noise_profile!r}; known: {', '.join(NOISE_PROFILES)}")
        if not isinstance(self.shots_per_line, int) or self.shots_per_line < 1:
            raise ConfigError("shots must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit non-negative integer")
        if self.format not in ("csv", "jsonl", "json-lines"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.models < 1:
            raise ConfigError("models must be positive")
        resolve_states(self.state)
        self.noise_model()
        return self

    def noise_model(self) -> NoiseModel:
        base = NOISE_PROFILES[self.noise_profile]
        over = dict(self.noise)
        unknown = set(over) - {"ms_gate_error", "local_gate_error", "detection"}
        if unknown:
            raise ConfigError(f"unknown noise keys {sorted(unknown)}")
        try:
            det = over.pop("detection", None)
            if det is not None:
                det = DetectionModel(**{**(base.detection.__dict__ if base.detection else {}), **det})
                over["detection"] = det
            return replace(base, **over)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad noise settings: {exc}") from exc


def resolve_states(text: str) -> list[tuple[str, QuantumState]]:
    """Roster name, ``all``, ``singlet``, ``dhv`` or comma-separated amplitudes (python complex syntax)."""
    roster = dict(state_roster())
    aliases = {"singlet": "psi1"}
    if text == "all":
        return list(roster.items())
    if text == "dhv":
        return [("dhv", prepare_dhv_state())]
    name = aliases.get(text, text)
    if name in roster:
        return [(name, roster[name])]
    if "," in text:
        try:
            amps = [complex(x.strip().replace(" ", "")) for x in text.split(",")]
            return [("inline", QuantumState.pure(amps, normalize=True))]
        except ValueError as exc:
            raise ConfigError(f"cannot parse amplitudes {text!r}: {exc}") from exc
    raise ConfigError(f"unknown state {text!r}; use a roster name (psi1..rho10), all, singlet, dhv or amplitudes")


def load_config_file(path: str) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    flat = dict(data)
    if isinstance(flat.get("noise"), dict) and "profile" in flat["noise"]:
        flat["noise"] = dict(flat["noise"])
        flat["noise_profile"] = flat["noise"].pop("profile")
    if isinstance(flat.get("output"), dict):
        out = flat.pop("output")
        flat["output"] = out.get("path")
        if "format" in out:
            flat["format"] = out["format"]
    if "shots" in flat:
        flat["shots_per_line"] = flat.pop("shots")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(flat) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return flat


def build_config(args: argparse.Namespace, env: dict | None = None) -> RunConfig:
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    if env.get("CONTEXTLAB_SEED"):
        try:
            values["seed"] = int(env["CONTEXTLAB_SEED"])
        except ValueError as exc:
            raise ConfigError(f"CONTEXTLAB_SEED is not an integer: {exc}") from exc
    if args.config:
        values.update(load_config_file(args.config))
    cli = {
        "state": args.state,
        "backend": args.backend,
        "noise_profile": args.noise_profile,
        "shots_per_line": args.shots,
        "seed": args.seed,
        "output": args.output,
        "format": args.format,
        "models": getattr(args, "models", None),
        "tolerance": getattr(args, "tolerance", None),
    }
    values.update({k: v for k, v in cli.items() if v is not None})
    if getattr(args, "swap", False):
        values["swap"] = True
    values["scenario"] = args.command
    if args.command == "dhv":
        values.setdefault("state", "dhv")
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------ output


def fmt(x: Any) -> Any:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    return x


def _json_value(x: Any) -> Any:
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.6g}")
    return x


def render(records: list[dict], header: tuple[str, ...], form: str) -> str:
    buf = io.StringIO()
    if form == "csv":
        w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n", extrasaction="raise")
        w.writeheader()
        for r in records:
            w.writerow({k: fmt(r.get(k, "")) for k in header})
    else:
        for r in records:
            buf.write(json.dumps({k: _json_value(r.get(k)) for k in header if k in r}) + "\n")
    return buf.getvalue()


def emit(records: list[dict], header: tuple[str, ...], cfg: RunConfig) -> None:
    text = render(records, header, cfg.format)
    if cfg.output:
        Path(cfg.output).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)


def say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _order_str(order: Iterable[int]) -> str:
    return "".join(str(i) for i in order)


def _line_record(scenario, state, line: est.LineResult) -> dict:
    rec = {
        "scenario": scenario,
        "state": state,
        "line": line.name,
        "order": _order_str(line.order),
        "n": line.estimate.n_runs,
        "product_mean": line.estimate.mean,
        "product_stderr": line.estimate.std_error,
    }
    for label, pat in zip(est.HIST_LABELS, est.OUTCOME_PATTERNS):
        rec[label] = line.histogram[pat]
    return rec


def _aggregate_record(scenario, state, name, order, agg) -> dict:
    return {
        "scenario": scenario,
        "state": state,
        "line": name,
        "order": order,
        "n": agg.n_runs,
        "product_mean": agg.mean,
        "product_stderr": agg.std_error,
    }


# --------------------------------------------------------------- commands


def cmd_verify_square(swap: bool = False, corrupt: tuple[int, int, str] | None = None, cfg: RunConfig | None = None) -> int:
    square = default_square("yz" if swap else "none")
    if corrupt is not None:
        i, j, label = corrupt
        square = square.replace(i, j, PauliObservable.parse(label))
    tag = "yz" if swap else "default"
    print(f"square ({tag}):\n{square}")
    records, ok = [], True
    for line, a, b in within_line_pairs(square):
        c = commutes(a, b)
        ok &= c
        records.append({"square": tag, "check": "commutes", "subject": f"{line}:{a},{b}", "value": int(c), "ok": c})
    print(f"commutation checks: {sum(r['ok'] for r in records)}/{len(records)} pass")
    expected = {("col", 3): -1}
    for kind, k in LINES:
        try:
            s = line_product(square, kind, k)
        except NotProportionalToIdentity:
            s = 0
        good = s == expected.get((kind, k), 1)
        ok &= good
        records.append({"square": tag, "check": "line_product", "subject": line_name(kind, k), "value": s, "ok": good})
        print(f"  {line_name(kind, k)} product sign: {s:+d}" if s else f"  {line_name(kind, k)} product: not +-I")
    print("square OK" if ok else "square FAILED")
    if cfg is not None and cfg.output:
        emit(records, SQUARE_HEADER, cfg)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run_ks(cfg: RunConfig) -> int:
    square = default_square("yz" if cfg.swap else "none")
    backend = make_backend(cfg.backend, cfg.noise_model())
    records, status = [], EXIT_OK
    for name, state in resolve_states(cfg.state):
        report = est.estimate_xks(state, square, cfg.shots_per_line, backend, cfg.seed)
        records += [_line_record(cfg.scenario, name, l) for l in report.lines]
        records.append(_aggregate_record(cfg.scenario, name, "X_KS", "123", report.x_ks))
        x = report.x_ks
        say(f"{name}: X_KS = {x.mean:.6g} +- {x.std_error:.3g} ({x.sigmas_above(4):.1f} sigma above 4, n={x.n_runs})")
        if cfg.backend == "ideal" and abs(x.mean - 6) > 1e-9:
            status = EXIT_FAIL
    emit(records, CSV_HEADER, cfg)
    return status


def cmd_permutations(cfg: RunConfig) -> int:
    square = default_square("yz" if cfg.swap else "none")
    backend = make_backend(cfg.backend, cfg.noise_model())
    records, status = [], EXIT_OK
    for name, state in resolve_states(cfg.state):
        sweep = est.permutation_sweep(state, square, cfg.shots_per_line, backend, cfg.seed)
        for per in sweep.table.values():
            records += [_line_record(cfg.scenario, name, l) for l in per.values()]
        for (ro, co), agg in sweep.combinations.items():
            records.append(_aggregate_record(cfg.scenario, name, "X_KS", f"R{_order_str(ro)}|C{_order_str(co)}", agg))
        vals = sweep.values
        records.append(
            {"scenario": cfg.scenario, "state": name, "line": "X_KS_mean", "order": "all", "n": sweep.total_preparations, "product_mean": sweep.mean}
        )
        say(f"{name}: 36 X_KS values from {min(vals):.4g} to {max(vals):.4g}, mean {sweep.mean:.4g} ({sweep.total_preparations} preparations)")
        if cfg.backend == "ideal" and max(abs(v - 6) for v in vals) > 1e-9:
            status = EXIT_FAIL
    emit(records, CSV_HEADER, cfg)
    return status


def cmd_dhv(cfg: RunConfig) -> int:
    square = default_square("yz")
    backend = make_backend(cfg.backend, cfg.noise_model())
    records = []
    for name, state in resolve_states(cfg.state):
        rep = est.estimate_xdhv(state, square, cfg.shots_per_line, backend, cfg.seed)
        for label, e in rep.pairs:
            records.append(_aggregate_record(cfg.scenario, name, f"<{label}>", "12", e))
        for label, e in rep.perr:
            records.append(_aggregate_record(cfg.scenario, name, f"perr[{label}]", "123", e))
        records.append(_aggregate_record(cfg.scenario, name, "X_DHV", "", rep.x_dhv))
        ks = est.estimate_xks(state, square, cfg.shots_per_line, backend, cfg.seed)
        records += [_line_record(cfg.scenario, name, l) for l in ks.lines]
        records.append(_aggregate_record(cfg.scenario, name, "X_KS", "123", ks.x_ks))
        say(f"{name}: X_DHV = {rep.x_dhv.mean:.6g} +- {rep.x_dhv.std_error:.3g}; X_KS (y<->z square) = {ks.x_ks.mean:.6g} +- {ks.x_ks.std_error:.3g}")
    emit(records, CSV_HEADER, cfg)
    return EXIT_OK


def cmd_hv_bounds(cfg: RunConfig) -> int:
    ks_max, maximizers = brute_force_ks_bound()
    contradiction = not assignments_matching_signs(quantum_line_signs())
    chsh_max, chsh_min = brute_force_chsh_bound()
    sweep_max = random_model_sweep(cfg.models, cfg.seed, include=[DisturbanceModel.deterministic()])
    rows = [
        {"quantity": "ks_noncontextual_max", "value": ks_max, "bound": 4, "ok": ks_max == 4},
        {"quantity": "ks_parity_contradiction", "value": int(contradiction), "bound": 1, "ok": contradiction},
        {"quantity": "chsh_max", "value": chsh_max, "bound": 2, "ok": chsh_max == 2},
        {"quantity": "dhv_markovian_sweep_max", "value": sweep_max, "bound": 2, "ok": sweep_max <= 2 + 1e-9},
    ]
    print(f"noncontextual KS maximum: {ks_max} ({len(maximizers)} maximizing assignments of 512)")
    print(f"assignments reproducing all quantum line signs: {'none' if contradiction else 'FOUND'}")
    print(f"CHSH-type maximum: {chsh_max} (minimum {chsh_min})")
    print(f"disturbed-HV sweep over {cfg.models} Markovian models: max {sweep_max:.12g}")
    if cfg.output:
        emit(rows, BOUNDS_HEADER, cfg)
    return EXIT_OK if all(r["ok"] for r in rows) else EXIT_FAIL


def _sequence_str(seq) -> str:
    parts = []
    for g in seq:
        kind = type(g).__name__
        if kind == "LightShift":
            parts.append(f"Uz1({g.theta:.6g})")
        elif kind == "Collective":
            parts.append(f"U({g.theta:.6g},{g.phi:.6g})")
        else:
            parts.append(f"MS({g.theta:.6g},{g.phi:.6g})")
    return " ".join(parts) if parts else "identity"


def cmd_synthesize(cfg: RunConfig) -> int:
    records, status = [], EXIT_OK
    for tag, swap in (("default", "none"), ("yz", "yz")):
        square = default_square(swap)
        for i in (1, 2, 3):
            for j in (1, 2, 3):
                a = square[i, j]
                problem = SynthesisProblem.for_target(a, tolerance=cfg.tolerance)
                try:
                    res = synthesize_mapping(problem, cfg.seed)
                    rec = {"restarts_used": res.restarts_used, "residual": res.residual, "sequence": _sequence_str(res.sequence)}
                except SynthesisFailed as exc:
                    status = EXIT_FAIL
                    rec = {"restarts_used": problem.max_restarts, "residual": math.sqrt(8 * (1 - exc.best_fidelity)), "sequence": "FAILED"}
                rec.update({"square": tag, "position": f"A{i}{j}", "observable": str(a), "readout_qubit": problem.readout_qubit})
                records.append(rec)
                say(f"{tag} A{i}{j} = {a}: {rec['sequence']} (residual {rec['residual']:.2e}, restarts {rec['restarts_used']})")
    emit(records, SYNTH_HEADER, cfg)
    return status


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--state", help="roster name (psi1..rho10), all, singlet, dhv, or amplitudes a,b,c,d")
    common.add_argument("--backend", choices=("ideal", "circuit"))
    common.add_argument("--shots", type=int, help="preparations per line or sequence")
    common.add_argument("--seed", type=int)
    common.add_argument("--noise-profile", dest="noise_profile", help=f"one of {', '.join(NOISE_PROFILES)}")
    common.add_argument("--config", help="YAML file with run settings")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "jsonl", "json-lines"))

    p = argparse.ArgumentParser(prog="contextlab", description="State-independent contextuality simulator")
    sub = p.add_subparsers(dest="command", required=True)
    vs = sub.add_parser("verify-square", parents=[common], help="check commutation and line products")
    vs.add_argument("--swap", action="store_true", help="use the square with y and z exchanged")
    vs.add_argument("--corrupt", nargs=3, metavar=("I", "J", "LABEL"), help="replace entry (I, J) by LABEL, e.g. 3 3 XX")
    for name in ("run-ks", "permutations"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--swap", action="store_true", help="use the square with y and z exchanged")
    sub.add_parser("dhv", parents=[common])
    hv = sub.add_parser("hv-bounds", parents=[common])
    hv.add_argument("--models", type=int, help="random disturbance models to sweep (default 10000)")
    sy = sub.add_parser("synthesize", parents=[common])
    sy.add_argument("--tolerance", type=float)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        say(f"config error: {exc}")
        return EXIT_CONFIG
    if args.command == "verify-square":
        corrupt = None
        if args.corrupt:
            try:
                corrupt = (int(args.corrupt[0]), int(args.corrupt[1]), args.corrupt[2])
                PauliObservable.parse(corrupt[2])
            except ValueError:
                say("config error: --corrupt needs I J LABEL")
                return EXIT_CONFIG
        return cmd_verify_square(cfg.swap, corrupt, cfg)
    return {
        "run-ks": cmd_run_ks,
        "permutations": cmd_permutations,
        "dhv": cmd_dhv,
        "hv-bounds": cmd_hv_bounds,
        "synthesize": cmd_synthesize,
    }[args.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
