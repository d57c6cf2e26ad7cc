"""Command-line front end: ``bellact search | verify | construct | show``.

Exit codes: 0 success or all checks passed, 1 verification failure,
2 usage error (bad flags or wrong payload kind), 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifact
from .artifact import ArtifactError
from .bell import (
    STATE_TOL,
    DichotomicObservable,
    QState,
    behavior,
    horodecki_max_chsh,
)
from .construct import (
    CONSTRUCTIONS,
    ActivationPair,
    FlagError,
    branch_value_decomposition,
    single_copy_certificate,
)
from .extend import CERTIFY_TOL, certify_extension, lhvm_from_extension, symmetrized_state
from .qmat import DimensionError
from .seesaw import MONOTONE_SLACK, SearchConfig, SearchResult, multi_restart_search

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

SCENARIO_ALIASES = {
    "chsh-asym": "chsh_asymmetric",
    "chsh-sym": "chsh_symmetric_mixture",
    "chsh-single": "chsh_single_state_measurements_only",
    "cglmp3-asym": "cglmp3_asymmetric",
}

SEARCH_DEFAULTS = {
    "scenario": "chsh_asymmetric",
    "dims": "2",
    "restarts": None,
    "seed": 0,
    "max_cycles": 500,
    "epsilon": 1e-9,
    "plateau_cycles": 20,
    "plateau_tol": 1e-7,
    "n_jobs": 1,
    "povm_tol": 1e-7,
    "schedule": "states_first",
}
DEFAULT_RESTARTS = {2: 500, 3: 2000}

log = logging.getLogger("bellact")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# verification


@dataclass
class Check:
    name: str
    deviation: float
    threshold: float
    passed: bool
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.note}" if self.note else ""
        return f"[{status}] {self.name}: deviation {self.deviation:.3e} (threshold {self.threshold:.0e}){extra}"


def _bound_check(name: str, value: float, bound: float, tol: float, note: str = "") -> Check:
    # deviation above the bound; negative values mean slack
    return Check(name, value - bound, tol, bool(value <= bound + tol), note)


def _dev_check(name: str, dev: float, tol: float, note: str = "") -> Check:
    return Check(name, float(dev), tol, bool(dev <= tol), note)


def _state_checks(name: str, s: QState, tol: float) -> list[Check]:
    return [_dev_check(f"{name}.{k}", v, tol) for k, v in s.deviations().items()]


def _meas_checks(name: str, m, tol: float) -> list[Check]:
    return [_dev_check(f"{name}.{k}", v, tol) for k, v in m.deviations().items()]


def _is_qubit_pair(s: QState) -> bool:
    return s.dims.dim_a == 2 and s.dims.dim_b == 2 and not s.dims.flag_factors()


def _chsh_locality_checks(name: str, s: QState, tol: float) -> list[Check]:
    if _is_qubit_pair(s):
        h = horodecki_max_chsh(s)
        return [_bound_check(f"{name}.horodecki_chsh<=2", h, 2.0, tol, f"value {h:.10f}")]
    if s.dims.flag_factors():
        try:
            cert = single_copy_certificate(s)
        except (DimensionError, FlagError) as exc:
            return [Check(f"{name}.flag_certificate", float("nan"), tol, False, str(exc))]
        return [
            _bound_check(
                f"{name}.leaf_chsh<=2", cert["max_leaf_chsh"], 2.0, tol, f"{len(cert['leaves'])} two-qubit leaves"
            )
        ]
    return []


def _lhvm_checks(name: str, w, seed: int, batteries: int, tol: float) -> list[Check]:
    rng = np.random.default_rng(seed)
    da, db = w.reduced.dims.dim_a, w.reduced.dims.dim_b
    worst = 0.0
    for _ in range(batteries):
        alice = [DichotomicObservable.random(da, rng) for _ in range(2)]
        bob = [DichotomicObservable.random(db, rng) for _ in range(2)]
        model = lhvm_from_extension(w, alice, bob)
        q = behavior(w.reduced, alice, bob)
        worst = max(worst, float(np.max(np.abs(model.behavior().p - q.p))))
    return [_dev_check(f"{name}.lhvm_marginals", worst, tol, f"{batteries} random batteries")]


def verify_artifact(art: artifact.Artifact, tol: float = STATE_TOL, cert_tol: float = CERTIFY_TOL, value_tol: float = 1e-10) -> list[Check]:
    obj = art.obj
    checks: list[Check] = []
    if art.kind == "state":
        checks += _state_checks("rho", obj, tol)
    elif art.kind in ("observable", "povm"):
        checks += _meas_checks(art.kind, obj, tol)
    elif art.kind == "activation_pair":
        checks += _state_checks("sigma1", obj.sigma1, tol)
        checks += _state_checks("sigma2", obj.sigma2, tol)
        for k in ("m1", "m2", "n1", "n2"):
            checks += _meas_checks(k, getattr(obj, k), tol)
        if all(c.passed for c in checks):
            v = obj.recomputed_value()
            checks.append(_dev_check("value_recomputed", abs(v - obj.value), value_tol, f"value {v:.12f}"))
            if "expected_value" in art.metadata:
                exp = float(art.metadata["expected_value"])
                checks.append(_dev_check("value_vs_expected", abs(v - exp), 1e-9, f"expected {exp:.12f}"))
            if obj.sigma1.dims.flag_factors():
                bs = branch_value_decomposition((obj.sigma1, obj.sigma2), obj.alice, obj.bob)
                recon = sum(b.weight * b.value for b in bs)
                checks.append(_dev_check("branch_reconstruction", abs(recon - v), value_tol, f"{len(bs)} branches"))
            checks += _chsh_locality_checks("sigma1", obj.sigma1, cert_tol)
            if obj.sigma2 is not obj.sigma1:
                checks += _chsh_locality_checks("sigma2", obj.sigma2, cert_tol)
    elif art.kind == "search_result":
        checks += _search_checks(obj, tol, cert_tol, value_tol)
    else:
        raise UsageError(f"cannot verify payload kind {art.kind!r}")
    return checks


def _search_checks(res: SearchResult, tol: float, cert_tol: float, value_tol: float) -> list[Check]:
    checks = _state_checks("rho1", res.rho1, tol)
    if res.rho2 is not None:
        checks += _state_checks("rho2", res.rho2, tol)
    for i, m in enumerate(res.alice):
        checks += _meas_checks(f"alice[{i}]", m, tol)
    for i, m in enumerate(res.bob):
        checks += _meas_checks(f"bob[{i}]", m, tol)
    if not all(c.passed for c in checks):
        return checks
    v = res.recomputed_value()
    checks.append(_dev_check("value_recomputed", abs(v - res.value), value_tol, f"value {v:.12f}"))
    drops = np.diff(res.trace) if len(res.trace) > 1 else np.zeros(1)
    checks.append(_dev_check("trace_monotone", max(0.0, -float(drops.min())), MONOTONE_SLACK, f"{len(res.trace)} entries"))
    for i, w in enumerate(res.witnesses):
        rep = certify_extension(w, cert_tol)
        worst = max(rep.deviations.values())
        checks.append(_dev_check(f"witness[{i}].{w.side}-extension", worst, cert_tol, ",".join(rep.failures())))
        if not rep.passed:
            continue
        target = res.rho1 if i == 0 else res.rho2
        if res.scenario == "chsh_symmetric_mixture":
            target_dev = float(np.max(np.abs(symmetrized_state(w.reduced).mat - target.mat)))
            checks.append(_dev_check(f"witness[{i}].symmetrizes_to_state", target_dev, cert_tol))
        else:
            target_dev = float(np.max(np.abs(w.reduced.mat - target.mat)))
            checks.append(_dev_check(f"witness[{i}].reduces_to_state", target_dev, cert_tol))
        checks += _lhvm_checks(f"witness[{i}]", w, seed=i, batteries=3, tol=1e-9)
    if res.scenario == "chsh_asymmetric" and res.rho2 is not None:
        checks += _chsh_locality_checks("rho1", res.rho1, cert_tol)
        checks += _chsh_locality_checks("rho2", res.rho2, cert_tol)
    return checks


# --------------------------------------------------------------------------
# show


def _fmt_spectrum(w: np.ndarray) -> str:
    return "[" + ", ".join(f"{x:.6g}" for x in w) + "]"


def show_artifact(art: artifact.Artifact) -> list[str]:
    obj = art.obj
    out = [f"kind: {art.kind}"]

    def state_lines(name: str, s: QState):
        w = s.spectrum()
        out.append(f"{name}: dims {list(s.dims.dims)} parties {''.join(s.dims.parties)}"
                   + (f" labels {list(s.dims.labels)}" if s.dims.labels else ""))
        out.append(f"  spectrum {_fmt_spectrum(w)} (sum {w.sum():.12f})")
        out.append(f"  purity {s.purity:.10f}  trace {np.trace(s.mat).real:.12f}")
        if _is_qubit_pair(s):
            out.append(f"  horodecki CHSH max {horodecki_max_chsh(s):.10f}")

    if art.kind == "state":
        state_lines("rho", obj)
    elif art.kind == "observable":
        out.append(f"observable: dim {obj.dim}, rank(+1) {int(round(np.trace(obj.proj_plus).real))}")
        out.append(f"  spectrum {_fmt_spectrum(np.linalg.eigvalsh(obj.matrix)[::-1])}")
    elif art.kind == "povm":
        out.append(f"povm: dim {obj.dim}, {obj.outcomes} outcomes")
        for i, e in enumerate(obj.elements):
            out.append(f"  element {i} spectrum {_fmt_spectrum(np.linalg.eigvalsh(e)[::-1])}")
    elif art.kind == "activation_pair":
        state_lines("sigma1", obj.sigma1)
        state_lines("sigma2", obj.sigma2)
        out.append(f"CHSH value (stored) {obj.value:.12f}  recomputed {obj.recomputed_value():.12f}")
        for k in ("construction", "expected_value", "source_value"):
            if k in art.metadata:
                out.append(f"{k}: {art.metadata[k]}")
    elif art.kind == "search_result":
        out.append(f"scenario: {obj.scenario}  seed {obj.seed}  stop {obj.stop_reason}")
        state_lines("rho1", obj.rho1)
        if obj.rho2 is not None:
            state_lines("rho2", obj.rho2)
        out.append(f"Bell value (stored) {obj.value:.12f}  recomputed {obj.recomputed_value():.12f}")
        for i, w in enumerate(obj.witnesses):
            out.append(f"witness[{i}]: {certify_extension(w)}")
        mono = all(b >= a - MONOTONE_SLACK for a, b in zip(obj.trace, obj.trace[1:]))
        out.append(f"trace ({len(obj.trace)} entries, monotone: {mono}):")
        out.append("  " + " ".join(f"{v:.10f}" for v in obj.trace))
        if obj.restart_values:
            vals = np.array(obj.restart_values)
            out.append(f"restarts: {len(vals)}  best {vals.max():.10f}  >2: {int((vals > 2 + 1e-9).sum())}")
    return out


# --------------------------------------------------------------------------
# commands


def _read(path: str) -> artifact.Artifact:
    try:
        return artifact.load(path)
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc


def _parse_dims(text) -> tuple[int, int]:
    if isinstance(text, (list, tuple)):
        parts = [int(p) for p in text]
    else:
        parts = [int(p) for p in str(text).replace("x", ",").split(",") if p.strip()]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2 or min(parts) < 1:
        raise UsageError(f"--dims expects 'd' or 'dA,dB', got {text!r}")
    return parts[0], parts[1]


def _search_settings(args) -> dict:
    settings = dict(SEARCH_DEFAULTS)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise IOError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(cfg) - set(SEARCH_DEFAULTS) - {"out", "state"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        settings.update(cfg)
    for key in list(SEARCH_DEFAULTS) + ["out", "state"]:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def cmd_search(args) -> int:
    s = _search_settings(args)
    scenario = SCENARIO_ALIASES.get(s["scenario"], s["scenario"])
    dims = _parse_dims(s["dims"])
    restarts = s["restarts"]
    if restarts is None:
        restarts = DEFAULT_RESTARTS.get(dims[0], 2000)
    state = None
    if s.get("state"):
        art = _read(s["state"])
        if art.kind != "state":
            raise UsageError(f"--state expects a state artifact, got {art.kind}")
        state = art.obj
    try:
        cfg = SearchConfig(
            scenario=scenario, dims=dims, restarts=int(restarts), seed=int(s["seed"]),
            max_cycles=int(s["max_cycles"]), epsilon=float(s["epsilon"]),
            plateau_cycles=int(s["plateau_cycles"]), plateau_tol=float(s["plateau_tol"]),
            n_jobs=int(s["n_jobs"]), state=state, povm_tol=float(s["povm_tol"]),
            schedule=str(s["schedule"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = multi_restart_search(cfg)
    meta = {"config": {k: v for k, v in vars(cfg).items() if k != "state"}, "tolerances": {"certify": CERTIFY_TOL, "state": STATE_TOL}}
    if s.get("out"):
        try:
            artifact.save(s["out"], res, meta)
        except OSError as exc:
            raise IOError(f"cannot write {s['out']}: {exc}") from exc
    vals = np.array(res.restart_values)
    print(f"scenario {scenario} dims {dims[0]}x{dims[1]} restarts {cfg.restarts} seed {cfg.seed}")
    print(f"best value {res.value:.10f} (restart seed {res.seed}, {res.cycles} cycles, {res.stop_reason})")
    print(f"restarts above 2: {int((vals > 2 + 1e-9).sum())}/{len(vals)}")
    for i, w in enumerate(res.witnesses):
        print(f"witness[{i}]: {certify_extension(w)}")
    if s.get("out"):
        print(f"wrote {s['out']}")
    return EXIT_OK


def cmd_verify(args) -> int:
    art = _read(args.path)
    checks = verify_artifact(art, tol=args.tol, cert_tol=args.cert_tol, value_tol=args.value_tol)
    passed = all(c.passed for c in checks)
    if args.format == "json":
        print(json.dumps({
            "kind": art.kind,
            "passed": passed,
            "checks": [vars(c) | {"deviation": float(c.deviation)} for c in checks],
        }, indent=1))
    else:
        print(f"verify {args.path} ({art.kind})")
        for c in checks:
            print(c.line())
        print("RESULT: " + ("PASS" if passed else "FAIL: " + ", ".join(c.name for c in checks if not c.passed)))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_construct(args) -> int:
    art = _read(args.input)
    if art.kind == "activation_pair":
        pair = art.obj
    elif art.kind == "search_result" and art.obj.scenario.startswith("chsh") and art.obj.rho2 is not None:
        pair = ActivationPair.from_search(art.obj)
    else:
        raise UsageError(f"construct needs an activation_pair or a two-state CHSH search_result, got {art.kind}")
    for name, s in (("sigma1", pair.sigma1), ("sigma2", pair.sigma2)):
        if s.violations():
            print(f"input {name} is not a valid state: {s.violations()}", file=sys.stderr)
            return EXIT_FAIL
    built = CONSTRUCTIONS[args.construction](pair)
    out_pair = built.as_pair()
    predicted = built.expected_value
    print(f"construction {built.kind}: source value {pair.value:.10f} (delta {pair.delta:.10f})")
    print(f"constructed value {out_pair.value:.10f}  predicted {predicted:.10f}  |diff| {abs(out_pair.value - predicted):.2e}")
    ratio = (out_pair.value - 2) / pair.delta if abs(pair.delta) > 1e-15 else float("nan")
    print(f"violation ratio {ratio:.12f}")
    meta = {
        "construction": built.kind,
        "expected_value": predicted,
        "source_value": pair.value,
        "violation_ratio": ratio,
    }
    if args.out:
        try:
            artifact.save(args.out, out_pair, meta)
        except OSError as exc:
            raise IOError(f"cannot write {args.out}: {exc}") from exc
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_show(args) -> int:
    art = _read(args.path)
    for line in show_artifact(art):
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bellact", description="Search, verify and construct CHSH activation examples.")
    p.add_argument("--log-level", default="WARNING", help="logging level (INFO prints one line per restart)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", help="run a multi-restart see-saw search")
    s.add_argument("--config", help="JSON file with search settings (flags override it)")
    s.add_argument("--scenario", choices=sorted(SCENARIO_ALIASES) + sorted(SCENARIO_ALIASES.values()))
    s.add_argument("--dims", help="local dimension d or 'dA,dB'")
    s.add_argument("--restarts", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--max-cycles", dest="max_cycles", type=int)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--plateau-cycles", dest="plateau_cycles", type=int)
    s.add_argument("--plateau-tol", dest="plateau_tol", type=float)
    s.add_argument("--povm-tol", dest="povm_tol", type=float)
    s.add_argument("--n-jobs", dest="n_jobs", type=int)
    s.add_argument("--schedule", choices=("states_first", "measurements_first"), help="block order within a cycle")
    s.add_argument("--state", help="state artifact for the single-state scenario")
    s.add_argument("--out", help="write the search_result artifact here")
    s.set_defaults(func=cmd_search)

    v = sub.add_parser("verify", help="check every invariant and certificate of an artifact")
    v.add_argument("path")
    v.add_argument("--tol", type=float, default=STATE_TOL, help="state/measurement invariant tolerance")
    v.add_argument("--cert-tol", type=float, default=CERTIFY_TOL, help="extension and locality tolerance")
    v.add_argument("--value-tol", type=float, default=1e-10, help="recomputed Bell value tolerance")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("construct", help="build flag constructions from an activating pair")
    c.add_argument("--construction", required=True, choices=sorted(CONSTRUCTIONS))
    c.add_argument("--in", dest="input", required=True, help="activation_pair or CHSH search_result artifact")
    c.add_argument("--out", help="write the constructed activation_pair artifact here")
    c.set_defaults(func=cmd_construct)

    sh = sub.add_parser("show", help="print a readable summary of an artifact")
    sh.add_argument("path")
    sh.set_defaults(func=cmd_show)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArtifactError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
