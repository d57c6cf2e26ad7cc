"""JSON artifact files for states, measurements, pairs and search results.

Complex matrices are stored as row-major nested lists of ``[re, im]``
pairs. Floats are written with Python's shortest round-trip repr, so
``load(save(x))`` restores every matrix bit for bit. See
``docs/artifact_format.md`` for the schema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .bell import DichotomicObservable, Povm, QState
from .construct import ActivationPair
from .extend import SymmetricExtensionWitness
from .qmat import DimsSpec
from .seesaw import SearchResult

FORMAT_NAME = "bellact-artifact"
FORMAT_VERSION = "1.0"
KINDS = ("state", "observable", "povm", "activation_pair", "search_result")


class ArtifactError(ValueError):
    """Malformed or unsupported artifact content."""


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(data) -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ArtifactError(f"matrix entries must be [re, im] pairs: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ArtifactError(f"expected a square matrix of [re, im] pairs, got shape {arr.shape}")
    # assign parts directly: re + 1j * im would turn -0.0 imaginary parts into +0.0
    out = np.empty(arr.shape[:2], dtype=complex)
    out.real = arr[..., 0]
    out.imag = arr[..., 1]
    return out


def _enc_state(s: QState) -> dict:
    return {"dims": s.dims.to_dict(), "matrix": encode_matrix(s.mat)}


def _dec_state(d: dict) -> QState:
    # no validation: a corrupted state must still load so verify can report it
    try:
        return QState(decode_matrix(d["matrix"]), DimsSpec.from_dict(d["dims"]), validate=False)
    except KeyError as exc:
        raise ArtifactError(f"state entry lacks {exc}") from exc
    except ValueError as exc:
        raise ArtifactError(str(exc)) from exc


def _enc_obs(o: DichotomicObservable) -> dict:
    return {"proj_plus": encode_matrix(o.proj_plus)}


def _dec_obs(d: dict) -> DichotomicObservable:
    return DichotomicObservable(decode_matrix(d["proj_plus"]))


def _enc_povm(p: Povm) -> dict:
    return {"elements": [encode_matrix(e) for e in p.elements]}


def _dec_povm(d: dict) -> Povm:
    return Povm(tuple(decode_matrix(e) for e in d["elements"]))


def _enc_meas(m) -> dict:
    if isinstance(m, DichotomicObservable):
        return {"type": "observable", **_enc_obs(m)}
    return {"type": "povm", **_enc_povm(m)}


def _dec_meas(d: dict):
    if d.get("type") == "observable":
        return _dec_obs(d)
    if d.get("type") == "povm":
        return _dec_povm(d)
    raise ArtifactError(f"unknown measurement type {d.get('type')!r}")


def _enc_witness(w: SymmetricExtensionWitness) -> dict:
    return {"side": w.side, "ext": _enc_state(w.ext), "reduced": _enc_state(w.reduced)}


def _dec_witness(d: dict) -> SymmetricExtensionWitness:
    if d.get("side") not in ("A", "B"):
        raise ArtifactError(f"witness side must be 'A' or 'B', got {d.get('side')!r}")
    return SymmetricExtensionWitness(_dec_state(d["ext"]), d["side"], _dec_state(d["reduced"]))


def _clean(obj):
    """Make metadata JSON-safe (numpy scalars, tuples, non-finite floats)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class Artifact:
    kind: str
    obj: Any
    metadata: dict = field(default_factory=dict)


def to_dict(obj, metadata: dict | None = None) -> dict:
    meta = dict(metadata or {})
    out: dict[str, Any] = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    if isinstance(obj, QState):
        out.update(kind="state", dims=obj.dims.to_dict(), states={"rho": _enc_state(obj)})
    elif isinstance(obj, DichotomicObservable):
        out.update(kind="observable", dims={"dims": [obj.dim]}, observables={"o": _enc_obs(obj)})
    elif isinstance(obj, Povm):
        out.update(kind="povm", dims={"dims": [obj.dim]}, povms={"p": _enc_povm(obj)})
    elif isinstance(obj, ActivationPair):
        out.update(
            kind="activation_pair",
            dims=obj.sigma1.dims.to_dict(),
            states={"sigma1": _enc_state(obj.sigma1), "sigma2": _enc_state(obj.sigma2)},
            observables={k: _enc_obs(getattr(obj, k)) for k in ("m1", "m2", "n1", "n2")},
        )
        meta.setdefault("value", obj.value)
    elif isinstance(obj, SearchResult):
        states = {"rho1": _enc_state(obj.rho1)}
        if obj.rho2 is not None:
            states["rho2"] = _enc_state(obj.rho2)
        out.update(
            kind="search_result",
            dims=obj.rho1.dims.to_dict(),
            states=states,
            measurements={
                "alice": [_enc_meas(m) for m in obj.alice],
                "bob": [_enc_meas(m) for m in obj.bob],
            },
            witnesses=[_enc_witness(w) for w in obj.witnesses],
        )
        meta.update(
            scenario=obj.scenario,
            value=obj.value,
            trace=obj.trace,
            seed=obj.seed,
            converged=obj.converged,
            stop_reason=obj.stop_reason,
            restart_values=obj.restart_values,
            restart_seeds=obj.restart_seeds,
        )
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    out["metadata"] = _clean(meta)
    return out


def from_dict(data: dict) -> Artifact:
    if not isinstance(data, dict) or data.get("format") != FORMAT_NAME:
        raise ArtifactError("not a bellact artifact (missing format tag)")
    if str(data.get("version", "")).split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise ArtifactError(f"unsupported format version {data.get('version')!r}")
    kind = data.get("kind")
    meta = data.get("metadata", {})
    try:
        if kind == "state":
            return Artifact(kind, _dec_state(data["states"]["rho"]), meta)
        if kind == "observable":
            return Artifact(kind, _dec_obs(data["observables"]["o"]), meta)
        if kind == "povm":
            return Artifact(kind, _dec_povm(data["povms"]["p"]), meta)
        if kind == "activation_pair":
            st, ob = data["states"], data["observables"]
            pair = ActivationPair(
                _dec_state(st["sigma1"]), _dec_state(st["sigma2"]),
                *(_dec_obs(ob[k]) for k in ("m1", "m2", "n1", "n2")),
                value=float(meta["value"]),
            )
            return Artifact(kind, pair, meta)
        if kind == "search_result":
            st, ms = data["states"], data["measurements"]
            res = SearchResult(
                value=float(meta["value"]),
                scenario=meta["scenario"],
                rho1=_dec_state(st["rho1"]),
                rho2=_dec_state(st["rho2"]) if "rho2" in st else None,
                alice=tuple(_dec_meas(m) for m in ms["alice"]),
                bob=tuple(_dec_meas(m) for m in ms["bob"]),
                witnesses=tuple(_dec_witness(w) for w in data.get("witnesses", [])),
                trace=[float(v) for v in meta.get("trace", [])],
                seed=int(meta.get("seed", 0)),
                converged=bool(meta.get("converged", False)),
                stop_reason=str(meta.get("stop_reason", "")),
                restart_values=[float(v) for v in meta.get("restart_values", [])],
                restart_seeds=[int(v) for v in meta.get("restart_seeds", [])],
            )
            return Artifact(kind, res, meta)
    except KeyError as exc:
        raise ArtifactError(f"{kind} artifact lacks field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ArtifactError):
            raise
        raise ArtifactError(f"malformed {kind} artifact: {exc}") from exc
    raise ArtifactError(f"unknown payload kind {kind!r}; expected one of {KINDS}")


def dumps(obj, metadata: dict | None = None) -> str:
    return json.dumps(to_dict(obj, metadata), indent=1) + "\n"


def save(path: str | Path, obj, metadata: dict | None = None) -> None:
    Path(path).write_text(dumps(obj, metadata))


def loads(text: str) -> Artifact:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"invalid JSON: {exc}") from exc
    return from_dict(data)


def load(path: str | Path) -> Artifact:
    return loads(Path(path).read_text())
