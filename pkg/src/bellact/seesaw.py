"""Alternating (see-saw) maximisation of Bell values.

Each block of variables, Alice's measurements, Bob's measurements or one
of the two states, is optimised in closed form with the others held fixed,
so every update can only raise the objective. Searches are repeated from
random starting points and the best restart is kept.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from . import qmat
from .bell import (
    BellFunctional,
    DichotomicObservable,
    Povm,
    QState,
    bell_operator,
    bell_value,
    cglmp3_functional,
    chsh_operator,
    product_state,
)
from .extend import (
    SymmetricExtensionWitness,
    extremal_extendible_state,
    extremal_symmetrized_state,
    random_extendible_state,
    reduce_bell_operator,
    symmetrized_state,
)
from .qmat import DimensionError

log = logging.getLogger(__name__)

SCENARIOS = (
    "chsh_asymmetric",
    "chsh_symmetric_mixture",
    "chsh_single_state_measurements_only",
    "cglmp3_asymmetric",
)
# states_first: both states are fitted to the random measurements before
# any measurement update; it escapes the value-2 fixed point far more often
SCHEDULES = ("states_first", "measurements_first")
MONOTONE_SLACK = 1e-12


# --------------------------------------------------------------------------
# measurement updates


def _ptrace_a_weighted(rho: QState, e: np.ndarray) -> np.ndarray:
    """tr_A[(E (x) 1) rho] on Bob's space."""
    da, db = rho.dims.dim_a, rho.dims.dim_b
    r = rho.mat.reshape(da, db, da, db)
    return qmat.hermitian_part(np.einsum("im,mkil->kl", e, r))


def _ptrace_b_weighted(rho: QState, f: np.ndarray) -> np.ndarray:
    """tr_B[rho (1 (x) F)] on Alice's space."""
    da, db = rho.dims.dim_a, rho.dims.dim_b
    r = rho.mat.reshape(da, db, da, db)
    return qmat.hermitian_part(np.einsum("ikjn,nk->ij", r, f))


def bob_chsh_operators(m1: DichotomicObservable, m2: DichotomicObservable, rho12: QState) -> tuple[np.ndarray, np.ndarray]:
    if m1.dim != rho12.dims.dim_a or m2.dim != rho12.dims.dim_a:
        raise DimensionError("Alice's observables do not act on the state's A space")
    return (
        _ptrace_a_weighted(rho12, m1.matrix + m2.matrix),
        _ptrace_a_weighted(rho12, m1.matrix - m2.matrix),
    )


def alice_chsh_operators(n1: DichotomicObservable, n2: DichotomicObservable, rho12: QState) -> tuple[np.ndarray, np.ndarray]:
    if n1.dim != rho12.dims.dim_b or n2.dim != rho12.dims.dim_b:
        raise DimensionError("Bob's observables do not act on the state's B space")
    return (
        _ptrace_b_weighted(rho12, n1.matrix + n2.matrix),
        _ptrace_b_weighted(rho12, n1.matrix - n2.matrix),
    )


def update_bob_observables(
    m1: DichotomicObservable, m2: DichotomicObservable, rho12: QState
) -> tuple[DichotomicObservable, DichotomicObservable]:
    """Optimal N1, N2 = sign(F1), sign(F2) for fixed Alice observables.

    The CHSH value reached is trace_norm(F1) + trace_norm(F2).
    """
    f1, f2 = bob_chsh_operators(m1, m2, rho12)
    return DichotomicObservable.from_matrix(f1), DichotomicObservable.from_matrix(f2)


def update_alice_observables(
    n1: DichotomicObservable, n2: DichotomicObservable, rho12: QState
) -> tuple[DichotomicObservable, DichotomicObservable]:
    g1, g2 = alice_chsh_operators(n1, n2, rho12)
    return DichotomicObservable.from_matrix(g1), DichotomicObservable.from_matrix(g2)


def bob_povm_operators(f: BellFunctional, alice: Sequence[Povm], rho: QState) -> list[list[np.ndarray]]:
    """G[y][b] with Bell value sum_{y,b} tr(G[y][b] F^y_b)."""
    c = f.coefficients
    oa, ob = f.outcomes
    sa, sb = f.settings
    marg = [[_ptrace_a_weighted(rho, alice[x].elements[a]) for a in range(oa)] for x in range(sa)]
    return [
        [sum(c[a, b, x, y] * marg[x][a] for x in range(sa) for a in range(oa)) for b in range(ob)]
        for y in range(sb)
    ]


def alice_povm_operators(f: BellFunctional, bob: Sequence[Povm], rho: QState) -> list[list[np.ndarray]]:
    c = f.coefficients
    oa, ob = f.outcomes
    sa, sb = f.settings
    marg = [[_ptrace_b_weighted(rho, bob[y].elements[b]) for b in range(ob)] for y in range(sb)]
    return [
        [sum(c[a, b, x, y] * marg[y][b] for y in range(sb) for b in range(ob)) for a in range(oa)]
        for x in range(sa)
    ]


# --------------------------------------------------------------------------
# POVM optimisation


class PovmSolverError(RuntimeError):
    pass


@dataclass
class PovmSolution:
    povm: Povm
    value: float
    upper_bound: float
    iterations: int
    converged: bool
    method: str

    @property
    def gap(self) -> float:
        return self.upper_bound - self.value


def _psd_part(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(qmat.hermitian_part(h))
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T


def povm_objective(f_elements: Sequence[np.ndarray], povm: Povm) -> float:
    return float(sum(np.sum(fb.T * nb).real for fb, nb in zip(f_elements, povm.elements)))


def dual_upper_bound(f_elements: Sequence[np.ndarray], y: np.ndarray) -> float:
    """tr(Y') for the smallest shift Y' = Y + t I with Y' >= F_b for all b."""
    y = qmat.hermitian_part(y)
    shift = max(np.linalg.eigvalsh(qmat.hermitian_part(fb - y))[-1] for fb in f_elements)
    return float(np.trace(y).real + shift * y.shape[0])


def _normalize_povm(ns: Sequence[np.ndarray]) -> Povm | None:
    s = qmat.hermitian_part(sum(ns))
    w, v = np.linalg.eigh(s)
    if w[0] <= 1e-14:
        return None
    s_inv_half = (v / np.sqrt(w)) @ v.conj().T
    return Povm(tuple(qmat.hermitian_part(s_inv_half @ n @ s_inv_half) for n in ns))


def projective_rounding(f_elements: Sequence[np.ndarray], extra_bases: Sequence[np.ndarray] = ()) -> Povm:
    """Best projective POVM from assigning candidate basis vectors to outcomes.

    Candidate bases are the eigenbases of every F_b (plus ``extra_bases``);
    each basis vector goes to the outcome with the largest expectation.
    """
    m = len(f_elements)
    bases = [np.linalg.eigh(qmat.hermitian_part(fb))[1] for fb in f_elements]
    bases += [np.linalg.eigh(qmat.hermitian_part(fb - fc))[1] for i, fb in enumerate(f_elements) for fc in f_elements[i + 1 :]]
    bases += list(extra_bases)
    best, best_val = None, -np.inf
    for u in bases:
        scores = np.array([np.einsum("ki,kl,li->i", u.conj(), fb, u).real for fb in f_elements])
        pick = np.argmax(scores, axis=0)
        val = float(scores[pick, np.arange(u.shape[1])].sum())
        if val > best_val:
            els = []
            for b in range(m):
                cols = u[:, pick == b]
                els.append(cols @ cols.conj().T)
            best, best_val = Povm(tuple(els)), val
    return best


def solve_povm_sdp(
    f_elements: Sequence[np.ndarray],
    tol: float = 1e-7,
    max_iter: int = 10000,
    check_every: int = 10,
) -> PovmSolution:
    """Maximise sum_b tr(F_b N_b) over POVMs {N_b} by ADMM.

    Splits the PSD cones from the completeness constraint sum_b N_b = 1.
    Termination uses a certified gap: a normalised feasible POVM gives the
    lower bound and a shifted dual matrix Y >= F_b gives the upper bound.
    """
    fs = [qmat.hermitian_part(np.asarray(fb, dtype=complex)) for fb in f_elements]
    m = len(fs)
    n = fs[0].shape[0]
    if any(fb.shape != (n, n) for fb in fs):
        raise DimensionError("all POVM objective operators must share one shape")
    eye = np.eye(n)
    scale = max(1.0, max(qmat.operator_norm(fb) for fb in fs))
    rho = scale
    start = projective_rounding(fs)
    nk = [e.copy() for e in start.elements]
    uk = [np.zeros((n, n), dtype=complex) for _ in range(m)]
    best_povm, best_val, best_ub = start, povm_objective(fs, start), np.inf
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        w = [nk[b] - uk[b] + fs[b] / rho for b in range(m)]
        corr = (sum(w) - eye) / m
        zk = [wb - corr for wb in w]
        n_prev = nk
        nk = [_psd_part(zk[b] + uk[b]) for b in range(m)]
        uk = [uk[b] + zk[b] - nk[b] for b in range(m)]
        if it % check_every == 0 or it == max_iter:
            # residual balancing; the scaled dual moves inversely with rho
            r_pri = np.sqrt(sum(np.linalg.norm(zk[b] - nk[b]) ** 2 for b in range(m)))
            r_dual = rho * np.sqrt(sum(np.linalg.norm(nk[b] - n_prev[b]) ** 2 for b in range(m)))
            if r_pri > 10 * r_dual or r_dual > 10 * r_pri:
                tau = 2.0 if r_pri > r_dual else 0.5
                rho *= tau
                uk = [u / tau for u in uk]
            cand = _normalize_povm(nk)
            if cand is not None:
                val = povm_objective(fs, cand)
                if val > best_val:
                    best_povm, best_val = cand, val
            y = sum(fs[b] - rho * uk[b] for b in range(m)) / m
            best_ub = min(best_ub, dual_upper_bound(fs, y))
            if best_ub - best_val <= tol:
                converged = True
                break
    rounding = projective_rounding(fs, [np.linalg.eigh(qmat.hermitian_part(sum(b * e for b, e in enumerate(best_povm.elements))))[1]])
    r_val = povm_objective(fs, rounding)
    method = "admm"
    if r_val >= best_val:
        best_povm, best_val, method = rounding, r_val, "rounding"
        converged = converged or best_ub - r_val <= tol
    return PovmSolution(best_povm, best_val, best_ub, it, converged, method)


def update_povms(f_elements: Sequence[np.ndarray], tol: float = 1e-7, max_iter: int = 10000) -> Povm:
    """POVM maximising sum_b tr(F_b N_b), never worse than projective rounding."""
    sol = solve_povm_sdp(f_elements, tol, max_iter)
    if not sol.converged:
        log.warning("POVM solver stopped after %d iterations with gap %.2e", sol.iterations, sol.gap)
    return sol.povm


# --------------------------------------------------------------------------
# state updates


def update_state(
    which: str,
    b_op: np.ndarray,
    other: QState,
    dims: tuple[int, int] | None = None,
    mode: str = "asymmetric",
) -> tuple[float, QState, SymmetricExtensionWitness]:
    """Best extendible rho1 (B-side) or rho2 (A-side) for a fixed operator and partner.

    In ``"symmetric"`` mode the free state ranges over swap-symmetrised
    B-side extendible states instead; the witness then certifies the
    unsymmetrised component.
    """
    if dims is None:
        dims = (other.dims.dim_a, other.dims.dim_b)
    if which == "rho1":
        b_eff = reduce_bell_operator(b_op, other, "second", dims)
        side = "B"
    elif which == "rho2":
        b_eff = reduce_bell_operator(b_op, other, "first", dims)
        side = "A"
    else:
        raise ValueError("which must be 'rho1' or 'rho2'")
    if mode == "asymmetric":
        return extremal_extendible_state(b_eff, dims, side)
    if mode == "symmetric":
        return extremal_symmetrized_state(b_eff, dims)
    raise ValueError(f"unknown mode {mode!r}")


# --------------------------------------------------------------------------
# search engine


@dataclass
class SearchConfig:
    scenario: str = "chsh_asymmetric"
    dims: tuple[int, int] = (2, 2)
    max_cycles: int = 500
    epsilon: float = 1e-9
    restarts: int = 1
    seed: int = 0
    plateau_cycles: int = 20
    plateau_tol: float = 1e-7
    n_jobs: int = 1
    state: QState | None = None
    povm_tol: float = 1e-7
    povm_max_iter: int = 10000
    schedule: str = "states_first"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; choose from {SCHEDULES}")
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) == 1:
            self.dims = (self.dims[0], self.dims[0])
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_cycles < 0:
            raise ValueError("max_cycles must be non-negative")
        if self.scenario == "chsh_symmetric_mixture" and self.dims[0] != self.dims[1]:
            raise ValueError("the symmetric mixture needs equal local dimensions")
        if self.state is not None:
            self.dims = (self.state.dims.dim_a, self.state.dims.dim_b)


@dataclass
class SearchResult:
    value: float
    scenario: str
    rho1: QState
    rho2: QState | None
    alice: tuple
    bob: tuple
    witnesses: tuple[SymmetricExtensionWitness, ...]
    trace: list[float]
    seed: int
    converged: bool
    stop_reason: str
    restart_values: list[float] = field(default_factory=list)
    restart_seeds: list[int] = field(default_factory=list)

    @property
    def cycles(self) -> int:
        return len(self.trace) - 1

    def joint_state(self) -> QState:
        return self.rho1 if self.rho2 is None else product_state(self.rho1, self.rho2)

    def bell_operator(self) -> np.ndarray:
        return _operator_for(self.scenario, self.alice, self.bob)

    def recomputed_value(self) -> float:
        return bell_value(self.bell_operator(), self.joint_state())


def _operator_for(scenario: str, alice, bob) -> np.ndarray:
    if scenario.startswith("cglmp3"):
        return bell_operator(cglmp3_functional(), alice, bob)
    return chsh_operator(alice[0], alice[1], bob[0], bob[1])


class _Run:
    """Mutable state of one restart."""

    def __init__(self, config: SearchConfig, rng: np.random.Generator):
        self.cfg = config
        self.rng = rng
        self.sc = config.scenario
        da, db = config.dims
        self.dims = (da, db)
        self.witnesses: list = [None, None]
        if self.sc == "chsh_single_state_measurements_only":
            if config.state is not None:
                self.rho1 = config.state
            else:
                self.rho1 = QState(qmat.random_density(da * db, seed=rng), qmat.DimsSpec.bipartite(da, db))
            self.rho2 = None
            self.witnesses = []
            d_alice, d_bob = da, db
        else:
            if self.sc == "chsh_symmetric_mixture":
                w1 = random_extendible_state(da, db, "B", seed=rng)
                w2 = random_extendible_state(da, db, "B", seed=rng)
                self.rho1, self.rho2 = symmetrized_state(w1.reduced), symmetrized_state(w2.reduced)
            else:
                w1 = random_extendible_state(da, db, "B", seed=rng)
                w2 = random_extendible_state(da, db, "A", seed=rng)
                self.rho1, self.rho2 = w1.reduced, w2.reduced
            self.witnesses = [w1, w2]
            d_alice, d_bob = da * da, db * db
        if self.sc == "cglmp3_asymmetric":
            self.functional = cglmp3_functional()
            oa, ob = self.functional.outcomes
            self.alice = [Povm.random_projective(d_alice, oa, rng) for _ in range(2)]
            self.bob = [Povm.random_projective(d_bob, ob, rng) for _ in range(2)]
        else:
            self.functional = None
            self.alice = [DichotomicObservable.random(d_alice, rng) for _ in range(2)]
            self.bob = [DichotomicObservable.random(d_bob, rng) for _ in range(2)]
        self.joint = self._joint()

    def _joint(self) -> QState:
        return self.rho1 if self.rho2 is None else product_state(self.rho1, self.rho2)

    def operator(self) -> np.ndarray:
        return _operator_for(self.sc, self.alice, self.bob)

    def value(self) -> float:
        return bell_value(self.operator(), self.joint)

    def steps(self):
        if self.rho2 is None:
            return [self.update_alice, self.update_bob]
        if self.cfg.schedule == "measurements_first":
            return [self.update_alice, self.update_rho1, self.update_bob, self.update_rho2]
        return [self.update_rho1, self.update_rho2, self.update_alice, self.update_bob]

    def update_alice(self, current: float) -> float:
        if self.functional is None:
            self.alice = list(update_alice_observables(self.bob[0], self.bob[1], self.joint))
            return self.value()
        return self._povm_step("alice", current)

    def update_bob(self, current: float) -> float:
        if self.functional is None:
            self.bob = list(update_bob_observables(self.alice[0], self.alice[1], self.joint))
            return self.value()
        return self._povm_step("bob", current)

    def _povm_step(self, party: str, current: float) -> float:
        ops_fn = alice_povm_operators if party == "alice" else bob_povm_operators
        meas = getattr(self, party)
        others = self.bob if party == "alice" else self.alice
        for k in range(len(meas)):
            g = ops_fn(self.functional, others, self.joint)[k]
            new = update_povms(g, self.cfg.povm_tol, self.cfg.povm_max_iter)
            trial = list(meas)
            trial[k] = new
            setattr(self, party, trial)
            val = self.value()
            # approximate SDP solutions must not undo progress
            if val < current:
                setattr(self, party, meas)
            else:
                meas, current = trial, val
        return current

    def _state_step(self, which: str, current: float) -> float:
        mode = "symmetric" if self.sc == "chsh_symmetric_mixture" else "asymmetric"
        other = self.rho2 if which == "rho1" else self.rho1
        val, rho, w = update_state(which, self.operator(), other, self.dims, mode)
        if which == "rho1":
            self.rho1, self.witnesses[0] = rho, w
        else:
            self.rho2, self.witnesses[1] = rho, w
        self.joint = self._joint()
        return self.value()

    def update_rho1(self, current: float) -> float:
        return self._state_step("rho1", current)

    def update_rho2(self, current: float) -> float:
        return self._state_step("rho2", current)


def seesaw_cycle(config: SearchConfig, seed: int | None = None) -> SearchResult:
    """One restart: cycle the block updates until the value stops improving."""
    seed = config.seed if seed is None else int(seed)
    run = _Run(config, np.random.default_rng(seed))
    value = run.value()
    trace = [value]
    converged, reason = False, "max_cycles"
    steps = run.steps()
    for _ in range(config.max_cycles):
        for step in steps:
            value = step(value)
        trace.append(value)
        if abs(trace[-1] - trace[-2]) < config.epsilon:
            converged, reason = True, "converged"
            break
        p = config.plateau_cycles
        if p and len(trace) > p and trace[-1] - trace[-1 - p] < config.plateau_tol:
            reason = "plateau"
            break
    if config.max_cycles == 0:
        reason = "max_cycles"
    return SearchResult(
        value=value,
        scenario=config.scenario,
        rho1=run.rho1,
        rho2=run.rho2,
        alice=tuple(run.alice),
        bob=tuple(run.bob),
        witnesses=tuple(run.witnesses),
        trace=trace,
        seed=seed,
        converged=converged,
        stop_reason=reason,
    )


def derive_seed(master: int, index: int) -> int:
    """Per-restart seed from (master seed, restart index)."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _run_restart(config: SearchConfig, index: int) -> SearchResult:
    res = seesaw_cycle(config, derive_seed(config.seed, index))
    log.info(
        "restart %d/%d value=%.10f cycles=%d stop=%s",
        index + 1, config.restarts, res.value, res.cycles, res.stop_reason,
    )
    return res


def multi_restart_search(config: SearchConfig) -> SearchResult:
    """Best of ``config.restarts`` independently seeded see-saw runs.

    Reproducible from the master seed; ties go to the lowest restart index,
    so the outcome does not depend on worker scheduling.
    """
    if config.n_jobs == 1:
        results = [_run_restart(config, i) for i in range(config.restarts)]
    else:
        results = Parallel(n_jobs=config.n_jobs)(delayed(_run_restart)(config, i) for i in range(config.restarts))
    values = [r.value for r in results]
    best_i = int(np.argmax(values))
    # drop the other restarts' matrices; keep their values for inspection
    return replace(results[best_i], restart_values=values, restart_seeds=[r.seed for r in results])


def measurements_only_max(
    rho: QState,
    restarts: int = 20,
    seed: int = 0,
    max_cycles: int = 2000,
    epsilon: float = 1e-13,
) -> float:
    """Lower bound on the CHSH maximum of a fixed state.

    Includes the constant-output strategy (value 2), so the result is at
    least 2 for every state.
    """
    cfg = SearchConfig(
        scenario="chsh_single_state_measurements_only",
        state=rho,
        restarts=restarts,
        seed=seed,
        max_cycles=max_cycles,
        epsilon=epsilon,
        plateau_cycles=0,
    )
    best = multi_restart_search(cfg).value
    const = DichotomicObservable.constant
    baseline = bell_value(
        chsh_operator(const(rho.dims.dim_a), const(rho.dims.dim_a), const(rho.dims.dim_b), const(rho.dims.dim_b)), rho
    )
    return max(best, baseline)
