"""Regenerate the golden artifact files in docs/golden/.

Run from the repository root: ``python3 scripts/make_golden.py``.
"""

from __future__ import annotations

from pathlib import Path

from bellact import artifact
from bellact.bell import DichotomicObservable, Povm, QState, singlet
from bellact.construct import ActivationPair
from bellact.qmat import DimsSpec, random_density
from bellact.seesaw import SearchConfig, multi_restart_search

OUT = Path(__file__).resolve().parent.parent / "docs" / "golden"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    artifact.save(OUT / "state.json", singlet(), {"note": "two-qubit singlet"})
    artifact.save(OUT / "observable.json", DichotomicObservable.random(2, seed=1))
    artifact.save(OUT / "povm.json", Povm.random_projective(3, 3, seed=2))
    res = multi_restart_search(SearchConfig(scenario="chsh_asymmetric", dims=(2, 2), restarts=4, seed=3, max_cycles=40))
    artifact.save(OUT / "search_result.json", res, {"config": {"restarts": 4, "seed": 3, "max_cycles": 40}})
    artifact.save(OUT / "activation_pair.json", ActivationPair.from_search(res))
    # mixed state with a non-trivial spectrum, used by the show example
    artifact.save(OUT / "mixed_state.json", QState(random_density(4, seed=4), DimsSpec.bipartite(2)))


if __name__ == "__main__":
    main()
