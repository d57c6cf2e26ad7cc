"""Bell-violation activation by tensoring 2-extendible states.

Submodules: ``qmat`` (tensor algebra), ``bell`` (states, measurements,
functionals), ``extend`` (symmetric extensions and local models),
``seesaw`` (search engine), ``construct`` (flag constructions),
``artifact`` (file format) and ``cli``.
"""

from __future__ import annotations

from .bell import (
    BellFunctional,
    DichotomicObservable,
    Povm,
    QState,
    bell_value,
    cglmp3_functional,
    chsh_functional,
    chsh_operator,
    horodecki_max_chsh,
    singlet,
    werner_state,
)
from .construct import ActivationPair, combined_construction, self_activation_state, symmetric_embed
from .extend import SymmetricExtensionWitness, certify_extension, lhvm_from_extension, tensor_extension
from .qmat import DimsSpec
from .seesaw import SearchConfig, SearchResult, measurements_only_max, multi_restart_search, seesaw_cycle

__version__ = "0.1.0"

__all__ = [
    "ActivationPair",
    "BellFunctional",
    "DichotomicObservable",
    "DimsSpec",
    "Povm",
    "QState",
    "SearchConfig",
    "SearchResult",
    "SymmetricExtensionWitness",
    "bell_value",
    "certify_extension",
    "cglmp3_functional",
    "chsh_functional",
    "chsh_operator",
    "combined_construction",
    "horodecki_max_chsh",
    "lhvm_from_extension",
    "measurements_only_max",
    "multi_restart_search",
    "seesaw_cycle",
    "self_activation_state",
    "singlet",
    "symmetric_embed",
    "tensor_extension",
    "werner_state",
]
