"""Dense complex matrix kernel for operators on tensor-product spaces.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128`` in
row-major (C) layout.  Tensor factors are always ordered with every Alice
(``"A"``) factor before every Bob (``"B"``) factor; :class:`DimsSpec` carries
the factor dimensions together with their party tags.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when operator shapes and factor dimensions disagree."""


class NotHermitianError(ValueError):
    """Raised when a spectral routine receives a non-Hermitian matrix."""


@dataclass(frozen=True)
class DimsSpec:
    """Factor dimensions of a tensor-product space, tagged by party.

    ``labels`` is free-form per factor; factors labelled ``"flag"`` are
    classical ancilla flags diagonal in the computational basis.
    """

    dims: tuple[int, ...]
    parties: tuple[str, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "parties", tuple(self.parties))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.dims) != len(self.parties):
            raise DimensionError("dims and parties must have equal length")
        if any(d < 1 for d in self.dims):
            raise DimensionError(f"factor dimensions must be positive, got {self.dims}")
        if any(p not in ("A", "B") for p in self.parties):
            raise DimensionError(f"party tags must be 'A' or 'B', got {self.parties}")
        if list(self.parties) != sorted(self.parties):
            raise DimensionError("A-factors must precede B-factors")
        if self.labels is not None and len(self.labels) != len(self.dims):
            raise DimensionError("labels must match dims in length")

    @classmethod
    def bipartite(cls, d_a: int, d_b: int | None = None) -> DimsSpec:
        return cls((d_a, d_a if d_b is None else d_b), ("A", "B"))

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    def factors_of(self, party: str) -> list[int]:
        return [i for i, p in enumerate(self.parties) if p == party]

    @property
    def dim_a(self) -> int:
        return int(np.prod([self.dims[i] for i in self.factors_of("A")]))

    @property
    def dim_b(self) -> int:
        return int(np.prod([self.dims[i] for i in self.factors_of("B")]))

    def label(self, i: int) -> str:
        return "" if self.labels is None else self.labels[i]

    def coarse(self) -> DimsSpec:
        """Merge all factors of each party into one."""
        return DimsSpec.bipartite(self.dim_a, self.dim_b)

    def flag_factors(self) -> list[int]:
        return [i for i in range(self.n_factors) if self.label(i) == "flag"]

    def to_dict(self) -> dict:
        out = {"dims": list(self.dims), "parties": list(self.parties)}
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> DimsSpec:
        return cls(tuple(data["dims"]), tuple(data["parties"]), data.get("labels"))


def _as_dims(dims: DimsSpec | Sequence[int]) -> tuple[int, ...]:
    if isinstance(dims, DimsSpec):
        return dims.dims
    return tuple(int(d) for d in dims)


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the operands, left factor first."""
    if not ops:
        raise ValueError("tensor needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = kron2(out, np.asarray(op, dtype=complex))
    return out


def kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Two-operand Kronecker product of matrices (cheaper than ``np.kron``)."""
    (ra, ca), (rb, cb) = a.shape, b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(ra * rb, ca * cb)


def _check_square(m: np.ndarray, dims: tuple[int, ...]) -> None:
    n = int(np.prod(dims))
    if m.ndim != 2 or m.shape != (n, n):
        raise DimensionError(f"matrix of shape {m.shape} does not match dims {dims}")


def partial_trace(m: np.ndarray, dims: DimsSpec | Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    The kept factors appear in the output in their original order.
    """
    dims = _as_dims(dims)
    m = np.asarray(m, dtype=complex)
    _check_square(m, dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {n} factors")
    t = m.reshape(dims + dims)
    idx_in = list(range(2 * n))
    for i in range(n):
        if i not in keep:
            idx_in[n + i] = i
    idx_out = keep + [n + k for k in keep]
    out = np.einsum(t, idx_in, idx_out)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.asarray(out).reshape(d_keep, d_keep)


def permute_factors(m: np.ndarray, dims: DimsSpec | Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: factor ``perm[k]`` of the input becomes factor ``k``."""
    dims = _as_dims(dims)
    m = np.asarray(m, dtype=complex)
    _check_square(m, dims)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise DimensionError(f"{perm} is not a permutation of {n} factors")
    t = m.reshape(dims + dims).transpose(perm + [n + p for p in perm])
    return t.reshape(m.shape)


def permute_vector(v: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    dims = _as_dims(dims)
    return np.asarray(v).reshape(dims).transpose(list(perm)).reshape(-1)


@lru_cache(maxsize=64)
def _swap_cached(d: int) -> np.ndarray:
    v = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            v[j * d + i, i * d + j] = 1.0
    v.setflags(write=False)
    return v


def swap_operator(d: int) -> np.ndarray:
    """Unitary on C^d (x) C^d exchanging the two factors."""
    if d < 1:
        raise DimensionError("d must be positive")
    return _swap_cached(int(d)).astype(complex)


def permutation_operator(dims: DimsSpec | Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary P with P X P^dagger == permute_factors(X, dims, perm)."""
    return _permutation_cached(_as_dims(dims), tuple(int(p) for p in perm)).copy()


@lru_cache(maxsize=256)
def _permutation_cached(dims: tuple[int, ...], perm: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(dims))
    cols = np.arange(n).reshape(dims).transpose(list(perm)).reshape(-1)
    p = np.zeros((n, n), dtype=complex)
    p[np.arange(n), cols] = 1.0
    return p


def factor_swap(dims: DimsSpec | Sequence[int], i: int, j: int) -> np.ndarray:
    """Operator swapping factors ``i`` and ``j`` (which must have equal dimension)."""
    dims = _as_dims(dims)
    if dims[i] != dims[j]:
        raise DimensionError(f"cannot swap factors of dimension {dims[i]} and {dims[j]}")
    perm = list(range(len(dims)))
    perm[i], perm[j] = perm[j], perm[i]
    return permutation_operator(dims, perm)


def hermitian_deviation(m: np.ndarray) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and hermitian_deviation(m) <= tol


def hermitian_part(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2


def _checked_hermitian(h: np.ndarray, tol: float) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {h.shape}")
    dev = hermitian_deviation(h)
    # relative slack for large-norm inputs
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if dev > tol * scale:
        raise NotHermitianError(f"matrix deviates from Hermitian by {dev:.3e}")
    return hermitian_part(h)


def herm_eig(h: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(w, v)`` with ``h @ v[:, j] == w[j] * v[:, j]``.
    """
    h = _checked_hermitian(h, tol)
    w, v = np.linalg.eigh(h)
    return w[::-1].copy(), v[:, ::-1].copy()


def herm_svd(f: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Signed spectral decomposition ``f = sum_j lam_j phi_j phi_j^dagger``.

    Values are sorted by decreasing magnitude, so ``abs(lam)`` are the
    singular values of ``f``.
    """
    w, v = herm_eig(f, tol)
    order = np.argsort(-np.abs(w), kind="stable")
    return w[order], v[:, order]


def trace_norm(f: np.ndarray) -> float:
    return float(np.sum(np.abs(herm_svd(f)[0])))


def sign_operator(f: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Projector onto the eigenspace of ``f`` with eigenvalue >= 0.

    Zero eigenvalues go to the +1 side.
    """
    w, v = herm_eig(f, tol)
    vp = v[:, w >= 0]
    return vp @ vp.conj().T


def top_eigenpair(h: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[float, np.ndarray]:
    w, v = herm_eig(h, tol)
    return float(w[0]), v[:, 0]


def min_eigenvalue(h: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(h))[0])


def operator_norm(h: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(hermitian_part(h)))))


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def basis_projector(d: int, k: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=complex)
    p[k, k] = 1.0
    return p


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(rows: int, cols: int, seed=None) -> np.ndarray:
    rng = _rng(seed)
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def haar_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix with phase fix."""
    q, r = np.linalg.qr(ginibre(d, d, seed))
    ph = np.diag(r)
    return q * (ph / np.abs(ph))


def random_pure_state(d: int, seed=None) -> np.ndarray:
    psi = ginibre(d, 1, seed).reshape(-1)
    return psi / np.linalg.norm(psi)


def random_density(d: int, rank: int | None = None, seed=None) -> np.ndarray:
    """Random density matrix G G^dagger / tr from a d x rank Ginibre matrix."""
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {rank}")
    g = ginibre(d, rank, seed)
    rho = g @ g.conj().T
    rho = hermitian_part(rho / np.trace(rho).real)
    return rho


def random_observable(d: int, seed=None) -> np.ndarray:
    """Haar-rotated +-1 diagonal, with ceil(d/2) positive signs."""
    u = haar_unitary(d, seed)
    signs = np.array([1.0] * (d - d // 2) + [-1.0] * (d // 2))
    return hermitian_part((u * signs) @ u.conj().T)
