"""Occupation-number basis of the symmetric subspace of (C^d)^{⊗N}.

Basis vectors are labelled by occupation vectors ``(n_0, ..., n_{d-1})`` with
``sum(n) == N``.  All matrices in the package use the colexicographic order on
these vectors: compare the last occupation first, smallest first.  For d=2 this
gives ``(N,0), (N-1,1), ..., (0,N)``.

Combinatorics is exact (Python integers).  Floats appear only where a
function returns a numpy array.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

# d**N cap for brute-force full-tensor embeddings
EMBED_BUDGET = 2 ** 20


class BudgetExceeded(MemoryError):
    pass


@dataclass(frozen=True, order=False)
class MultiIndex:
    """Occupation vector labelling one symmetric basis vector."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(x) for x in self.occupations)
        if len(occ) < 1:
            raise ValueError("empty occupation vector")
        if any(x < 0 for x in occ):
            raise ValueError(f"negative occupation in {occ}")
        object.__setattr__(self, "occupations", occ)

    @property
    def total(self) -> int:
        return sum(self.occupations)

    @property
    def d(self) -> int:
        return len(self.occupations)

    def __iter__(self) -> Iterator[int]:
        return iter(self.occupations)

    def __len__(self) -> int:
        return len(self.occupations)

    def __getitem__(self, i):
        return self.occupations[i]

    def shifted(self, shift: Sequence[int]) -> "MultiIndex":
        return MultiIndex(tuple(a + b for a, b in zip(self.occupations, shift)))

    def __repr__(self):
        return f"MultiIndex{self.occupations}"


def _check(N: int, d: int):
    if int(N) != N or N < 0:
        raise ValueError(f"N must be a non-negative integer, got {N}")
    if int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d}")


def sym_dim(N: int, d: int) -> int:
    """Dimension of the symmetric subspace: C(N+d-1, d-1)."""
    _check(N, d)
    return math.comb(N + d - 1, d - 1)


def _compositions(T: int, parts: int) -> int:
    # number of occupation vectors with `parts` entries summing to T
    if T < 0:
        return 0
    return math.comb(T + parts - 1, parts - 1)


@functools.lru_cache(maxsize=256)
def _enumerate(N: int, d: int) -> tuple[tuple[int, ...], ...]:
    def rec(remaining: int, slots: int):
        if slots == 1:
            yield (remaining,)
            return
        # last entry varies slowest
        for last in range(remaining + 1):
            for head in rec(remaining - last, slots - 1):
                yield head + (last,)

    return tuple(rec(N, d))


def enumerate_multi_indices(N: int, d: int) -> list[MultiIndex]:
    """All occupation vectors for (N, d), in canonical colex order."""
    _check(N, d)
    return [MultiIndex(t) for t in _enumerate(N, d)]


def occupation_table(N: int, d: int) -> np.ndarray:
    """Integer array of shape (sym_dim, d) with the canonical occupations as rows."""
    _check(N, d)
    return np.array(_enumerate(N, d), dtype=np.int64).reshape(-1, d)


@functools.lru_cache(maxsize=256)
def index_map(N: int, d: int) -> dict[tuple[int, ...], int]:
    """Lookup table occupation tuple -> rank."""
    return {t: i for i, t in enumerate(_enumerate(N, d))}


def rank(mi: MultiIndex | Sequence[int], d: int | None = None) -> int:
    """Position of ``mi`` in the canonical order (computed combinatorially)."""
    occ = tuple(mi)
    if d is None:
        d = len(occ)
    if len(occ) != d:
        raise ValueError(f"occupation vector {occ} has length {len(occ)}, expected d={d}")
    if any(x < 0 for x in occ):
        raise ValueError(f"negative occupation in {occ}")
    r = 0
    remaining = sum(occ)
    # walk from the most significant (last) entry down
    for j in range(d - 1, 0, -1):
        for v in range(occ[j]):
            r += _compositions(remaining - v, j)
        remaining -= occ[j]
    return r


def unrank(r: int, N: int, d: int) -> MultiIndex:
    """Inverse of :func:`rank`."""
    D = sym_dim(N, d)
    if not 0 <= r < D:
        raise IndexError(f"rank {r} out of range [0, {D}) for N={N}, d={d}")
    occ = [0] * d
    remaining = N
    for j in range(d - 1, 0, -1):
        v = 0
        while True:
            block = _compositions(remaining - v, j)
            if r < block:
                break
            r -= block
            v += 1
        occ[j] = v
        remaining -= v
    occ[0] = remaining
    return MultiIndex(tuple(occ))


def multinomial(mi: MultiIndex | Sequence[int]) -> int:
    """N! / (n_0! ... n_{d-1}!) as an exact integer."""
    occ = tuple(mi)
    if any(x < 0 for x in occ):
        raise ValueError(f"negative occupation in {occ}")
    out = 1
    acc = 0
    for x in occ:
        acc += x
        out *= math.comb(acc, x)
    return out


def multinomial_weights(N: int, d: int) -> np.ndarray:
    """Multinomials of the canonical basis as float64 (raises OverflowError if too large)."""
    return np.array([float(multinomial(t)) for t in _enumerate(N, d)])


def _check_budget(d: int, N: int, budget: int | None):
    limit = EMBED_BUDGET if budget is None else budget
    if d ** N > limit:
        raise BudgetExceeded(
            f"full tensor dimension d**N = {d}**{N} exceeds budget {limit}; "
            "use the symmetric-basis routines instead of the brute-force embedding"
        )


def _strings_with_occupation(occ: tuple[int, ...]) -> np.ndarray:
    """Flat indices (base-d, first factor most significant) of all strings with occupation occ."""
    d = len(occ)
    N = sum(occ)
    digits = np.array(np.unravel_index(np.arange(d ** N), (d,) * N)).T if N else np.zeros((1, 0), int)
    counts = np.stack([(digits == i).sum(axis=1) for i in range(d)], axis=1)
    return np.nonzero((counts == np.array(occ)).all(axis=1))[0]


def embed_symmetric_vector(mi: MultiIndex | Sequence[int], budget: int | None = None) -> np.ndarray:
    """Normalised symmetrised vector in the full tensor space C^{d^N}.

    Amplitude ``1/sqrt(multinomial(mi))`` on every computational string with
    occupation ``mi``.  Only meant for small brute-force checks.
    """
    occ = tuple(mi)
    d, N = len(occ), sum(occ)
    _check_budget(d, N, budget)
    out = np.zeros(d ** N, dtype=np.complex128)
    out[_strings_with_occupation(occ)] = 1 / math.sqrt(multinomial(occ))
    return out


def embedding_matrix(N: int, d: int, budget: int | None = None) -> np.ndarray:
    """Isometry (d^N x sym_dim) whose columns are the embedded canonical basis vectors."""
    _check(N, d)
    _check_budget(d, N, budget)
    if N == 0:
        return np.ones((1, 1), dtype=np.complex128)
    digits = np.array(np.unravel_index(np.arange(d ** N), (d,) * N)).T
    counts = np.stack([(digits == i).sum(axis=1) for i in range(d)], axis=1)
    lookup = index_map(N, d)
    cols = np.array([lookup[tuple(c)] for c in counts])
    weights = 1 / np.sqrt(multinomial_weights(N, d))
    out = np.zeros((d ** N, sym_dim(N, d)), dtype=np.complex128)
    out[np.arange(d ** N), cols] = weights[cols]
    return out
