"""Numerical optimality certificates within the set of phase-covariant channels.

A covariant Choi operator is block diagonal with respect to the characters of
W_g ⊗ V_g^*.  The character of ``|m>_M ⊗ |n>_N`` is labelled by the integer
vector ``m - n`` (cloning) or ``m + n`` (conjugation).  Trace preservation
only involves the diagonal entries of the blocks:

    for every input n:  sum over blocks containing n of r_{n,n} = 1.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    ChoiOperator,
    Direction,
    _product_characters,
    check_covariance,
    shift_parameter,
)
from .fidelity import f_clone_global, f_single
from .states import PhaseVector, n_fold_equatorial
from .symbasis import MultiIndex, _enumerate, index_map, occupation_table, sym_dim

PSD_TOL = 1e-9
TP_TOL = 1e-8


class Figure(str, enum.Enum):
    GLOBAL = "global"
    SINGLE_SITE = "single_site"


class InfeasibleStructure(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Block:
    """One character class: its label and the product basis pairs it contains."""

    label: tuple[int, ...]
    pairs: tuple[tuple[MultiIndex, MultiIndex], ...]
    rows: np.ndarray = field(repr=False)  # product-space indices
    inputs: np.ndarray = field(repr=False)  # input ranks, aligned with rows

    @property
    def size(self) -> int:
        return len(self.pairs)

    @property
    def nonnegative(self) -> bool:
        return all(x >= 0 for x in self.label)


@dataclass(frozen=True, eq=False)
class BlockStructure:
    N: int
    M: int
    d: int
    direction: Direction
    blocks: tuple[Block, ...]

    @property
    def d_in(self) -> int:
        return sym_dim(self.N, self.d)

    @property
    def d_out(self) -> int:
        return sym_dim(self.M, self.d)

    @property
    def classes(self) -> tuple[Block, ...]:
        """Blocks whose label is a genuine occupation vector (all entries >= 0)."""
        return tuple(b for b in self.blocks if b.nonnegative)

    def block_of(self, label) -> Block:
        for b in self.blocks:
            if b.label == tuple(label):
                return b
        raise KeyError(label)

    def restrict(self, labels) -> "BlockStructure":
        keep = {tuple(x) for x in labels}
        return BlockStructure(self.N, self.M, self.d, self.direction, tuple(b for b in self.blocks if b.label in keep))

    def coverage(self) -> tuple[bool, bool]:
        """(disjoint, covers the whole product basis)."""
        rows = np.concatenate([b.rows for b in self.blocks]) if self.blocks else np.array([], int)
        disjoint = len(np.unique(rows)) == len(rows)
        return disjoint, len(np.unique(rows)) == self.d_out * self.d_in

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "d": self.d,
            "direction": self.direction.value,
            "n_classes": len(self.classes),
            "blocks": [
                {
                    "label": list(b.label),
                    "nonnegative": b.nonnegative,
                    "pairs": [[list(o), list(i)] for o, i in b.pairs],
                }
                for b in self.blocks
            ],
        }


def block_decompose(N: int, M: int, d: int, direction) -> BlockStructure:
    """Partition the product basis of H_out ⊗ H_in into character classes."""
    direction = Direction.parse(direction)
    shift_parameter(N, M, d, direction)
    labels = _product_characters(N, M, d, direction)
    outs = _enumerate(M, d)
    ins = _enumerate(N, d)
    d_in = len(ins)
    groups: dict[tuple[int, ...], list[int]] = {}
    for row, lab in enumerate(labels):
        groups.setdefault(tuple(int(x) for x in lab), []).append(row)
    # genuine classes first, each group in colex order of its label
    order = sorted(groups, key=lambda lab: (min(lab) < 0, tuple(reversed(lab))))
    blocks = []
    for lab in order:
        rows = np.array(groups[lab])
        pairs = tuple((MultiIndex(outs[r // d_in]), MultiIndex(ins[r % d_in])) for r in rows)
        blocks.append(Block(lab, pairs, rows, rows % d_in))
    return BlockStructure(N, M, d, direction, tuple(blocks))


@dataclass(eq=False)
class CovariantChannel:
    structure: BlockStructure
    coefficients: list[np.ndarray]

    def choi(self) -> ChoiOperator:
        bs = self.structure
        side = bs.d_out * bs.d_in
        R = np.zeros((side, side), dtype=np.complex128)
        for blk, c in zip(bs.blocks, self.coefficients):
            R[np.ix_(blk.rows, blk.rows)] = c
        return ChoiOperator(bs.N, bs.M, bs.d, bs.direction, matrix=R)

    def input_diagonal(self) -> np.ndarray:
        """Tr_out R as a vector (it is diagonal for block-structured R)."""
        t = np.zeros(self.structure.d_in)
        for blk, c in zip(self.structure.blocks, self.coefficients):
            np.add.at(t, blk.inputs, np.real(np.diag(c)))
        return t

    def tp_defect(self) -> float:
        return float(np.abs(self.input_diagonal() - 1).max())

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(c).min() for c in self.coefficients))

    def numerical_rank(self, rel_tol: float = 1e-9) -> int:
        lam = np.concatenate([np.linalg.eigvalsh(c) for c in self.coefficients])
        return int((lam > rel_tol * lam.max()).sum())

    def value(self, A_blocks: list[np.ndarray]) -> float:
        return float(sum(np.vdot(a, c).real for a, c in zip(A_blocks, self.coefficients)))


def coefficients_from_choi(bs: BlockStructure, R: ChoiOperator) -> list[np.ndarray]:
    M = R.matrix
    return [M[np.ix_(b.rows, b.rows)].copy() for b in bs.blocks]


def reassemble(bs: BlockStructure, coefficients) -> ChoiOperator:
    return CovariantChannel(bs, list(coefficients)).choi()


def _tp_normalise(bs: BlockStructure, coeffs: list[np.ndarray]) -> list[np.ndarray]:
    t = CovariantChannel(bs, coeffs).input_diagonal()
    if np.any(t <= 0):
        missing = np.nonzero(t <= 0)[0]
        raise InfeasibleStructure(f"inputs {missing.tolist()} carry no weight; no trace-preserving channel exists")
    s = 1 / np.sqrt(t)
    return [(s[b.inputs][:, None] * c) * s[b.inputs][None, :] for b, c in zip(bs.blocks, coeffs)]


def sample_covariant_channel(bs: BlockStructure, seed=None, rank: int | None = None) -> CovariantChannel:
    """Random covariant channel: Wishart blocks, then input-wise rescaling to trace one.

    ``rank`` caps the rank of each block; ``None`` draws it uniformly per block.
    """
    rng = np.random.default_rng(seed)
    coeffs = []
    for b in bs.blocks:
        r = rank if rank is not None else int(rng.integers(1, b.size + 1))
        r = max(1, min(r, b.size))
        G = rng.normal(size=(b.size, r)) + 1j * rng.normal(size=(b.size, r))
        coeffs.append(G @ G.conj().T)
    covered = np.zeros(bs.d_in, bool)
    for b in bs.blocks:
        covered[b.inputs] = True
    if not covered.all():
        raise InfeasibleStructure(f"inputs {np.nonzero(~covered)[0].tolist()} appear in no block")
    return CovariantChannel(bs, _tp_normalise(bs, coeffs))


def _single_site_operator(M: int, d: int, psi: np.ndarray) -> np.ndarray:
    """Matrix of P_+ (|psi><psi| ⊗ I^{⊗(M-1)}) P_+ on the symmetric basis of M sites."""
    lookup = index_map(M, d)
    S = np.zeros((sym_dim(M, d),) * 2, dtype=np.complex128)
    for occ in occupation_table(M - 1, d):
        ups = []
        for i in range(d):
            up = occ.copy()
            up[i] += 1
            ups.append(lookup[tuple(int(x) for x in up)])
        w = np.sqrt(occ + 1.0) * psi
        S[np.ix_(ups, ups)] += np.outer(w, w.conj())
    return S / M


def fidelity_operator(N: int, M: int, d: int, figure) -> np.ndarray:
    """Hermitian A on H_out ⊗ H_in with figure-of-merit = Tr[A R] for covariant R.

    Both families target |psi0> at the seed, which is real, so the same A
    serves cloning and conjugation.
    """
    figure = Figure(figure)
    seed = PhaseVector.zeros(d)
    b = n_fold_equatorial(seed, N, d).amplitudes
    B = np.outer(b, b.conj()).conj()
    if figure is Figure.GLOBAL:
        a = n_fold_equatorial(seed, M, d).amplitudes
        out = np.outer(a, a.conj())
    else:
        out = _single_site_operator(M, d, np.full(d, 1 / np.sqrt(d)))
    return np.kron(out, B)


def restricted_blocks(bs: BlockStructure, A: np.ndarray) -> list[np.ndarray]:
    return [A[np.ix_(b.rows, b.rows)] for b in bs.blocks]


def target_value(N: int, M: int, d: int, direction, figure) -> float:
    if Figure(figure) is Figure.GLOBAL:
        return f_clone_global(N, M, d, direction)
    return f_single(N, M, d, direction)


@dataclass
class AscentResult:
    channel: CovariantChannel
    value: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)


def ascend_fidelity(
    bs: BlockStructure,
    figure=Figure.SINGLE_SITE,
    iters: int = 20000,
    tol: float = 1e-12,
    start: CovariantChannel | None = None,
) -> AscentResult:
    """Maximise Tr[A R] over covariant channels with the block structure ``bs``.

    Each step multiplies every block by A's block restriction on both sides
    (r -> A_b r A_b, a power step that pulls each block toward the dominant
    eigenvector of A_b), then restores trace preservation by the input-wise
    rescaling r -> D^{-1/2} r D^{-1/2}, D = Tr_out.  Iterates stay PSD and
    trace preserving, so every reported value is attained by a feasible
    channel.  With degenerate dominant eigenvectors the step keeps the
    component already present in the iterate, which makes the result
    deterministic for a fixed start.

    Stops when the value changes by less than ``tol`` between steps.
    """
    A_blocks = restricted_blocks(bs, fidelity_operator(bs.N, bs.M, bs.d, figure))
    if start is None:
        coeffs = _tp_normalise(bs, [np.eye(b.size, dtype=np.complex128) for b in bs.blocks])
    else:
        coeffs = [c.copy() for c in start.coefficients]
    ch = CovariantChannel(bs, coeffs)
    value = ch.value(A_blocks)
    best = (value, ch)
    history = [value]
    converged = False
    it = 0
    for it in range(1, iters + 1):
        stepped = [a @ c @ a for a, c in zip(A_blocks, ch.coefficients)]
        stepped = [(s + s.conj().T) / 2 for s in stepped]
        try:
            ch = CovariantChannel(bs, _tp_normalise(bs, stepped))
        except InfeasibleStructure:
            break
        new = ch.value(A_blocks)
        history.append(new)
        if new > best[0]:
            best = (new, ch)
        if abs(new - value) < tol:
            converged = True
            value = new
            break
        value = new
    return AscentResult(best[1], best[0], it, converged, history)


def is_economical(ch, tol: float = 1e-9) -> bool:
    """True iff the Choi operator has numerical rank one (eigenvalues above tol * max)."""
    if isinstance(ch, CovariantChannel):
        return ch.numerical_rank(tol) == 1
    return ch.numerical_rank(tol) == 1


@dataclass
class CertificationReport:
    N: int
    M: int
    d: int
    direction: Direction
    figure: Figure
    closed_form: float
    ascended_value: float
    samples_max: float
    economical: bool
    converged: bool

    @property
    def gap(self) -> float:
        return self.closed_form - self.ascended_value

    def as_dict(self) -> dict:
        return {
            "params": {
                "N": self.N,
                "M": self.M,
                "d": self.d,
                "direction": self.direction.value,
                "figure": self.figure.value,
            },
            "closed_form": self.closed_form,
            "ascended_value": self.ascended_value,
            "gap": self.gap,
            "samples_max": self.samples_max,
            "economical": self.economical,
            "converged": self.converged,
        }


def certify(
    N: int,
    M: int,
    d: int,
    direction,
    figure=Figure.SINGLE_SITE,
    samples: int = 1000,
    seed: int = 0,
    iters: int = 20000,
) -> CertificationReport:
    """Ascent + random sampling + rank test for one parameter point."""
    from .channels import choi_from_isometry, optimal_isometry

    direction = Direction.parse(direction)
    figure = Figure(figure)
    bs = block_decompose(N, M, d, direction)
    closed = target_value(N, M, d, direction, figure)
    res = ascend_fidelity(bs, figure, iters=iters)
    A_blocks = restricted_blocks(bs, fidelity_operator(N, M, d, figure))
    seeds = np.random.SeedSequence(seed).spawn(samples)
    best_sample = max(sample_covariant_channel(bs, s).value(A_blocks) for s in seeds) if samples else float("nan")
    R = choi_from_isometry(optimal_isometry(N, M, d, direction))
    return CertificationReport(
        N, M, d, direction, figure, closed, res.value, best_sample, is_economical(R), res.converged
    )


def covariance_of(ch: CovariantChannel, samples: int = 20, tol: float = 1e-10):
    return check_covariance(ch.choi(), ch.structure.direction, samples, tol)
