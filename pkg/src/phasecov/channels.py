"""Optimal phase-covariant cloning / conjugation channels on symmetric subspaces.

Product spaces are ordered output ⊗ input: the row of ``|m>_M ⊗ |n>_N`` in a
Choi matrix is ``rank(m) * sym_dim(N, d) + rank(n)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import symbasis
from .states import DensityMatrix, PhaseVector, SymState, phase_diagonal
from .symbasis import index_map, occupation_table, sym_dim

# constructive identities vs accumulated-error properties
EXACT_TOL = 1e-12
DERIVED_TOL = 1e-10
GS_DEPENDENCE_TOL = 1e-8


class Direction(str, enum.Enum):
    CLONE = "clone"
    CONJUGATE = "conjugate"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class InadmissibleParameters(ValueError):
    pass


def admissible_outputs(N: int, d: int, direction, count: int = 5) -> list[int]:
    direction = Direction.parse(direction)
    if direction is Direction.CLONE:
        return [k * d + N for k in range(count)]
    return [k * d - N for k in range(N, N + count) if k * d - N >= 1]


def shift_parameter(N: int, M: int, d: int, direction) -> int:
    """The integer k with M = kd + N (clone) or M = kd - N, k >= N (conjugate)."""
    direction = Direction.parse(direction)
    if d < 2 or N < 0 or M < 0:
        raise InadmissibleParameters(f"invalid (N={N}, M={M}, d={d})")
    if direction is Direction.CLONE:
        k, rem = divmod(M - N, d)
        if M < N or rem:
            raise InadmissibleParameters(
                f"cloning needs M = kd + N; admissible M for N={N}, d={d}: "
                f"{{{', '.join(map(str, admissible_outputs(N, d, direction)))}, ...}}"
            )
    else:
        k, rem = divmod(M + N, d)
        if rem or k < N:
            raise InadmissibleParameters(
                f"conjugation needs M = kd - N with k >= N; admissible M for N={N}, d={d}: "
                f"{{{', '.join(map(str, admissible_outputs(N, d, direction)))}, ...}}"
            )
    return k


@dataclass(frozen=True, eq=False)
class Isometry:
    matrix: np.ndarray = field(repr=False)
    N: int
    M: int
    d: int
    k: int | None = None
    direction: Direction | None = None

    def __post_init__(self):
        V = np.asarray(self.matrix, dtype=np.complex128)
        expected = (sym_dim(self.M, self.d), sym_dim(self.N, self.d))
        if V.shape != expected:
            raise ValueError(f"isometry shape {V.shape}, expected {expected}")
        err = isometry_defect(V)
        if err > EXACT_TOL:
            raise ValueError(f"V^dag V deviates from identity by {err:.3g}")
        V.setflags(write=False)
        object.__setattr__(self, "matrix", V)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, x):
        """V|x> for a SymState, V rho V^dag for a DensityMatrix / array."""
        V = self.matrix
        if isinstance(x, SymState):
            return SymState(self.M, self.d, V @ x.amplitudes)
        rho = x.entries if isinstance(x, DensityMatrix) else np.asarray(x)
        return DensityMatrix(V @ rho @ V.conj().T, N=self.M, d=self.d)


def isometry_defect(V: np.ndarray) -> float:
    return float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max(initial=0.0))


def shift_isometry(N: int, M: int, d: int, shift: Sequence[int], sign: int = 1) -> np.ndarray:
    """Matrix of |n>_N -> |shift + sign*n>_M (one unit entry per column).

    Raises if an image is not a valid occupation or two inputs collide.
    """
    shift = np.asarray(shift, dtype=np.int64)
    if shift.shape != (d,) or sign not in (1, -1):
        raise ValueError("bad shift / sign")
    rows = index_map(M, d)
    V = np.zeros((sym_dim(M, d), sym_dim(N, d)), dtype=np.complex128)
    for col, occ in enumerate(occupation_table(N, d)):
        image = tuple(int(x) for x in shift + sign * occ)
        if image not in rows:
            raise InadmissibleParameters(f"image {image} of {tuple(occ)} is not an occupation with total {M}")
        V[rows[image], col] = 1.0
    if np.abs(V.sum(axis=1)).max() > 1:
        raise InadmissibleParameters("shift map is not injective")
    return V


def cloning_isometry(N: int, M: int, d: int) -> Isometry:
    """V|n_0, ..., n_{d-1}>_N = |n_0 + k, ..., n_{d-1} + k>_M for M = kd + N."""
    k = shift_parameter(N, M, d, Direction.CLONE)
    V = shift_isometry(N, M, d, [k] * d, +1)
    return Isometry(V, N, M, d, k, Direction.CLONE)


def conjugation_isometry(N: int, M: int, d: int) -> Isometry:
    """V|n_0, ..., n_{d-1}>_N = |k - n_0, ..., k - n_{d-1}>_M for M = kd - N, k >= N."""
    k = shift_parameter(N, M, d, Direction.CONJUGATE)
    V = shift_isometry(N, M, d, [k] * d, -1)
    return Isometry(V, N, M, d, k, Direction.CONJUGATE)


def optimal_isometry(N: int, M: int, d: int, direction) -> Isometry:
    if Direction.parse(direction) is Direction.CLONE:
        return cloning_isometry(N, M, d)
    return conjugation_isometry(N, M, d)


class ChoiOperator:
    """Choi operator R on H_out ⊗ H_in (symmetric subspaces).

    Stored densely, as a factor K with R = K K^dag, or both.  A factor keeps
    rank-one channels cheap when the product dimension is in the thousands.
    """

    def __init__(self, N: int, M: int, d: int, direction=None, matrix=None, factor=None):
        if matrix is None and factor is None:
            raise ValueError("need a matrix or a factor")
        self.N, self.M, self.d = N, M, d
        self.direction = None if direction is None else Direction.parse(direction)
        self.d_out, self.d_in = sym_dim(M, d), sym_dim(N, d)
        side = self.d_out * self.d_in
        self._matrix = None if matrix is None else np.asarray(matrix, dtype=np.complex128)
        self._factor = None
        if factor is not None:
            K = np.asarray(factor, dtype=np.complex128)
            self._factor = K.reshape(side, -1)
        if self._matrix is not None and self._matrix.shape != (side, side):
            raise ValueError(f"Choi matrix shape {self._matrix.shape}, expected {(side, side)}")

    @property
    def side(self) -> int:
        return self.d_out * self.d_in

    @property
    def factor(self) -> np.ndarray | None:
        return self._factor

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            K = self._factor
            self._matrix = K @ K.conj().T
        return self._matrix

    def has_dense(self) -> bool:
        return self._matrix is not None

    def blocks4(self) -> np.ndarray:
        """Dense R reshaped to (out, in, out, in)."""
        return self.matrix.reshape(self.d_out, self.d_in, self.d_out, self.d_in)

    def partial_trace_out(self) -> np.ndarray:
        if self._factor is not None and self._matrix is None:
            K = self._factor.reshape(self.d_out, self.d_in, -1)
            return np.einsum("man,mbn->ab", K, K.conj())
        return np.einsum("mamb->ab", self.blocks4())

    def tp_defect(self) -> float:
        return float(np.abs(self.partial_trace_out() - np.eye(self.d_in)).max())

    def eigenvalues(self) -> np.ndarray:
        if self._factor is not None and self._matrix is None:
            # nonzero spectrum of K K^dag equals that of K^dag K
            K = self._factor
            small = np.linalg.eigvalsh(K.conj().T @ K)
            return np.sort(np.concatenate([small, np.zeros(max(self.side - small.size, 0))]))
        R = self.matrix
        return np.linalg.eigvalsh((R + R.conj().T) / 2)

    def hermiticity_defect(self) -> float:
        if self._factor is not None and self._matrix is None:
            return 0.0
        R = self.matrix
        return float(np.abs(R - R.conj().T).max())

    def numerical_rank(self, rel_tol: float = 1e-9) -> int:
        lam = self.eigenvalues()
        top = lam.max()
        if top <= 0:
            return 0
        return int((lam > rel_tol * top).sum())

    def perturbed(self, eps: float, rng: np.random.Generator | None = None) -> "ChoiOperator":
        """Copy with a Hermitian eps-perturbation on one entry pair that breaks covariance."""
        R = self.matrix.copy()
        a, b = _off_block_pair(self.N, self.M, self.d, self.direction or Direction.CLONE)
        R[a, b] += eps
        R[b, a] += eps
        return ChoiOperator(self.N, self.M, self.d, self.direction, matrix=R)

    def __repr__(self):
        kind = "factor" if self._factor is not None else "dense"
        return f"ChoiOperator(N={self.N}, M={self.M}, d={self.d}, direction={self.direction}, {kind})"


def _product_characters(N: int, M: int, d: int, direction) -> np.ndarray:
    """Integer character label of each product basis vector |m>|n> (d-vector)."""
    out_occ = occupation_table(M, d)[:, None, :]
    in_occ = occupation_table(N, d)[None, :, :]
    if Direction.parse(direction) is Direction.CLONE:
        lab = out_occ - in_occ
    else:
        lab = out_occ + in_occ
    return lab.reshape(-1, d)


def _off_block_pair(N: int, M: int, d: int, direction) -> tuple[int, int]:
    labels = _product_characters(N, M, d, direction)
    first = labels[0]
    for b in range(1, labels.shape[0]):
        if not np.array_equal(labels[b], first):
            return 0, b
    raise ValueError("all product vectors share one character; cannot break covariance")


def choi_from_isometry(V: Isometry, dense: bool | None = None) -> ChoiOperator:
    """R = |r><r| with |r> = sum_n V|n> ⊗ |n>.

    In output-major ordering the vector |r> is simply V flattened row by row.
    """
    r = V.matrix.reshape(-1, 1)
    side = r.shape[0]
    if dense is None:
        dense = side <= 2048
    R = ChoiOperator(V.N, V.M, V.d, V.direction, factor=r)
    if dense:
        _ = R.matrix
    return R


def identity_choi(N: int, d: int) -> ChoiOperator:
    V = Isometry(np.eye(sym_dim(N, d)), N, N, d, 0, Direction.CLONE)
    return choi_from_isometry(V)


def apply_channel(R: ChoiOperator, rho_in, validate: bool = True):
    """M(rho) = Tr_in[(I ⊗ rho^*) R].

    Returns a DensityMatrix, or the raw output array when ``validate`` is
    False (useful for operators that are not exactly CPTP).
    """
    rho = rho_in.entries if isinstance(rho_in, DensityMatrix) else rho_in
    if isinstance(rho_in, SymState):
        rho = rho_in.projector()
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (R.d_in, R.d_in):
        raise ValueError(f"input has shape {rho.shape}, channel expects {(R.d_in, R.d_in)}")
    if R.has_dense():
        out = np.einsum("ac,mcna->mn", rho.conj(), R.blocks4())
    else:
        out = np.zeros((R.d_out, R.d_out), dtype=np.complex128)
        for col in R.factor.T:
            X = col.reshape(R.d_out, R.d_in)
            out += X @ rho.conj().T @ X.conj().T
    if not validate:
        return out
    return DensityMatrix(out, N=R.M, d=R.d)


@dataclass
class CovarianceReport:
    direction: Direction
    samples: int
    tol: float
    max_norm: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "direction": self.direction.value,
            "samples": self.samples,
            "tol": self.tol,
            "max_norm": self.max_norm,
            "passed": self.passed,
        }


def group_diagonal(pv: PhaseVector, N: int, M: int, d: int, direction) -> np.ndarray:
    """Diagonal of W_g ⊗ V_g^* on H_out ⊗ H_in.

    Clone: W = U^{⊗M}; conjugate: W = (U^*)^{⊗M}.  V = U^{⊗N} in both cases.
    """
    w = phase_diagonal(pv, M, d)
    if Direction.parse(direction) is Direction.CONJUGATE:
        w = w.conj()
    v = phase_diagonal(pv, N, d).conj()
    return np.kron(w, v)


def commutator_norm(R: ChoiOperator, g: np.ndarray) -> float:
    """Frobenius norm of [R, diag(g)]."""
    if R.has_dense():
        M = R.matrix
        return float(np.linalg.norm(M * (g[None, :] - g[:, None])))
    # R = K K^dag: [R, G] = A B^dag with A = [K, -G K], B = [G^dag K, K]
    K = R.factor
    A = np.hstack([K, -(g[:, None] * K)])
    B = np.hstack([g.conj()[:, None] * K, K])
    _, ra = np.linalg.qr(A)
    _, rb = np.linalg.qr(B)
    return float(np.linalg.norm(ra @ rb.conj().T))


def check_covariance(
    R: ChoiOperator,
    direction=None,
    samples: int = 50,
    tol: float = DERIVED_TOL,
    rng: np.random.Generator | int | None = 0,
) -> CovarianceReport:
    """Max commutator norm of R with the torus representation over random phases."""
    direction = Direction.parse(direction if direction is not None else R.direction)
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(samples):
        pv = PhaseVector.random(R.d, rng)
        g = group_diagonal(pv, R.N, R.M, R.d, direction)
        worst = max(worst, commutator_norm(R, g))
    return CovarianceReport(direction, samples, tol, worst, worst < tol)


@dataclass(frozen=True, eq=False)
class UnitaryCompletion:
    """Unitary U on H_out whose columns ``input_columns`` reproduce V.

    With ancilla state |a> = |0>, input basis vector n enters U at column
    ``input_columns[n]``.
    """

    unitary: np.ndarray = field(repr=False)
    input_columns: tuple[int, ...]
    ancilla_index: int = 0

    def isometry_part(self) -> np.ndarray:
        return self.unitary[:, list(self.input_columns)]

    def embed_input(self, x: np.ndarray) -> np.ndarray:
        """Input amplitudes placed on the designated columns (input ⊗ |a>)."""
        full = np.zeros(self.unitary.shape[0], dtype=np.complex128)
        full[list(self.input_columns)] = x
        return full


def gram_schmidt_complete(V: np.ndarray, tol: float = GS_DEPENDENCE_TOL) -> np.ndarray:
    """Extend the orthonormal columns of V to a unitary.

    Candidates are canonical basis vectors taken in order; a candidate whose
    residual norm is below ``tol`` is skipped.  Two projection passes keep the
    result orthonormal to ~1e-15.
    """
    D, c = V.shape
    Q = np.zeros((D, D), dtype=np.complex128)
    Q[:, :c] = V
    filled = c
    for cand in range(D):
        if filled == D:
            break
        v = np.zeros(D, dtype=np.complex128)
        v[cand] = 1.0
        basis = Q[:, :filled]
        for _ in range(2):
            v = v - basis @ (basis.conj().T @ v)
        nrm = np.linalg.norm(v)
        if nrm < tol:
            continue
        Q[:, filled] = v / nrm
        filled += 1
    if filled != D:
        raise RuntimeError("Gram-Schmidt completion failed to span the space")
    return Q


def economical_completion(V: Isometry) -> UnitaryCompletion:
    U = gram_schmidt_complete(V.matrix)
    return UnitaryCompletion(U, tuple(range(V.shape[1])), 0)


def _single_site_tables(M: int, d: int):
    """For every (M-1)-occupation mbar: rows rank(mbar + e_i) and weights sqrt(mbar_i + 1)."""
    bar = occupation_table(M - 1, d)
    lookup = index_map(M, d)
    idx = np.empty_like(bar)
    for r, occ in enumerate(bar):
        for i in range(d):
            up = occ.copy()
            up[i] += 1
            idx[r, i] = lookup[tuple(int(x) for x in up)]
    return idx, np.sqrt(bar + 1.0)


def reduced_single_site(x, M: int | None = None, d: int | None = None) -> DensityMatrix:
    """One-site marginal of a state supported on the symmetric subspace of M qudits.

    <i|rho_1|j> = (1/M) sum_{mbar} sqrt((mbar_i + 1)(mbar_j + 1)) <mbar+e_i|rho|mbar+e_j>,
    the sum running over occupations with total M-1.
    """
    if isinstance(x, SymState):
        M, d = x.N, x.d
    elif isinstance(x, DensityMatrix) and x.N is not None:
        M, d = x.N, x.d
    if M is None or d is None:
        raise ValueError("M and d are required for raw arrays")
    if M < 1:
        raise ValueError("need at least one site")
    idx, w = _single_site_tables(M, d)
    if isinstance(x, SymState) or (isinstance(x, np.ndarray) and x.ndim == 1):
        psi = x.amplitudes if isinstance(x, SymState) else np.asarray(x)
        Y = w * psi[idx]
        rho1 = Y.T @ Y.conj() / M
    else:
        rho = x.entries if isinstance(x, DensityMatrix) else np.asarray(x)
        rho1 = np.empty((d, d), dtype=np.complex128)
        for i in range(d):
            for j in range(d):
                rho1[i, j] = np.sum(w[:, i] * w[:, j] * rho[idx[:, i], idx[:, j]]) / M
    return DensityMatrix(rho1)


def reduced_single_site_tensor(x, M: int | None = None, d: int | None = None, budget: int | None = None) -> DensityMatrix:
    """Oracle for :func:`reduced_single_site`: embed in (C^d)^{⊗M} and trace out M-1 sites."""
    if isinstance(x, SymState):
        M, d = x.N, x.d
    elif isinstance(x, DensityMatrix) and x.N is not None:
        M, d = x.N, x.d
    E = symbasis.embedding_matrix(M, d, budget)
    rest = d ** (M - 1)
    if isinstance(x, SymState) or (isinstance(x, np.ndarray) and x.ndim == 1):
        psi = x.amplitudes if isinstance(x, SymState) else np.asarray(x)
        T = (E @ psi).reshape(d, rest)
        return DensityMatrix(T @ T.conj().T)
    rho = x.entries if isinstance(x, DensityMatrix) else np.asarray(x)
    full = (E @ rho @ E.conj().T).reshape(d, rest, d, rest)
    return DensityMatrix(np.einsum("iaja->ij", full))


def isotropic(eta: float, target: SymState) -> np.ndarray:
    d = target.dim
    return eta * target.projector() + (1 - eta) * np.eye(d) / d


def shrink_factor(rho1: DensityMatrix, target: SymState) -> tuple[float, float]:
    """Shrinking factor eta = (dF - 1)/(d - 1) and the Frobenius residual of the isotropic fit."""
    d = target.dim
    F = float(np.vdot(target.amplitudes, rho1.entries @ target.amplitudes).real)
    eta = (d * F - 1) / (d - 1)
    residual = float(np.linalg.norm(rho1.entries - isotropic(eta, target)))
    return eta, residual


def channel_output_state(V: Isometry, pv: PhaseVector) -> SymState:
    """V |psi(pv)>^{⊗N}."""
    from .states import n_fold_equatorial

    return V.apply(n_fold_equatorial(pv, V.N, V.d))


def output_dimension(N: int, M: int, d: int) -> int:
    return sym_dim(M, d) * sym_dim(N, d)

