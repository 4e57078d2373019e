"""Equatorial states, phase rotations and their symmetric-subspace forms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .symbasis import multinomial_weights, occupation_table, sym_dim

TWO_PI = 2 * np.pi
STATE_TOL = 1e-10


def _reduce(phases) -> tuple[float, ...]:
    arr = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    arr = np.where(arr >= TWO_PI, 0.0, arr)
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class PhaseVector:
    """Relative phases (phi_1, ..., phi_{d-1}) of an equatorial state; phi_0 = 0 is implicit."""

    phases: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", _reduce(np.atleast_1d(self.phases)))

    @property
    def d(self) -> int:
        return len(self.phases) + 1

    @classmethod
    def zeros(cls, d: int) -> "PhaseVector":
        return cls(tuple([0.0] * (d - 1)))

    @classmethod
    def random(cls, d: int, rng: np.random.Generator | None = None) -> "PhaseVector":
        rng = np.random.default_rng() if rng is None else rng
        return cls(tuple(rng.uniform(0, TWO_PI, size=d - 1)))

    def full(self) -> np.ndarray:
        """Length-d array (0, phi_1, ..., phi_{d-1})."""
        return np.concatenate([[0.0], self.phases])

    def __add__(self, other: "PhaseVector") -> "PhaseVector":
        return PhaseVector(tuple(a + b for a, b in zip(self.phases, other.phases)))


@dataclass(frozen=True, eq=False)
class SymState:
    """Pure state of N qudits in the symmetric subspace, canonical basis order."""

    N: int
    d: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amp.shape[0] != sym_dim(self.N, self.d):
            raise ValueError(f"expected {sym_dim(self.N, self.d)} amplitudes, got {amp.shape[0]}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1) > STATE_TOL:
            raise ValueError(f"state not normalised (norm={norm})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.projector(), N=self.N, d=self.d)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density matrix.  (N, d) metadata is optional and only informational."""

    entries: np.ndarray = field(repr=False)
    N: int | None = None
    d: int | None = None
    tol: float = field(default=STATE_TOL, repr=False)

    def __post_init__(self):
        rho = np.array(self.entries, dtype=np.complex128)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        herm = np.abs(rho - rho.conj().T).max(initial=0.0)
        if herm > self.tol:
            raise ValueError(f"not Hermitian (deviation {herm:.3g})")
        tr = np.trace(rho).real
        if abs(tr - 1) > self.tol:
            raise ValueError(f"trace {tr} != 1")
        rho = (rho + rho.conj().T) / 2
        lam = np.linalg.eigvalsh(rho).min()
        if lam < -self.tol:
            raise ValueError(f"negative eigenvalue {lam:.3g}")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)


def equatorial_state(pv: PhaseVector, d: int | None = None) -> SymState:
    """Single-copy equatorial state (1, e^{i phi_1}, ..., e^{i phi_{d-1}}) / sqrt(d)."""
    d = pv.d if d is None else d
    if pv.d != d:
        raise ValueError(f"phase vector has {pv.d - 1} phases, expected {d - 1}")
    return SymState(1, d, np.exp(1j * pv.full()) / math.sqrt(d))


def n_fold_equatorial(pv: PhaseVector, N: int, d: int | None = None) -> SymState:
    """|psi(pv)>^{⊗N} expanded on the symmetric basis.

    Amplitude on occupation n is sqrt(multinomial(n)) / d^{N/2} * exp(i n.phi).
    """
    d = pv.d if d is None else d
    if pv.d != d:
        raise ValueError(f"phase vector has {pv.d - 1} phases, expected {d - 1}")
    if N < 1:
        raise ValueError("N must be >= 1")
    occ = occupation_table(N, d)
    amp = np.sqrt(multinomial_weights(N, d) / float(d) ** N) * np.exp(1j * (occ @ pv.full()))
    return SymState(N, d, amp)


def phase_unitary_sym(pv: PhaseVector, N: int, d: int | None = None) -> np.ndarray:
    """U_pv^{⊗N} restricted to the symmetric subspace (diagonal)."""
    return np.diag(phase_diagonal(pv, N, d))


def phase_diagonal(pv: PhaseVector, N: int, d: int | None = None) -> np.ndarray:
    """Diagonal of :func:`phase_unitary_sym` as a vector."""
    d = pv.d if d is None else d
    if pv.d != d:
        raise ValueError(f"phase vector has {pv.d - 1} phases, expected {d - 1}")
    return np.exp(1j * (occupation_table(N, d) @ pv.full()))


def conjugate_phase(pv: PhaseVector) -> PhaseVector:
    return PhaseVector(tuple(-x for x in pv.phases))


def state_fidelity(a, b: SymState) -> float:
    """Overlap with a pure target: <b|a|b> for mixed a, |<a|b>|^2 for pure a."""
    vb = b.amplitudes
    if isinstance(a, SymState):
        val = abs(np.vdot(a.amplitudes, vb)) ** 2
    else:
        rho = a.entries if isinstance(a, DensityMatrix) else np.asarray(a)
        val = np.vdot(vb, rho @ vb).real
    return float(min(max(val, 0.0), 1.0))


def projector_distance(a: SymState, b: SymState) -> float:
    """Max-entry distance between |a><a| and |b><b| (global-phase free)."""
    return float(np.abs(a.projector() - b.projector()).max())
