"""Closed-form single-site fidelities, shrinking factors, and the numeric global fidelity.

The general-N formulas are sums over occupation vectors nbar with total N-1,
weighted by N!/prod(nbar!).  Weights are exact integers; the square-root
factors are summed with ``math.fsum``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channels import (
    Direction,
    apply_channel,
    choi_from_isometry,
    optimal_isometry,
    reduced_single_site,
    shift_parameter,
)
from .states import PhaseVector, conjugate_phase, equatorial_state, n_fold_equatorial, state_fidelity
from .symbasis import _enumerate, multinomial


class FidelityKind(str, enum.Enum):
    CLONE = "clone"
    CONJUGATE = "conjugate"
    ESTIMATION = "estimation"
    UNIVERSAL_CLONE = "universal_clone"
    STATE_ESTIMATION_SHRINK = "state_estimation_shrink"


@dataclass(frozen=True)
class FidelityRecord:
    N: int | None
    M: int | None
    d: int
    kind: FidelityKind
    value: float

    def __post_init__(self):
        lo = 0.0 if self.kind is FidelityKind.STATE_ESTIMATION_SHRINK else 1.0 / self.d
        if not lo - 1e-12 <= self.value <= 1 + 1e-12:
            raise ValueError(f"{self.kind.value} value {self.value} outside [{lo}, 1]")


def _offdiag_sum(N: int, d: int, weight) -> float:
    """sum_{nbar} sum_{i != j} N!/prod(nbar!) * weight(nbar_i, nbar_j)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    terms = []
    for nbar in _enumerate(N - 1, d):
        coeff = N * multinomial(nbar)
        for i in range(d):
            for j in range(d):
                if i != j:
                    terms.append(coeff * weight(nbar[i], nbar[j]))
    return math.fsum(terms)


def f_clone_single(N: int, M: int, d: int) -> float:
    """Optimal single-site fidelity of N -> M phase-covariant cloning, M = kd + N."""
    k = shift_parameter(N, M, d, Direction.CLONE)
    s = _offdiag_sum(N, d, lambda a, b: math.sqrt((a + k + 1) * (b + k + 1) / ((a + 1) * (b + 1))))
    return 1 / d + s / (M * d ** (N + 1))


def f_clone_single_n1(M: int, d: int) -> float:
    shift_parameter(1, M, d, Direction.CLONE)
    return 1 / d + (d - 1) * (M + d - 1) / (M * d * d)


def f_conj_single(N: int, M: int, d: int) -> float:
    """Optimal single-site fidelity of N -> M phase conjugation, M = kd - N, k >= N."""
    k = shift_parameter(N, M, d, Direction.CONJUGATE)
    s = _offdiag_sum(N, d, lambda a, b: math.sqrt((k - a) * (k - b) / ((a + 1) * (b + 1))))
    return 1 / d + s / (M * d ** (N + 1))


def f_conj_single_n1(M: int, d: int) -> float:
    shift_parameter(1, M, d, Direction.CONJUGATE)
    return 1 / d + (d - 1) * (M + 1) / (M * d * d)


def f_single(N: int, M: int, d: int, direction) -> float:
    if Direction.parse(direction) is Direction.CLONE:
        return f_clone_single(N, M, d)
    return f_conj_single(N, M, d)


def f_estimation(N: int, d: int) -> float:
    """Single-site fidelity of optimal multi-phase estimation on N copies (the M -> inf limit)."""
    s = _offdiag_sum(N, d, lambda a, b: 1 / math.sqrt((a + 1) * (b + 1)))
    return 1 / d + s / d ** (N + 2)


def f_universal_clone(M: int, d: int) -> float:
    """Optimal single-site fidelity of the universal 1 -> M cloner."""
    return (2 * M + d - 1) / (M * (d + 1))


def eta_from_fidelity(F: float, d: int) -> float:
    return (d * F - 1) / (d - 1)


def fidelity_from_eta(eta: float, d: int) -> float:
    return (1 + (d - 1) * eta) / d


def eta_state_estimation(M: int, d: int) -> float:
    """Shrinking factor of optimal state estimation on M copies."""
    return M / (M + d)


def f_clone_global(N: int, M: int, d: int, direction=Direction.CLONE) -> float:
    """Global fidelity <r| (|psi0><psi0|^{⊗M} ⊗ (|psi0><psi0|^{⊗N})^*) |r> of the optimal channel."""
    V = optimal_isometry(N, M, d, direction)
    seed = PhaseVector.zeros(d)
    a = n_fold_equatorial(seed, M, d).amplitudes
    b = n_fold_equatorial(seed, N, d).amplitudes
    r = V.matrix.reshape(-1)
    return float(abs(np.vdot(np.kron(a, b.conj()), r)) ** 2)


def simulate_single_site(N: int, M: int, d: int, direction, pv: PhaseVector | None = None) -> float:
    """Brute-force pipeline: isometry -> Choi -> apply -> single-site reduction -> fidelity."""
    direction = Direction.parse(direction)
    pv = PhaseVector.zeros(d) if pv is None else pv
    V = optimal_isometry(N, M, d, direction)
    R = choi_from_isometry(V)
    rho_in = n_fold_equatorial(pv, N, d).projector()
    rho_out = apply_channel(R, rho_in)
    rho1 = reduced_single_site(rho_out, M, d)
    target_pv = pv if direction is Direction.CLONE else conjugate_phase(pv)
    return state_fidelity(rho1, equatorial_state(target_pv, d))


def record(N, M, d, kind) -> FidelityRecord:
    kind = FidelityKind(kind)
    if kind is FidelityKind.CLONE:
        v = f_clone_single(N, M, d)
    elif kind is FidelityKind.CONJUGATE:
        v = f_conj_single(N, M, d)
    elif kind is FidelityKind.ESTIMATION:
        v = f_estimation(N, d)
    elif kind is FidelityKind.UNIVERSAL_CLONE:
        v = f_universal_clone(M, d)
    else:
        v = eta_state_estimation(M, d)
    return FidelityRecord(N, M, d, kind, v)


def common_outputs(N: int, d: int, count: int) -> list[tuple[int, int, int]]:
    """Output sizes M admissible for both cloning and conjugation, as (M, k_clone, k_conj).

    Both families share an M only when d divides 2N.
    """
    if (2 * N) % d:
        return []
    out = []
    k_conj = N
    while len(out) < count:
        M = k_conj * d - N
        k_clone = (M - N) // d
        if M >= N and M >= 1:
            out.append((M, k_clone, k_conj))
        k_conj += 1
    return out
