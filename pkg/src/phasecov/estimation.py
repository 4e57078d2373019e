"""Optimal multi-phase estimation (measure-and-prepare) on N equatorial copies.

The POVM density is |e(phi)><e(phi)| with |e(phi)> = U_phi^{⊗N} sum_n |n>_N, a
uniform-amplitude vector on the symmetric basis.  Integrals over the phase
torus use the normalised measure d phi / (2 pi)^{d-1}.

Every integrand here is a trigonometric polynomial whose frequencies have
components in [-(N+1), N+1].  A uniform rectangle rule with L >= N+2 points per
axis is therefore exact up to rounding, which is what ``quadrature`` relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .states import (
    DensityMatrix,
    PhaseVector,
    SymState,
    conjugate_phase,
    equatorial_state,
    n_fold_equatorial,
    phase_diagonal,
)
from .symbasis import _enumerate, multinomial, occupation_table, sym_dim

QUADRATURE = "quadrature"
MONTECARLO = "montecarlo"
MC_MIN_SAMPLES = 100


@dataclass(frozen=True, eq=False)
class PovmVector:
    N: int
    d: int
    phases: PhaseVector
    amplitudes: np.ndarray = field(repr=False)


def povm_vector(pv: PhaseVector, N: int, d: int | None = None) -> PovmVector:
    """Susskind-Glogower vector: amplitude exp(i n.phi) on every basis vector (unnormalised)."""
    d = pv.d if d is None else d
    return PovmVector(N, d, pv, phase_diagonal(pv, N, d))


def estimation_density(input_state: SymState, pv: PhaseVector) -> float:
    """p(phi) = |<psi^{⊗N}|e(phi)>|^2, a density w.r.t. d phi / (2 pi)^{d-1}."""
    e = povm_vector(pv, input_state.N, input_state.d).amplitudes
    return float(abs(np.vdot(input_state.amplitudes, e)) ** 2)


def min_resolution(N: int) -> int:
    return N + 2


def phase_grid(d: int, points: int) -> tuple[np.ndarray, float]:
    """Uniform product grid on [0, 2 pi)^{d-1}: (n_points, d) array with phi_0 = 0, and the common weight."""
    axis = 2 * np.pi * np.arange(points) / points
    mesh = np.meshgrid(*([axis] * (d - 1)), indexing="ij")
    phis = np.stack([m.reshape(-1) for m in mesh], axis=1)
    phis = np.hstack([np.zeros((phis.shape[0], 1)), phis])
    return phis, 1.0 / points ** (d - 1)


def _densities(amps: np.ndarray, N: int, d: int, phis: np.ndarray) -> np.ndarray:
    occ = occupation_table(N, d)
    E = np.exp(1j * phis @ occ.T)  # rows are <basis|e(phi)>
    return np.abs(E @ amps.conj()) ** 2


def povm_completeness_residual(N: int, d: int, points: int | None = None) -> float:
    """max |sum_grid w |e><e| - I| on the symmetric subspace."""
    points = 2 * N + 2 if points is None else points
    phis, w = phase_grid(d, points)
    E = np.exp(1j * phis @ occupation_table(N, d).T)
    S = w * (E.T @ E.conj())
    return float(np.abs(S - np.eye(sym_dim(N, d))).max())


def density_integral(input_state: SymState, points: int) -> float:
    phis, w = phase_grid(input_state.d, points)
    return float(w * _densities(input_state.amplitudes, input_state.N, input_state.d, phis).sum())


def _prepared(phis: np.ndarray, d: int, conjugate: bool) -> np.ndarray:
    sign = -1.0 if conjugate else 1.0
    return np.exp(1j * sign * phis) / math.sqrt(d)


def _quadrature_output(amps, N, d, points, conjugate) -> np.ndarray:
    if points < min_resolution(N):
        raise ValueError(f"quadrature needs at least {min_resolution(N)} points per axis for N={N}, got {points}")
    phis, w = phase_grid(d, points)
    p = _densities(amps, N, d, phis) * w
    psi = _prepared(phis, d, conjugate)
    return (psi.T * p) @ psi.conj()


def sample_estimates(
    amps: np.ndarray,
    N: int,
    d: int,
    samples: int,
    rng: np.random.Generator,
    batch: int = 8192,
) -> np.ndarray:
    """Rejection-sample estimated phase vectors (rows, phi_0 = 0 included) from p(phi).

    Proposals are uniform on the torus and accepted with probability
    p(phi) / (sum_n |c_n|)^2, a global bound on p by the triangle inequality.
    """
    bound = float(np.abs(amps).sum() ** 2)
    out = []
    have = 0
    while have < samples:
        phis = rng.uniform(0, 2 * np.pi, size=(batch, d - 1))
        phis = np.hstack([np.zeros((batch, 1)), phis])
        p = _densities(amps, N, d, phis)
        keep = rng.uniform(0, bound, size=batch) < p
        out.append(phis[keep])
        have += int(keep.sum())
    return np.vstack(out)[:samples]


def _montecarlo_output(amps, N, d, samples, seed, conjugate) -> np.ndarray:
    if samples < MC_MIN_SAMPLES:
        raise ValueError(f"Monte Carlo needs at least {MC_MIN_SAMPLES} samples, got {samples}")
    rng = np.random.default_rng(seed)
    phis = sample_estimates(amps, N, d, samples, rng)
    psi = _prepared(phis, d, conjugate)
    return psi.T @ psi.conj() / samples


def _output(pv, N, d, mode, resolution, seed, conjugate) -> DensityMatrix:
    d = pv.d if d is None else d
    amps = n_fold_equatorial(pv, N, d).amplitudes
    if mode == QUADRATURE:
        resolution = 2 * N + 2 if resolution is None else resolution
        rho = _quadrature_output(amps, N, d, resolution, conjugate)
    elif mode == MONTECARLO:
        resolution = 100_000 if resolution is None else resolution
        rho = _montecarlo_output(amps, N, d, resolution, seed, conjugate)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return DensityMatrix(rho, N=1, d=d, tol=1e-8)


def estimation_channel_output(
    pv: PhaseVector,
    N: int,
    d: int | None = None,
    mode: str = QUADRATURE,
    resolution: int | None = None,
    seed: int | None = 0,
) -> DensityMatrix:
    """Single-site state prepared after estimating the phases of |psi(pv)>^{⊗N}.

    ``resolution`` is points per axis for quadrature, number of accepted
    samples for Monte Carlo.
    """
    return _output(pv, N, d, mode, resolution, seed, conjugate=False)


def measure_prepare_conjugate(
    pv: PhaseVector,
    N: int,
    M: int,
    d: int | None = None,
    mode: str = QUADRATURE,
    resolution: int | None = None,
    seed: int | None = 0,
) -> DensityMatrix:
    """Per-site output of estimate-then-prepare |psi(-phi_est)>^{⊗M}.

    The copies are prepared independently, so the single-site state does not
    depend on M.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    return _output(pv, N, d, mode, resolution, seed, conjugate=True)


def estimation_output_analytic(N: int, d: int, pv: PhaseVector | None = None) -> DensityMatrix:
    """Closed form of the single-site output for the seed input, rotated to ``pv`` if given.

    I/d + d^{-(N+1)} sum_{nbar} sum_{i != j} N!/prod(nbar!) / sqrt((nbar_i+1)(nbar_j+1)) |i><j|
    """
    off = np.zeros((d, d))
    for nbar in _enumerate(N - 1, d):
        coeff = N * multinomial(nbar)
        w = 1 / np.sqrt(np.asarray(nbar) + 1.0)
        off += coeff * np.outer(w, w)
    np.fill_diagonal(off, 0.0)
    rho = np.eye(d) / d + off / float(d) ** (N + 1)
    if pv is not None:
        u = np.exp(1j * pv.full())
        rho = u[:, None] * rho * u.conj()[None, :]
    return DensityMatrix(rho, N=1, d=d)


def montecarlo_fidelity(
    pv: PhaseVector,
    N: int,
    d: int | None = None,
    samples: int = 100_000,
    seed: int | None = 0,
    conjugate: bool = False,
) -> tuple[float, float]:
    """Mean and standard error of |<target|psi(phi_est)>|^2 over sampled estimates."""
    d = pv.d if d is None else d
    amps = n_fold_equatorial(pv, N, d).amplitudes
    rng = np.random.default_rng(seed)
    phis = sample_estimates(amps, N, d, samples, rng)
    psi = _prepared(phis, d, conjugate)
    target = equatorial_state(conjugate_phase(pv) if conjugate else pv, d).amplitudes
    f = np.abs(psi @ target.conj()) ** 2
    return float(f.mean()), float(f.std(ddof=1) / math.sqrt(samples))


def spawn_seeds(seed: int, n: int) -> list[int]:
    """Independent per-task seeds for parallel Monte Carlo runs."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]
