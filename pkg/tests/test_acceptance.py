"""Acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the worst observed
deviation, then asserts.  Run ``pytest tests/test_acceptance.py -s`` to see
the lines, or ``python tests/test_acceptance.py`` for a plain summary.
"""
import io
import time

import numpy as np

from phasecov import certify as cert
from phasecov import estimation as est
from phasecov import fidelity as fid
from phasecov.channels import (
    ChoiOperator,
    Direction,
    Isometry,
    check_covariance,
    choi_from_isometry,
    cloning_isometry,
    economical_completion,
    isometry_defect,
    optimal_isometry,
    reduced_single_site,
    shift_isometry,
    shrink_factor,
)
from phasecov.cli import main
from phasecov.states import PhaseVector, conjugate_phase, equatorial_state, n_fold_equatorial, state_fidelity
from phasecov.symbasis import sym_dim

CLONE, CONJ = Direction.CLONE, Direction.CONJUGATE


def report(n, name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {name}  [{detail}]", flush=True)
    assert ok, f"criterion {n} failed: {detail}"


def grid(direction, ds=(2, 3, 4, 5), Ns=(1, 2), ks=(0, 1, 2), cap=10 ** 4):
    pts = []
    for d in ds:
        for N in Ns:
            for k in ks:
                if direction is CLONE:
                    M = k * d + N
                elif k >= N:
                    M = k * d - N
                else:
                    continue
                if sym_dim(M, d) * sym_dim(N, d) <= cap:
                    pts.append((N, M, d))
    return pts


def _pipeline_vs_closed(direction):
    t0 = time.perf_counter()
    worst = 0.0
    pts = grid(direction)
    for N, M, d in pts:
        worst = max(worst, abs(fid.simulate_single_site(N, M, d, direction) - fid.f_single(N, M, d, direction)))
    return pts, worst, time.perf_counter() - t0


def test_criterion_1_clone_closed_form_vs_pipeline():
    pts, worst, dt = _pipeline_vs_closed(CLONE)
    report(1, "cloning pipeline = closed form", worst < 1e-10 and dt < 60,
           f"{len(pts)} points, max diff {worst:.1e} < 1e-10, {dt:.1f}s")


def test_criterion_2_conj_closed_form_vs_pipeline():
    pts, worst, dt = _pipeline_vs_closed(CONJ)
    report(2, "conjugation pipeline = closed form", worst < 1e-10 and dt < 60,
           f"{len(pts)} points, max diff {worst:.1e} < 1e-10, {dt:.1f}s")


def test_criterion_3_figure1():
    clone = [fid.f_clone_single(1, M, 5) for M in range(6, 102, 5)]
    conj = [fid.f_conj_single(1, M, 5) for M in range(4, 100, 5)]
    dec = all(a > b > 0.36 for s in (clone, conj) for a, b in zip(s, s[1:]))
    near = clone[-1] - 0.36 < 0.01 and conj[-1] - 0.36 < 0.01
    first = abs(clone[0] - 0.4667) < 1e-4 and abs(conj[0] - 0.4) < 1e-4
    report(3, "figure data for d=5, N=1", dec and near and first,
           f"first {clone[0]:.4f}/{conj[0]:.4f}, last {clone[-1]:.4f}/{conj[-1]:.4f}, strictly decreasing={dec}")


def test_criterion_4_ordering_chain():
    # clone and conjugate outputs coincide only when d | 2N; compare there
    worst_chain, worst_strict, npts = np.inf, np.inf, 0
    for d in range(2, 7):
        for N in (1, 2, 3):
            for M, _, _ in fid.common_outputs(N, d, 8):
                fc, fn, fp = fid.f_clone_single(N, M, d), fid.f_conj_single(N, M, d), fid.f_estimation(N, d)
                worst_chain = min(worst_chain, fc - fn, fn - fp)
                if d >= 3:
                    worst_strict = min(worst_strict, fc - fn)
                npts += 1
    # every admissible point is above the measure-and-prepare value
    above_p = min(
        fid.f_single(N, M, d, dr) - fid.f_estimation(N, d)
        for dr in (CLONE, CONJ) for N, M, d in grid(dr, ds=range(2, 7), Ns=(1, 2, 3), ks=range(0, 12), cap=np.inf)
    )
    qubit = max(abs(fid.f_clone_single(1, M, 2) - fid.f_conj_single(1, M, 2)) for M in range(1, 200, 2))
    ok = worst_chain >= -1e-14 and worst_strict > 0 and above_p >= -1e-14 and qubit < 1e-14
    report(4, "F_C >= F_N >= F_P (common M), strict for d>=3, qubit equality", ok,
           f"{npts} common-M points, min gap {worst_chain:.2e}, min strict gap {worst_strict:.2e}, "
           f"min F - F_P {above_p:.2e}, qubit |F_C-F_N| {qubit:.0e}")


def test_criterion_5_beats_universal():
    margin = min(
        fid.f_clone_single_n1(k * d + 1, d) - fid.f_universal_clone(k * d + 1, d)
        for d in range(2, 7) for k in range(1, 50)
    )
    report(5, "phase-covariant cloning beats universal", margin > 0, f"min margin {margin:.3e}")


def test_criterion_6_estimation():
    rng = np.random.default_rng(6)
    quad = 0.0
    for N in (1, 2):
        for d in (2, 3):
            pv = PhaseVector.random(d, rng)
            num = est.estimation_channel_output(pv, N, d, resolution=2 * N + 2).entries
            quad = max(quad, np.abs(num - est.estimation_output_analytic(N, d, pv).entries).max())
    exact = fid.f_estimation(1, 2) == 0.75 and abs(fid.f_estimation(1, 5) - 0.36) < 1e-15
    z = []
    for d, target in ((2, 0.75), (5, 0.36)):
        mean, se = est.montecarlo_fidelity(PhaseVector.random(d, rng), 1, d, samples=10 ** 5, seed=d)
        z.append(abs(mean - target) / se)
    ok = quad < 1e-8 and exact and max(z) < 3
    report(6, "estimation analytic = quadrature, closed values, Monte Carlo", ok,
           f"quadrature diff {quad:.1e}, F_P(1,2)={fid.f_estimation(1, 2)}, F_P(1,5)={fid.f_estimation(1, 5):.15g}, "
           f"MC |z| max {max(z):.2f}")


def test_criterion_7_structural_invariants():
    rng = np.random.default_rng(7)
    w = dict(iso=0.0, psd=0.0, tp=0.0, cov=0.0, unit=0.0, cols=0.0, shrink=0.0)
    npts = 0
    for direction in (CLONE, CONJ):
        for N, M, d in grid(direction, ds=(2, 3, 4, 5), cap=2048):
            V = optimal_isometry(N, M, d, direction)
            R = choi_from_isometry(V)
            w["iso"] = max(w["iso"], isometry_defect(V.matrix))
            w["psd"] = max(w["psd"], -R.eigenvalues().min())
            w["tp"] = max(w["tp"], R.tp_defect())
            w["cov"] = max(w["cov"], check_covariance(R, direction, samples=50, rng=rng).max_norm)
            U = economical_completion(V)
            w["unit"] = max(w["unit"], isometry_defect(U.unitary))
            w["cols"] = max(w["cols"], np.abs(U.isometry_part() - V.matrix).max())
            for _ in range(5):
                pv = PhaseVector.random(d, rng)
                rho1 = reduced_single_site(V.apply(n_fold_equatorial(pv, N, d)))
                tgt = equatorial_state(pv if direction is CLONE else conjugate_phase(pv), d)
                w["shrink"] = max(w["shrink"], shrink_factor(rho1, tgt)[1])
            npts += 1
    povm = max(est.povm_completeness_residual(N, d) for N in (1, 2) for d in (2, 3))
    ok = (w["iso"] < 1e-12 and w["psd"] < 1e-10 and w["tp"] < 1e-10 and w["cov"] < 1e-10 and povm < 1e-8
          and w["unit"] < 1e-12 and w["cols"] < 1e-12 and w["shrink"] < 1e-10)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in w.items())
    report(7, "structural invariants", ok, f"{npts} channels; {detail}, povm {povm:.1e}")


CERT_POINTS = [
    (N, M, d, dr) for dr in (CLONE, CONJ) for N, M, d in grid(dr, ds=(2, 3), cap=400)
] + [(1, 6, 5, CLONE), (1, 4, 5, CONJ)]


def test_criterion_8_optimality_certification():
    worst_gap, worst_excess, worst_sample = 0.0, -np.inf, -np.inf
    economical_ok = True
    for N, M, d, direction in CERT_POINTS:
        bs = cert.block_decompose(N, M, d, direction)
        figures = [cert.Figure.SINGLE_SITE] + ([cert.Figure.GLOBAL] if direction is CLONE else [])
        for figure in figures:
            closed = cert.target_value(N, M, d, direction, figure)
            res = cert.ascend_fidelity(bs, figure)
            worst_gap = max(worst_gap, closed - res.value)
            worst_excess = max(worst_excess, res.value - closed)
        A = cert.restricted_blocks(bs, cert.fidelity_operator(N, M, d, cert.Figure.SINGLE_SITE))
        closed = cert.target_value(N, M, d, direction, cert.Figure.SINGLE_SITE)
        seeds = np.random.SeedSequence(1000 * d + 10 * N + M).spawn(1000)
        worst_sample = max(worst_sample, max(cert.sample_covariant_channel(bs, s).value(A) for s in seeds) - closed)
        economical_ok &= cert.is_economical(choi_from_isometry(optimal_isometry(N, M, d, direction)))
    # a rank-two covariant mixture is not economical
    R1 = choi_from_isometry(cloning_isometry(1, 3, 2)).matrix
    R2 = choi_from_isometry(Isometry(shift_isometry(1, 3, 2, (2, 0)), 1, 3, 2)).matrix
    mixture_flagged = not cert.is_economical(ChoiOperator(1, 3, 2, CLONE, matrix=(R1 + R2) / 2))
    ok = worst_gap <= 1e-6 and worst_excess <= 1e-9 and worst_sample <= 1e-9 and economical_ok and mixture_flagged
    report(8, "ascent recovers optima, samples never exceed, economical iff rank one", ok,
           f"{len(CERT_POINTS)} points, max shortfall {worst_gap:.1e}, max excess {worst_excess:.1e}, "
           f"best sample minus optimum {worst_sample:.2e}, optima rank one={economical_ok}, mixture rejected={mixture_flagged}")


def test_criterion_9_injected_fault():
    buf = io.StringIO()
    code = main(["verify", "--perturb-choi", "1e-3", "--samples", "0"], buf)
    cov_fail = [l for l in buf.getvalue().splitlines() if l.startswith("FAIL") and "covariance" in l]
    report(9, "verify detects a perturbed Choi operator", code != 0 and bool(cov_fail),
           f"exit code {code}, {len(cov_fail)} covariance failures")


if __name__ == "__main__":
    failures = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failures += 1
    raise SystemExit(1 if failures else 0)
