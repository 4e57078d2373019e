"""Command-line front end: ``phasecov {table,figure1,verify,dump,estimate}``.

Settings come from flags, then from a flat ``key = value`` config file named
by ``$PHASECOV_CONFIG`` (or ``--config``), then from built-in defaults.
Config keys are the long flag names with dashes turned into underscores.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import certify as cert
from . import estimation as est
from . import fidelity as fid
from . import serialize
from .channels import (
    DERIVED_TOL,
    EXACT_TOL,
    Direction,
    InadmissibleParameters,
    apply_channel,
    check_covariance,
    choi_from_isometry,
    economical_completion,
    isometry_defect,
    optimal_isometry,
    reduced_single_site,
    reduced_single_site_tensor,
    shift_parameter,
    shrink_factor,
)
from .states import PhaseVector, conjugate_phase, equatorial_state, n_fold_equatorial
from .symbasis import BudgetExceeded, sym_dim

log = logging.getLogger("phasecov")

CONFIG_ENV = "PHASECOV_CONFIG"
TABLE_COLUMNS = ["d", "N", "M", "k", "kind", "fidelity", "eta"]
FIGURE1_COLUMNS = ["M", "F_clone", "F_conj", "F_est_limit"]
ESTIMATE_COLUMNS = ["d", "N", "M", "k", "kind", "F_channel", "F_P_numeric", "F_P_analytic", "gap"]
VERIFY_DIM_CAP = 2048  # cap on sym_dim(M)*sym_dim(N) for the default verify grid


@dataclass
class RunConfig:
    command: str = "table"
    d: str = "2"
    N: str = "1"
    k_range: str = "0..3"
    direction: str = "clone"
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    resolution: int | None = None
    mode: str = est.QUADRATURE
    tol: float | None = None
    grid: str | None = None
    perturb_choi: float = 0.0
    samples: int = 100
    workers: int = 1
    explicit: set = field(default_factory=set)

    def is_set(self, name: str) -> bool:
        return name in self.explicit

    def ints(self, name: str) -> list[int]:
        return parse_range(getattr(self, name))


def parse_range(spec) -> list[int]:
    """'3' -> [3]; '0..3' or '0:3' -> [0,1,2,3]; '1,4,6' -> [1,4,6]."""
    if isinstance(spec, int):
        return [spec]
    out: list[int] = []
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        for sep in ("..", ":"):
            if sep in part:
                a, b = part.split(sep)
                out.extend(range(int(a), int(b) + 1))
                break
        else:
            out.append(int(part))
    return out


def parse_grid(spec: str) -> list[dict]:
    """'d=2,N=1,k=1; d=3,N=1,k=0..2' -> list of {d: [...], N: [...], k: [...]} filters."""
    points = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        entry = {}
        for item in _split_assignments(chunk):
            key, _, value = item.partition("=")
            entry[key.strip()] = parse_range(value)
        points.append(entry)
    return points


def _split_assignments(chunk: str) -> list[str]:
    # 'd=2,N=1,k=0,1' -> ['d=2', 'N=1', 'k=0,1']
    items: list[str] = []
    for tok in chunk.split(","):
        if "=" in tok or not items:
            items.append(tok)
        else:
            items[-1] += "," + tok
    return items


def read_config_file(path: str | Path) -> dict:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"bad config line {raw!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(name: str, value):
    types = {"seed": int, "resolution": int, "tol": float, "perturb_choi": float, "samples": int, "workers": int}
    if value is None or name not in types:
        return value
    return types[name](value)


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    path = args.config or os.environ.get(CONFIG_ENV)
    names = {f.name for f in fields(RunConfig)} - {"command", "explicit"}
    if path:
        for key, value in read_config_file(path).items():
            if key not in names:
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, value))
            cfg.explicit.add(key)
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, _coerce(name, value))
            cfg.explicit.add(name)
    return cfg


def fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.12g}"


def emit(rows: list[dict], columns: list[str], cfg: RunConfig, stream=None) -> str:
    if cfg.format == "json":
        text = json.dumps({"columns": columns, "rows": rows}, indent=1)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) if not isinstance(r.get(c), str) else r[c] for c in columns])
        text = buf.getvalue()
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        (stream or sys.stdout).write(text)
    return text


def parse_table(text: str, format: str = "csv") -> list[dict]:
    """Parse the output of ``table`` back into typed rows."""
    if format == "json":
        return json.loads(text)["rows"]
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        typed = {}
        for k, v in r.items():
            if k == "kind":
                typed[k] = v
            elif v == "":
                typed[k] = None
            elif k in ("d", "N", "M", "k"):
                typed[k] = int(v)
            else:
                typed[k] = float(v)
        rows.append(typed)
    return rows


def _directions(cfg: RunConfig) -> list[Direction]:
    if cfg.direction in ("both", "all"):
        return [Direction.CLONE, Direction.CONJUGATE]
    return [Direction.parse(cfg.direction)]


def _output_size(N: int, k: int, d: int, direction: Direction) -> int | None:
    M = k * d + N if direction is Direction.CLONE else k * d - N
    try:
        shift_parameter(N, M, d, direction)
    except InadmissibleParameters:
        return None
    return M


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def cmd_table(cfg: RunConfig, stream=None) -> int:
    points = []
    for d in cfg.ints("d"):
        for N in cfg.ints("N"):
            for direction in _directions(cfg):
                for k in cfg.ints("k_range"):
                    M = _output_size(N, k, d, direction)
                    if M is not None:
                        points.append((d, N, M, k, direction))

    def row(p):
        d, N, M, k, direction = p
        F = fid.f_single(N, M, d, direction)
        return {"d": d, "N": N, "M": M, "k": k, "kind": direction.value, "fidelity": F, "eta": fid.eta_from_fidelity(F, d)}

    rows = _pool_map(row, points, cfg.workers)
    if not rows:
        log.warning("no admissible (d, N, k) points in the requested range; writing header only")
    emit(rows, TABLE_COLUMNS, cfg, stream)
    return 0


def figure1_rows(d: int = 5, N: int = 1, ks=range(1, 21)) -> list[dict]:
    limit = fid.f_estimation(N, d)
    rows: dict[int, dict] = {}
    for k in ks:
        for direction, col in ((Direction.CLONE, "F_clone"), (Direction.CONJUGATE, "F_conj")):
            M = _output_size(N, k, d, direction)
            if M is None:
                continue
            r = rows.setdefault(M, {"M": M, "F_clone": None, "F_conj": None, "F_est_limit": limit})
            r[col] = fid.f_single(N, M, d, direction)
    return [rows[M] for M in sorted(rows)]


def cmd_figure1(cfg: RunConfig, stream=None) -> int:
    d = cfg.ints("d")[0] if cfg.is_set("d") else 5
    N = cfg.ints("N")[0] if cfg.is_set("N") else 1
    ks = cfg.ints("k_range") if cfg.is_set("k_range") else range(1, 21)
    emit(figure1_rows(d, N, ks), FIGURE1_COLUMNS, cfg, stream)
    return 0


@dataclass
class Check:
    name: str
    tol: float
    observed: float
    passed: bool
    where: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} {self.where:<28} observed={self.observed:.3e}  tol={self.tol:.1e}"


def _le(name, observed, tol, where) -> Check:
    return Check(name, tol, float(observed), bool(observed <= tol), where)


def point_checks(N: int, M: int, d: int, direction: Direction, perturb: float = 0.0, seed: int = 0, samples: int = 100, tol: float | None = None) -> list[Check]:
    """Invariant checks for one admissible channel."""
    where = f"{direction.value} N={N} M={M} d={d}"
    rng = np.random.default_rng(seed)
    checks = []
    V = optimal_isometry(N, M, d, direction)
    checks.append(_le("isometry V^dag V = I", isometry_defect(V.matrix), EXACT_TOL, where))

    R = choi_from_isometry(V, dense=True)
    if perturb:
        R = R.perturbed(perturb)
    lam = R.eigenvalues()
    checks.append(_le("choi PSD (-min eigenvalue)", max(-lam.min(), 0.0), DERIVED_TOL, where))
    checks.append(_le("choi trace preserving", R.tp_defect(), DERIVED_TOL, where))
    cov = check_covariance(R, direction, samples=50, tol=tol or DERIVED_TOL, rng=rng)
    checks.append(_le("covariance commutator", cov.max_norm, cov.tol, where))

    G = rng.normal(size=(V.shape[1],) * 2) + 1j * rng.normal(size=(V.shape[1],) * 2)
    rho = G @ G.conj().T
    rho /= np.trace(rho).real
    diff = np.abs(apply_channel(R, rho, validate=False) - V.matrix @ rho @ V.matrix.conj().T).max()
    checks.append(_le("apply(choi) = V rho V^dag", diff, EXACT_TOL, where))

    U = economical_completion(V)
    checks.append(_le("completion unitary", isometry_defect(U.unitary), EXACT_TOL, where))
    checks.append(_le("completion reproduces V", np.abs(U.isometry_part() - V.matrix).max(), EXACT_TOL, where))

    pv = PhaseVector.random(d, rng)
    out = V.apply(n_fold_equatorial(pv, N, d))
    rho1 = reduced_single_site(out)
    target = equatorial_state(pv if direction is Direction.CLONE else conjugate_phase(pv), d)
    eta, resid = shrink_factor(rho1, target)
    closed = fid.f_single(N, M, d, direction)
    checks.append(_le("shrink residual", resid, DERIVED_TOL, where))
    checks.append(_le("closed form vs pipeline", abs(fid.simulate_single_site(N, M, d, direction, pv) - closed), DERIVED_TOL, where))
    try:
        oracle = reduced_single_site_tensor(out)
        checks.append(_le("reduction vs tensor oracle", np.abs(oracle.entries - rho1.entries).max(), EXACT_TOL, where))
    except BudgetExceeded:
        pass

    if samples:
        bs = cert.block_decompose(N, M, d, direction)
        res = cert.ascend_fidelity(bs, cert.Figure.SINGLE_SITE)
        checks.append(_le("ascent gap to closed form", abs(closed - res.value), 1e-6, where))
        checks.append(_le("ascent excess over closed form", max(res.value - closed, 0.0), 1e-9, where))
        A = cert.restricted_blocks(bs, cert.fidelity_operator(N, M, d, cert.Figure.SINGLE_SITE))
        seeds = np.random.SeedSequence(seed).spawn(samples)
        best = max(cert.sample_covariant_channel(bs, s).value(A) for s in seeds)
        checks.append(_le("sampled channels excess", max(best - closed, 0.0), 1e-9, where))
    return checks


def global_checks(ds, Ns) -> list[Check]:
    checks = []
    for d in ds:
        for N in Ns:
            where = f"N={N} d={d}"
            for M, _, _ in fid.common_outputs(N, d, 4):
                fc, fn, fp = fid.f_clone_single(N, M, d), fid.f_conj_single(N, M, d), fid.f_estimation(N, d)
                gap = min(fc - fn, fn - fp) if d > 2 else min(fn - fp, -abs(fc - fn))
                checks.append(Check("ordering F_C >= F_N >= F_P", 0.0, gap, gap >= -1e-14, f"{where} M={M}"))
            if N <= 2 and d <= 3:
                a = est.estimation_output_analytic(N, d).entries
                q = est.estimation_channel_output(PhaseVector.zeros(d), N, d).entries
                checks.append(_le("estimation analytic vs quadrature", np.abs(a - q).max(), 1e-8, where))
                checks.append(_le("POVM completeness", est.povm_completeness_residual(N, d), 1e-8, where))
    return checks


def verify_points(cfg: RunConfig) -> list[tuple[int, int, int, Direction]]:
    filters = parse_grid(cfg.grid) if cfg.grid else [
        {"d": cfg.ints("d") if cfg.is_set("d") else [2, 3],
         "N": cfg.ints("N") if cfg.is_set("N") else [1, 2],
         "k": cfg.ints("k_range") if cfg.is_set("k_range") else [0, 1, 2]}
    ]
    directions = _directions(cfg) if cfg.is_set("direction") else [Direction.CLONE, Direction.CONJUGATE]
    pts = []
    for f in filters:
        for d in f.get("d", [2]):
            for N in f.get("N", [1]):
                for direction in directions:
                    for k in f.get("k", [0, 1, 2]):
                        M = _output_size(N, k, d, direction)
                        if M is None:
                            continue
                        if not cfg.grid and sym_dim(M, d) * sym_dim(N, d) > VERIFY_DIM_CAP:
                            continue
                        pts.append((N, M, d, direction))
    return pts


def cmd_verify(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    pts = verify_points(cfg)
    results = _pool_map(
        lambda p: point_checks(*p, perturb=cfg.perturb_choi, seed=cfg.seed, samples=cfg.samples, tol=cfg.tol),
        pts,
        cfg.workers,
    )
    checks = [c for group in results for c in group]
    if not cfg.grid:
        checks += global_checks(sorted({p[2] for p in pts}), sorted({p[0] for p in pts}))
    failed = [c for c in checks if not c.passed]
    lines = [c.line() for c in checks]
    lines.append(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    text = "\n".join(lines) + "\n"
    if cfg.format == "json":
        text = json.dumps([c.__dict__ for c in checks], indent=1)
    if cfg.out:
        Path(cfg.out).write_text(text)
    stream.write(text)
    return 1 if failed or not checks else 0


def cmd_dump(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    outdir = Path(cfg.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for d in cfg.ints("d"):
        for N in cfg.ints("N"):
            for direction in _directions(cfg):
                for k in cfg.ints("k_range"):
                    M = _output_size(N, k, d, direction)
                    if M is None:
                        continue
                    V = optimal_isometry(N, M, d, direction)
                    R = choi_from_isometry(V, dense=True)
                    U = economical_completion(V)
                    bs = cert.block_decompose(N, M, d, direction)
                    meta = dict(N=N, M=M, d=d, k=k, direction=direction)
                    stem = f"{direction.value}_N{N}_M{M}_d{d}"
                    docs = {
                        "isometry": serialize.encode_isometry(V),
                        "choi": serialize.encode_choi(R, k=k),
                        "unitary": serialize.encode_unitary(U, **meta),
                        "blocks": {"header": {**serialize.encode_array(np.zeros(0), **meta)["header"], "kind": "blocks"}, **bs.as_dict()},
                    }
                    for name, doc in docs.items():
                        path = outdir / f"{stem}_{name}.json"
                        serialize.dump(doc, path)
                        written.append(str(path))
    if not written:
        log.warning("nothing to dump: no admissible points")
    stream.write("\n".join(written) + ("\n" if written else ""))
    return 0


def estimate_rows(cfg: RunConfig) -> list[dict]:
    rows = []
    for d in cfg.ints("d"):
        for N in cfg.ints("N"):
            pv = PhaseVector.random(d, np.random.default_rng(cfg.seed))
            analytic = fid.f_estimation(N, d)
            if cfg.mode == est.MONTECARLO:
                numeric, _ = est.montecarlo_fidelity(pv, N, d, samples=cfg.resolution or 100_000, seed=cfg.seed)
            else:
                rho = est.estimation_channel_output(pv, N, d, est.QUADRATURE, cfg.resolution)
                numeric = float(np.vdot(equatorial_state(pv).amplitudes, rho.entries @ equatorial_state(pv).amplitudes).real)
            rows.append({"d": d, "N": N, "M": None, "k": None, "kind": "estimation", "F_channel": None,
                         "F_P_numeric": numeric, "F_P_analytic": analytic, "gap": 0.0})
            for direction in (Direction.CLONE, Direction.CONJUGATE):
                for k in cfg.ints("k_range"):
                    M = _output_size(N, k, d, direction)
                    if M is None:
                        continue
                    F = fid.f_single(N, M, d, direction)
                    rows.append({"d": d, "N": N, "M": M, "k": k, "kind": direction.value, "F_channel": F,
                                 "F_P_numeric": numeric, "F_P_analytic": analytic, "gap": F - analytic})
    return rows


def cmd_estimate(cfg: RunConfig, stream=None) -> int:
    rows = estimate_rows(cfg)
    emit(rows, ESTIMATE_COLUMNS, cfg, stream)
    bad = [r for r in rows if r["gap"] is not None and r["gap"] < -1e-12]
    if bad:
        log.error("negative suboptimality gap at %s", bad)
        return 1
    return 0


COMMANDS = {
    "table": cmd_table,
    "figure1": cmd_figure1,
    "verify": cmd_verify,
    "dump": cmd_dump,
    "estimate": cmd_estimate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasecov", description="Optimal phase-covariant cloning and conjugation channels.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help=f"flat key=value config file (default: ${CONFIG_ENV})")
    p.add_argument("--d", help="dimension(s), e.g. 2 or 2..5")
    p.add_argument("--N", help="input copies, e.g. 1 or 1,2")
    p.add_argument("--k-range", dest="k_range", help="k values, e.g. 0..3")
    p.add_argument("--direction", choices=["clone", "conjugate", "both"])
    p.add_argument("--out", help="output file (table/figure1/estimate/verify) or directory (dump)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--seed", type=int)
    p.add_argument("--resolution", type=int, help="quadrature points per axis, or Monte Carlo samples")
    p.add_argument("--mode", choices=[est.QUADRATURE, est.MONTECARLO])
    p.add_argument("--tol", type=float, help="covariance tolerance override for verify")
    p.add_argument("--grid", help="verify only these points, e.g. 'd=2,N=1,k=1; d=3,N=2,k=2'")
    p.add_argument("--perturb-choi", dest="perturb_choi", type=float, help="add an off-block perturbation to every Choi operator")
    p.add_argument("--samples", type=int, help="random covariant channels per verify point (0 skips certification)")
    p.add_argument("--workers", type=int, help="thread pool size for grid points")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None, stream=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = build_config(args)
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return 2
    try:
        return COMMANDS[cfg.command](cfg, stream)
    except (InadmissibleParameters, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
