"""
Command line front end.

    m2spec synth      --d 2 --m 2 --N 32 --K 1 --seed 0 --out-cov cov.json --out-truth truth.grid
    m2spec estimate   --cov cov.json --out-report report.json --out-density phi.grid
    m2spec gradcheck  --d 2 --m 2 --nu auto
    m2spec divergence a.grid b.grid --tau 0.5
    m2spec verify     --cov cov.json --density phi.grid

Exit codes: 0 success, 1 a check failed (no certificate, gradient mismatch,
residual too large), 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from . import io
from .checks import gradcheck
from .divergence import divergence
from .dual import SolverOptions, choose_nu, solve_dual
from .errors import CertificateRefusedError, M2Error
from .grid import CovarianceData, IndexSet, TorusGrid
from .primal import certify, moment_residual, primal_density
from .spectra import GridDensity, PriorSpec, eval_prior, random_coercive_density, smoothed_periodogram, synth_field

logger = logging.getLogger("m2spec")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass
class RunConfig:
    d: int = 2
    m: int = 2
    N: int = 32
    K: int = 1
    nu: str = "auto"
    prior: str = "identity"
    seed: int = 0
    tol_grad: float = 1e-8
    max_iters: int = 500
    interior_margin: float = 1e-9
    norm_cap: float = 1e8
    # synth
    truth: str = "random"
    a: float = 0.5
    b: float = 2.0
    mode: str = "moments"
    realizations: int = 500
    # gradcheck
    points: int = 20
    step: float = 1e-5
    threshold: float = 1e-4

    def resolve_nu(self) -> int:
        if str(self.nu) == "auto":
            return choose_nu(self.m, self.d)
        nu = int(self.nu)
        if nu < 1:
            raise M2Error(f"nu must be >= 1 or 'auto', got {nu}")
        return nu

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol_grad=self.tol_grad, max_iters=self.max_iters,
                             interior_margin=self.interior_margin, norm_cap=self.norm_cap)

    def index_set(self) -> IndexSet:
        return IndexSet.box(self.d, self.K)

    def grid(self) -> TorusGrid:
        g = TorusGrid(self.d, self.N)
        g.check_resolves(self.index_set())
        return g


def _build_prior(spec: str, grid: TorusGrid, m: int) -> GridDensity:
    """identity | grid:PATH (MGRD1 file) | poly:PATH (coefficients of P, covariance format)."""
    if spec == "identity":
        return eval_prior(PriorSpec.identity(m), grid)
    kind, _, path = spec.partition(":")
    if kind == "grid":
        pgrid, samples = io.read_grid(path)
        if pgrid != grid or samples.shape[1] != m:
            raise M2Error("prior grid file does not match the problem grid")
        return eval_prior(PriorSpec.from_grid(GridDensity(grid, samples)), grid)
    if kind == "poly":
        coeffs, _ = io.read_covariance(path)
        return eval_prior(PriorSpec.inverse_polynomial(coeffs.values, coeffs.index_set), grid)
    raise M2Error(f"unknown prior spec {spec!r}")


def cmd_synth(cfg: RunConfig, out_cov: str, out_truth: Optional[str]) -> int:
    grid = cfg.grid()
    ix = cfg.index_set()
    if cfg.truth == "white":
        truth = GridDensity(grid, np.broadcast_to(np.eye(cfg.m, dtype=complex), (grid.n_nodes, cfg.m, cfg.m)).copy())
    elif cfg.truth == "random":
        truth = random_coercive_density(cfg.seed, grid, cfg.m, cfg.a, cfg.b)
    else:
        raise M2Error(f"unknown truth {cfg.truth!r}")
    if cfg.mode == "moments":
        sigma = truth.moments(ix)
    elif cfg.mode == "periodogram":
        Y = synth_field(truth, cfg.seed + 1, cfg.realizations)
        sigma = smoothed_periodogram(Y, grid, ix)
    else:
        raise M2Error(f"unknown mode {cfg.mode!r}")
    meta = {"N": cfg.N, "seed": cfg.seed, "truth": cfg.truth, "mode": cfg.mode,
            "moments": "grid-consistent"}
    if cfg.mode == "periodogram":
        meta["realizations"] = cfg.realizations
    io.write_covariance(out_cov, sigma, meta)
    if out_truth:
        io.write_grid(out_truth, grid, truth.samples)
    print(f"wrote {out_cov}" + (f" and {out_truth}" if out_truth else ""))
    return EXIT_OK


def cmd_estimate(cfg: RunConfig, cov_path: str, out_report: Optional[str], out_density: Optional[str]) -> int:
    sigma, meta = io.read_covariance(cov_path)
    cfg.d, cfg.m = sigma.index_set.d, sigma.m
    if cfg.N is None:
        cfg.N = int(meta.get("N", RunConfig.N))
    grid = TorusGrid(cfg.d, cfg.N)
    grid.check_resolves(sigma.index_set)
    nu = cfg.resolve_nu()
    psi = _build_prior(cfg.prior, grid, cfg.m)
    report = solve_dual(sigma, psi, nu, grid, cfg.solver_options())
    out = {"report": report.summary(), "Q": io.covariance_to_dict(_as_cov(report))["values"],
           "index_set": sigma.index_set.indices.tolist(), "moments": meta.get("moments", "grid-consistent")}
    code = EXIT_OK
    try:
        cert = certify(report, sigma, psi, nu, grid)
        out["certificate"] = cert.as_dict()
        print(f"status={report.status.value} nu={nu} iterations={report.iterations} "
              f"dual={report.dual_value:.12g} divergence={cert.divergence:.12g} "
              f"gap={cert.gap:.3e} max_residual={cert.max_residual:.3e}")
    except CertificateRefusedError as exc:
        out["certificate"] = None
        print(f"status={report.status.value}: {report.message or exc} "
              f"(grad_norm={report.grad_norm:.3e}, margin={report.feasibility_margin:.3e}, "
              f"nodes near zero set={report.zero_set_nodes})", file=sys.stderr)
        code = EXIT_FAIL
    if out_report:
        io.write_json(out_report, out)
    if out_density and report.feasibility_margin > 0:
        io.write_grid(out_density, grid, primal_density(report.Q, psi, nu, grid).samples)
    return code


def _as_cov(report):
    return CovarianceData(report.Q.index_set, report.Q.coeffs)


def cmd_gradcheck(cfg: RunConfig) -> int:
    grid = cfg.grid()
    ix = cfg.index_set()
    nu = cfg.resolve_nu()
    psi = _build_prior(cfg.prior, grid, cfg.m)
    sigma = random_coercive_density(cfg.seed, grid, cfg.m, cfg.a, cfg.b).moments(ix)
    rows = gradcheck(sigma, psi, nu, grid, n_points=cfg.points, step=cfg.step, seed=cfg.seed)
    print(f"{'point':>5} {'|grad|':>12} {'max abs err':>12} {'rel err':>12}")
    for r in rows:
        print(f"{r.point:5d} {r.grad_norm:12.4e} {r.max_abs_error:12.4e} {r.rel_error:12.4e}")
    worst = max(r.rel_error for r in rows)
    ok = worst <= cfg.threshold
    print(f"nu={nu} step={cfg.step:g} max relative error {worst:.3e} -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_divergence(path_a: str, path_b: str, tau: Optional[float], nu: Optional[int]) -> int:
    ga, sa = io.read_grid(path_a)
    gb, sb = io.read_grid(path_b)
    if ga != gb or sa.shape != sb.shape:
        raise M2Error("grid files have different shapes")
    val = divergence(GridDensity(ga, sa), GridDensity(gb, sb), tau=tau, nu=nu)
    print(f"{val:.12g}")
    return EXIT_OK


def cmd_verify(cov_path: str, density_path: str, tol: float) -> int:
    sigma, _ = io.read_covariance(cov_path)
    grid, samples = io.read_grid(density_path)
    grid.check_resolves(sigma.index_set)
    res, worst = moment_residual(GridDensity(grid, samples), sigma, grid)
    for k, r in zip(sigma.index_set.indices.tolist(), res):
        print(f"{str(k):>16} {r:.3e}")
    ok = worst <= tol
    print(f"max residual {worst:.3e} -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def _add_config_flags(p: argparse.ArgumentParser, names) -> None:
    types = {f.name: f.type for f in fields(RunConfig)}
    for name in names:
        typ = {"int": int, "float": float, "str": str}[types[name]]
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


_PROBLEM = ("d", "m", "N", "K", "seed")
_SOLVER = ("nu", "prior", "tol_grad", "max_iters", "interior_margin", "norm_cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="m2spec", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate covariance data and a ground-truth density")
    _add_config_flags(p, _PROBLEM + ("truth", "a", "b", "mode", "realizations"))
    p.add_argument("--out-cov", required=True)
    p.add_argument("--out-truth")

    p = sub.add_parser("estimate", help="solve the dual problem and write the estimated density")
    _add_config_flags(p, ("N",) + _SOLVER)
    p.add_argument("--cov", required=True)
    p.add_argument("--out-report")
    p.add_argument("--out-density")

    p = sub.add_parser("gradcheck", help="compare the dual gradient with finite differences")
    _add_config_flags(p, _PROBLEM + _SOLVER[:2] + ("a", "b", "points", "step", "threshold"))

    p = sub.add_parser("divergence", help="divergence between two grid density files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--tau", type=float)
    grp.add_argument("--nu", type=int)

    p = sub.add_parser("verify", help="check a density file against covariance data")
    p.add_argument("--cov", required=True)
    p.add_argument("--density", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig()
    explicit = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise M2Error(f"unknown config keys: {sorted(unknown)}")
        explicit.update(data)
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            explicit[f.name] = val
    for k, v in explicit.items():
        setattr(cfg, k, v)
    if args.command == "estimate" and "N" not in explicit:
        cfg.N = None
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        if args.command == "synth":
            return cmd_synth(cfg, args.out_cov, args.out_truth)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.cov, args.out_report, args.out_density)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg)
        if args.command == "divergence":
            return cmd_divergence(args.file_a, args.file_b, args.tau, args.nu)
        if args.command == "verify":
            return cmd_verify(args.cov, args.density, args.tol)
    except (M2Error, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
