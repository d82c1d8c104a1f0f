"""Command-line entry point: ``nodal-nehari {solve,seed,verify,sweep}``."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import ClassVar

import numpy as np

from .energy import ComponentFiber, functional
from .errors import (CertificationFailed, MaxIterExceeded, NodalNehariError, NoPositiveAnnulus,
                     NoProjection, NoT0)
from .grid import MIN_NODES, make_grid
from .invariants import run_all
from .model import from_name
from .poisson import injected_sign_flip, solve_poisson
from .seed import admissibility_ratio, appendix_seed, positive_ground_state
from .solver import certify, solve

log = logging.getLogger("nodal_nehari")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_MAX_ITER = 3
EXIT_CERT = 4
EXIT_NUMERIC = 5

# failures that mean "this lambda is out of reach", not "the numerics broke"
INPUT_ERRORS = (NoProjection, NoPositiveAnnulus, NoT0)


@dataclass
class RunConfig:
    lam: float = 0.1
    nl: str = "asymcubic"
    R_max: float = 30.0
    N: int = 4096
    tol: float = 1e-7
    max_iter: int = 2000
    seed_rng: int = 0
    starts: int = 1
    output_dir: str = "out"
    jobs: int = 1

    _KEYS: ClassVar[dict] = {"lambda": "lam"}

    def validate(self) -> "RunConfig":
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lambda must be a finite number >= 0, got {self.lam!r}")
        if not (math.isfinite(self.R_max) and self.R_max > 0):
            raise ValueError(f"R_max must be positive, got {self.R_max!r} (try --rmax 30)")
        if int(self.N) != self.N or self.N < MIN_NODES:
            raise ValueError(f"N must be an integer >= {MIN_NODES}, got {self.N!r} (try --n 4096)")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        for name in ("max_iter", "starts", "jobs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)!r}")
        from_name(self.nl)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            k = cls._KEYS.get(k, k)
            if k not in names:
                raise ValueError(f"unknown config key {k!r}")
            kw[k] = v
        return cls(**kw)

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return format(x, ".17g")
        return json.dumps(repr(x))
    if isinstance(x, str):
        return json.dumps(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 0) -> str:
    """JSON with every float at 17 significant digits and sorted keys."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}"
                 for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(dumps(v, indent + 1) for v in obj) + "]"
    return _fmt(obj)


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(x if isinstance(x, str) else format(float(x), ".17g")
                              for x in row) + "\n")


def write_solution(out: Path, report, nl, lam, certificate=None, status="ok") -> None:
    out.mkdir(parents=True, exist_ok=True)
    d = report.minimizer
    u = d.u
    body = report.to_dict()
    body["status"] = status
    if certificate is not None:
        body["certificate"] = certificate
    (out / "report.json").write_text(dumps(body) + "\n")
    r = u.grid.nodes
    _write_csv(out / "profile.csv", "r,u,u_plus,u_minus",
               zip(r, u.values, d.u_plus.values, d.u_minus.values))
    _write_csv(out / "phi.csv", "r,phi", zip(r, solve_poisson(u).phi.values))
    fiber = ComponentFiber.from_fields([d.u_plus, d.u_minus], nl, lam)
    ts = np.linspace(0.5, 1.5, 21)
    rows = []
    for s in ts:
        for t in ts:
            gp, gm = fiber.partials([s, t])
            rows.append((s, t, fiber.energy([s, t]), gp / s, gm / t))
    _write_csv(out / "fiber.csv", "s,t,I,gamma_plus,gamma_minus", rows)
    _write_csv(out / "iterations.csv", "iter,I,residual,alpha,beta", report.history)


def write_seed(out: Path, art) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "seed_manifest.json").write_text(dumps(art.manifest()) + "\n")
    art.u_frak.to_csv(out / "u_frak.csv")
    art.nu.to_csv(out / "nu.csv")
    art.eta.to_csv(out / "eta.csv")
    if art.base_element is not None:
        art.base_element.u.to_csv(out / "seed_element.csv")


# -------------------------------------------------------------- commands


def _input_error(err: Exception, cfg: RunConfig) -> int:
    print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
    if cfg.lam > 0:
        print(f"hint: the nonlocal term is too strong; try --lambda {cfg.lam / 2:.6g}",
              file=sys.stderr)
    return EXIT_INPUT


def cmd_solve(cfg: RunConfig) -> int:
    nl = from_name(cfg.nl)
    grid = make_grid(cfg.R_max, cfg.N)
    out = Path(cfg.output_dir)
    try:
        art = appendix_seed(nl, cfg.lam, grid)
        write_seed(out, art)
        report, _ = solve(nl, cfg.lam, grid, cfg.tol, cfg.max_iter, cfg.starts, cfg.seed_rng,
                          artifacts=art)
    except INPUT_ERRORS as err:
        return _input_error(err, cfg)
    except MaxIterExceeded as err:
        write_solution(out, err.report, nl, cfg.lam, status="MaxIterExceeded")
        print(f"error: {err}", file=sys.stderr)
        return EXIT_MAX_ITER
    except NodalNehariError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        cert = certify(report, nl, cfg.lam, cfg.tol)
    except CertificationFailed as err:
        write_solution(out, report, nl, cfg.lam, err.context.get("certificate"),
                       status=f"CertificationFailed:{err.clause}")
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CERT
    write_solution(out, report, nl, cfg.lam, cert)
    print(f"c_nodal={report.c_nodal:.12g} c_ground={report.c_ground:.12g} "
          f"residual={report.residual:.3e} sign_changes={report.sign_changes}")
    return EXIT_OK


def cmd_seed(cfg: RunConfig) -> int:
    nl = from_name(cfg.nl)
    grid = make_grid(cfg.R_max, cfg.N)
    try:
        art = appendix_seed(nl, cfg.lam, grid)
    except INPUT_ERRORS as err:
        return _input_error(err, cfg)
    except NodalNehariError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    write_seed(Path(cfg.output_dir), art)
    print(f"T0={art.T0:.6g} r=({art.r1:.6g}, {art.r2:.6g}, {art.r3:.6g}, {art.r4:.6g}) "
          f"seed energy={art.seed_element.energy:.12g}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, fault: str | None = None) -> int:
    grid = make_grid(cfg.R_max, cfg.N)
    ctx = injected_sign_flip() if fault == "sign-flip" else contextlib.nullcontext()
    with ctx:
        results = run_all(grid, from_name(cfg.nl), cfg.lam, cfg.seed_rng)
    failed = []
    for res in results:
        print(res.line())
        if not res.passed and res.structural:
            failed.append(res.name)
    if failed:
        print("failed invariants: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def sweep_row(cfg: RunConfig, lam: float) -> tuple:
    """One row ``(lambda, c_ground, c_nodal, ratio, status)``; never raises on numerics."""
    nl = from_name(cfg.nl)
    grid = make_grid(cfg.R_max, cfg.N)
    c_ground = c_nodal = ratio = float("nan")
    try:
        u = positive_ground_state(nl, lam, grid)
        c_ground = functional(u, nl, lam)
        ratio = admissibility_ratio(u)
        art = appendix_seed(nl, lam, grid, u_frak=u)
        report, _ = solve(nl, lam, grid, cfg.tol, cfg.max_iter, cfg.starts, cfg.seed_rng,
                          artifacts=art)
        c_nodal = report.c_nodal
        certify(report, nl, lam, cfg.tol)
        status = "ok"
    except NoProjection:
        status = "NoProjection"
    except CertificationFailed as err:
        status = f"CertificationFailed:{err.clause}"
    except MaxIterExceeded as err:
        c_nodal = err.report.c_nodal
        status = "MaxIterExceeded"
    except NodalNehariError as err:
        status = type(err).__name__
    return (lam, c_ground, c_nodal, ratio, status)


def cmd_sweep(cfg: RunConfig, lambdas) -> int:
    lambdas = [float(x) for x in lambdas]
    if len(lambdas) < 2 or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("the lambda grid must be strictly increasing with at least 2 points")
    if lambdas[0] < 0:
        raise ValueError("lambda values must be non-negative")
    if cfg.jobs == 1:
        rows = [sweep_row(cfg, lam) for lam in lambdas]
    else:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(sweep_row, [cfg] * len(lambdas), lambdas))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "sweep.csv", "lambda,c_ground,c_nodal,ratio,status", rows)
    for row in rows:
        print(f"lambda={row[0]:<10.6g} status={row[4]}")
    return EXIT_OK


# ------------------------------------------------------------------ main


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--nl", help="asymcubic or power:<p>")
    common.add_argument("--rmax", dest="R_max", type=float)
    common.add_argument("--n", dest="N", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--seed-rng", dest="seed_rng", type=int)
    common.add_argument("--starts", type=int, help="multi-start count (perturbed seeds)")
    common.add_argument("--out", dest="output_dir")
    common.add_argument("--config", help="flat JSON file; flags override it")
    common.add_argument("--trace", action="store_true", help="log progress to stderr")
    p = argparse.ArgumentParser(prog="nodal-nehari",
                                description="Least-energy nodal solutions of a radial "
                                            "Schroedinger-Poisson system.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="seed, minimise and certify")
    sub.add_parser("seed", parents=[common], help="build the two-scale seed only")
    v = sub.add_parser("verify", parents=[common], help="run the invariant suites")
    v.add_argument("--inject-fault", choices=["sign-flip"], help=argparse.SUPPRESS)
    s = sub.add_parser("sweep", parents=[common], help="solve over a lambda grid")
    s.add_argument("--lambdas", required=True, help="comma-separated increasing values")
    return p


def build_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    cfg = RunConfig.from_dict(base)
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    return cfg.validate()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = os.environ.get("NODAL_NEHARI_LOG", "INFO" if args.trace else "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "seed":
            return cmd_seed(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.inject_fault)
        return cmd_sweep(cfg, args.lambdas.split(","))
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
