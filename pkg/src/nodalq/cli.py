"""Command-line front end.

    nodalq check-a --a-sq sqrt(2) --max-den 1000000
    nodalq lattice --a 1.189 --max-norm 12
    nodalq spectrum --a 1.189 --potential bump.json --cutoff 20 --match 2,3
    nodalq perturb --a 1.189 --potential bump.json --indices good --cutoff 24
    nodalq nodal --a 1.189 --potential bump.json --index 2,3 --grid 128x192
    nodalq lambda1 --mask omega.json --hx 0.01 --hy 0.01
    nodalq reconstruct --a 1.189 --potential bump.json --max-norm 8 --out samples.csv
    nodalq sweep --a 1.189 --potential bump.json --max-norm 12 --out samples.csv

Every option may also come from ``--config run.json``; flags given on the
command line win. Exit codes: 0 success, 2 bad configuration or input,
3 numerical non-convergence, 4 resource cap.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import serialize
from .domain_eig import lambda1
from .lattice import (DomainError, GoodIndexCriteria, LatticeIndex, RectangleSpec, check_admissible,
                      classify_indices, select_good_indices)
from .nodal import build_approx_domain, build_frames, nodal_domains, sign_field
from .nodal import EmptyFrame, MarginTooLarge, SignChangeInOmega1
from .perturbation import first_order_correction, theorem1_report
from .potentials import PrecisionError, Potential, zero_potential
from .reconstruct import CSV_COLUMNS, GridPolicy, galerkin_for, probe_points, sweep
from .spectral import (NoDominantMode, NonConvergence, ResourceError, assemble, eigensolve,
                       evaluate_eigenfunction, match_eigenpair)

log = logging.getLogger("nodalq")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_RESOURCE = 0, 2, 3, 4

COMMANDS = ("check-a", "lattice", "spectrum", "perturb", "nodal", "lambda1", "reconstruct", "sweep")


class ConfigError(DomainError):
    pass


@dataclasses.dataclass
class RunConfig:
    a: Optional[float] = None
    a_sq: Optional[str] = None
    potential: Optional[str] = None
    cutoff: Optional[float] = None
    max_norm: float = 12.0
    min_norm: float = 0.0
    # grid policy
    per_cell: int = 32
    per_unit_norm: float = 0.0
    max_axis: int = 4096
    zero_tol: Optional[float] = None
    reference: str = "discrete"
    boundary: str = "interpolated"
    lambda_tol: float = 1e-10
    # good-index criteria
    min_gap_exponent: float = -15.0 / 16.0
    gap_constant: float = 2.0
    comparability_c: float = 0.3
    # command specific
    max_den: int = 1_000_000
    match: Optional[str] = None
    indices: str = "good"
    index: Optional[str] = None
    grid: Optional[str] = None
    mask: Optional[str] = None
    hx: Optional[float] = None
    hy: Optional[float] = None
    tol: float = 1e-10
    probes: int = 64
    seed: Optional[int] = None
    sparse_ratio: float = 1.15
    # outputs
    out: Optional[str] = None
    coverage: Optional[str] = None
    field_out: Optional[str] = None
    field_format: str = "csv"
    pgm_dir: Optional[str] = None
    threads: int = 1

    POSITIVE = ("a", "cutoff", "max_norm", "per_cell", "max_axis", "lambda_tol", "gap_constant",
                "max_den", "hx", "hy", "tol", "probes", "threads", "sparse_ratio")

    def validate(self) -> "RunConfig":
        for name in self.POSITIVE:
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.min_norm < 0:
            raise ConfigError("min_norm must be non-negative")
        if self.field_format not in ("csv", "bin"):
            raise ConfigError("field_format must be 'csv' or 'bin'")
        return self

    def rect(self) -> RectangleSpec:
        if (self.a is None) == (self.a_sq is None):
            raise ConfigError("give exactly one of a and a_sq")
        if self.a is not None:
            return RectangleSpec(float(self.a))
        from .lattice import parse_real
        x, _ = parse_real(self.a_sq)
        return RectangleSpec.from_a_sq(float(x))

    def policy(self) -> GridPolicy:
        return GridPolicy(per_cell=self.per_cell, per_unit_norm=self.per_unit_norm,
                          max_axis=self.max_axis, zero_tol=self.zero_tol, reference=self.reference,
                          boundary=self.boundary, lambda_tol=self.lambda_tol)

    def criteria(self) -> GoodIndexCriteria:
        return GoodIndexCriteria(self.min_gap_exponent, self.gap_constant, self.comparability_c,
                                 self.max_norm)

    def load_potential(self, rect: RectangleSpec) -> Potential:
        if self.potential is None:
            raise ConfigError("this command needs --potential")
        doc = serialize.read_json(self.potential)
        if not isinstance(doc, dict):
            raise ConfigError("potential file must hold a JSON object")
        return Potential.from_dict(doc, a=rect.a)


CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    doc = serialize.read_json(path)
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    return doc


def parse_pair(text: str, sep: str = ",") -> tuple[int, int]:
    try:
        a, b = text.lower().split(sep)
        return int(a), int(b)
    except ValueError:
        raise ConfigError(f"expected two integers separated by {sep!r}, got {text!r}") from None


def parse_index_list(text: str) -> list[tuple[int, int]]:
    return [parse_pair(t) for t in text.replace(";", " ").split()]


def emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check_a(cfg: RunConfig) -> int:
    if cfg.a_sq is None and cfg.a is None:
        raise ConfigError("check-a needs --a-sq")
    value = cfg.a_sq if cfg.a_sq is not None else float(cfg.a) ** 2
    report = check_admissible(value, int(cfg.max_den))
    doc = report.to_dict()
    doc["input"] = str(value)
    emit(cfg, serialize.dumps_json(doc))
    return EXIT_OK


def cmd_lattice(cfg: RunConfig) -> int:
    rect = cfg.rect()
    rows = ({"n": g.index.n, "m": g.index.m, "norm_sq": g.index.norm_sq, "gap": g.gap,
             "good": int(g.good)} for g in classify_indices(rect, cfg.criteria()))
    emit(cfg, serialize.csv_text(("n", "m", "norm_sq", "gap", "good"), rows))
    return EXIT_OK


def _cutoff(cfg: RunConfig, norm: float) -> float:
    return cfg.cutoff if cfg.cutoff is not None else 2.0 * norm + 1e-9


def cmd_spectrum(cfg: RunConfig) -> int:
    rect = cfg.rect()
    pot = cfg.load_potential(rect)
    if cfg.cutoff is None:
        raise ConfigError("spectrum needs --cutoff")
    sys_ = assemble(rect, pot, cfg.cutoff)
    dec = eigensolve(sys_)
    wanted = parse_index_list(cfg.match) if cfg.match else [
        (b.n, b.m) for b in sys_.basis if b.norm <= cfg.cutoff / 2]
    pairs = []
    for n, m in wanted:
        al = LatticeIndex.make(rect, n, m)
        try:
            pr = match_eigenpair(sys_, dec, al)
        except NoDominantMode as exc:
            pairs.append({"n": n, "m": m, "status": "NoDominantMode", "detail": str(exc)})
            continue
        pairs.append({"n": n, "m": m, "lambda": pr.lam, "norm_sq": al.norm_sq, "gap": pr.gap,
                      "overlap": pr.overlap, "status": "ok"})
        if cfg.field_out and len(wanted) == 1:
            nx, ny = parse_pair(cfg.grid, "x") if cfg.grid else (16 * n, 16 * m)
            fld = evaluate_eigenfunction(pr, rect, (nx, ny))
            if cfg.field_format == "bin":
                serialize.write_field_binary(cfg.field_out, fld)
            else:
                serialize.write_field_csv(cfg.field_out, fld)
    doc = {"a": rect.a, "cutoff": cfg.cutoff, "basis_size": len(sys_.basis),
           "potential": pot.to_dict(), "pairs": pairs}
    emit(cfg, serialize.dumps_json(doc))
    return EXIT_OK


def cmd_perturb(cfg: RunConfig) -> int:
    rect = cfg.rect()
    pot = cfg.load_potential(rect)
    if cfg.indices.strip().lower() == "good":
        targets = [g.index for g in select_good_indices(rect, cfg.criteria())]
    else:
        targets = [LatticeIndex.make(rect, n, m) for n, m in parse_index_list(cfg.indices)]
    if not targets:
        raise ConfigError("no indices to process")
    top = max(t.norm for t in targets)
    sys_ = assemble(rect, pot, _cutoff(cfg, top))
    dec = eigensolve(sys_)
    rows = []
    for al in targets:
        pr = match_eigenpair(sys_, dec, al)
        rep = theorem1_report(pr, first_order_correction(sys_, al), rect)
        rows.append(rep.row())
    cols = ("n", "m", "norm", "correction_linf", "residual_linf", "deviation_linf",
            "bound_15_16", "bound_15_8", "corner_max", "nx", "ny")
    emit(cfg, serialize.csv_text(cols, rows))
    return EXIT_OK


def cmd_nodal(cfg: RunConfig) -> int:
    rect = cfg.rect()
    pot = cfg.load_potential(rect) if cfg.potential else zero_potential(rect)
    if cfg.index is None:
        raise ConfigError("nodal needs --index n,m")
    al = LatticeIndex.make(rect, *parse_pair(cfg.index))
    nx, ny = parse_pair(cfg.grid, "x") if cfg.grid else (al.n * cfg.per_cell, al.m * cfg.per_cell)
    sys_ = assemble(rect, pot, _cutoff(cfg, al.norm))
    pr = match_eigenpair(sys_, eigensolve(sys_), al)
    fld = evaluate_eigenfunction(pr, rect, (nx, ny))
    sf = sign_field(fld, cfg.zero_tol * float(np.max(np.abs(fld.values)))
                    if cfg.zero_tol is not None else None)
    comps = nodal_domains(sf)
    frames = []
    union = np.zeros(fld.shape, dtype=np.int64)
    for fr in build_frames(al, rect):
        entry = {"n1": fr.n1, "m1": fr.m1, "center": list(fr.center)}
        try:
            dom = build_approx_domain(sf, fr, comps)
        except (SignChangeInOmega1, EmptyFrame) as exc:
            entry["status"] = type(exc).__name__
            frames.append(entry)
            continue
        entry.update(status="ok", sign=dom.component_sign, nodes=dom.area_cells,
                     spills=dom.spills, mask=serialize.mask_to_rle(dom.mask, dom.offset))
        union[dom.full_mask(fld.shape)] = 1 + (dom.component_sign > 0)
        frames.append(entry)
    doc = {"n": al.n, "m": al.m, "grid": [nx, ny], "hx": fld.hx, "hy": fld.hy,
           "zero_tol": sf.zero_tol, "components": comps.count, "expected_components": al.n * al.m,
           "frames": frames}
    if cfg.pgm_dir:
        d = Path(cfg.pgm_dir)
        d.mkdir(parents=True, exist_ok=True)
        serialize.write_pgm(d / "signs.pgm", sf.signs.astype(np.int64) + 1, 2)
        serialize.write_pgm(d / "omega_prime.pgm", union, 2)
    emit(cfg, serialize.dumps_json(doc))
    return EXIT_OK


def cmd_lambda1(cfg: RunConfig) -> int:
    if cfg.mask is None or cfg.hx is None or cfg.hy is None:
        raise ConfigError("lambda1 needs --mask, --hx and --hy")
    mask, _ = serialize.rle_to_mask(serialize.read_json(cfg.mask))
    res = lambda1(mask, cfg.hx, cfg.hy, tol=cfg.tol)
    emit(cfg, serialize.dumps_json({"lambda1": res.lambda1, "iterations": res.iterations,
                                    "inner_iterations": res.inner_iterations,
                                    "nodes": int(mask.sum())}))
    return EXIT_OK


def _sweep(cfg: RunConfig):
    rect = cfg.rect()
    pot = cfg.load_potential(rect)
    system = galerkin_for(rect, pot, cfg.max_norm, cfg.cutoff)
    return rect, sweep(rect, pot, cfg.criteria(), cfg.policy(), threads=cfg.threads,
                       min_norm=cfg.min_norm, system=system)


def cmd_reconstruct(cfg: RunConfig) -> int:
    _, res = _sweep(cfg)
    emit(cfg, serialize.csv_text(CSV_COLUMNS, res.rows()))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    rect, res = _sweep(cfg)
    emit(cfg, serialize.csv_text(CSV_COLUMNS, res.rows()))
    probes = probe_points(rect, cfg.probes, cfg.seed)
    sparse = res.sparse_indices(cfg.sparse_ratio)
    doc = {
        "max_norm": cfg.max_norm,
        "coverage_radius": res.coverage(probes),
        "sparse_coverage_radius": res.coverage(probes, sparse),
        "sparse_indices": [[a.n, a.m] for a in sparse],
        "indices": len(res.indices),
        "samples": len(res.samples),
        "probes": len(probes),
        "seed": cfg.seed,
        "skipped": [{"n": s.index.n, "m": s.index.m, "n1": s.frame[0], "m1": s.frame[1],
                     "reason": s.reason} for s in sorted(
                         res.skipped, key=lambda s: (s.index.norm_sq, s.index.n, s.index.m) + s.frame)],
    }
    target = cfg.coverage or (str(Path(cfg.out).with_name("coverage.json")) if cfg.out else None)
    if target:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        serialize.write_json(target, doc)
    else:
        sys.stdout.write(serialize.dumps_json(doc))
    return EXIT_OK


HANDLERS = {
    "check-a": cmd_check_a, "lattice": cmd_lattice, "spectrum": cmd_spectrum,
    "perturb": cmd_perturb, "nodal": cmd_nodal, "lambda1": cmd_lambda1,
    "reconstruct": cmd_reconstruct, "sweep": cmd_sweep,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file with RunConfig keys")
    common.add_argument("--threads", type=int, default=S)
    common.add_argument("--verbose", "-v", action="store_true")
    common.add_argument("--out", default=S, help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=S)

    def geometry(p):
        p.add_argument("--a", type=float, default=S)
        p.add_argument("--a-sq", dest="a_sq", default=S)

    def grid_opts(p):
        p.add_argument("--per-cell", dest="per_cell", type=int, default=S)
        p.add_argument("--per-unit-norm", dest="per_unit_norm", type=float, default=S)
        p.add_argument("--max-axis", dest="max_axis", type=int, default=S)
        p.add_argument("--zero-tol", dest="zero_tol", type=float, default=S)
        p.add_argument("--reference", choices=("discrete", "continuum"), default=S)
        p.add_argument("--boundary", choices=("interpolated", "exclude"), default=S)

    def criteria_opts(p):
        p.add_argument("--max-norm", dest="max_norm", type=float, default=S)
        p.add_argument("--min-norm", dest="min_norm", type=float, default=S)
        p.add_argument("--gap-constant", dest="gap_constant", type=float, default=S)
        p.add_argument("--gap-exponent", dest="min_gap_exponent", type=float, default=S)
        p.add_argument("--comparability", dest="comparability_c", type=float, default=S)

    parser = argparse.ArgumentParser(prog="nodalq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-a", parents=[common], help="Diophantine screen for a^2")
    geometry(p)
    p.add_argument("--max-den", dest="max_den", type=int, default=S)

    p = sub.add_parser("lattice", parents=[common], help="index table with gaps and good flags")
    geometry(p)
    criteria_opts(p)

    p = sub.add_parser("spectrum", parents=[common], help="Galerkin eigenpairs")
    geometry(p)
    p.add_argument("--potential", default=S)
    p.add_argument("--cutoff", type=float, default=S)
    p.add_argument("--match", default=S, help="indices 'n,m n,m ...'")
    p.add_argument("--grid", default=S, help="NxM intervals for --field-out")
    p.add_argument("--field-out", dest="field_out", default=S)
    p.add_argument("--field-format", dest="field_format", choices=("csv", "bin"), default=S)

    p = sub.add_parser("perturb", parents=[common], help="first-order correction report")
    geometry(p)
    criteria_opts(p)
    p.add_argument("--potential", default=S)
    p.add_argument("--cutoff", type=float, default=S)
    p.add_argument("--indices", default=S, help="'good' or 'n,m n,m ...'")

    p = sub.add_parser("nodal", parents=[common], help="nodal domains and Omega' masks")
    geometry(p)
    grid_opts(p)
    p.add_argument("--potential", default=S)
    p.add_argument("--cutoff", type=float, default=S)
    p.add_argument("--index", default=S)
    p.add_argument("--grid", default=S, help="NxM intervals")
    p.add_argument("--pgm-dir", dest="pgm_dir", default=S)

    p = sub.add_parser("lambda1", parents=[common], help="first Dirichlet eigenvalue of a mask")
    p.add_argument("--mask", default=S)
    p.add_argument("--hx", type=float, default=S)
    p.add_argument("--hy", type=float, default=S)
    p.add_argument("--tol", type=float, default=S)

    for name, text in (("reconstruct", "q_hat samples over good indices"),
                       ("sweep", "samples plus coverage report")):
        p = sub.add_parser(name, parents=[common], help=text)
        geometry(p)
        grid_opts(p)
        criteria_opts(p)
        p.add_argument("--potential", default=S)
        p.add_argument("--cutoff", type=float, default=S)
        if name == "sweep":
            p.add_argument("--coverage", default=S, help="coverage JSON path")
            p.add_argument("--probes", type=int, default=S)
            p.add_argument("--sparse-ratio", dest="sparse_ratio", type=float, default=S)
    return parser


def make_config(ns: argparse.Namespace) -> RunConfig:
    values = load_config(ns.config)
    flags = {k: v for k, v in vars(ns).items() if k in CONFIG_KEYS}
    values.update(flags)
    if "a" in flags and "a_sq" not in flags:
        values.pop("a_sq", None)
    if "a_sq" in flags and "a" not in flags:
        values.pop("a", None)
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def run(command: str, cfg: RunConfig) -> int:
    # BLAS threads stay at one so results do not depend on the machine;
    # --threads only parallelises independent frames and indices
    with threadpool_limits(limits=1):
        return HANDLERS[command](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = make_config(ns)
        log.info("running %s", ns.command)
        return run(ns.command, cfg)
    except NonConvergence as exc:
        log.error("%s", exc)
        return EXIT_NONCONVERGENCE
    except ResourceError as exc:
        log.error("%s", exc)
        return EXIT_RESOURCE
    except (DomainError, PrecisionError, MarginTooLarge, NoDominantMode, OSError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
