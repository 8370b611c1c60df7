"""Batch experiment runner: ``wfstein <subcommand> --config FILE [--out DIR] [--plots]``.

Exit status: 0 when every contract in the produced reports holds, 1 on a
contract failure, 2 on a malformed or invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import czfs, extrapolation, operators, pdecheck
from .balls import BallFamily
from .errors import ArgumentError, WfsError
from .lattice import Domain, build_lattice, validate_lattice
from .reports import RatioReport, write_csv, write_json
from .suites import bump_suite, trig_suite
from .weights import ap_characteristic, weight_from_json


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainCfg(Strict):
    kind: Literal["euclidean_box", "euclidean_torus", "parabolic_box", "half_space_box"]
    d: int = Field(ge=1)
    extents: list[tuple[float, float]]
    points: list[int]
    m: int = 1
    periodic: Optional[bool] = None

    def build(self, points=None) -> Domain:
        return Domain(self.kind, self.d, tuple(self.extents), tuple(points or self.points),
                      m=self.m, periodic=self.periodic)


class WeightCfg(Strict):
    structure: Literal["unit", "plain", "power", "product"] = "unit"
    axis: Optional[int] = None
    exponent: Optional[float] = None
    offset: Optional[float] = None
    split: Optional[list[int]] = None
    w1: Optional["WeightCfg"] = None
    w2: Optional["WeightCfg"] = None

    def build(self, domain: Domain):
        return weight_from_json(self.model_dump(exclude_none=True), domain)


class FamilyCfg(Strict):
    r0: Optional[float] = None
    stride: int = 1

    def build(self, domain: Domain, lat=None) -> BallFamily:
        r0 = self.r0
        if r0 is None and lat is not None:
            # just above the circumscribed radius of the finest cube
            finest = lat.block(lat.n_max)
            r0 = float(domain.distance([b * h / 2 for b, h in zip(finest, domain.spacing)])) * 1.0001
        return BallFamily.covering(domain, r0, self.stride)


WeightCfg.model_rebuild()


class SuiteCfg(Strict):
    kind: Literal["bump", "trig"] = "bump"
    count: int = Field(ge=1)
    seed: int = 0
    modes: int = 6
    center: Optional[list[float]] = None
    radius: Optional[float] = None
    mean_zero: bool = False
    constant: float = 0.0

    def build(self, domain: Domain) -> list:
        if self.kind == "trig":
            return trig_suite(domain, self.count, self.seed, self.modes, self.constant)
        suite = bump_suite(domain, self.count, self.seed, self.center, self.radius, self.modes,
                           self.mean_zero)
        if self.constant:
            suite = [f.like(f.values + self.constant) for f in suite]
        return suite

    @property
    def seeds(self) -> list:
        return [self.seed * 100000 + i for i in range(self.count)]


class LatticeValidateCfg(Strict):
    domain: DomainCfg
    n_min: int = 0
    n_max: int


class ApConstantCfg(Strict):
    domain: DomainCfg
    weight: WeightCfg = WeightCfg()
    p: float = Field(gt=1)
    family: FamilyCfg = FamilyCfg()


class MaximalBoundCfg(Strict):
    domain: DomainCfg
    weight: WeightCfg = WeightCfg()
    p: float = Field(gt=1)
    family: FamilyCfg = FamilyCfg()
    suite: SuiteCfg
    refined_points: Optional[list[int]] = None
    stability_limit: float = 1.25


class FsCheckCfg(Strict):
    domain: DomainCfg
    weight: WeightCfg = WeightCfg()
    p: float = Field(gt=1)
    q: Optional[float] = None
    split: Optional[list[int]] = None
    regime: Literal["finite_measure", "infinite_measure", "small_support"]
    eps: Optional[float] = None
    suite: SuiteCfg
    coarse_points: Optional[list[int]] = None
    stability_limit: float = 1.25


class LevelsetCfg(Strict):
    domain: DomainCfg
    weight: WeightCfg = WeightCfg()
    p: float = Field(gt=1)
    regime: Literal["finite_measure", "infinite_measure"] = "infinite_measure"
    lambdas: list[float]
    suite: SuiteCfg


class GfsCheckCfg(LevelsetCfg):
    pass


class ExtrapolateCfg(Strict):
    domain: DomainCfg
    weight: WeightCfg = WeightCfg()
    p0: float = Field(gt=1)
    p: float = Field(gt=1)
    K_terms: int = Field(default=40, ge=1)
    family: FamilyCfg = FamilyCfg()
    suite: SuiteCfg
    certificate: Literal["identity", "average", "maximal"] = "maximal"
    level: int = 4


class PdeRatioCfg(Strict):
    m: int = 1
    d: int = 1
    delta: float = 0.2
    lambdas: list[float] = [16.0, 64.0, 256.0]
    p: float = 2.0
    q: float = 2.0
    split: list[int] = [1]
    weight_exponent: float = 0.0
    count: int = Field(default=10, ge=1)
    modes: int = 4
    seed: int = 0
    backend: Literal["spectral", "central2"] = "spectral"
    pieces: int = 64
    coefficient: Literal["rough", "smooth", "constant"] = "rough"
    coefficient_axis: Literal["x1", "t"] = "x1"
    form: Literal["time_derivative", "nondivergence"] = "nondivergence"
    points: list[int] = [64, 64]
    extents: list[tuple[float, float]] = [(0.0, 1.0), (-1.0, 1.0)]
    spread_limit: float = 3.0


# -- commands ------------------------------------------------------------------

def _lattice_validate(cfg: LatticeValidateCfg, out: Path, plots: bool) -> bool:
    lat = build_lattice(cfg.domain.build(), cfg.n_min, cfg.n_max)
    rep = validate_lattice(lat)
    rows = [[name, ok, rep.details.get(name, "")] for name, ok in sorted(rep.checks.items())]
    write_csv(out / "lattice-validate.csv", ["check", "passed", "detail"], rows)
    doc = {"passed": rep.passed, "n1": lat.N1}
    for level, vals in sorted(rep.measured_ratios.items()):
        if vals:
            doc[f"measure_ratio_min_level_{level}"] = min(vals)
            doc[f"measure_ratio_max_level_{level}"] = max(vals)
    write_json(out / "lattice-validate.json", doc)
    return rep.passed


def _ap_constant(cfg: ApConstantCfg, out: Path, plots: bool) -> bool:
    dom = cfg.domain.build()
    w = cfg.weight.build(dom)
    fam = cfg.family.build(dom)
    ap = ap_characteristic(w, cfg.p, fam)
    per_radius = [[r, ap_characteristic(w, cfg.p, BallFamily(dom, (r,), fam.stride))] for r in fam.radii]
    write_csv(out / "ap-constant.csv", ["radius", "ap"], per_radius)
    write_json(out / "ap-constant.json", {"ap": ap, "p": cfg.p, "passed": bool(np.isfinite(ap))})
    if plots:
        from .plotting import line_plot
        line_plot(out / "ap-constant.svg", {"A_p": ([r for r, _ in per_radius], [a for _, a in per_radius])},
                  "radius", "A_p over balls of this radius", "A_p characteristic by radius", logx=True)
    return bool(np.isfinite(ap))


def _write_report(out: Path, name: str, rep: RatioReport, extra_summary=None):
    write_csv(out / f"{name}.csv", rep.header(), rep.rows())
    doc = rep.summary()
    if rep.seeds:
        doc["seed_min"], doc["seed_max"] = min(rep.seeds), max(rep.seeds)
    if extra_summary:
        doc.update(extra_summary)
    write_json(out / f"{name}.json", flatten(doc))


def flatten(doc: dict, prefix: str = "") -> dict:
    """Nested dicts become ``outer_inner`` keys so summaries stay flat."""
    out = {}
    for key, val in doc.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(flatten(val, name + "_"))
        else:
            out[name] = val
    return out


def _maximal_bound(cfg: MaximalBoundCfg, out: Path, plots: bool) -> bool:
    reports = []
    grids = [cfg.domain.points] + ([cfg.refined_points] if cfg.refined_points else [])
    for pts in grids:
        dom = cfg.domain.build(pts)
        w = cfg.weight.build(dom)
        fam = cfg.family.build(dom)
        reports.append(operators.check_hl_bound(cfg.suite.build(dom), w, cfg.p, fam, cfg.suite.seeds))
    rep = reports[0]
    if len(reports) > 1:
        from .reports import refinement_stability
        rep.stability = refinement_stability(reports[0], reports[1])
        rep.stability_limit = cfg.stability_limit
        rep.meta["sup_ratio_refined"] = reports[1].sup_ratio
    _write_report(out, "maximal-bound", rep)
    if plots:
        _plot_refinement(out / "maximal-bound.svg", grids, [r.sup_ratio for r in reports])
    return rep.passed


def _plot_refinement(path, grids, sups):
    from .plotting import line_plot
    cells = [int(np.prod(g)) for g in grids]
    line_plot(path, {"sup ratio": (cells, sups)}, "grid cells", "sup ratio",
              "ratio against refinement", logx=True)


def _fs_check(cfg: FsCheckCfg, out: Path, plots: bool) -> bool:
    def run(pts):
        dom = cfg.domain.build(pts)
        lat = build_lattice(dom, 0, _full_depth(dom))
        return cfg.suite.build(dom), (None if cfg.weight.structure == "unit" else cfg.weight.build(dom)), lat

    suite, w, lat = run(cfg.domain.points)
    refined = None
    if cfg.coarse_points:
        # stability is judged from the coarse grid to the configured grid
        refined = (suite, w, lat)
        suite, w, lat = run(cfg.coarse_points)
    rep = czfs.fefferman_stein_check(suite, w, cfg.p, lat, cfg.regime, q=cfg.q, split=cfg.split,
                                     eps=cfg.eps, refined=refined,
                                     stability_limit=cfg.stability_limit, seeds=cfg.suite.seeds)
    _write_report(out, "fs-check", rep)
    if plots and cfg.coarse_points:
        _plot_refinement(out / "fs-check.svg", [cfg.coarse_points, cfg.domain.points],
                         [rep.sup_ratio, rep.meta["sup_ratio_refined"]])
    return rep.passed


def _full_depth(dom: Domain) -> int:
    r = dom.refine_exponents()
    n = 0
    while all(p % 2 ** ((n + 1) * e) == 0 for p, e in zip(dom.points, r)):
        n += 1
    return n


def _levelset_setup(cfg: LevelsetCfg):
    dom = cfg.domain.build()
    lat = build_lattice(dom, 0, _full_depth(dom))
    w = cfg.weight.build(dom)
    suite = cfg.suite.build(dom)
    fit = czfs.fit_levelset(suite, w, cfg.p, lat, cfg.lambdas, regime=cfg.regime)
    return dom, lat, w, suite, fit


def _levelset(cfg: LevelsetCfg, out: Path, plots: bool) -> bool:
    _, lat, w, suite, fit = _levelset_setup(cfg)
    ratios, passes, consts = [], [], []
    curves = {}
    for i, f in enumerate(suite):
        r = czfs.level_set_check(f, w, cfg.p, lat, cfg.lambdas, fit, regime=cfg.regime)
        ratios.append(max((a / b if b > 0 else (0.0 if a == 0 else np.inf))
                          for a, b in zip(r.lhs, r.rhs)))
        passes.append(sum(r.passes))
        consts.append(r.N)
        if i < 4:
            curves[f"member {i}"] = (r.lambdas, [a / b if b > 0 else 0.0 for a, b in zip(r.lhs, r.rhs)])
    rep = RatioReport("levelset", seeds=cfg.suite.seeds, ratios=ratios, bound=1.0 + 1e-12,
                      extra={"lambda_pass_count": passes},
                      regime=cfg.regime,
                      meta={"beta": fit.beta, "N": max(consts), "N_fit": fit.N, "pairs": fit.pairs,
                            "all_pass": all(p == len(cfg.lambdas) for p in passes)})
    rep.meta["contract_ok"] = rep.meta["all_pass"]
    _write_report(out, "levelset", rep)
    if plots:
        from .plotting import line_plot
        line_plot(out / "levelset.svg", curves, "lambda", "lhs / rhs", "level-set ratio against lambda",
                  logx=True)
    return rep.passed


def _gfs_check(cfg: GfsCheckCfg, out: Path, plots: bool) -> bool:
    dom, lat, w, suite, fit = _levelset_setup(cfg)
    beta = fit.beta
    gfs, fs, rel = [], [], []
    regime = cfg.regime
    for f in suite:
        a = f.like(np.abs(f.values))
        g = f.like(2 * operators.dyadic_sharp_array(f.values, lat))
        r = czfs.generalized_fs_check(f, a, g, czfs.provider_sharp(f), w, cfg.p, lat, beta, regime)
        plain = czfs.fefferman_stein_check([f], w, cfg.p, lat, "infinite_measure")
        gfs.append(r.sup_ratio)
        fs.append(plain.sup_ratio)
        if regime == "infinite_measure":
            rel.append(abs(2 * r.sup_ratio ** (1 / beta) - plain.sup_ratio) / plain.sup_ratio)
    worst = max(rel) if rel else 0.0
    rep = RatioReport("gfs", seeds=cfg.suite.seeds, ratios=gfs, regime=regime,
                      extra={"fs_ratio": fs},
                      meta={"beta": beta, "special_case_rel_error": worst,
                            "contract_ok": worst <= 1e-9})
    _write_report(out, "gfs-check", rep)
    return rep.passed


def _extrapolate(cfg: ExtrapolateCfg, out: Path, plots: bool) -> bool:
    dom = cfg.domain.build()
    w = cfg.weight.build(dom)
    lat = build_lattice(dom, 0, _full_depth(dom))
    fam = cfg.family.build(dom, lat)
    suite = cfg.suite.build(dom)
    N0 = None
    if cfg.certificate == "maximal":
        pairs = extrapolation.maximal_pairs(suite, fam)
    elif cfg.certificate == "average":
        pairs = extrapolation.averaging_pairs(suite, lat, cfg.level)
    else:
        pairs = [(f, f) for f in suite]
    rdf = extrapolation.calibrate_config(pairs, w, cfg.p0, cfg.p, fam, cfg.K_terms)
    if cfg.certificate == "average":
        N0 = extrapolation.averaging_constant(lat, fam, rdf.lambda0, cfg.p0)
    rep = extrapolation.transfer_check(pairs, w, rdf, fam, cfg.certificate, N0=N0, seeds=cfg.suite.seeds)
    rep.meta.update(rdf.to_json())
    _write_report(out, "extrapolate", rep)
    return rep.passed


def _pde_ratio(cfg: PdeRatioCfg, out: Path, plots: bool) -> bool:
    ec = pdecheck.EstimateConfig(**{**cfg.model_dump(), "lambdas": tuple(cfg.lambdas),
                                    "split": tuple(cfg.split), "points": tuple(cfg.points),
                                    "extents": tuple(tuple(e) for e in cfg.extents)})
    rep = pdecheck.estimate_suite(ec)
    rep.seeds = [cfg.seed * 100000 + s for s in rep.seeds]
    _write_report(out, "pde-ratio", rep)
    if plots:
        from .plotting import line_plot
        sup = rep.meta["sup_by_lambda"]
        lams = sorted(float(k) for k in sup)
        line_plot(out / "pde-ratio.svg", {cfg.coefficient: (lams, [sup[pdecheck.fmt_key(x)] for x in lams])},
                  "lambda", "sup ratio", "a priori ratio against lambda", logx=True)
    return rep.passed


COMMANDS = {
    "lattice-validate": (LatticeValidateCfg, _lattice_validate),
    "ap-constant": (ApConstantCfg, _ap_constant),
    "maximal-bound": (MaximalBoundCfg, _maximal_bound),
    "fs-check": (FsCheckCfg, _fs_check),
    "gfs-check": (GfsCheckCfg, _gfs_check),
    "levelset": (LevelsetCfg, _levelset),
    "extrapolate": (ExtrapolateCfg, _extrapolate),
    "pde-ratio": (PdeRatioCfg, _pde_ratio),
}


def run(config_path, command: str, out_dir="out", plots: bool = False) -> int:
    if command not in COMMANDS:
        print(f"unknown subcommand {command!r}", file=sys.stderr)
        return 2
    model, fn = COMMANDS[command]
    try:
        with open(config_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        cfg = model.model_validate(doc)
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        ok = fn(cfg, out, plots)
    except ArgumentError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except WfsError as exc:
        print(f"contract failure: {exc}", file=sys.stderr)
        return 1
    if not ok:
        print(f"contract failure: see {out / (command + '.json')}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wfstein", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default="out")
    parser.add_argument("--plots", action="store_true")
    args = parser.parse_args(argv)
    return run(args.config, args.command, args.out, args.plots)


if __name__ == "__main__":
    sys.exit(main())
