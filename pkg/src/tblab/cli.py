"""Config-driven experiment runner: `tblab <subcommand> --config <path>`.

Flat key=value config files, one experiment per file. Exit codes:
0 every verdict PASS; 1 at least one FAIL (files still written); 2 bad
configuration or runtime error. TBLAB_THREADS caps worker threads; the
output bytes do not depend on it.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bmo import bmo_seminorm
from .grid import Cube, Grid, cube1, dyadic_family, load_sampled_csv
from .harness import (BFunc, GridSpec, bilinear_decomposition_check, builtin_b,
                      far_field_constancy, stein_bilinear_tb_test, stein_t1_test,
                      stein_tb_test, uniform_bmo_sweep, weak_boundedness_test)
from .kernels import check_regularity, check_size, gallery
from .paraaccretive import (b_to_def3_constant, build_uk, check_condition_B,
                            check_para_accretive, verify_uk)
from .quadrature import PvPolicy
from .util import fmt_float

SUBCOMMANDS = ("check-kernel", "bmo", "para-accretive", "uk-build", "stein",
               "wbp", "sweep-bmo", "far-field", "bilinear-decomp", "report")

KNOWN_KEYS = {
    "dimension", "grid.n", "grid.box_side", "grid.mode", "bump.M",
    "kernel.name", "kernel.params.lam", "kernel.params.lip_bound",
    "kernel.params.lam_trunc", "kernel.params.mu", "kernel.params.a_amp",
    "kernel.params.m_amp",
    "b0", "b1", "b2", "scales", "centers", "offsets",
    "policy.c_eps", "policy.tol_pv", "policy.convergence_check",
    "fit.slope_tol", "fit.uniformity_factor",
    "bmo.k_min", "bmo.k_max", "para.J", "para.N", "para.eps", "uk.k",
    "cube.center", "cube.side", "seed", "output.dir",
}

_K_PARAM_TYPES = {"lam": float, "lip_bound": float, "lam_trunc": float,
                  "mu": float, "a_amp": float, "m_amp": float}


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, path) -> "ExperimentConfig":
        raw = {}
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}")
        for ln, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {ln}: expected key = value, got {line!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in KNOWN_KEYS:
                raise ConfigError(f"line {ln}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"line {ln}: duplicate key {key!r}")
            raw[key] = val
        cfg = cls(raw=raw)
        cfg._validate()
        return cfg

    def _validate(self):
        if self.get_int("dimension", 1) != 1:
            raise ConfigError("experiments run in dimension 1")
        self.get_int("grid.n", 512)
        self.get_float("grid.box_side", 16.0)
        mode = self.raw.get("grid.mode", "")
        if mode and mode not in ("scaled", "fixed"):
            raise ConfigError(f"grid.mode must be scaled|fixed, got {mode!r}")
        self.get_int("bump.M", 2)
        self.get_int("policy.c_eps", 2)
        self.get_float("policy.tol_pv", 1e-2)
        self.get_float("fit.slope_tol", 0.07)
        self.get_float("fit.uniformity_factor", 2.0)
        self.get_int("seed", 1234)
        self.get_floats("scales", ())
        self.get_floats("centers", ())

    def get_int(self, key, default):
        try:
            return int(self.raw.get(key, default))
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self.raw[key]!r}")

    def get_float(self, key, default):
        try:
            return float(self.raw.get(key, default))
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.raw[key]!r}")

    def get_bool(self, key, default):
        v = self.raw.get(key, None)
        if v is None:
            return default
        if v.lower() in ("1", "true", "yes"):
            return True
        if v.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {v!r}")

    def get_floats(self, key, default):
        v = self.raw.get(key, None)
        if v is None:
            return tuple(default)
        try:
            return tuple(float(t) for t in v.split(",") if t.strip())
        except ValueError:
            raise ConfigError(f"{key} must be comma-separated numbers, got {v!r}")

    # assembled objects -----------------------------------------------------

    def grid_spec(self, n=512, box=16.0) -> GridSpec:
        return GridSpec(n=self.get_int("grid.n", n),
                        box_side=self.get_float("grid.box_side", box))

    def fixed_grid(self, n=512, box=16.0) -> Grid:
        gs = self.grid_spec(n, box)
        return Grid(box=cube1(0.0, gs.box_side), n=gs.n)

    def policy(self) -> PvPolicy:
        return PvPolicy(c_eps=self.get_int("policy.c_eps", 2),
                        convergence_check=self.get_bool("policy.convergence_check", True),
                        tol_pv=self.get_float("policy.tol_pv", 1e-2))

    def kernel(self):
        name = self.raw.get("kernel.name")
        if not name:
            raise ConfigError("kernel.name is required for this experiment")
        params = {}
        for key, val in self.raw.items():
            if key.startswith("kernel.params."):
                pname = key.split(".", 2)[2]
                params[pname] = _K_PARAM_TYPES.get(pname, float)(val)
        try:
            K = gallery(name, **params)
        except ValueError as e:
            raise ConfigError(str(e))
        mode = self.raw.get("grid.mode", "")
        if mode:
            object.__setattr__(K, "grid_mode", mode)
        return K

    def b_func(self, slot: str) -> BFunc:
        return ingest_b(self.raw.get(slot, "one"))

    def out_dir(self, override=None) -> Path:
        d = Path(override) if override else Path(self.raw.get("output.dir", "tblab-out"))
        d.mkdir(parents=True, exist_ok=True)
        return d


def ingest_b(spec: str) -> BFunc:
    """Builtin name or path to a grid-core CSV (fixed-grid use only)."""
    s = spec.strip()
    try:
        return builtin_b(s)
    except ValueError:
        pass
    p = Path(s)
    if not p.exists():
        raise ConfigError(f"b-function {s!r} is neither a builtin nor a CSV path")
    sf = load_sampled_csv(p, name=p.stem)
    b = BFunc(name=p.stem, rule=None)

    def sampled(grid, _sf=sf, _name=p.stem):
        if grid != _sf.grid:
            raise ValueError(
                f"b-function {_name!r} was ingested from CSV without a closed "
                f"form; it can only be used on its own grid")
        return _sf

    object.__setattr__(b, "sampled", sampled)
    return b


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _svg_plot(path: Path, rows, target: float, title: str) -> None:
    """Minimal static log2-log2 scatter with the target-slope reference line."""
    pts = [(np.log2(r.R), np.log2(r.value)) for r in rows if r.value > 0]
    width, height, pad = 480, 320, 40
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="16" font-size="12">{title}</text>']
    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x1 = x0 + 1
        if y1 == y0:
            y1 = y0 + 1

        def sx(x):
            return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

        def sy(y):
            return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

        xm = (x0 + x1) / 2.0
        ym = (y0 + y1) / 2.0
        parts.append(f'<line x1="{sx(x0):.2f}" y1="{sy(ym + target * (x0 - xm)):.2f}" '
                     f'x2="{sx(x1):.2f}" y2="{sy(ym + target * (x1 - xm)):.2f}" '
                     f'stroke="#888" stroke-dasharray="4 3"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="#1f77b4"/>')
        parts.append(f'<text x="{pad}" y="{height - 8}" font-size="10">'
                     f'log2 R from {x0:.3g} to {x1:.3g}; reference slope {target:g}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts))


def _summary(out: Path, lines) -> None:
    (out / "summary.txt").write_text("".join(f"{ln}\n" for ln in lines))


def _verdict_exit(verdicts) -> int:
    return 0 if all(v in ("PASS", "PASS-degenerate") for v in verdicts) else 1


# --- subcommand implementations ---------------------------------------------

def _cmd_check_kernel(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel()
    seed = cfg.get_int("seed", 1234)
    size = check_size(K, seed=seed)
    reg = check_regularity(K, seed=seed)
    rows = [["kernel", "condition", "delta", "constant", "samples", "seed"]]
    for c in (size, reg):
        rows.append([c.kernel, c.condition,
                     "" if c.delta is None else fmt_float(c.delta),
                     fmt_float(c.constant), str(c.samples), str(c.seed)])
    _write_csv(out / "kernel_checks.csv", rows)
    _summary(out, [f"check-kernel {K.name}: size constant {size.constant:.6g}, "
                   f"regularity constant {reg.constant:.6g} at delta={reg.delta}",
                   "verdict: PASS"])
    return 0


def _cmd_bmo(cfg: ExperimentConfig, out: Path) -> int:
    g = cfg.fixed_grid()
    b = cfg.b_func("b1")
    f = b.sampled(g)
    fam = dyadic_family(g.box, cfg.get_int("bmo.k_min", 0), cfg.get_int("bmo.k_max", 5))
    rep = bmo_seminorm(f, fam)
    _write_csv(out / "bmo_report.csv", rep.csv_rows())
    verdict = "PASS" if rep.sandwich_ok else "FAIL"
    _summary(out, [f"bmo {b.name}: sup mean-osc {rep.sup_mean:.6g}, "
                   f"sup best-const {rep.sup_best:.6g}, cubes {len(rep.entries)}",
                   f"sandwich best<=mean<=2best: {verdict}",
                   f"verdict: {verdict}"])
    return _verdict_exit([verdict])


def _cmd_para(cfg: ExperimentConfig, out: Path) -> int:
    g = cfg.fixed_grid()
    b = cfg.b_func("b1")
    f = b.sampled(g)
    J = cfg.get_int("para.J", 3)
    fam = dyadic_family(g.box, cfg.get_int("bmo.k_min", 0), cfg.get_int("bmo.k_max", 3))
    cert = check_para_accretive(f, fam, J=J)
    _write_csv(out / "para_certificate.csv", cert.csv_rows())
    lines = [f"para-accretive {b.name}: c0={cert.c0:.6g} J={cert.J} "
             f"b_sup={cert.b_sup:.6g} c1={cert.c1:.6g}"]
    verdicts = ["PASS"]
    eps = cfg.get_float("para.eps", 0.5)
    N = cfg.get_float("para.N", 10.0)
    famB = dyadic_family(g.box, cfg.get_int("bmo.k_min", 0),
                         max(cfg.get_int("bmo.k_max", 3), 7))
    certB = check_condition_B(f, famB, N=N, eps=eps)
    lines.append(f"condition-B(eps={eps}, N={N}): "
                 f"{'holds on all generations' if certB.valid else 'fails'}")
    if certB.valid:
        conv = b_to_def3_constant(certB, g.box, f)
        ok = conv.bound <= cert.c0 + 1e-12
        lines.append(f"converted bound eps/(20N)^d = {conv.bound:.6g} "
                     f"<= certified c0 {cert.c0:.6g}: {'PASS' if ok else 'FAIL'}")
        verdicts.append("PASS" if ok else "FAIL")
    lines.append(f"verdict: {'PASS' if all(v == 'PASS' for v in verdicts) else 'FAIL'}")
    _summary(out, lines)
    return _verdict_exit(verdicts)


def _cmd_uk_build(cfg: ExperimentConfig, out: Path) -> int:
    g = cfg.fixed_grid(n=2048, box=8.0)
    b = cfg.b_func("b1")
    f = b.sampled(g)
    k = cfg.get_int("uk.k", 0)
    fam = build_uk(f, k, J=cfg.get_int("para.J", 3))
    ver = verify_uk(fam, f)
    rows = [["x", "witness_center", "witness_side", "sup", "sup_bound", "lip",
             "lip_bound", "pairing_abs", "pairing_lo", "pairing_hi",
             "support_ok", "all_ok"]]
    for c, W in zip(ver.checks, fam.witnesses):
        rows.append([fmt_float(c.x), fmt_float(W.center[0]), fmt_float(W.side),
                     fmt_float(c.sup), fmt_float(c.sup_bound), fmt_float(c.lip),
                     fmt_float(c.lip_bound), fmt_float(abs(c.pairing)),
                     fmt_float(c.pairing_lo), fmt_float(c.pairing_hi),
                     "1" if c.support_ok else "0", "1" if c.all_ok else "0"])
    _write_csv(out / "uk_report.csv", rows)
    verdict = "PASS" if ver.all_ok else "FAIL"
    _summary(out, [f"uk-build {b.name} k={k}: h={fam.h_mol} alpha={fam.alpha:.6g} "
                   f"c0={fam.c0:.6g} lattice={len(fam.lattice)}",
                   f"all four kernel-family bounds: {verdict}",
                   f"verdict: {verdict}"])
    return _verdict_exit([verdict])


def _stein_reports(cfg: ExperimentConfig):
    K = cfg.kernel()
    M = cfg.get_int("bump.M", 2)
    slope_tol = cfg.get_float("fit.slope_tol", 0.07)
    unif = cfg.get_float("fit.uniformity_factor", 2.0)
    policy = cfg.policy()
    if K.arity == "linear":
        scales = cfg.get_floats("scales", tuple(2.0 ** k for k in range(-3, 4)))
        centers = cfg.get_floats("centers", (0.0, 0.125, -0.125))
        b0, b1 = cfg.b_func("b0"), cfg.b_func("b1")
        if b0.name == "one" and b1.name == "one":
            rep = stein_t1_test(K, M=M, scales=scales, center_fracs=centers,
                                grid=cfg.grid_spec(), policy=policy,
                                slope_tol=slope_tol, uniformity_factor=unif)
            return [rep]
        res = stein_tb_test(K, b0, b1, M=M, scales=scales, center_fracs=centers,
                            grid=cfg.grid_spec(), policy=policy,
                            slope_tol=slope_tol, uniformity_factor=unif)
        return [res.on_b1, res.transpose_on_b0]
    scales = cfg.get_floats("scales", tuple(2.0 ** k for k in range(-2, 3)))
    res = stein_bilinear_tb_test(K, cfg.b_func("b0"), cfg.b_func("b1"),
                                 cfg.b_func("b2"), M=M, scales=scales,
                                 grid=cfg.grid_spec(n=128, box=8.0), policy=policy,
                                 slope_tol=slope_tol, uniformity_factor=unif)
    return list(res.reports)


def _cmd_stein(cfg: ExperimentConfig, out: Path, svg: bool = False) -> int:
    reports = _stein_reports(cfg)
    lines = []
    for rep in reports:
        _write_csv(out / f"{rep.experiment}.csv", rep.csv_rows())
        if svg:
            _svg_plot(out / f"{rep.experiment}.svg", rep.rows, rep.target,
                      f"{rep.experiment} on {rep.kernel}")
        slope = "n/a" if rep.slope is None else f"{rep.slope:.4f}"
        lines.append(f"{rep.experiment} [{rep.kernel}] slope={slope} "
                     f"constant={rep.constant:.6g} verdict: {rep.verdict}")
    _summary(out, lines)
    return _verdict_exit([r.verdict for r in reports])


def _cmd_wbp(cfg: ExperimentConfig, out: Path, svg: bool = False) -> int:
    K = cfg.kernel()
    scales = cfg.get_floats(
        "scales", tuple(2.0 ** k for k in range(-3, 4)) if K.arity == "linear"
        else tuple(2.0 ** k for k in range(-2, 3)))
    offsets = cfg.get_floats("offsets", (0.0, 1.0, 4.0))
    rep = weak_boundedness_test(K, cfg.b_func("b0"), cfg.b_func("b1"),
                                cfg.b_func("b2"), M=cfg.get_int("bump.M", 2),
                                scales=scales, offsets=offsets,
                                grid=cfg.grid_spec(), policy=cfg.policy(),
                                slope_tol=cfg.get_float("fit.slope_tol", 0.07),
                                uniformity_factor=cfg.get_float("fit.uniformity_factor", 2.0))
    _write_csv(out / "wbp.csv", rep.csv_rows())
    if svg:
        _svg_plot(out / "wbp.svg", rep.rows, rep.target, f"wbp on {rep.kernel}")
    slope = "n/a" if rep.slope is None else f"{rep.slope:.4f}"
    _summary(out, [f"wbp [{rep.kernel}] slope={slope} verdict: {rep.verdict}"])
    return _verdict_exit([rep.verdict])


def _cmd_sweep_bmo(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel()
    R_list = cfg.get_floats("scales", (1.0, 2.0, 4.0, 8.0))
    rep = uniform_bmo_sweep(K, cfg.b_func("b1"), R_list=R_list,
                            grid=cfg.grid_spec(n=512, box=32.0),
                            policy=cfg.policy(),
                            uniformity_factor=cfg.get_float("fit.uniformity_factor", 2.0))
    rows = [["R", "bmo", "pv_flag"]]
    for r in rep.rows:
        rows.append([fmt_float(r.R), fmt_float(r.bmo), "1" if r.pv_flagged else "0"])
    _write_csv(out / "bmo_sweep.csv", rows)
    _summary(out, [f"sweep-bmo [{K.name}] max/min={rep.ratio:.4f} verdict: {rep.verdict}"])
    return _verdict_exit([rep.verdict])


def _cmd_far_field(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel()
    Q = Cube((cfg.get_float("cube.center", 0.0),), cfg.get_float("cube.side", 0.25))
    R_list = cfg.get_floats("scales", (4.0, 8.0, 16.0))
    rep = far_field_constancy(K, cfg.b_func("b1"), Q=Q, R_list=R_list,
                              grid=cfg.grid_spec(n=1024, box=64.0),
                              policy=cfg.policy(),
                              uniformity_factor=cfg.get_float("fit.uniformity_factor", 2.0))
    rows = [["R", "sup_dev", "c_re", "c_im", "split_defect"]]
    for r in rep.rows:
        rows.append([fmt_float(r.R), fmt_float(r.sup_dev), fmt_float(r.c_QR.real),
                     fmt_float(r.c_QR.imag), fmt_float(r.split_defect)])
    _write_csv(out / "far_field.csv", rows)
    _summary(out, [f"far-field [{K.name}] Q=(center {Q.center[0]}, side {Q.side}) "
                   f"max/min={rep.ratio:.4f} abs_bound={rep.abs_bound:.6g} "
                   f"verdict: {rep.verdict}"])
    return _verdict_exit([rep.verdict])


def _cmd_bilinear_decomp(cfg: ExperimentConfig, out: Path) -> int:
    K = cfg.kernel()
    Q = Cube((cfg.get_float("cube.center", 0.0),), cfg.get_float("cube.side", 0.5))
    scales = cfg.get_floats("scales", ())
    rep = bilinear_decomposition_check(K, cfg.b_func("b1"), cfg.b_func("b2"), Q=Q,
                                       R_list=scales or None,
                                       grid=cfg.grid_spec(n=512, box=64.0),
                                       policy=cfg.policy())
    rows = [["R", "avg_I", "dev_II", "dev_III", "dev_IV", "sum_defect", "sum_ok"]]
    for r in rep.rows:
        rows.append([fmt_float(r.R), fmt_float(r.avg_I), fmt_float(r.dev_II),
                     fmt_float(r.dev_III), fmt_float(r.dev_IV),
                     fmt_float(r.sum_defect), "1" if r.sum_ok else "0"])
    _write_csv(out / "bilinear_decomp.csv", rows)
    _summary(out, [f"bilinear-decomp [{K.name}] verdict: {rep.verdict}"])
    return _verdict_exit([rep.verdict])


def _cmd_report(cfg: ExperimentConfig, out: Path) -> int:
    rc1 = _cmd_stein(cfg, out, svg=True)
    stein_summary = (out / "summary.txt").read_text().splitlines()
    rc2 = _cmd_wbp(cfg, out, svg=True)
    wbp_summary = (out / "summary.txt").read_text().splitlines()
    _summary(out, stein_summary + wbp_summary)
    return max(rc1, rc2)


_DISPATCH = {
    "check-kernel": _cmd_check_kernel,
    "bmo": _cmd_bmo,
    "para-accretive": _cmd_para,
    "uk-build": _cmd_uk_build,
    "stein": _cmd_stein,
    "wbp": _cmd_wbp,
    "sweep-bmo": _cmd_sweep_bmo,
    "far-field": _cmd_far_field,
    "bilinear-decomp": _cmd_bilinear_decomp,
    "report": _cmd_report,
}


def run(subcommand: str, config_path, out_dir=None) -> int:
    """Programmatic entry point mirroring the CLI contract."""
    if subcommand not in _DISPATCH:
        print(f"unknown subcommand {subcommand!r}; choose from {SUBCOMMANDS}",
              file=sys.stderr)
        return 2
    try:
        cfg = ExperimentConfig.parse(config_path)
        out = cfg.out_dir(out_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return _DISPATCH[subcommand](cfg, out)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="tblab",
                                 description="scaling experiments for singular integrals")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None)
    ns = ap.parse_args(argv)
    return run(ns.subcommand, ns.config, ns.out)


if __name__ == "__main__":
    sys.exit(main())
