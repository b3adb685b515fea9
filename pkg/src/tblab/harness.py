"""Operator-level experiments: bump testing conditions, weak boundedness,
direct bounds, uniform-BMO sweeps, far-field constancy, decompositions,
and the log-log exponent fits that turn "<= C R^q" into a verdict.

Scaling sweeps run per-row on scale-matched grids by default (n fixed,
box = box_cfg * R) so every row has the same relative resolution and the
same support margin; kernels with an intrinsic scale (the truncated
commutator) and the designed-failure control are measured on a fixed grid
instead (their KernelModel carries grid_mode="fixed").
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import bumps
from .bmo import bmo_seminorm
from .grid import Cube, Grid, SampledFunction, cube1, dyadic_family, lp_norm, sample
from .kernels import KernelModel, transpose_kernel
from .quadrature import PvPolicy, apply_bilinear_field, apply_linear_field, pairing
from .util import fmt_float, pmap

DEFAULT_SLOPE_TOL = 0.07
DEFAULT_UNIFORMITY = 2.0
LINEAR_SCALES = tuple(2.0 ** k for k in range(-3, 4))
BILINEAR_SCALES = tuple(2.0 ** k for k in range(-2, 3))
CENTER_FRACTIONS = (0.0, 0.125, -0.125)   # in units of the box side


# --- b-functions -----------------------------------------------------------

@dataclass(frozen=True)
class BFunc:
    """Closed-form multiplier b, resamplable on any row grid."""
    name: str
    rule: object                 # vectorized callable or None (constant one)
    certificate: object = None   # optional ParaAccretivityCertificate

    def sampled(self, grid: Grid) -> SampledFunction:
        if self.rule is None:
            return sample(lambda *cs: np.ones_like(np.asarray(cs[0], dtype=float), dtype=complex),
                          grid, name=self.name)
        return sample(self.rule, grid, name=self.name)

    def with_certificate(self, cert) -> "BFunc":
        return replace(self, certificate=cert)


def builtin_b(spec: str) -> BFunc:
    """Builtins: one | accretive-lipschitz(lam) | exp-ix | sign-sin."""
    s = spec.strip()
    if s == "one":
        return BFunc(name="one", rule=None)
    if s.startswith("accretive-lipschitz"):
        lam = 0.3
        if "(" in s:
            lam = float(s[s.index("(") + 1:s.rindex(")")])
        def rule(x, _l=lam):
            return 1.0 + 1j * _l * np.tanh(np.asarray(x, dtype=float))
        return BFunc(name=f"accretive-lipschitz({lam})", rule=rule)
    if s == "exp-ix":
        return BFunc(name="exp-ix", rule=lambda x: np.exp(1j * np.asarray(x, dtype=float)))
    if s == "sign-sin":
        return BFunc(name="sign-sin",
                     rule=lambda x: np.sign(np.sin(np.asarray(x, dtype=float))) + 0.0j)
    raise ValueError(f"unknown builtin b-function {spec!r}")


B_ONE = builtin_b("one")


# --- sweep configuration ---------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    n: int = 512
    box_side: float = 16.0

    def row_grid(self, mode: str, R: float) -> Grid:
        side = self.box_side * R if mode == "scaled" else self.box_side
        return Grid(box=cube1(0.0, side), n=self.n)


@dataclass(frozen=True)
class SweepRow:
    section: str
    center: float
    R: float
    value: float
    pv_flagged: bool = False
    margin_flagged: bool = False


@dataclass(frozen=True)
class GroupFit:
    section: str
    center: float
    slope: float | None
    intercept: float | None
    constant: float
    unif: float
    n_rows: int
    n_zero: int
    target: float
    slope_tol: float
    uniformity_factor: float

    @property
    def degenerate(self) -> bool:
        return self.slope is None

    @property
    def passed(self) -> bool:
        if self.degenerate:
            return True
        return (abs(self.slope - self.target) <= self.slope_tol
                and self.unif <= self.uniformity_factor)


def exponent_fit(pairs, target: float, slope_tol: float = DEFAULT_SLOPE_TOL,
                 uniformity_factor: float = DEFAULT_UNIFORMITY,
                 section: str = "", center: float = 0.0) -> GroupFit:
    """OLS on (log2 R, log2 value); constant = max value / R^target.

    Zero rows are excluded and counted; an all-zero group is PASS-degenerate.
    """
    pairs = list(pairs)
    if len(pairs) < 5:
        raise ValueError(f"need >= 5 rows for a fit, got {len(pairs)}")
    Rs = np.asarray([p[0] for p in pairs], dtype=float)
    vals = np.asarray([p[1] for p in pairs], dtype=float)
    tiny = 1e-14 * max(1.0, float(np.max(vals)) if len(vals) else 1.0)
    nz = vals > tiny
    n_zero = int(np.sum(~nz))
    if np.sum(nz) < 2:
        return GroupFit(section=section, center=center, slope=None, intercept=None,
                        constant=0.0, unif=1.0, n_rows=len(pairs), n_zero=n_zero,
                        target=target, slope_tol=slope_tol,
                        uniformity_factor=uniformity_factor)
    lr = np.log2(Rs[nz])
    lv = np.log2(vals[nz])
    A = np.vstack([lr, np.ones_like(lr)]).T
    coef, *_ = np.linalg.lstsq(A, lv, rcond=None)
    consts = vals[nz] / Rs[nz] ** target
    return GroupFit(section=section, center=center, slope=float(coef[0]),
                    intercept=float(coef[1]), constant=float(np.max(consts)),
                    unif=float(np.max(consts) / np.min(consts)),
                    n_rows=len(pairs), n_zero=n_zero, target=target,
                    slope_tol=slope_tol, uniformity_factor=uniformity_factor)


@dataclass(frozen=True)
class ScalingReport:
    experiment: str
    kernel: str
    b_names: tuple
    M: int
    target: float
    grid_mode: str
    rows: list
    fits: list

    @property
    def verdict(self) -> str:
        if all(f.degenerate for f in self.fits):
            return "PASS-degenerate"
        return "PASS" if all(f.passed for f in self.fits) else "FAIL"

    @property
    def slope(self) -> float | None:
        ss = [f.slope for f in self.fits if not f.degenerate]
        return float(np.mean(ss)) if ss else None

    @property
    def constant(self) -> float:
        return max((f.constant for f in self.fits), default=0.0)

    @property
    def pv_flagged(self) -> bool:
        return any(r.pv_flagged for r in self.rows)

    def fit_for(self, section: str = "", center: float | None = None) -> GroupFit:
        for f in self.fits:
            if f.section == section and (center is None or f.center == center):
                return f
        raise KeyError((section, center))

    def csv_rows(self):
        head = ["experiment", "kernel", "b0", "b1", "b2", "M", "section", "x0", "R",
                "value", "target_exp", "fitted_slope", "constant", "pv_flag",
                "margin_flag", "verdict"]
        b0, b1, b2 = (tuple(self.b_names) + ("", "", ""))[:3]
        out = [head]
        slope = self.slope
        for r in self.rows:
            out.append([self.experiment, self.kernel, b0, b1, b2, str(self.M),
                        r.section, fmt_float(r.center), fmt_float(r.R),
                        fmt_float(r.value), fmt_float(self.target),
                        "" if slope is None else fmt_float(slope),
                        fmt_float(self.constant),
                        "1" if r.pv_flagged else "0",
                        "1" if r.margin_flagged else "0",
                        self.verdict])
        return out


def _bump_field(grid: Grid, M: int, x0: float, R: float,
                profile: str = "standard-mollifier") -> SampledFunction:
    c = bumps.c_norm(M, 1, profile)
    rule = bumps.BumpRule(profile, c, (x0,), R)
    bumps._check_bump_grid(grid, (x0,), R)
    vals = rule(grid.axis(0))
    return SampledFunction(grid=grid, values=vals.astype(complex), rule=rule,
                           name=f"phi[{x0},{R}]")


def _margin_flag(grid: Grid, x0: float, R: float) -> bool:
    return abs(x0) + R > 0.9 * grid.box.side / 2.0


def _l2(fr) -> float:
    return lp_norm(fr.field, 2)


# --- Stein testing conditions ----------------------------------------------

def stein_t1_test(K: KernelModel, M: int = 2,
                  scales=LINEAR_SCALES, center_fracs=CENTER_FRACTIONS,
                  grid: GridSpec = GridSpec(), policy: PvPolicy = PvPolicy(),
                  slope_tol: float = DEFAULT_SLOPE_TOL,
                  uniformity_factor: float = DEFAULT_UNIFORMITY,
                  grid_mode: str | None = None) -> ScalingReport:
    """||T(phi^{x0,R})||_2 + ||T*(phi^{x0,R})||_2 against the target R^(d/2)."""
    return stein_tb_test(K, B_ONE, B_ONE, M=M, scales=scales,
                         center_fracs=center_fracs, grid=grid, policy=policy,
                         slope_tol=slope_tol, uniformity_factor=uniformity_factor,
                         grid_mode=grid_mode, _combined=True).on_b1


@dataclass(frozen=True)
class TbTestResult:
    on_b1: ScalingReport          # T tested against b1-weighted bumps
    transpose_on_b0: ScalingReport

    @property
    def verdict(self) -> str:
        vs = {self.on_b1.verdict, self.transpose_on_b0.verdict}
        if vs <= {"PASS", "PASS-degenerate"}:
            return "PASS"
        return "FAIL"


def stein_tb_test(K: KernelModel, b0: BFunc, b1: BFunc, M: int = 2,
                  scales=LINEAR_SCALES, center_fracs=CENTER_FRACTIONS,
                  grid: GridSpec = GridSpec(), policy: PvPolicy = PvPolicy(),
                  slope_tol: float = DEFAULT_SLOPE_TOL,
                  uniformity_factor: float = DEFAULT_UNIFORMITY,
                  grid_mode: str | None = None, _combined: bool = False) -> TbTestResult:
    """Testing conditions on b1 (for T) and b0 (for T*), fitted to d/2 per center."""
    if K.arity != "linear":
        raise ValueError("stein_tb_test needs a linear kernel")
    for b in (b0, b1):
        if b.certificate is None and b.name != "one":
            warnings.warn(f"b-function {b.name!r} carries no para-accretivity "
                          f"certificate", stacklevel=2)
    mode = grid_mode or K.grid_mode
    Kt = transpose_kernel(K)

    def one_row(job):
        frac, R = job
        g = grid.row_grid(mode, R)
        x0 = frac * g.box.side
        if abs(x0) + R > g.box.side / 2.0 + 1e-12:
            return None                      # support escapes a fixed grid
        phi = _bump_field(g, M, x0, R)
        b1s = b1.sampled(g)
        b0s = b0.sampled(g)
        f1 = SampledFunction(grid=g, values=b1s.values * phi.values)
        f0 = SampledFunction(grid=g, values=b0s.values * phi.values)
        fr1 = apply_linear_field(K, f1, policy)
        fr2 = apply_linear_field(Kt, f0, policy)
        if _combined:
            v1 = _l2(fr1) + _l2(fr2)
            v2 = v1
        else:
            v1, v2 = _l2(fr1), _l2(fr2)
        flagged1 = fr1.n_flagged > 0
        flagged2 = fr2.n_flagged > 0
        mf = _margin_flag(g, x0, R)
        return (SweepRow("", frac, R, v1, flagged1 or (_combined and flagged2), mf),
                SweepRow("", frac, R, v2, flagged2, mf))

    jobs = [(frac, R) for frac in center_fracs for R in scales]
    results = [r for r in pmap(one_row, jobs) if r is not None]
    rows1 = [r[0] for r in results]
    rows2 = [r[1] for r in results]
    d = K.d

    def fits_of(rows):
        out = []
        for frac in center_fracs:
            sel = [(r.R, r.value) for r in rows if r.center == frac]
            if len(sel) >= 5:
                out.append(exponent_fit(sel, target=d / 2.0, slope_tol=slope_tol,
                                        uniformity_factor=uniformity_factor,
                                        section="", center=frac))
        return out

    name1 = "stein-t1" if _combined else "stein-tb-on-b1"
    rep1 = ScalingReport(experiment=name1, kernel=K.name,
                         b_names=(b0.name, b1.name), M=M, target=d / 2.0,
                         grid_mode=mode, rows=rows1, fits=fits_of(rows1))
    rep2 = ScalingReport(experiment="stein-tb-transpose", kernel=Kt.name,
                         b_names=(b0.name, b1.name), M=M, target=d / 2.0,
                         grid_mode=mode, rows=rows2, fits=fits_of(rows2))
    return TbTestResult(on_b1=rep1, transpose_on_b0=rep2)


@dataclass(frozen=True)
class BilinearTbResult:
    direct: ScalingReport
    transpose1: ScalingReport
    transpose2: ScalingReport

    @property
    def verdict(self) -> str:
        vs = {self.direct.verdict, self.transpose1.verdict, self.transpose2.verdict}
        return "PASS" if vs <= {"PASS", "PASS-degenerate"} else "FAIL"

    @property
    def reports(self):
        return (self.direct, self.transpose1, self.transpose2)


def stein_bilinear_tb_test(K: KernelModel, b0: BFunc, b1: BFunc, b2: BFunc,
                           M: int = 2, scales=BILINEAR_SCALES,
                           grid: GridSpec = GridSpec(n=128, box_side=8.0),
                           policy: PvPolicy = PvPolicy(),
                           slope_tol: float = DEFAULT_SLOPE_TOL,
                           uniformity_factor: float = DEFAULT_UNIFORMITY,
                           grid_mode: str | None = None) -> BilinearTbResult:
    """The three bilinear testing conditions, equal and offset centers."""
    if K.arity != "bilinear":
        raise ValueError("needs a bilinear kernel")
    mode = grid_mode or K.grid_mode
    K1 = transpose_kernel(K, 1)
    K2 = transpose_kernel(K, 2)
    sections = (("equal", 0.0), ("offset", 1.0))

    def one_row(job):
        (sec, off), R = job
        g = grid.row_grid(mode, R)
        xa, xb = -off * R / 2.0, off * R / 2.0
        if max(abs(xa), abs(xb)) + R > g.box.side / 2.0 + 1e-12:
            return None
        pha = _bump_field(g, M, xa, R)
        phb = _bump_field(g, M, xb, R)
        bs = [b.sampled(g) for b in (b0, b1, b2)]
        w = {}
        for tag, bsamp, ph in (("0a", bs[0], pha), ("1a", bs[1], pha),
                               ("2b", bs[2], phb), ("0b", bs[0], phb)):
            w[tag] = SampledFunction(grid=g, values=bsamp.values * ph.values)
        mf = _margin_flag(g, max(abs(xa), abs(xb)), R)
        out = []
        for ker, fa, fb in ((K, w["1a"], w["2b"]), (K1, w["0a"], w["2b"]),
                            (K2, w["1a"], w["0b"])):
            fr = apply_bilinear_field(ker, fa, fb, policy)
            out.append(SweepRow(sec, off, R, _l2(fr), fr.n_flagged > 0, mf))
        return out

    jobs = [(so, R) for so in sections for R in scales]
    results = [r for r in pmap(one_row, jobs) if r is not None]
    d = K.d
    reports = []
    names = ("bilinear-tb-direct", "bilinear-tb-transpose1", "bilinear-tb-transpose2")
    kers = (K, K1, K2)
    for pos in range(3):
        rows = [res[pos] for res in results]
        fits = []
        for sec, off in sections:
            sel = [(r.R, r.value) for r in rows if r.section == sec]
            if len(sel) < 5:
                continue
            fits.append(exponent_fit(sel, target=d / 2.0, slope_tol=slope_tol,
                                     uniformity_factor=uniformity_factor,
                                     section=sec, center=off))
        reports.append(ScalingReport(experiment=names[pos], kernel=kers[pos].name,
                                     b_names=(b0.name, b1.name, b2.name), M=M,
                                     target=d / 2.0, grid_mode=mode, rows=rows,
                                     fits=fits))
    return BilinearTbResult(*reports)


def weak_boundedness_test(K: KernelModel, b0: BFunc = B_ONE, b1: BFunc = B_ONE,
                          b2: BFunc = B_ONE, M: int = 2, scales=LINEAR_SCALES,
                          offsets=(0.0, 1.0, 4.0),
                          grid: GridSpec = GridSpec(), policy: PvPolicy = PvPolicy(),
                          slope_tol: float = DEFAULT_SLOPE_TOL,
                          uniformity_factor: float = DEFAULT_UNIFORMITY,
                          grid_mode: str | None = None) -> ScalingReport:
    """|<M_b0 T (M_b1 phi1), phi2>| (or the bilinear triple) against R^d.

    Equal-center and offset-center rows are separate sections; the remark
    that equal centers suffice is recorded as a comparison, not assumed.
    """
    mode = grid_mode or K.grid_mode
    bil = K.arity == "bilinear"
    if bil and mode == "scaled" and grid.n > 256:
        grid = GridSpec(n=128, box_side=8.0)

    def one_row(job):
        off, R = job
        g = grid.row_grid(mode, R)
        x1 = 0.0
        x2 = off * R
        if abs(x2) + R > g.box.side / 2.0:     # keep the pairing bump inside
            g = Grid(box=cube1(0.0, g.box.side + 2 * abs(x2)), n=g.n)
        ph1 = _bump_field(g, M, x1, R)
        b0s, b1s = b0.sampled(g), b1.sampled(g)
        if not bil:
            ph2 = _bump_field(g, M, x2, R)
            f1 = SampledFunction(grid=g, values=b1s.values * ph1.values)
            fr = apply_linear_field(K, f1, policy)
            w2 = SampledFunction(grid=g, values=b0s.values * ph2.values)
            val = abs(pairing(fr.field, w2))
            return SweepRow(f"offset{off:g}", off, R, val, fr.n_flagged > 0,
                            _margin_flag(g, x2, R))
        b2s = b2.sampled(g)
        ph2 = _bump_field(g, M, x2, R)
        ph3 = _bump_field(g, M, -x2, R)
        f1 = SampledFunction(grid=g, values=b1s.values * ph1.values)
        f2 = SampledFunction(grid=g, values=b2s.values * ph2.values)
        support = np.nonzero(np.abs(ph3.values) > 0)[0]
        fr = apply_bilinear_field(K, f1, f2, policy, points=support)
        w3 = SampledFunction(grid=g, values=b0s.values * ph3.values)
        val = abs(pairing(fr.field, w3))
        return SweepRow(f"offset{off:g}", off, R, val, fr.n_flagged > 0,
                        _margin_flag(g, x2, R))

    jobs = [(off, R) for off in offsets for R in scales]
    rows = pmap(one_row, jobs)
    d = K.d
    fits = []
    for off in offsets:
        sel = [(r.R, r.value) for r in rows if r.center == off]
        fits.append(exponent_fit(sel, target=float(d), slope_tol=slope_tol,
                                 uniformity_factor=uniformity_factor,
                                 section=f"offset{off:g}", center=off))
    names = (b0.name, b1.name, b2.name) if bil else (b0.name, b1.name)
    return ScalingReport(experiment="wbp", kernel=K.name, b_names=names, M=M,
                         target=float(d), grid_mode=mode, rows=rows, fits=fits)


# --- direct (necessity-direction) bound ------------------------------------

@dataclass(frozen=True)
class DirectBoundRow:
    R: float
    measured: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound


@dataclass(frozen=True)
class DirectBoundReport:
    rows: list
    verdict: str
    witness: tuple | None


def direct_bound_check(K: KernelModel, b1: BFunc, op_norm: float | None = None,
                       b2: BFunc | None = None, bilinear_norm: float | None = None,
                       M: int = 2, scales=LINEAR_SCALES,
                       grid: GridSpec = GridSpec(), policy: PvPolicy = PvPolicy(),
                       tol: float = 0.03, grid_mode: str | None = None) -> DirectBoundReport:
    """measured <= norm * prod ||b||_inf * bump-norm product * (1 + tol) per row."""
    mode = grid_mode or K.grid_mode
    rows = []
    witness = None
    if K.arity == "linear":
        if op_norm is None:
            raise ValueError("missing operator norm estimate for the linear bound")
        for R in scales:
            g = grid.row_grid(mode, R)
            phi = _bump_field(g, M, 0.0, R)
            b1s = b1.sampled(g)
            f = SampledFunction(grid=g, values=b1s.values * phi.values)
            fr = apply_linear_field(K, f, policy)
            measured = _l2(fr)
            bound = op_norm * float(np.max(np.abs(b1s.values))) * lp_norm(phi, 2) * (1 + tol)
            rows.append(DirectBoundRow(R=R, measured=measured, bound=bound))
    else:
        if bilinear_norm is None:
            raise ValueError("missing bilinear operator norm estimate")
        if b2 is None:
            raise ValueError("bilinear direct bound needs b2")
        for R in scales:
            g = grid.row_grid(mode, R)
            phi = _bump_field(g, M, 0.0, R)
            b1s, b2s = b1.sampled(g), b2.sampled(g)
            f1 = SampledFunction(grid=g, values=b1s.values * phi.values)
            f2 = SampledFunction(grid=g, values=b2s.values * phi.values)
            fr = apply_bilinear_field(K, f1, f2, policy)
            measured = _l2(fr)
            bound = (bilinear_norm * float(np.max(np.abs(b1s.values)))
                     * float(np.max(np.abs(b2s.values)))
                     * lp_norm(phi, 4) ** 2 * (1 + tol))
            rows.append(DirectBoundRow(R=R, measured=measured, bound=bound))
    bad = [r for r in rows if not r.ok]
    if bad:
        witness = (0.0, bad[0].R)
    return DirectBoundReport(rows=rows, verdict="FAIL" if bad else "PASS",
                             witness=witness)


# --- localization and far-field quantities ----------------------------------

def _plateau_field(grid: Grid, x0: float, R: float) -> SampledFunction:
    rule = bumps.BumpRule("plateau", 1.0, (x0,), R)
    vals = rule(grid.axis(0))
    return SampledFunction(grid=grid, values=vals.astype(complex), rule=rule,
                           name=f"plateau[{x0},{R}]")


@dataclass(frozen=True)
class BmoSweepRow:
    R: float
    bmo: float
    pv_flagged: bool


@dataclass(frozen=True)
class BmoSweepReport:
    rows: list
    uniformity_factor: float
    reports: list

    @property
    def ratio(self) -> float:
        vals = [r.bmo for r in self.rows]
        return max(vals) / min(vals) if min(vals) > 0 else float("inf")

    @property
    def verdict(self) -> str:
        vals = [r.bmo for r in self.rows]
        if max(vals) == 0:
            return "PASS-degenerate"
        return "PASS" if self.ratio <= self.uniformity_factor else "FAIL"


def uniform_bmo_sweep(K: KernelModel, b1: BFunc = B_ONE, R_list=(1.0, 2.0, 4.0, 8.0),
                      grid: GridSpec = GridSpec(n=512, box_side=32.0),
                      policy: PvPolicy = PvPolicy(), k_max: int = 7,
                      uniformity_factor: float = DEFAULT_UNIFORMITY) -> BmoSweepReport:
    """||T(b1 phi_R)||_BMO over R; phi_R is the plateau cutoff at scale R."""
    if grid.box_side < 4.0 * max(R_list):
        raise ValueError("grid box must be at least 4x the largest scale")
    g = grid.row_grid("fixed", 1.0)
    fam = dyadic_family(g.box, 0, k_max)

    def one(R):
        phiR = _plateau_field(g, 0.0, R)
        b1s = b1.sampled(g)
        f = SampledFunction(grid=g, values=b1s.values * phiR.values)
        fr = apply_linear_field(K, f, policy)
        rep = bmo_seminorm(fr.field, fam)
        return BmoSweepRow(R=R, bmo=rep.sup_mean, pv_flagged=fr.n_flagged > 0), rep

    out = pmap(one, R_list)
    return BmoSweepReport(rows=[o[0] for o in out], uniformity_factor=uniformity_factor,
                          reports=[o[1] for o in out])


@dataclass(frozen=True)
class FarFieldRow:
    R: float
    sup_dev: float
    c_QR: complex
    split_defect: float
    pv_flagged: bool


@dataclass(frozen=True)
class FarFieldReport:
    Q: Cube
    r: float
    rows: list
    uniformity_factor: float

    @property
    def ratio(self) -> float:
        vals = [r.sup_dev for r in self.rows]
        return max(vals) / min(vals) if min(vals) > 0 else float("inf")

    @property
    def abs_bound(self) -> float:
        return max(r.sup_dev for r in self.rows)

    @property
    def verdict(self) -> str:
        return "PASS" if self.ratio <= self.uniformity_factor else "FAIL"


def far_field_constancy(K: KernelModel, b1: BFunc = B_ONE,
                        Q: Cube = Cube((0.0,), 0.25), R_list=(4.0, 8.0, 16.0),
                        grid: GridSpec = GridSpec(n=1024, box_side=64.0),
                        policy: PvPolicy = PvPolicy(),
                        uniformity_factor: float = DEFAULT_UNIFORMITY) -> FarFieldReport:
    """sup over Q of |T(b1 (1 - phi_Q) phi_R) - c_{Q,R}|, c at the center cell.

    Also records the splitting defect max_Q |T(b1 phi_R) - T(b1 phi_Q phi_R)
    - T(b1 (1-phi_Q) phi_R)| (zero up to roundoff by linearity).
    """
    if grid.box_side < 4.0 * max(R_list):
        raise ValueError("grid box must be at least 4x the largest scale")
    if grid.box_side < 8.0 * Q.side:
        raise ValueError("grid box must contain 8Q")
    g = grid.row_grid("fixed", 1.0)
    r = 6.0 * Q.diam
    x0 = Q.center[0]
    ax = g.axis(0)
    qsel = np.nonzero((ax >= x0 - Q.side / 2.0) & (ax < x0 + Q.side / 2.0))[0]
    i0 = int(np.argmin(np.abs(ax - x0)))
    phiQ = _plateau_field(g, x0, r)
    b1s = b1.sampled(g)
    rows = []
    for R in R_list:
        phiR = _plateau_field(g, 0.0, R)
        far = SampledFunction(grid=g, values=b1s.values * (1.0 - phiQ.values) * phiR.values)
        loc = SampledFunction(grid=g, values=b1s.values * phiQ.values * phiR.values)
        full = SampledFunction(grid=g, values=b1s.values * phiR.values)
        fr_far = apply_linear_field(K, far, policy)
        fr_loc = apply_linear_field(K, loc, policy)
        fr_full = apply_linear_field(K, full, policy)
        cQR = complex(fr_far.field.values[i0])
        dev = float(np.max(np.abs(fr_far.field.values[qsel] - cQR)))
        split = float(np.max(np.abs(fr_full.field.values[qsel]
                                    - fr_loc.field.values[qsel]
                                    - fr_far.field.values[qsel])))
        rows.append(FarFieldRow(R=R, sup_dev=dev, c_QR=cQR, split_defect=split,
                                pv_flagged=fr_far.n_flagged > 0))
    return FarFieldReport(Q=Q, r=r, rows=rows, uniformity_factor=uniformity_factor)


@dataclass(frozen=True)
class LocalPieceResult:
    R: float
    r: float
    case: str                   # "R<=r" or "R>r"
    value: float                # (1/|Q|) int_Q |T(b1 phi_Q phi_R)|
    rewrite_defect: float       # composite-vs-product closed-form mismatch
    composite_certificate: object


def local_piece_check(K: KernelModel, b1: BFunc, Q: Cube, R: float,
                      grid: GridSpec = GridSpec(n=1536, box_side=96.0),
                      policy: PvPolicy = PvPolicy()) -> LocalPieceResult:
    """Local average of |T(b1 phi_Q phi_R)| over Q plus the rewrite identity.

    The product phi_Q(x) phi_R(x) equals a single translate-dilate of a
    composite profile ([psi1 phi] at scale R when R <= r, [phi psi2] at scale
    r otherwise); the identity is exact algebra and is verified to roundoff,
    and the composite passes order-0 bump certification.
    """
    g = grid.row_grid("fixed", 1.0)
    r = 6.0 * Q.diam
    x0 = Q.center[0]
    ax = g.axis(0)
    phiQ = _plateau_field(g, x0, r)
    phiR = _plateau_field(g, 0.0, R)
    prod = phiQ.values * phiR.values
    plateau = bumps.PROFILES["plateau"]
    if R <= r:
        case = "R<=r"
        def comp_profile(t):
            t = np.asarray(t, dtype=float)
            return plateau(np.abs((R / r) * t - x0 / r)) * plateau(np.abs(t))
        composite = comp_profile(ax / R)
        scale = R
    else:
        case = "R>r"
        def comp_profile(t):
            t = np.asarray(t, dtype=float)
            return plateau(np.abs(t)) * plateau(np.abs((r / R) * t + x0 / R))
        composite = comp_profile((ax - x0) / r)
        scale = r
    defect = float(np.max(np.abs(prod - composite)))
    # order-0 certification of the composite unit profile
    cg = Grid(box=cube1(0.0, 4.0), n=512)
    t = cg.axis(0)
    comp_sf = SampledFunction(grid=cg, values=np.asarray(comp_profile(t), dtype=complex))
    cert = bumps.verify_bump(comp_sf, 0)
    b1s = b1.sampled(g)
    f = SampledFunction(grid=g, values=b1s.values * prod)
    fr = apply_linear_field(K, f, policy)
    qsel = np.nonzero((ax >= x0 - Q.side / 2.0) & (ax < x0 + Q.side / 2.0))[0]
    value = float(np.mean(np.abs(fr.field.values[qsel])))
    del scale
    return LocalPieceResult(R=R, r=r, case=case, value=value, rewrite_defect=defect,
                            composite_certificate=cert)


@dataclass(frozen=True)
class DecompositionRow:
    R: float
    avg_I: float
    dev_II: float
    dev_III: float
    dev_IV: float
    sum_defect: float
    sum_ok: bool


@dataclass(frozen=True)
class DecompositionReport:
    Q: Cube
    r: float
    rows: list
    dev_cap: float

    @property
    def verdict(self) -> str:
        ok = all(r.sum_ok for r in self.rows)
        caps = all(max(r.avg_I, r.dev_II, r.dev_III, r.dev_IV) <= self.dev_cap
                   for r in self.rows)
        return "PASS" if ok and caps else "FAIL"


def bilinear_decomposition_check(K: KernelModel, b1: BFunc = B_ONE, b2: BFunc = B_ONE,
                                 Q: Cube = Cube((0.0,), 0.5), R_list=None,
                                 grid: GridSpec = GridSpec(n=512, box_side=64.0),
                                 policy: PvPolicy = PvPolicy(),
                                 dev_cap: float = 1.0) -> DecompositionReport:
    """Four-piece split of T(b1 phi_R, b2 phi_R) by near/far plateau factors.

    Checks the exact sum identity on Q and that the local average of |I| and
    the far-piece deviations from their center constants stay under a common
    cap, uniformly over the R list.
    """
    if K.arity != "bilinear":
        raise ValueError("needs a bilinear kernel")
    g = grid.row_grid("fixed", 1.0)
    r = 6.0 * Q.diam
    if R_list is None:
        R_list = (r / 4.0, r, 4.0 * r)
    if grid.box_side < 2.0 * max(R_list):
        raise ValueError("grid box must contain the largest bump support")
    x0 = Q.center[0]
    ax = g.axis(0)
    qsel = np.nonzero((ax >= x0 - Q.side / 2.0) & (ax < x0 + Q.side / 2.0))[0]
    i0 = int(np.argmin(np.abs(ax - x0)))
    pts = np.concatenate([qsel, [i0]]) if i0 not in qsel else qsel
    phiQ = _plateau_field(g, x0, r).values
    b1s, b2s = b1.sampled(g).values, b2.sampled(g).values
    rows = []
    for R in R_list:
        phiR = _plateau_field(g, 0.0, R).values
        near1 = SampledFunction(grid=g, values=b1s * phiQ * phiR)
        far1 = SampledFunction(grid=g, values=b1s * (1.0 - phiQ) * phiR)
        near2 = SampledFunction(grid=g, values=b2s * phiQ * phiR)
        far2 = SampledFunction(grid=g, values=b2s * (1.0 - phiQ) * phiR)
        full1 = SampledFunction(grid=g, values=b1s * phiR)
        full2 = SampledFunction(grid=g, values=b2s * phiR)
        pieces = []
        for fa, fb in ((near1, near2), (far1, near2), (near1, far2), (far1, far2)):
            pieces.append(apply_bilinear_field(K, fa, fb, policy, points=pts).field.values)
        direct = apply_bilinear_field(K, full1, full2, policy, points=pts).field.values
        total = pieces[0] + pieces[1] + pieces[2] + pieces[3]
        sum_defect = float(np.max(np.abs((total - direct)[qsel])))
        sum_ok = bool(sum_defect <= policy.tol_pv *
                      (1.0 + float(np.max(np.abs(direct[qsel])))))
        avg_I = float(np.mean(np.abs(pieces[0][qsel])))
        devs = [float(np.max(np.abs(p[qsel] - p[i0]))) for p in pieces[1:]]
        rows.append(DecompositionRow(R=R, avg_I=avg_I, dev_II=devs[0],
                                     dev_III=devs[1], dev_IV=devs[2],
                                     sum_defect=sum_defect, sum_ok=sum_ok))
    return DecompositionReport(Q=Q, r=r, rows=rows, dev_cap=dev_cap)
