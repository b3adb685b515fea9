import numpy as np
import pytest

from tblab.bmo import (best_constant_oscillation, bmo_seminorm, mean_oscillation)
from tblab.grid import SampledFunction, cube1, dyadic_family, make_grid, sample

# log|x| BMO estimates over dyadic + shifted families on [-1, 1], frozen
# from an independent pre-build window scan
LOG_BMO = {256: 0.770670, 512: 0.776044, 1024: 0.776626}


def _grid(n=256, side=2.0):
    return make_grid(1, cube1(0.0, side), n)


def test_mean_oscillation_constant_zero():
    g = _grid()
    # dyadic-representable constant: the cell average is bit-exact
    f = sample(lambda x: 3.75 * np.ones_like(x), g)
    assert mean_oscillation(f, cube1(0.1, 0.5)) == 0.0
    # a non-representable constant costs at most an ulp of the mean
    f2 = sample(lambda x: 3.7 * np.ones_like(x), g)
    assert mean_oscillation(f2, cube1(0.1, 0.5)) <= 1e-14


def test_mean_oscillation_sign():
    g = _grid()
    f = sample(lambda x: np.sign(x), g)
    # symmetric cube: average 0 exactly on the midpoint lattice
    assert mean_oscillation(f, cube1(0.0, 1.0)) == pytest.approx(1.0, abs=1e-14)
    # one-sided cube: constant
    assert mean_oscillation(f, cube1(0.25, 0.5)) == 0.0


def test_mean_oscillation_needs_cells():
    g = _grid(64)
    f = sample(lambda x: x, g)
    with pytest.raises(ValueError, match="cells"):
        mean_oscillation(f, cube1(0.0, 0.01))


def test_best_constant_constant_function():
    g = _grid()
    f = sample(lambda x: (2.0 - 1j) * np.ones_like(x), g)
    v, witness = best_constant_oscillation(f, cube1(0.0, 1.0), return_witness=True)
    assert v == 0.0
    assert witness == pytest.approx(2.0 - 1j, abs=1e-12)


def test_best_constant_sign():
    g = _grid()
    f = sample(lambda x: np.sign(x), g)
    assert best_constant_oscillation(f, cube1(0.0, 1.0)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_best_constant_below_mean(seed):
    rng = np.random.default_rng(seed)
    g = _grid(128)
    vals = rng.normal(size=128) + 1j * rng.normal(size=128)
    f = SampledFunction(grid=g, values=vals)
    Q = cube1(float(rng.uniform(-0.4, 0.4)), float(rng.uniform(0.3, 1.0)))
    try:
        mo = mean_oscillation(f, Q)
    except ValueError:
        return
    bo = best_constant_oscillation(f, Q)
    assert bo <= mo + 1e-12
    assert mo <= 2.0 * bo + 1e-12


def test_bmo_constant_zero():
    g = _grid()
    f = sample(lambda x: np.ones_like(x) * (4 + 2j), g)
    fam = dyadic_family(g.box, 0, 4)
    rep = bmo_seminorm(f, fam)
    assert rep.sup_mean == 0.0
    assert rep.sup_best == 0.0


def test_bmo_sign_is_one():
    g = _grid(256)
    f = sample(lambda x: np.sign(x), g)
    fam = dyadic_family(g.box, 0, 3)
    rep = bmo_seminorm(f, fam)
    # attained on the half-shifted symmetric cube; bounded by 1 analytically
    assert rep.sup_mean == pytest.approx(1.0, abs=0.02)
    assert rep.sup_mean <= 1.0 + 1e-12
    assert rep.sandwich_ok


def test_bmo_log_stability_under_refinement():
    vals = {}
    for n in (256, 512):
        g = _grid(n)
        f = sample(lambda x: np.log(np.abs(x)), g, on_nonfinite="mask")
        fam = dyadic_family(g.box, 0, 5)
        rep = bmo_seminorm(f, fam)
        vals[n] = rep.sup_mean
        assert rep.sup_mean == pytest.approx(LOG_BMO[n], rel=1e-4)
        assert rep.sandwich_ok
    assert abs(vals[512] - vals[256]) <= 0.1 * vals[256]


def test_bmo_translation_invariance_grid_aligned():
    g = _grid(256)
    fam = dyadic_family(g.box, 0, 3)
    # tau = 0.25 aligns with generation-3 cubes; supports stay inside
    f = sample(lambda x: np.sign(np.abs(x) - 0.25) * np.exp(-x * x), g)
    ft = sample(lambda x: np.sign(np.abs(x - 0.25) - 0.25) * np.exp(-(x - 0.25) ** 2), g)
    a = bmo_seminorm(f, fam).sup_mean
    b = bmo_seminorm(ft, fam).sup_mean
    assert b == pytest.approx(a, rel=5e-2)


def test_bmo_additive_invariance_exact():
    g = _grid(256)
    fam = dyadic_family(g.box, 0, 3)
    f = sample(lambda x: np.sin(3 * x) + 1j * np.cos(x), g)
    fc = SampledFunction(grid=g, values=f.values + (7.0 - 3.0j))
    a = bmo_seminorm(f, fam)
    b = bmo_seminorm(fc, fam)
    assert a.sup_mean == pytest.approx(b.sup_mean, abs=1e-12)


def test_bmo_dyadic_dilation_invariance():
    # f over family(root) equals f(2.) over family(root/2) exactly: the
    # per-cube sample multisets coincide on matched midpoint grids
    n = 256
    g_root = make_grid(1, cube1(0.0, 2.0), n)
    g_half = make_grid(1, cube1(0.0, 1.0), n)
    f = sample(lambda x: np.sin(5.0 * x) + x, g_root)
    f_compressed = sample(lambda y: np.sin(5.0 * 2.0 * y) + 2.0 * y, g_half)
    rep1 = bmo_seminorm(f, dyadic_family(g_root.box, 0, 3))
    rep2 = bmo_seminorm(f_compressed, dyadic_family(g_half.box, 0, 3))
    assert rep2.sup_mean == pytest.approx(rep1.sup_mean, abs=1e-13)


def test_sandwich_on_every_cube_of_reports(rng):
    g = _grid(256)
    fam = dyadic_family(g.box, 0, 4)
    vals = rng.normal(size=256) + 1j * rng.normal(size=256)
    f = SampledFunction(grid=g, values=vals)
    rep = bmo_seminorm(f, fam)
    assert rep.sandwich_ok
    assert all(e.best_const_osc <= e.mean_osc + 1e-12 for e in rep.entries)


def test_report_csv_columns():
    g = _grid(128)
    f = sample(lambda x: np.sign(x), g)
    rep = bmo_seminorm(f, dyadic_family(g.box, 0, 2))
    rows = rep.csv_rows()
    assert rows[0] == ["cube_center", "cube_side", "mean_osc", "best_const_osc"]
    assert len(rows) == len(rep.entries) + 1
