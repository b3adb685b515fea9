import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import dawsn

from tblab.kernels import (check_regularity, check_size, gallery,
                           transpose_kernel, _CommutatorEvenKernel)


def test_hilbert_pointwise():
    K = gallery("hilbert")
    assert K.rule(1.0, 0.0) == pytest.approx(1.0 / np.pi, rel=1e-14)
    assert K.rule(0.0, 2.0) == pytest.approx(-1.0 / (2.0 * np.pi), rel=1e-14)


def test_cauchy_reduces_to_pi_hilbert_when_flat():
    Kc = gallery("cauchy-lipschitz", lam=0.0)
    Kh = gallery("hilbert")
    x = np.linspace(-3, 3, 11)
    y = x[::-1] + 0.1
    np.testing.assert_allclose(Kc.rule(x, y), np.pi * Kh.rule(x, y), rtol=1e-13)


def test_bilinear_homog_pointwise():
    K = gallery("bilinear-homog")
    # u = v = 1 at (x,y,z) = (1, 0, 0)
    assert K.rule(1.0, 0.0, 0.0) == pytest.approx(0.25, rel=1e-14)


def test_gallery_unknown_name():
    with pytest.raises(ValueError, match="unknown gallery"):
        gallery("riesz")


def test_cauchy_lipschitz_bound_enforced():
    with pytest.raises(ValueError, match="Lipschitz"):
        gallery("cauchy-lipschitz", lam=0.8, lip_bound=0.5)
    gallery("cauchy-lipschitz", lam=0.45, lip_bound=0.5)   # inside the bound


def test_hilbert_transpose_is_negative():
    K = gallery("hilbert")
    Kt = transpose_kernel(K)
    x = np.linspace(-2, 2, 9)
    y = x + 0.7
    np.testing.assert_allclose(Kt.rule(x, y), -K.rule(x, y), rtol=0, atol=1e-15)


def test_bilinear_transpose_involution_and_swap(rng):
    K = gallery("bilinear-homog")
    K1 = transpose_kernel(K, 1)
    K11 = transpose_kernel(K1, 1)
    K2 = transpose_kernel(K, 2)
    pts = rng.uniform(-3, 3, size=(50, 3))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    np.testing.assert_allclose(K11.rule(x, y, z), K.rule(x, y, z), atol=1e-15)
    np.testing.assert_allclose(K2.rule(x, y, z), K.rule(z, y, x), atol=1e-15)
    np.testing.assert_allclose(K1.rule(x, y, z), K.rule(y, x, z), atol=1e-15)


def test_hilbert_antisymmetry_exact(rng):
    K = gallery("hilbert")
    x = rng.uniform(-5, 5, 200)
    y = x + np.exp(rng.uniform(np.log(1e-3), np.log(3), 200))
    np.testing.assert_array_equal(K.rule(x, y), -K.rule(y, x))


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_bilinear_homogeneity(t, rng):
    K = gallery("bilinear-homog")
    u = rng.uniform(-2, 2, 100)
    v = rng.uniform(-2, 2, 100)
    lhs = K.rule(0.0, -t * u, -t * v)          # kernel at (t u, t v)
    rhs = K.rule(0.0, -u, -v) * t ** (-2.0)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_check_size_hilbert_exact_constant():
    cert = check_size(gallery("hilbert"))
    assert cert.constant == pytest.approx(1.0 / np.pi, rel=1e-12)


def test_check_size_cauchy_bounded_by_one():
    # |denominator| >= |x - y| analytically
    cert = check_size(gallery("cauchy-lipschitz", lam=0.3))
    assert cert.constant <= 1.0 + 1e-12
    assert cert.constant >= 1.0 / np.sqrt(1.0 + 0.09) - 1e-6


def test_check_size_bilinear_am_gm():
    # |uv| <= (u^2 + v^2)/2 gives |K| (|u|+|v|)^2 <= 1/2... with the cross
    # term: (|u|+|v|)^2 <= 2(u^2+v^2), so the sampled constant is <= 1
    cert = check_size(gallery("bilinear-homog"))
    assert cert.constant <= 1.0 + 1e-12
    assert cert.constant >= 0.4


def test_check_regularity_hilbert_constant_window():
    # summing both regularity difference terms doubles the single-term bound:
    # admissible sup approaches 4/pi, never drops below the 2/pi limit value
    cert = check_regularity(gallery("hilbert"), delta=1.0)
    assert 2.0 / np.pi - 1e-3 <= cert.constant <= 4.0 / np.pi + 1e-9


def test_check_regularity_positive_control_finite():
    cert = check_regularity(gallery("positive-control"), delta=1.0)
    assert np.isfinite(cert.constant)
    assert cert.constant <= 4.0 / np.pi * np.pi + 1.0   # same scale as hilbert's


def test_check_size_monotone_in_samples():
    K = gallery("hilbert")
    small = check_size(K, n_samples=1000, seed=7)
    big = check_size(K, n_samples=20000, seed=7)
    assert big.constant >= small.constant - 1e-15


def test_certificates_deterministic():
    K = gallery("cauchy-lipschitz")
    a = check_size(K, seed=99)
    b = check_size(K, seed=99)
    assert a == b


def test_bilinear_regularity_covers_transposes():
    cert = check_regularity(gallery("bilinear-homog"), delta=1.0)
    assert np.isfinite(cert.constant)
    assert cert.constant > 0


# --- the commutator kernel's cached Fourier quadrature ---

def test_commutator_quadrature_matches_dawson_closed_form():
    # for the mu=0 symbol |xi| exp(-(xi/lam)^2) the kernel is
    # (lam^2 / 2 pi) (1 - lam u dawsn(lam u / 2)); checks the quadrature
    # machinery against an independent special-function route
    lam = 64.0
    k = _CommutatorEvenKernel(lam, 0.0)
    u = np.array([0.01, 0.05, 0.1, 0.3, 1.0, 3.0])
    expected = lam ** 2 / (2 * np.pi) * (1.0 - lam * u * dawsn(lam * u / 2.0))
    np.testing.assert_allclose(k(u), expected, rtol=1e-6)


def test_commutator_quadrature_matches_scipy_quad():
    lam, mu = 64.0, 1.0 / 64.0
    k = _CommutatorEvenKernel(lam, mu)
    for u in (0.05, 0.4, 1.3):
        ref, _ = quad(lambda xi: np.sqrt(mu ** 2 + xi ** 2)
                      * np.exp(-(xi / lam) ** 2) * np.cos(u * xi) / np.pi,
                      0, 8 * lam, limit=400)
        assert float(k(np.array([u]))[0]) == pytest.approx(ref, rel=1e-5)


def test_commutator_kernel_asymptote():
    # -1/(pi u^2) in the window 1/lam << u << 1/mu
    K = gallery("commutator")
    k = K.k_even
    for u in (0.5, 1.0, 2.0):
        assert float(k(np.array([u]))[0]) == pytest.approx(
            -1.0 / (np.pi * u * u), rel=2e-2)


def test_commutator_kernel_structure():
    K = gallery("commutator")
    # K(x, y) = (a(y) - a(x)) m(x) k(x - y): vanishing a-increment kills it
    x = np.array([0.3])
    assert abs(complex(K.rule(x, x + 1e-9)[0])) < 1e-6
    cert = check_size(K)
    assert np.isfinite(cert.constant)


def test_commutator_cache_reuse():
    K = gallery("commutator")
    u = np.linspace(-2, 2, 101)
    a = K.k_even(u)
    b = K.k_even(u)                       # second call is pure cache lookup
    np.testing.assert_array_equal(a, b)


def test_transpose_arity_checks():
    with pytest.raises(ValueError):
        transpose_kernel(gallery("hilbert"), 2)
    with pytest.raises(ValueError):
        transpose_kernel(gallery("bilinear-homog"), 3)
