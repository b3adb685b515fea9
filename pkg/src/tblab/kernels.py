"""Kernel models, the operator gallery, transposes, and size/regularity certification.

All gallery kernels are d=1. Evaluation rules are vectorized over numpy
arrays and defined off the diagonal; certification samples log-uniform
separations spanning several decades with a fixed seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

GALLERY_NAMES = ("hilbert", "cauchy-lipschitz", "commutator", "bilinear-homog",
                 "positive-control")

# default grid mode per operator for scaling sweeps: homogeneous singular
# kernels are measured on scale-matched grids; the commutator has an intrinsic
# scale and the positive control needs a fixed lattice to expose divergence
DEFAULT_GRID_MODE = {
    "hilbert": "scaled",
    "cauchy-lipschitz": "scaled",
    "bilinear-homog": "scaled",
    "commutator": "fixed",
    "positive-control": "fixed",
}


@dataclass(frozen=True)
class KernelModel:
    name: str
    arity: str                  # "linear" | "bilinear"
    d: int
    delta: float                # claimed Holder regularity order
    size_constant: float        # claimed size constant
    rule: object = field(compare=False)   # rule(x, y) or rule(x, y, z)
    grid_mode: str = "scaled"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.arity not in ("linear", "bilinear"):
            raise ValueError(f"bad arity {self.arity}")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")

    def __call__(self, *args):
        return self.rule(*args)


@dataclass(frozen=True)
class KernelCertificate:
    kernel: str
    condition: str              # "size" | "regularity"
    delta: float | None
    constant: float
    samples: int
    seed: int
    witness: tuple


def _lipschitz_sup(fn, span=20.0, n=1 << 20):
    x = np.linspace(-span, span, n)
    return float(np.max(np.abs(np.diff(fn(x)) / np.diff(x))))


def _logcosh(x):
    ax = np.abs(np.asarray(x, dtype=float))
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


class _CommutatorEvenKernel:
    """k(u) = (1/pi) int_0^inf sqrt(mu^2+xi^2) exp(-(xi/lam)^2) cos(u xi) dxi.

    Fixed high-resolution quadrature, computed once per distinct |u| and
    cached; a field evaluation touches only the O(n) lattice separations.
    """

    def __init__(self, lam: float, mu: float, n_nodes: int = 1 << 15):
        self.lam = float(lam)
        self.mu = float(mu)
        xi_max = 8.0 * self.lam
        n = n_nodes + (n_nodes % 2)          # Simpson needs an even panel count
        self._xi = np.arange(n + 1) * (xi_max / n)
        w = np.full(n + 1, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        self._w = w * (xi_max / n) / 3.0
        self._sym = np.sqrt(self.mu ** 2 + self._xi ** 2) * np.exp(-(self._xi / self.lam) ** 2)
        self._cache: dict = {}

    def _compute(self, us: np.ndarray) -> np.ndarray:
        # outer product in manageable blocks
        out = np.empty(len(us))
        block = 256
        sw = self._sym * self._w
        for s in range(0, len(us), block):
            seg = us[s:s + block]
            out[s:s + block] = (np.cos(np.outer(seg, self._xi)) * sw).sum(axis=1) / np.pi
        return out

    def __call__(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        flat = np.round(u.ravel(), 12)
        missing = [v for v in dict.fromkeys(flat.tolist()) if v not in self._cache]
        if missing:
            vals = self._compute(np.asarray(missing))
            self._cache.update(zip(missing, vals))
        out = np.asarray([self._cache[v] for v in flat.tolist()])
        return out.reshape(u.shape)


def gallery(name: str, **params) -> KernelModel:
    """Concrete operators: hilbert, cauchy-lipschitz(lam), commutator(...),
    bilinear-homog, positive-control."""
    if name == "hilbert":
        def rule(x, y):
            return 1.0 / (np.pi * (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
        return KernelModel(name="hilbert", arity="linear", d=1, delta=1.0,
                           size_constant=1.0 / np.pi, rule=rule,
                           grid_mode=DEFAULT_GRID_MODE[name])

    if name == "cauchy-lipschitz":
        lam = float(params.pop("lam", 0.3))
        lip_bound = float(params.pop("lip_bound", 0.5))
        if params:
            raise ValueError(f"unknown cauchy-lipschitz params {sorted(params)}")
        def A(x):
            return lam * _logcosh(x)
        measured = _lipschitz_sup(A)
        if measured > lip_bound + 1e-9:
            raise ValueError(
                f"Lipschitz constant of A is {measured:.4f}, exceeds bound {lip_bound}")
        def rule(x, y, _A=A):
            x = np.asarray(x, dtype=float); y = np.asarray(y, dtype=float)
            return 1.0 / ((x - y) + 1j * (_A(x) - _A(y)))
        K = KernelModel(name="cauchy-lipschitz", arity="linear", d=1, delta=1.0,
                        size_constant=1.0, rule=rule,
                        grid_mode=DEFAULT_GRID_MODE[name],
                        params={"lam": lam})
        object.__setattr__(K, "A", A)
        object.__setattr__(K, "A_prime", lambda x, _l=lam: _l * np.tanh(np.asarray(x, dtype=float)))
        return K

    if name == "commutator":
        lam_trunc = float(params.pop("lam_trunc", 64.0))
        mu = float(params.pop("mu", 1.0 / 64.0))
        a_amp = float(params.pop("a_amp", 0.1))
        m_amp = float(params.pop("m_amp", 0.05))
        if params:
            raise ValueError(f"unknown commutator params {sorted(params)}")
        keven = _CommutatorEvenKernel(lam_trunc, mu)
        def a(x):
            x = np.asarray(x, dtype=float)
            return x - a_amp * np.cos(x)
        def m(x):
            return 1.0 + m_amp * np.sin(3.0 * np.asarray(x, dtype=float))
        def rule(x, y, _a=a, _m=m, _k=keven):
            x = np.asarray(x, dtype=float); y = np.asarray(y, dtype=float)
            return (_a(y) - _a(x)) * _m(x) * _k(x - y)
        K = KernelModel(name="commutator", arity="linear", d=1, delta=1.0,
                        size_constant=(1.0 + a_amp) * (1.0 + m_amp), rule=rule,
                        grid_mode=DEFAULT_GRID_MODE[name],
                        params={"lam_trunc": lam_trunc, "mu": mu,
                                "a_amp": a_amp, "m_amp": m_amp})
        object.__setattr__(K, "k_even", keven)
        return K

    if name == "bilinear-homog":
        def rule(x, y, z):
            x = np.asarray(x, dtype=float)
            u = x - np.asarray(y, dtype=float)
            v = x - np.asarray(z, dtype=float)
            s2 = u * u + v * v
            out = np.zeros(np.broadcast(u, v).shape)
            nz = s2 > 0
            uu = np.broadcast_to(u, out.shape)[nz]
            vv = np.broadcast_to(v, out.shape)[nz]
            out[nz] = uu * vv / (uu * uu + vv * vv) ** 2
            return out
        return KernelModel(name="bilinear-homog", arity="bilinear", d=1, delta=1.0,
                           size_constant=0.5, rule=rule,
                           grid_mode=DEFAULT_GRID_MODE[name])

    if name == "positive-control":
        def rule(x, y):
            return 1.0 / np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return KernelModel(name="positive-control", arity="linear", d=1, delta=1.0,
                           size_constant=1.0, rule=rule,
                           grid_mode=DEFAULT_GRID_MODE[name])

    raise ValueError(f"unknown gallery operator {name!r}; known: {GALLERY_NAMES}")


def transpose_kernel(K: KernelModel, which: int = 1) -> KernelModel:
    """Argument-swapped kernel: K*(x,y)=K(y,x); K*1(x,y,z)=K(y,x,z); K*2=K(z,y,x)."""
    if K.arity == "linear":
        if which != 1:
            raise ValueError("linear kernels have a single transpose")
        r = K.rule
        return replace(K, name=K.name + "*", rule=lambda x, y, _r=r: _r(y, x))
    if which == 1:
        r = K.rule
        return replace(K, name=K.name + "*1", rule=lambda x, y, z, _r=r: _r(y, x, z))
    if which == 2:
        r = K.rule
        return replace(K, name=K.name + "*2", rule=lambda x, y, z, _r=r: _r(z, y, x))
    raise ValueError("which must be 1 or 2")


# --- certification samplers ---

def _sep_samples(rng, n, d, base_span=8.0, r_lo=1e-3, r_hi=10.0):
    x = rng.uniform(-base_span, base_span, size=(n, d))
    r = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), size=n))
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return x, r, u


def check_size(K: KernelModel, n_samples: int = 10_000, seed: int = 1234) -> KernelCertificate:
    """sup over samples of |K| * separation^d (linear) or ^(2d) (bilinear)."""
    rng = np.random.default_rng(seed)
    d = K.d
    if K.arity == "linear":
        x, r, u = _sep_samples(rng, n_samples, d)
        y = x + r[:, None] * u
        vals = np.abs(np.asarray(K.rule(x[:, 0], y[:, 0]) if d == 1 else K.rule(x, y)))
        stat = vals * r ** d
    else:
        x, r1, u1 = _sep_samples(rng, n_samples, d)
        _, r2, u2 = _sep_samples(rng, n_samples, d)
        y = x + r1[:, None] * u1
        z = x + r2[:, None] * u2
        vals = np.abs(np.asarray(K.rule(x[:, 0], y[:, 0], z[:, 0])))
        stat = vals * (r1 + r2) ** (2 * d)
    bad = ~np.isfinite(stat)
    if np.any(bad):
        warnings.warn(f"{int(np.sum(bad))} sample(s) hit the diagonal; dropped",
                      stacklevel=2)
        stat = np.where(bad, 0.0, stat)
    i = int(np.argmax(stat))
    return KernelCertificate(kernel=K.name, condition="size", delta=None,
                             constant=float(stat[i]), samples=n_samples, seed=seed,
                             witness=(float(x[i, 0]), float(r1[i] if K.arity == "bilinear" else r[i])))


def check_regularity(K: KernelModel, delta: float | None = None,
                     n_samples: int = 10_000, seed: int = 1234) -> KernelCertificate:
    """Measured Holder-quotient constant at order delta.

    Linear: sup of (|K(x,y)-K(x',y)| + |K(y,x)-K(y,x')|) |x-y|^(d+delta) / |x-x'|^delta
    over admissible |x-x'| < |x-y|/2. Bilinear: the analogous quotient with
    (|x-y|+|x-z|)^(2d+delta), maximized over K, K*1, K*2.
    """
    if delta is None:
        delta = K.delta
    rng = np.random.default_rng(seed)
    d = K.d
    if K.arity == "linear":
        x, r, u = _sep_samples(rng, n_samples, d)
        y = x + r[:, None] * u
        w = rng.normal(size=(n_samples, d))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        s = rng.uniform(0.01, 0.999, size=n_samples) * r / 2.0
        xp = x + s[:, None] * w
        t1 = np.abs(np.asarray(K.rule(x[:, 0], y[:, 0])) - np.asarray(K.rule(xp[:, 0], y[:, 0])))
        t2 = np.abs(np.asarray(K.rule(y[:, 0], x[:, 0])) - np.asarray(K.rule(y[:, 0], xp[:, 0])))
        stat = (t1 + t2) * r ** (d + delta) / s ** delta
        i = int(np.argmax(np.where(np.isfinite(stat), stat, 0.0)))
        return KernelCertificate(kernel=K.name, condition="regularity", delta=delta,
                                 constant=float(stat[i]), samples=n_samples, seed=seed,
                                 witness=(float(x[i, 0]), float(xp[i, 0]), float(y[i, 0])))
    x, r1, u1 = _sep_samples(rng, n_samples, d)
    _, r2, u2 = _sep_samples(rng, n_samples, d)
    y = x + r1[:, None] * u1
    z = x + r2[:, None] * u2
    w = rng.normal(size=(n_samples, d))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    s = rng.uniform(0.01, 0.999, size=n_samples) * np.maximum(r1, r2) / 2.0
    xp = x + s[:, None] * w
    sep = (r1 + r2) ** (2 * d + delta)
    best = None
    rules = [K.rule, transpose_kernel(K, 1).rule, transpose_kernel(K, 2).rule]
    for rule in rules:
        t = np.abs(np.asarray(rule(x[:, 0], y[:, 0], z[:, 0])) -
                   np.asarray(rule(xp[:, 0], y[:, 0], z[:, 0])))
        stat = t * sep / s ** delta
        stat = np.where(np.isfinite(stat), stat, 0.0)
        cand = float(np.max(stat))
        if best is None or cand > best[0]:
            i = int(np.argmax(stat))
            best = (cand, (float(x[i, 0]), float(xp[i, 0]), float(y[i, 0]), float(z[i, 0])))
    return KernelCertificate(kernel=K.name, condition="regularity", delta=delta,
                             constant=best[0], samples=n_samples, seed=seed,
                             witness=best[1])
