"""Test functions and estimators of the functionals in coercive inequalities.

Every estimator works on a ``SampleSet``.  Monte Carlo sets get a block
jackknife standard error (blocks of 100 consecutive samples); quadrature sets
(explicit probability weights) get ``std_error = 0`` and carry their
tolerance.
"""
from __future__ import annotations

import json
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .geometry import Space, as_points, cc_distance, distance_gradient, identity

BLOCK = 100


class FunctionalError(ValueError):
    """Degenerate input to an estimator."""


class GradientDiagnosticError(RuntimeError):
    """Too many points where the gradient is undefined."""


# ---------------------------------------------------------------------------
# test functions


def _horizontal_from_euclidean(space: Space, pts: np.ndarray, egrad: np.ndarray) -> np.ndarray:
    """Apply X_i = d_i + x_{i+l}/2 d_z, X_{i+l} = d_{i+l} - x_i/2 d_z."""
    if not space.is_heisenberg:
        return egrad
    l = space.n
    x = pts[..., :-1]
    dz = egrad[..., -1:]
    swap = np.concatenate([x[..., l:], -x[..., :l]], axis=-1)
    return egrad[..., :-1] + 0.5 * swap * dz


@dataclass
class TestFunction:
    """A scalar field from a parametric family, with its horizontal gradient.

    Families: ``constant`` (c), ``plateau`` (center, r_in, r_out),
    ``fourier`` (weights, freqs, phases), ``polynomial`` (c0, b, A),
    ``polycut`` (polynomial times a plateau cutoff of radius R),
    ``radial_power`` (t, kappa) = (t + d)^kappa and ``exp`` of an inner
    function (composite).
    """

    __test__ = False  # not a pytest class

    space: Space
    family: str
    params: dict = field(default_factory=dict)
    inner: Optional["TestFunction"] = None
    fid: str = ""

    # -- evaluation -------------------------------------------------------
    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.value_and_grad(pts, need_grad=False)[0]

    def grad(self, space: Space, pts: np.ndarray) -> np.ndarray:
        return self.value_and_grad(pts)[1]

    def value_and_grad(self, pts: np.ndarray, need_grad: bool = True):
        sp = self.space
        pts = as_points(sp, pts)
        fam = self.family
        P = self.params
        m = sp.horizontal_dim
        if fam == "constant":
            v = np.full(pts.shape[:-1], float(P["c"]))
            return v, np.zeros(pts.shape[:-1] + (m,))
        if fam == "plateau":
            r_in, r_out = float(P["r_in"]), float(P["r_out"])
            c = np.asarray(P["center"], dtype=float)
            if need_grad:
                d, gd = distance_gradient(sp, pts, c)
            else:
                from .geometry import pair_distance
                d, gd = pair_distance(sp, pts, c), None
            v = np.clip((r_out - d) / (r_out - r_in), 0.0, 1.0)
            if not need_grad:
                return v, None
            inside = (d > r_in) & (d < r_out)
            g = np.where(inside[..., None], -gd / (r_out - r_in), 0.0)
            return v, g
        if fam == "fourier":
            a = np.asarray(P["weights"], dtype=float)
            w = np.asarray(P["freqs"], dtype=float)
            ph = np.asarray(P["phases"], dtype=float)
            arg = pts @ w.T + ph
            v = np.cos(arg) @ a
            if not need_grad:
                return v, None
            eg = -(np.sin(arg) * a) @ w
            return v, _horizontal_from_euclidean(sp, pts, eg)
        if fam == "polynomial":
            c0 = float(P.get("c0", 0.0))
            b = np.asarray(P.get("b", np.zeros(sp.dim)), dtype=float)
            A = np.asarray(P.get("A", np.zeros((sp.dim, sp.dim))), dtype=float)
            A = 0.5 * (A + A.T)
            Ag = pts @ A
            v = c0 + pts @ b + np.sum(Ag * pts, axis=-1)
            if not need_grad:
                return v, None
            eg = b + 2.0 * Ag
            return v, _horizontal_from_euclidean(sp, pts, eg)
        if fam == "polycut":
            poly = TestFunction(sp, "polynomial", {k: P[k] for k in ("c0", "b", "A")})
            R = float(P["R"])
            cut = TestFunction(sp, "plateau", {"center": identity(sp), "r_in": R, "r_out": 2 * R})
            pv, pg = poly.value_and_grad(pts, need_grad)
            cv, cg = cut.value_and_grad(pts, need_grad)
            if not need_grad:
                return pv * cv, None
            return pv * cv, pg * cv[..., None] + pv[..., None] * cg
        if fam == "radial_power":
            t, k = float(P["t"]), float(P["kappa"])
            if need_grad:
                d, gd = distance_gradient(sp, pts)
            else:
                d, gd = cc_distance(sp, pts), None
            v = (t + d) ** k
            if not need_grad:
                return v, None
            g = (k * (t + d) ** (k - 1.0))[..., None] * gd
            return v, g
        if fam == "exp":
            iv, ig = self.inner.value_and_grad(pts, need_grad)
            v = np.exp(iv)
            if not need_grad:
                return v, None
            return v, v[..., None] * ig
        if fam == "scaled":
            c = float(P["c"])
            iv, ig = self.inner.value_and_grad(pts, need_grad)
            return c * iv, (None if ig is None else c * ig)
        raise FunctionalError(f"unknown family {fam!r}")

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(self.space, "scaled", {"c": float(c)}, inner=self, fid=f"{self.fid}*{c:g}")

    def describe(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            return v
        out = {"family": self.family, "params": {k: clean(v) for k, v in self.params.items()}}
        if self.inner is not None:
            out["inner"] = self.inner.describe()
        return out


def constant(space: Space, c: float = 1.0) -> TestFunction:
    return TestFunction(space, "constant", {"c": c}, fid=f"const({c:g})")


def coordinate(space: Space, i: int = 0, scale: float = 1.0) -> TestFunction:
    b = np.zeros(space.dim)
    b[i] = scale
    return TestFunction(space, "polynomial", {"c0": 0.0, "b": b}, fid=f"coord{i}")


def plateau(space: Space, center, r: float, r_out: Optional[float] = None) -> TestFunction:
    """1 on the ball of radius r, 0 outside radius r_out (default 2r)."""
    r_out = 2.0 * r if r_out is None else r_out
    c = as_points(space, np.asarray(center, dtype=float))
    return TestFunction(space, "plateau", {"center": c, "r_in": float(r), "r_out": float(r_out)},
                        fid="plateau")


def exp_tilt(space: Space, b: Sequence[float], A=None) -> TestFunction:
    inner = TestFunction(space, "polynomial",
                         {"c0": 0.0, "b": np.asarray(b, dtype=float),
                          "A": np.zeros((space.dim, space.dim)) if A is None else np.asarray(A)})
    return TestFunction(space, "exp", {}, inner=inner, fid="exp_tilt")


def default_suite(space: Space, seed: int = 0, scale: float = 1.0,
                  counts=(40, 30, 20, 10), anchors: Optional[np.ndarray] = None) -> List[TestFunction]:
    """Default test suite: plateau, Fourier, polynomial x cutoff, radial power.

    ``scale`` is the typical distance scale of the measure (e.g. median d).
    Plateau centers are drawn from ``anchors`` (e.g. sample points) when given,
    so that every plateau carries mass.
    """
    rng = np.random.default_rng(seed)
    D = space.dim
    s = float(scale)
    out: List[TestFunction] = []

    def rand_point(spread):
        g = rng.standard_normal(D) * spread
        if space.is_heisenberg:
            g[-1] *= spread
        return g

    for k in range(counts[0]):
        if anchors is not None:
            c = np.asarray(anchors[int(rng.integers(len(anchors)))], dtype=float)
        else:
            c = rand_point(0.5 * s)
        f = plateau(space, c, s * rng.uniform(0.3, 1.0))
        f.fid = f"plateau{k}"
        out.append(f)
    for k in range(counts[1]):
        K = int(rng.integers(1, 4))
        freqs = rng.standard_normal((K, D)) / s
        if space.is_heisenberg:
            freqs[:, -1] /= s
        out.append(TestFunction(space, "fourier", {
            "weights": rng.standard_normal(K), "freqs": freqs,
            "phases": rng.uniform(0, 2 * np.pi, K)}, fid=f"fourier{k}"))
    for k in range(counts[2]):
        A = rng.standard_normal((D, D)) / s ** 2
        out.append(TestFunction(space, "polycut", {
            "c0": float(rng.standard_normal()), "b": rng.standard_normal(D) / s,
            "A": A, "R": 2.0 * s * rng.uniform(0.75, 1.5)}, fid=f"polycut{k}"))
    for k in range(counts[3]):
        out.append(TestFunction(space, "radial_power", {
            "t": s * rng.uniform(0.5, 2.0), "kappa": rng.uniform(0.25, 1.0)},
            fid=f"radial{k}"))
    return out


# ---------------------------------------------------------------------------
# estimates


@dataclass
class Estimate:
    value: float
    std_error: float
    n: int
    method: str
    tol: float = 0.0

    def to_json(self) -> str:
        return json.dumps({"value": self.value, "std_error": self.std_error,
                           "n": self.n, "method": self.method}, sort_keys=True)


@dataclass
class Functional:
    """A smooth function ``fn`` of the means of per-sample columns."""

    cols: np.ndarray  # (n, k)
    fn: Callable[[np.ndarray], np.ndarray]  # (..., k) -> (...)

    def __post_init__(self):
        self.cols = np.asarray(self.cols, dtype=float)
        if self.cols.ndim == 1:
            self.cols = self.cols[:, None]


def _block_sums(x: np.ndarray, block: int) -> np.ndarray:
    """Block sums with fixed summation order (pairwise via numpy reductions)."""
    n = x.shape[0]
    nb = n // block
    head = x[: nb * block].reshape(nb, block, -1).sum(axis=1)
    if n > nb * block:
        head = np.vstack([head, x[nb * block:].sum(axis=0, keepdims=True)])
    return head


def estimate(F: Functional, ss, block: int = BLOCK) -> Estimate:
    cols = F.cols
    n = cols.shape[0]
    if n == 0:
        raise FunctionalError("empty sample")
    if ss.weights is not None:
        means = ss.weights @ cols
        return Estimate(float(F.fn(means)), 0.0, n, "Quadrature", float(ss.tol))
    bs = _block_sums(cols, block)
    sizes = np.full(bs.shape[0], float(block))
    if n % block:
        sizes[-1] = n - (n // block) * block
    total = bs.sum(axis=0)
    value = float(F.fn(total / n))
    B = bs.shape[0]
    if B < 2:
        return Estimate(value, float("nan"), n, "MC")
    loo = (total[None, :] - bs) / (n - sizes)[:, None]
    th = np.asarray(F.fn(loo), dtype=float)
    se = math.sqrt((B - 1) / B * float(np.sum((th - th.mean()) ** 2)))
    return Estimate(value, se, n, "MC")


def combine(fn: Callable, *Fs: Functional) -> Functional:
    """Functional fn(F1, F2, ...) on the concatenated columns."""
    sizes = [F.cols.shape[1] for F in Fs]
    cols = np.column_stack([F.cols for F in Fs])
    offs = np.cumsum([0] + sizes)

    def g(m):
        parts = [Fs[i].fn(m[..., offs[i]:offs[i + 1]]) for i in range(len(Fs))]
        return fn(*parts)

    return Functional(cols, g)


_CACHE: "OrderedDict" = OrderedDict()
_CACHE_SIZE = 8


def _cached(f, ss, need_grad: bool):
    """(values, gradients) of f on ss, memoized for repeated functionals."""
    key = (id(f), id(ss), id(ss.points))
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is f and hit[1] is ss and (hit[3] is not None or not need_grad):
        _CACHE.move_to_end(key)
        return hit[2], hit[3]
    if hasattr(f, "value_and_grad"):
        v, g = f.value_and_grad(ss.points, True)
    else:
        v, g = f(ss.points), None
    v = np.asarray(v, dtype=float)
    _CACHE[key] = (f, ss, v, g)
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return v, g


def _values(f, ss) -> np.ndarray:
    return _cached(f, ss, False)[0]


def moment_F(f, ss, q: float, weight: Optional[np.ndarray] = None) -> Functional:
    if q < 1:
        raise FunctionalError("q must be >= 1")
    v = np.abs(_values(f, ss)) ** q
    if weight is not None:
        v = v * weight
    return Functional(v, lambda m: m[..., 0])


def moment_q(m, ss, f, q: float) -> Estimate:
    """mu |f|^q."""
    return estimate(moment_F(f, ss, q), ss)


def variance_F(f, ss, q: float) -> Functional:
    v = _values(f, ss)
    if q == 2.0:
        return Functional(np.column_stack([v, v * v]), lambda m: m[..., 1] - m[..., 0] ** 2)
    w = ss.weights
    c = float(np.mean(v) if w is None else w @ v)
    dev = v - c
    a = np.abs(dev) ** q
    slope = -q * float(np.mean(np.abs(dev) ** (q - 1) * np.sign(dev)) if w is None
                       else w @ (np.abs(dev) ** (q - 1) * np.sign(dev)))
    # first-order correction for the estimated centering
    return Functional(np.column_stack([a, v]), lambda m: m[..., 0] + slope * (m[..., 1] - c))


def variance_q(m, ss, f, q: float) -> Estimate:
    """mu |f - mu f|^q with jackknife-corrected centering."""
    return estimate(variance_F(f, ss, q), ss)


def _xlogx(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def entropy_F(f, ss, q: float) -> Functional:
    h = np.abs(_values(f, ss)) ** q

    def fn(m):
        a, b = m[..., 0], m[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return b - np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)

    return Functional(np.column_stack([h, _xlogx(h)]), fn)


def entropy_q(m, ss, f, q: float) -> Estimate:
    """mu(|f|^q log(|f|^q / mu|f|^q)), with 0 log 0 = 0."""
    mass = moment_q(m, ss, f, q)
    if not mass.value > 0:
        raise FunctionalError("mu|f|^q must be positive for the entropy")
    return estimate(entropy_F(f, ss, q), ss)


def Phi(x: np.ndarray, varsigma: float) -> np.ndarray:
    """Phi(x) = x (log(1 + x))^varsigma."""
    x = np.asarray(x, dtype=float)
    if varsigma == 0.0:
        return x
    return x * np.log1p(x) ** varsigma


def phi_entropy_F(f, ss, varsigma: float) -> Functional:
    if not 0.0 <= varsigma <= 1.0:
        raise FunctionalError("varsigma must lie in [0, 1]")
    f2 = _values(f, ss) ** 2
    if varsigma == 0.0:
        return Functional(np.column_stack([f2]), lambda m: 0.0 * m[..., 0])
    return Functional(np.column_stack([Phi(f2, varsigma), f2]),
                      lambda m: m[..., 0] - Phi(m[..., 1], varsigma))


def phi_entropy(m, ss, f, varsigma: float) -> Estimate:
    """mu Phi(f^2) - Phi(mu f^2)."""
    return estimate(phi_entropy_F(f, ss, varsigma), ss)


def weight_values(space: Space, pts: np.ndarray, weight: Optional[dict], q: float) -> np.ndarray:
    """Weight functions for Dirichlet forms (functions of d = |g|).

    ``{'kind': 'bracket', 'p': p}``: <d>^(2-p), <d> = (1 + d^2)^(1/2);
    ``{'kind': 'power', 'a': a}``: d^a (e.g. a = q(kappa - alpha/p));
    ``{'kind': 'onepd_log'}``: (1+d)^q log(e+d);  ``{'kind': 'onepd'}``: (1+d)^q;
    ``{'kind': 'dlog'}``: d log(1+d).
    """
    if weight is None or weight.get("kind", "one") == "one":
        return np.ones(pts.shape[0])
    d = cc_distance(space, pts)
    k = weight["kind"]
    if k == "bracket":
        return (1.0 + d * d) ** ((2.0 - float(weight["p"])) / 2.0)
    if k == "power":
        return d ** float(weight["a"])
    if k == "onepd_log":
        return (1.0 + d) ** q * np.log(np.e + d)
    if k == "onepd":
        return (1.0 + d) ** q
    if k == "dlog":
        return d * np.log1p(d)
    raise FunctionalError(f"unknown weight {k!r}")


def gradient_norms(f, ss, space: Space, max_skip: float = 0.01) -> np.ndarray:
    """|grad f| on the sample; undefined points count as 0 (at most 1%)."""
    if hasattr(f, "value_and_grad"):
        g = _cached(f, ss, True)[1]
    else:
        from .geometry import horizontal_gradient
        g = horizontal_gradient(space, f, ss.points)
    gn = np.linalg.norm(g, axis=-1)
    bad = ~np.isfinite(gn)
    if bad.mean() > max_skip:
        raise GradientDiagnosticError(f"gradient undefined at {bad.mean():.2%} of points")
    gn[bad] = 0.0
    return gn


def dirichlet_F(f, ss, space: Space, q: float, weight: Optional[dict] = None) -> Functional:
    if q < 1:
        raise FunctionalError("q must be >= 1")
    gn = gradient_norms(f, ss, space) ** q
    w = weight_values(space, ss.points, weight, q)
    return Functional(w * gn, lambda m: m[..., 0])


def dirichlet_q(m, ss, f, q: float, weight: Optional[dict] = None) -> Estimate:
    """mu(w |grad f|^q) with the horizontal gradient."""
    return estimate(dirichlet_F(f, ss, m.space, q, weight), ss)


def exp_moment_curve(m, ss, f, t_grid: Sequence[float], L: Optional[float] = None):
    """G(t) = log(mu e^{t f}) / t on the grid, with standard errors.

    Values of f are truncated at +-L; L is reduced automatically if e^{tf}
    would overflow.
    """
    v = _values(f, ss)
    out = []
    for t in t_grid:
        t = float(t)
        if t == 0:
            raise FunctionalError("G(t) needs t != 0")
        vv = v if L is None else np.clip(v, -L, L)
        if t * np.max(vv) > 700:
            lim = 700.0 / t
            warnings.warn(f"truncating f at {lim:.3g} to avoid overflow at t={t:g}")
            vv = np.clip(vv, -lim, lim)
        shift = float(np.max(t * vv))
        e = np.exp(t * vv - shift)
        F = Functional(e, lambda mm, s=shift, tt=t: (np.log(mm[..., 0]) + s) / tt)
        out.append(estimate(F, ss))
    return out


def jackknife(values: np.ndarray, block: int = BLOCK) -> Estimate:
    """Block jackknife mean of a single column."""
    return estimate(Functional(np.asarray(values, dtype=float), lambda m: m[..., 0]),
                    type("S", (), {"weights": None, "tol": 0.0})(), block)
