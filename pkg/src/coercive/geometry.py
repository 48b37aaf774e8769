"""Group arithmetic, horizontal operators and homogeneous norms.

Points are stored as float arrays of shape ``(..., D)``.  On Euclidean space
``R^n`` we have ``D = n``; on the Heisenberg group ``H_l`` the first ``2l``
coordinates are the horizontal part ``x`` and the last one is the central
coordinate ``z``.

The horizontal fields are

    X_i     = d/dx_i     + (1/2) x_{i+l} d/dz
    X_{i+l} = d/dx_{i+l} - (1/2) x_i     d/dz

and their exact flows are left translations ``g -> (h e_i, 0) o g`` under the
group law ``(x1, z1) o (x2, z2) = (x1 + x2, z1 + z2 + S(x1, x2)/2)``.  The
matching distance is ``d(g, h) = |g o h^{-1}|`` so that ``|grad d(., c)| = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numba import njit
from scipy.optimize import minimize

TWO_PI = 2.0 * np.pi
AXIS_EPS = 1e-8  # |x| below this counts as the center axis


class GeometryError(ValueError):
    """Invalid geometric input (dimension mismatch, bad step, ...)."""


class OracleError(RuntimeError):
    """The trajectory oracle failed to reach its endpoint."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Space:
    """Euclidean ``R^n`` (``kind='euclidean'``) or Heisenberg ``H_l``."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in ("euclidean", "heisenberg"):
            raise GeometryError(f"unknown space kind {self.kind!r}")
        if self.n < 1:
            raise GeometryError("dimension parameter must be >= 1")

    @classmethod
    def euclidean(cls, n: int) -> "Space":
        return cls("euclidean", int(n))

    @classmethod
    def heisenberg(cls, l: int = 1) -> "Space":
        return cls("heisenberg", int(l))

    @property
    def is_heisenberg(self) -> bool:
        return self.kind == "heisenberg"

    @property
    def dim(self) -> int:
        """Coordinate dimension."""
        return 2 * self.n + 1 if self.is_heisenberg else self.n

    @property
    def horizontal_dim(self) -> int:
        return 2 * self.n if self.is_heisenberg else self.n

    @property
    def Q(self) -> int:
        """Homogeneous dimension."""
        return 2 * self.n + 2 if self.is_heisenberg else self.n

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n}


@dataclass(frozen=True)
class GroupPoint:
    """A single point ``(x, z)``; ``z`` is 0 on Euclidean spaces."""

    x: Tuple[float, ...]
    z: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=float)
        if not (np.all(np.isfinite(arr)) and np.isfinite(self.z)):
            raise GeometryError("GroupPoint coordinates must be finite")

    def to_array(self, space: Space) -> np.ndarray:
        if len(self.x) != space.horizontal_dim:
            raise GeometryError("horizontal part does not match the space")
        if space.is_heisenberg:
            return np.array(list(self.x) + [self.z], dtype=float)
        return np.array(self.x, dtype=float)

    @classmethod
    def from_array(cls, space: Space, a: np.ndarray) -> "GroupPoint":
        a = np.asarray(a, dtype=float)
        if space.is_heisenberg:
            return cls(tuple(a[:-1].tolist()), float(a[-1]))
        return cls(tuple(a.tolist()), 0.0)


PointLike = Union[GroupPoint, np.ndarray, Sequence[float]]


def as_points(space: Space, g: PointLike) -> np.ndarray:
    """Coerce ``g`` to a float array whose last axis has length ``space.dim``."""
    if isinstance(g, GroupPoint):
        return g.to_array(space)
    a = np.asarray(g, dtype=float)
    if a.shape[-1] != space.dim:
        raise GeometryError(
            f"point dimension {a.shape[-1]} does not match space dimension {space.dim}")
    if not np.all(np.isfinite(a)):
        raise GeometryError("non-finite coordinates")
    return a


def symplectic(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """S(x, y) = sum_i x_i y_{i+l} - x_{i+l} y_i over the last axis."""
    l = x.shape[-1] // 2
    return np.sum(x[..., :l] * y[..., l:] - x[..., l:] * y[..., :l], axis=-1)


def group_mul(space: Space, a: PointLike, b: PointLike) -> np.ndarray:
    """Group product ``a o b`` (vector addition on Euclidean spaces)."""
    a = as_points(space, a)
    b = as_points(space, b)
    if not space.is_heisenberg:
        return a + b
    a, b = np.broadcast_arrays(a, b)
    out = a + b
    out[..., -1] += 0.5 * symplectic(a[..., :-1], b[..., :-1])
    return out


def inverse(space: Space, g: PointLike) -> np.ndarray:
    return -as_points(space, g)


def identity(space: Space) -> np.ndarray:
    return np.zeros(space.dim)


def dilate(space: Space, s: float, g: PointLike) -> np.ndarray:
    """``delta_s``: (x, z) -> (s x, s^2 z)."""
    if not s > 0:
        raise GeometryError("dilation factor must be positive")
    g = as_points(space, g).copy()
    if space.is_heisenberg:
        g[..., :-1] *= s
        g[..., -1] *= s * s
    else:
        g *= s
    return g


def horizontal_norm(space: Space, g: np.ndarray) -> np.ndarray:
    g = as_points(space, g)
    return np.linalg.norm(g[..., :space.horizontal_dim], axis=-1)


# ---------------------------------------------------------------------------
# CC distance on H_1 via the geodesic parametrization


@njit(cache=True)
def _pms(phi):
    """phi - sin(phi) without cancellation for small phi."""
    if abs(phi) < 0.05:
        p2 = phi * phi
        return phi * p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0 * (1.0 - p2 / 72.0)))
    return phi - math.sin(phi)


@njit(cache=True)
def _solve_angle_scalar(rho):
    """Solve (phi - sin phi) / (8 sin^2(phi/2)) = rho on (0, 2 pi).

    Newton on the log of the left side, safeguarded by bisection.
    """
    if rho < 1e-5:
        # rho = phi/12 (1 + phi^2/30 + O(phi^4)); avoids underflow of phi^3
        phi = 12.0 * rho
        return phi * (1.0 - phi * phi / 30.0)
    lo = 0.0
    hi = TWO_PI
    if rho < 1.0:
        phi = 12.0 * rho
    else:
        phi = TWO_PI - math.sqrt(math.pi / rho)
    phi = min(max(phi, 1e-300), TWO_PI * (1.0 - 1e-16))
    target = math.log(rho)
    for _ in range(100):
        s = math.sin(0.5 * phi)
        c = math.cos(0.5 * phi)
        pm = _pms(phi)
        val = math.log(pm / (8.0 * s * s)) - target
        if val < 0.0:
            lo = phi
        else:
            hi = phi
        deriv = 2.0 * s * s / pm - c / s
        new = phi - val / deriv
        if not (new >= lo and new <= hi) or not math.isfinite(new):
            new = 0.5 * (lo + hi)
        if abs(new - phi) <= 2e-16 * new or hi - lo <= 4e-16 * hi:
            return new
        phi = new
    return phi


@njit(cache=True)
def _h1_kernel(r, u, out, angle):
    for k in range(r.shape[0]):
        rk = abs(r[k])
        uk = abs(u[k])
        if uk == 0.0:
            out[k] = rk
            angle[k] = 0.0
        elif rk == 0.0:
            out[k] = 2.0 * math.sqrt(math.pi * uk)
            angle[k] = TWO_PI
        else:
            phi = _solve_angle_scalar(uk / (rk * rk))
            angle[k] = phi
            if phi < 1e-4:
                out[k] = rk * (1.0 + phi * phi / 24.0)
            elif rk * rk >= uk:
                out[k] = rk * phi / (2.0 * math.sin(0.5 * phi))
            else:
                out[k] = math.sqrt(2.0 * phi * phi * uk / _pms(phi))


def h1_distance(r: np.ndarray, u: np.ndarray, return_angle: bool = False):
    """CC distance from e to a point of H_1 with |x| = r and |z| = u.

    Geodesics are circular arcs with angle phi; |x| = 2 L sin(phi/2)/phi and
    |z| = L^2 (phi - sin phi)/(2 phi^2) for length L.  On the axis
    d(0, z) = 2 sqrt(pi |z|).
    """
    r, u = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(u, dtype=float))
    shape = r.shape
    rf = np.ascontiguousarray(r.ravel())
    uf = np.ascontiguousarray(u.ravel())
    out = np.empty_like(rf)
    angle = np.empty_like(rf)
    _h1_kernel(rf, uf, out, angle)
    if return_angle:
        return out.reshape(shape), angle.reshape(shape)
    return out.reshape(shape)


def cc_distance_and_gradient(space: Space, g: PointLike) -> Tuple[np.ndarray, np.ndarray]:
    """CC distance and its analytic horizontal gradient.

    With phi the geodesic angle, dL/d|x| = cos(phi/2) and dL/d|z| = phi/L, so
    grad d = cos(phi/2) x/|x| + sgn(z) (phi/L) grad|z|.  NaN on the axis.
    """
    g = as_points(space, g)
    if not space.is_heisenberg:
        d = np.linalg.norm(g, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            grad = g / d[..., None]
        return d, np.where((d > 0)[..., None], grad, np.nan)
    l = space.n
    x = g[..., :-1]
    z = g[..., -1]
    r = np.linalg.norm(x, axis=-1)
    d, phi = h1_distance(r, z, return_angle=True)
    swap = np.concatenate([x[..., l:], -x[..., :l]], axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        grad = (np.cos(0.5 * phi) / r)[..., None] * x \
            + (np.sign(z) * phi / d)[..., None] * 0.5 * swap
    grad = np.where((r >= AXIS_EPS)[..., None], grad, np.nan)
    return d, grad


def cc_distance(space: Space, g: PointLike) -> np.ndarray:
    """Carnot-Caratheodory distance from the identity.

    On ``H_l`` the value depends only on ``(|x|, |z|)`` and reduces to the
    ``H_1`` formula; on ``R^n`` it is the Euclidean norm.
    """
    g = as_points(space, g)
    if not space.is_heisenberg:
        return np.linalg.norm(g, axis=-1)
    return h1_distance(np.linalg.norm(g[..., :-1], axis=-1), g[..., -1])


def pair_distance(space: Space, g: PointLike, h: PointLike) -> np.ndarray:
    """d(g, h) = |g o h^{-1}|, invariant under the flows of the X_i."""
    return cc_distance(space, group_mul(space, g, inverse(space, h)))


def kaplan_norm(space: Space, g: PointLike) -> np.ndarray:
    """Smooth homogeneous norm (|x|^4 + 16 z^2)^(1/4); |x| on R^n."""
    g = as_points(space, g)
    if not space.is_heisenberg:
        return np.linalg.norm(g, axis=-1)
    x2 = np.sum(g[..., :-1] ** 2, axis=-1)
    return (x2 * x2 + 16.0 * g[..., -1] ** 2) ** 0.25


def homogeneous_norm(space: Space, g: PointLike, kind: str = "cc") -> np.ndarray:
    if kind == "cc":
        return cc_distance(space, g)
    if kind == "kaplan":
        return kaplan_norm(space, g)
    raise GeometryError(f"unknown norm kind {kind!r}")


# ---------------------------------------------------------------------------
# horizontal differential operators


def flow(space: Space, g: np.ndarray, i: int, h: Union[float, np.ndarray]) -> np.ndarray:
    """Exact time-``h`` flow of X_i started at ``g``: (h e_i, 0) o g."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    out = g.copy()
    out[..., i] += h
    if space.is_heisenberg:
        l = space.n
        if i < l:
            out[..., -1] += 0.5 * h * g[..., i + l]
        else:
            out[..., -1] -= 0.5 * h * g[..., i - l]
    return out


def default_step(space: Space, g: np.ndarray, base: float = 1e-4) -> np.ndarray:
    return base * np.maximum(1.0, kaplan_norm(space, g))


def _check_finite(vals: np.ndarray):
    if not np.all(np.isfinite(vals)):
        raise GeometryError("non-finite function values in finite differences")


def horizontal_gradient(space: Space, f: Callable, g: PointLike,
                        h: Optional[float] = None) -> np.ndarray:
    """(X_1 f, ..., X_m f) at ``g`` by central differences along exact flows.

    ``f`` maps an array of points ``(..., D)`` to values ``(...)``.  If ``f``
    has a ``grad`` method (analytic horizontal gradient) that is used instead.
    """
    g = as_points(space, g)
    if hasattr(f, "grad"):
        return f.grad(space, g)
    if h is not None and h <= 0:
        raise GeometryError("finite-difference step must be positive")
    step = default_step(space, g) if h is None else np.full(g.shape[:-1], float(h))
    m = space.horizontal_dim
    out = np.empty(g.shape[:-1] + (m,))
    for i in range(m):
        fp = np.asarray(f(flow(space, g, i, step)), dtype=float)
        fm = np.asarray(f(flow(space, g, i, -step)), dtype=float)
        _check_finite(fp)
        _check_finite(fm)
        out[..., i] = (fp - fm) / (2.0 * step)
    return out


def kohn_laplacian(space: Space, f: Callable, g: PointLike,
                   h: Optional[float] = None) -> np.ndarray:
    """sum_i X_i^2 f by second differences along the exact flows."""
    g = as_points(space, g)
    if h is not None and h <= 0:
        raise GeometryError("finite-difference step must be positive")
    step = 1e-3 * np.maximum(1.0, kaplan_norm(space, g)) if h is None \
        else np.full(g.shape[:-1], float(h))
    f0 = np.asarray(f(g), dtype=float)
    _check_finite(f0)
    total = np.zeros(g.shape[:-1])
    for i in range(space.horizontal_dim):
        fp = np.asarray(f(flow(space, g, i, step)), dtype=float)
        fm = np.asarray(f(flow(space, g, i, -step)), dtype=float)
        _check_finite(fp)
        _check_finite(fm)
        total += (fp - 2.0 * f0 + fm) / (step * step)
    return total


def distance_gradient(space: Space, g: PointLike, center: Optional[PointLike] = None,
                      h: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Values and horizontal gradient of g -> d(g, center).

    Analytic by default; finite differences with step ``h`` if given.  Points on the center axis of ``g o center^{-1}`` (where d is not
    differentiable) get NaN gradients.
    """
    g = as_points(space, g)
    if center is not None:
        c = as_points(space, center)
        y = group_mul(space, g, inverse(space, c))
    else:
        y = g
    if h is None:
        return cc_distance_and_gradient(space, y)
    d = cc_distance(space, y)
    grad = horizontal_gradient(space, lambda p: cc_distance(space, p), y, h)
    if space.is_heisenberg:
        axis = np.linalg.norm(y[..., :-1], axis=-1) < AXIS_EPS
        grad[axis] = np.nan
    return d, grad


def kaplan_gradient(space: Space, g: PointLike) -> np.ndarray:
    """Analytic horizontal gradient of the Kaplan norm (zero at e)."""
    g = as_points(space, g)
    if not space.is_heisenberg:
        r = np.linalg.norm(g, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(r[..., None] > 0, g / r[..., None], 0.0)
        return out
    l = space.n
    x = g[..., :-1]
    z = g[..., -1]
    x2 = np.sum(x * x, axis=-1)
    phi = kaplan_norm(space, g)
    swap = np.concatenate([x[..., l:], -x[..., :l]], axis=-1)
    num = x2[..., None] * x + 4.0 * z[..., None] * swap
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(phi[..., None] > 0, num / phi[..., None] ** 3, 0.0)
    return out


# ---------------------------------------------------------------------------
# trajectory-optimization oracle


def _curve_endpoint(a: np.ndarray, l: int) -> Tuple[np.ndarray, float]:
    """Endpoint of the piecewise-straight horizontal curve with controls ``a``.

    Segment k is the left translation by (a_k/n, 0), so the z-increment of
    segment k is S(a_k, X_{k-1})/(2n) with X_{k-1} the partial sum.
    """
    n = a.shape[0]
    steps = a / n
    partial = np.vstack([np.zeros(2 * l), np.cumsum(steps, axis=0)[:-1]])
    z = 0.5 * np.sum(symplectic(steps, partial))
    return steps.sum(axis=0), float(z)


def curve_length(a: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(a, axis=1)) / a.shape[0])


def cc_distance_oracle(space: Space, g: PointLike, n_segments: int = 64,
                       n_starts: int = 8, seed: int = 0,
                       tol: float = 1e-6) -> float:
    """Shortest piecewise-straight horizontal curve from e to ``g``.

    Controls are piecewise constant on ``n_segments`` equal pieces; the
    endpoint is integrated exactly and the length is minimized subject to the
    endpoint constraint, from ``n_starts`` random initial controls.
    """
    if n_segments < 8:
        raise GeometryError("oracle needs at least 8 segments")
    target = as_points(space, g)
    if not space.is_heisenberg:
        return float(np.linalg.norm(target))
    l = space.n
    m = 2 * l
    n = n_segments
    tx = target[:-1]
    tz = target[-1]
    J = np.block([[np.zeros((l, l)), np.eye(l)], [-np.eye(l), np.zeros((l, l))]])
    scale = max(float(kaplan_norm(space, target)), 1e-12)

    # minimizing the energy sum |a_k|^2 / n gives a constant-speed curve whose
    # length is the minimal length (Cauchy-Schwarz), and is smooth
    def energy(v):
        return float(np.dot(v, v) / n)

    def energy_grad(v):
        return 2.0 * v / n

    def cons(v):
        x, z = _curve_endpoint(v.reshape(n, m), l)
        return np.concatenate([x - tx, [z - tz]])

    def cons_jac(v):
        a = v.reshape(n, m)
        csum = np.cumsum(a, axis=0)
        before = np.vstack([np.zeros(m), csum[:-1]])
        after = csum[-1] - csum
        jz = (before - after) @ J.T / (2.0 * n * n)
        jac = np.zeros((m + 1, n * m))
        for i in range(m):
            jac[i, i::m] = 1.0 / n
        jac[m] = jz.ravel()
        return jac

    rng = np.random.default_rng(seed)
    best = np.inf
    best_res = np.inf
    s = np.linspace(0.0, 1.0, n, endpoint=False) + 0.5 / n
    for k in range(n_starts):
        # a circle-ish loop plus the chord, with random radius and phase
        amp = scale * rng.uniform(0.5, 4.0)
        ph = rng.uniform(0, TWO_PI)
        a0 = np.tile(tx, (n, 1)).astype(float)
        a0[:, 0] += amp * np.cos(TWO_PI * s + ph)
        a0[:, l] += amp * np.sin(TWO_PI * s + ph) * (-1 if k % 2 else 1)
        a0 += 0.05 * scale * rng.standard_normal(a0.shape)
        res = minimize(energy, a0.ravel(), jac=energy_grad, method="SLSQP",
                       constraints=[{"type": "eq", "fun": cons, "jac": cons_jac}],
                       options={"maxiter": 1000, "ftol": 1e-14})
        resid = float(np.max(np.abs(cons(res.x)))) / max(scale, 1.0)
        ell = curve_length(res.x.reshape(n, m))
        if resid < tol and ell < best:
            best = ell
        best_res = min(best_res, resid)
    if not np.isfinite(best):
        raise OracleError("oracle failed to reach the endpoint", best_res)
    return float(best)


# ---------------------------------------------------------------------------
# gradient zeros of the smooth norm


def gradient_vanishing_scan(space: Space, norm: str = "kaplan",
                            grid: int = 201) -> Tuple[np.ndarray, float]:
    """Scan the unit sphere {phi = 1} of H_1 for the minimum of |grad phi|.

    Returns the minimizing point and the minimal gradient length.  The sphere
    is parametrized by |x| = cos(t)^(1/2), z = sin(t)/4, t in [-pi/2, pi/2].
    """
    if not space.is_heisenberg or space.n != 1:
        raise GeometryError("the scan is implemented on H_1")
    if norm != "kaplan":
        raise GeometryError("the scan needs a smooth norm (kaplan)")
    t = np.linspace(-np.pi / 2, np.pi / 2, grid)
    a = np.linspace(0, TWO_PI, grid, endpoint=False)
    T, A = np.meshgrid(t, a, indexing="ij")
    rad = np.sqrt(np.maximum(np.cos(T), 0.0))
    pts = np.stack([rad * np.cos(A), rad * np.sin(A), np.sin(T) / 4.0], axis=-1).reshape(-1, 3)
    grad = horizontal_gradient(space, lambda p: kaplan_norm(space, p), pts)
    gn = np.linalg.norm(grad, axis=-1)
    k = int(np.argmin(gn))
    return pts[k], float(gn[k])


def random_points(space: Space, n: int, rng: np.random.Generator,
                  scale: float = 1.0) -> np.ndarray:
    """Random points with horizontal part ~ N(0, scale^2) and z ~ N(0, scale^4)."""
    g = rng.standard_normal((n, space.dim)) * scale
    if space.is_heisenberg:
        g[:, -1] *= scale
    return g
