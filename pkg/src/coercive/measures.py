"""Probability measures on R^n and H_l: potentials, normalization, sampling."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, special

from .geometry import Space, as_points, cc_distance, homogeneous_norm, horizontal_norm


class MeasureError(ValueError):
    """Invalid measure description or non-integrable density."""


class SamplerDiagnosticError(RuntimeError):
    """The sampler failed its acceptance-rate diagnostics."""


@dataclass(frozen=True)
class PotentialSpec:
    """U = beta d^p + W(d) + V(d), or the slow tail U = beta log(1 + d).

    ``norm`` selects the d used in the potential: ``'cc'`` (CC distance, the
    Euclidean norm on R^n) or ``'kaplan'`` (smooth homogeneous norm).
    ``W`` is ``None``, ``{'family': 'cosine', 'theta': t}`` meaning
    t d^(p-1) cos(d), or ``{'family': 'poly', 'coeffs': [c0, c1, ...]}`` meaning
    sum c_k d^k.  ``V`` is ``None`` or ``{'family': 'bump', 'c': c}`` meaning
    c exp(-d^2).
    """

    beta: float = 1.0
    p_exp: float = 2.0
    norm: str = "cc"
    W: Optional[dict] = None
    V: Optional[dict] = None
    slow_tail_beta: Optional[float] = None

    def __post_init__(self):
        if self.slow_tail_beta is None:
            if not (self.beta > 0 and self.p_exp >= 1):
                raise MeasureError("base potential needs beta > 0 and p >= 1")
        elif not self.slow_tail_beta > 0:
            raise MeasureError("slow tail needs beta > 0")
        if self.norm not in ("cc", "kaplan"):
            raise MeasureError(f"unknown norm {self.norm!r}")
        if self.W is not None and self.W.get("family") not in ("cosine", "poly", "zero"):
            raise MeasureError(f"unknown W family {self.W!r}")
        if self.V is not None and self.V.get("family") not in ("bump", "zero"):
            raise MeasureError(f"unknown V family {self.V!r}")

    @property
    def is_slow_tail(self) -> bool:
        return self.slow_tail_beta is not None

    @property
    def osc_V(self) -> float:
        if self.V is None or self.V.get("family") == "zero":
            return 0.0
        return abs(float(self.V["c"]))

    def W_value(self, d: np.ndarray) -> np.ndarray:
        W = self.W
        if W is None or W.get("family") == "zero":
            return np.zeros_like(d)
        if W["family"] == "cosine":
            return float(W["theta"]) * d ** (self.p_exp - 1.0) * np.cos(d)
        return np.polynomial.polynomial.polyval(d, np.asarray(W["coeffs"], dtype=float))

    def W_derivative(self, d: np.ndarray) -> np.ndarray:
        W = self.W
        if W is None or W.get("family") == "zero":
            return np.zeros_like(d)
        if W["family"] == "cosine":
            t, p = float(W["theta"]), self.p_exp
            with np.errstate(divide="ignore", invalid="ignore"):
                lead = np.where(d > 0, (p - 1.0) * d ** (p - 2.0), 0.0 if p > 2 else 1.0)
            return t * (lead * np.cos(d) - d ** (p - 1.0) * np.sin(d))
        c = np.polynomial.polynomial.polyder(np.asarray(W["coeffs"], dtype=float))
        return np.polynomial.polynomial.polyval(d, c)

    def V_value(self, d: np.ndarray) -> np.ndarray:
        if self.osc_V == 0.0:
            return np.zeros_like(d)
        return float(self.V["c"]) * np.exp(-d * d)

    def radial(self, d: np.ndarray) -> np.ndarray:
        """U as a function of d."""
        d = np.asarray(d, dtype=float)
        if self.is_slow_tail:
            return self.slow_tail_beta * np.log1p(d)
        return self.beta * d ** self.p_exp + self.W_value(d) + self.V_value(d)

    def radial_derivative(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.is_slow_tail:
            return self.slow_tail_beta / (1.0 + d)
        base = self.beta * self.p_exp * d ** (self.p_exp - 1.0)
        dv = 0.0 if self.osc_V == 0.0 else -2.0 * d * float(self.V["c"]) * np.exp(-d * d)
        return base + self.W_derivative(d) + dv


@dataclass(frozen=True)
class HeatKernelSurrogate:
    """Density (1 + |x| d)^(-1/2) exp(-d^2/4) on H_1 (unnormalized)."""

    kind: str = "heat_kernel_surrogate"


@dataclass(frozen=True)
class SamplerConfig:
    step: float = 1.0
    burn_in: int = 10_000
    n_chains: int = 64
    max_thin: int = 50


@dataclass(frozen=True)
class MeasureSpec:
    space: Space
    potential: object  # PotentialSpec | HeatKernelSurrogate
    logZ: Optional[float] = None
    logZ_err: Optional[float] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "potential": {type(self.potential).__name__: asdict(self.potential)},
            "sampler": asdict(self.sampler),
        }

    @property
    def is_surrogate(self) -> bool:
        return isinstance(self.potential, HeatKernelSurrogate)


def spec_hash(m: MeasureSpec) -> str:
    blob = json.dumps(m.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def gaussian_1d() -> MeasureSpec:
    """e^{-x^2}/Z on R^1."""
    return MeasureSpec(Space.euclidean(1), PotentialSpec(1.0, 2.0))


def power_measure(space: Space, beta: float, p: float, norm: str = "cc", **kw) -> MeasureSpec:
    return MeasureSpec(space, PotentialSpec(beta, p, norm, **kw))


def surrogate_measure() -> MeasureSpec:
    return MeasureSpec(Space.heisenberg(1), HeatKernelSurrogate())


# ---------------------------------------------------------------------------
# densities


def measure_distance(m: MeasureSpec, pts: np.ndarray) -> np.ndarray:
    """The d entering the potential (CC distance or Kaplan norm)."""
    norm = "cc" if m.is_surrogate else m.potential.norm
    return homogeneous_norm(m.space, pts, norm)


def potential(m: MeasureSpec, pts: np.ndarray) -> np.ndarray:
    pts = as_points(m.space, pts)
    d = measure_distance(m, pts)
    if m.is_surrogate:
        return 0.5 * np.log1p(horizontal_norm(m.space, pts) * d) + 0.25 * d * d
    return m.potential.radial(d)


def log_density_unnormalized(m: MeasureSpec, pts) -> np.ndarray:
    """-U(g): minus the potential."""
    return -potential(m, pts)


def _sphere_area(k: int) -> float:
    """Area of the unit sphere S^{k-1} in R^k."""
    return 2.0 * math.pi ** (k / 2.0) / math.gamma(k / 2.0)


def _log_radial_integral(logf, R0: float, tol: float) -> Tuple[float, float]:
    """log of int_0^inf exp(logf(r)) dr with truncation doubling."""
    grid = np.linspace(0.0, R0, 4001)[1:]
    shift = float(np.max(logf(grid)))
    prev = None
    R = R0
    for _ in range(12):
        val, err = integrate.quad(lambda r: math.exp(logf(np.array([r]))[0] - shift), 0.0, R,
                                  limit=500, epsabs=0.0, epsrel=1e-12)
        if prev is not None and abs(val - prev) <= tol * 0.5 * val:
            return shift + math.log(val), abs(val - prev) / val + err / val
        prev = val
        R *= 2.0
    raise MeasureError("radial normalization did not stabilize under truncation doubling")


def _heisenberg_log_integral(m: MeasureSpec, R: float, n_rho: int, n_theta: int,
                             extra=None) -> float:
    """log int exp(-U + extra) dlambda on H_l in Kaplan-polar coordinates.

    x-radius = rho cos(t)^(1/2), z = +-rho^2 sin(t)/4, t in [0, pi/2]; the
    Lebesgue density becomes |S^{2l-1}| rho^(2l+1) cos(t)^(l-1) / 4 (z >= 0
    half, doubled by symmetry in z).
    """
    l = m.space.n
    xr, wr = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(0.0, R, n_rho + 1)
    rho = (0.5 * (edges[1:] - edges[:-1])[:, None] * (xr[None, :] + 1) + edges[:-1, None]).ravel()
    w_rho = (0.5 * (edges[1:] - edges[:-1])[:, None] * wr[None, :]).ravel()
    tedges = np.linspace(0.0, np.pi / 2, n_theta + 1)
    th = (0.5 * (tedges[1:] - tedges[:-1])[:, None] * (xr[None, :] + 1) + tedges[:-1, None]).ravel()
    w_th = (0.5 * (tedges[1:] - tedges[:-1])[:, None] * wr[None, :]).ravel()
    P, T = np.meshgrid(rho, th, indexing="ij")
    rad = P * np.sqrt(np.cos(T))
    pts = np.zeros(P.shape + (m.space.dim,))
    pts[..., 0] = rad
    pts[..., -1] = P * P * np.sin(T) / 4.0
    logv = -potential(m, pts)
    if extra is not None:
        logv = logv + extra(pts)
    logv = logv + (2 * l + 1) * np.log(np.maximum(P, 1e-300)) + (l - 1) * np.log(np.maximum(np.cos(T), 1e-300))
    shift = np.max(logv)
    tot = np.sum(np.exp(logv - shift) * w_rho[:, None] * w_th[None, :])
    return float(shift + np.log(tot) + np.log(2.0 * _sphere_area(2 * l) / 4.0))


def log_integral(m: MeasureSpec, extra=None, tol: float = 1e-8) -> Tuple[float, float]:
    """log int exp(-U + extra) dlambda with an error estimate.

    ``extra`` is an optional function of points added to the log density; on
    R^n it must depend on the point only through d.
    """
    sp = m.space
    if not m.is_surrogate and m.potential.is_slow_tail and extra is None:
        b = m.potential.slow_tail_beta
        if b <= sp.Q:
            raise MeasureError(f"slow tail needs beta > Q = {sp.Q} to be integrable")
        if not sp.is_heisenberg:
            # int_0^inf r^{n-1} (1+r)^{-b} dr = B(n, b - n)
            n = sp.n
            return math.log(_sphere_area(n)) + special.betaln(n, b - n), 0.0
    if not sp.is_heisenberg:
        n = sp.n

        def logf(r):
            pts = np.zeros((len(r), n))
            pts[:, 0] = r
            v = -potential(m, pts) + (n - 1) * np.log(np.maximum(r, 1e-300))
            if extra is not None:
                v = v + extra(pts)
            return v

        R0 = _radial_scale(m)
        val, err = _log_radial_integral(logf, R0, tol)
        return math.log(_sphere_area(n)) + val, err
    R = _radial_scale(m)
    prev = _heisenberg_log_integral(m, R, 64, 32, extra)
    for _ in range(8):
        cur = _heisenberg_log_integral(m, 2 * R, 128, 48, extra)
        if abs(cur - prev) <= tol:
            return cur, abs(cur - prev)
        prev = cur
        R *= 2
    raise MeasureError("H_l normalization did not stabilize")


def _radial_scale(m: MeasureSpec) -> float:
    """A radius beyond which the density is negligible (start of doubling)."""
    if m.is_surrogate:
        return 16.0
    pot = m.potential
    if pot.is_slow_tail:
        return 1e4
    return max(2.0, (60.0 / pot.beta) ** (1.0 / pot.p_exp))


def normalize(m: MeasureSpec, tol: float = 1e-8) -> MeasureSpec:
    """Return ``m`` with ``logZ`` filled in (reference measure: Lebesgue)."""
    logZ, err = log_integral(m, tol=tol)
    return replace(m, logZ=logZ, logZ_err=err)


# ---------------------------------------------------------------------------
# samples


@dataclass
class SampleSet:
    """Points with optional probability weights (quadrature rules)."""

    points: np.ndarray
    weights: Optional[np.ndarray] = None
    seed: int = 0
    acceptance: float = float("nan")
    ess: float = float("nan")
    thin: int = 1
    step: float = float("nan")
    method: str = "MC"
    tol: float = 0.0
    spec_hash: str = ""

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    def to_csv(self, space: Space) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed} spec_hash={self.spec_hash} method={self.method} "
                  f"acceptance={self.acceptance:.6f} ess={self.ess:.3f}\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = [f"x{i + 1}" for i in range(space.horizontal_dim)]
        if space.is_heisenberg:
            cols.append("z")
        if self.weights is not None:
            cols.append("weight")
        w.writerow(cols)
        for k in range(self.n):
            row = [repr(float(v)) for v in self.points[k]]
            if self.weights is not None:
                row.append(repr(float(self.weights[k])))
            w.writerow(row)
        return buf.getvalue()


def _lag_autocorr(x: np.ndarray, lag: int) -> float:
    """Lag autocorrelation averaged over chains (x has shape (steps, chains))."""
    x = x - x.mean(axis=0)
    num = np.sum(x[lag:] * x[:-lag], axis=0)
    den = np.sum(x * x, axis=0)
    good = den > 0
    return float(np.mean(num[good] / den[good])) if np.any(good) else 0.0


def sample(m: MeasureSpec, n: int, seed: int = 0) -> SampleSet:
    """Random-walk Metropolis with ``n_chains`` parallel chains.

    Step size is tuned during burn-in toward acceptance in [0.2, 0.45]; the
    thinning is the smallest lag at which the autocorrelation of d drops below
    0.5.  Output is chain-major so that consecutive blocks come from one chain.
    """
    if n < 1:
        raise MeasureError("need at least one sample")
    cfg = m.sampler
    rng = np.random.default_rng(seed)
    C = min(cfg.n_chains, n)
    D = m.space.dim
    x = rng.standard_normal((C, D)) * 0.5
    if m.space.is_heisenberg:
        x[:, -1] *= 0.25
    lp = log_density_unnormalized(m, x)
    step = float(cfg.step)
    acc_win = 0
    win = 0
    for it in range(cfg.burn_in):
        prop = x + step * rng.standard_normal((C, D))
        lq = log_density_unnormalized(m, prop)
        acc = np.log(rng.random(C)) < lq - lp
        x[acc] = prop[acc]
        lp[acc] = lq[acc]
        acc_win += int(acc.sum())
        win += C
        if (it + 1) % 100 == 0:
            rate = acc_win / win
            if it < 0.8 * cfg.burn_in:
                if rate < 0.2 or rate > 0.45:
                    step *= math.exp(2.0 * (rate - 0.3))
            acc_win = win = 0
    # pilot run for thinning
    pilot_len = 400
    trace = np.empty((pilot_len, C))
    n_acc = 0
    for it in range(pilot_len):
        prop = x + step * rng.standard_normal((C, D))
        lq = log_density_unnormalized(m, prop)
        acc = np.log(rng.random(C)) < lq - lp
        x[acc] = prop[acc]
        lp[acc] = lq[acc]
        n_acc += int(acc.sum())
        trace[it] = measure_distance(m, x)
    thin = 1
    while thin < cfg.max_thin and _lag_autocorr(trace, thin) >= 0.5:
        thin += 1
    per_chain = -(-n // C)
    out = np.empty((per_chain, C, D))
    dtrace = np.empty((per_chain, C))
    tot_acc = 0
    for k in range(per_chain):
        for _ in range(thin):
            prop = x + step * rng.standard_normal((C, D))
            lq = log_density_unnormalized(m, prop)
            acc = np.log(rng.random(C)) < lq - lp
            x[acc] = prop[acc]
            lp[acc] = lq[acc]
            tot_acc += int(acc.sum())
        out[k] = x
        dtrace[k] = measure_distance(m, x)
    rate = tot_acc / (per_chain * thin * C)
    if not 0.05 <= rate <= 0.8:
        raise SamplerDiagnosticError(f"acceptance rate {rate:.3f} outside [0.05, 0.8]")
    rho1 = _lag_autocorr(dtrace, 1) if per_chain > 2 else 0.0
    pts = out.transpose(1, 0, 2).reshape(-1, D)[:n]
    ess = n * max(1.0 - rho1, 1e-3) / (1.0 + max(rho1, 0.0))
    return SampleSet(pts, None, seed, rate, ess, thin, step, "MC", 0.0, spec_hash(m))


def radial_exact_sample(m: MeasureSpec, n: int, seed: int = 0,
                        grid: int = 200_001) -> SampleSet:
    """Exact sampler for radial potentials on R^n by inverse CDF of r^{n-1}e^{-U(r)}."""
    if m.space.is_heisenberg or m.is_surrogate:
        raise MeasureError("exact radial sampling exists only on R^n")
    k = m.space.n
    R = _radial_scale(m) * 2.0
    if m.potential.is_slow_tail:
        # heavy tail: sample on a log-spaced radial grid
        r = np.concatenate([[0.0], np.geomspace(1e-8, 1e8, grid - 1)])
    else:
        r = np.linspace(0.0, R, grid)
    pts = np.zeros((grid, k))
    pts[:, 0] = r
    logf = -potential(m, pts) + (k - 1) * np.log(np.maximum(r, 1e-300))
    f = np.exp(logf - logf.max())
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(r))])
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    rs = np.interp(u, cdf, r)
    if k == 1:
        dirs = np.where(rng.random(n) < 0.5, -1.0, 1.0)[:, None]
    else:
        dirs = rng.standard_normal((n, k))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    out = rs[:, None] * dirs
    return SampleSet(out, None, seed, 1.0, float(n), 1, float("nan"), "MC", 0.0, spec_hash(m))


def quadrature_rule_1d(m: MeasureSpec, n_panels: int = 800, order: int = 16,
                       R: Optional[float] = None) -> SampleSet:
    """Gauss-Legendre rule on [-R, R] with weights proportional to the density.

    Used as a deterministic oracle for R^1 estimators.
    """
    if m.space.dim != 1:
        raise MeasureError("quadrature rule is one-dimensional")
    if R is None:
        R = 2.0 * _radial_scale(m)
    xr, wr = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-R, R, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (half[:, None] * (xr[None] + 1) + edges[:-1, None]).ravel()
    w = (half[:, None] * wr[None]).ravel()
    lp = log_density_unnormalized(m, x[:, None])
    w = w * np.exp(lp - lp.max())
    w /= w.sum()
    return SampleSet(x[:, None], w, 0, float("nan"), float("nan"), 1, float("nan"),
                     "Quadrature", 1e-10, spec_hash(m))
