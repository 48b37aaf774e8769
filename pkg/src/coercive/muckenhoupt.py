"""One-dimensional Muckenhoupt quantities and a finite-difference gap oracle.

For mu = rho dx on R and conjugate exponents 1/q + 1/q' = 1,

    B_+(r) = mu([r, inf))^(1/q) * (int_0^r rho^(-q'/q))^(1/q').

All quantities are returned as logarithms.  Integrals run in mpmath
(tanh-sinh) so that factors like exp(+-1500) need no rescaling; the
normalization of rho cancels between the two factors.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import mpmath as mp
import numpy as np


class MuckenhouptError(RuntimeError):
    """Quadrature or eigen-iteration failed to converge."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class OneDimMeasure:
    """rho proportional to exp(-U) on R.

    ``family``: 'power' (U = beta|x|^p), 'oscillating'
    (U = beta|x|^p (1 + eps cos x)) or 'uniform' (U = 0 on [-R, R]).
    """

    family: str = "power"
    beta: float = 1.0
    p: float = 2.0
    eps: float = 0.0

    def __post_init__(self):
        if self.family not in ("power", "oscillating", "uniform"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family != "uniform" and not (self.beta > 0 and self.p >= 1):
            raise ValueError("need beta > 0 and p >= 1")
        if self.family == "oscillating" and not 0 <= self.eps < 1:
            raise ValueError("need eps in [0, 1)")

    def U(self, x):
        """Potential at x (mpf or float)."""
        if self.family == "uniform":
            return 0 * x
        a = abs(x) ** self.p * self.beta
        if self.family == "oscillating":
            cos = mp.cos if isinstance(x, mp.mpf) else math.cos
            return a * (1 + self.eps * cos(x))
        return a

    def U_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.family == "uniform":
            return np.zeros_like(x)
        a = self.beta * np.abs(x) ** self.p
        if self.family == "oscillating":
            return a * (1.0 + self.eps * np.cos(x))
        return a

    @property
    def tail_floor(self) -> float:
        """beta_min with U >= beta_min |x|^p (domination of the tail)."""
        return self.beta * (1.0 - self.eps) if self.family == "oscillating" else self.beta


def power_potential(beta: float = 1.0, p: float = 2.0) -> OneDimMeasure:
    return OneDimMeasure("power", beta, p)


def oscillating_potential(beta: float = 1.0, p: float = 2.0, eps: float = 0.5) -> OneDimMeasure:
    return OneDimMeasure("oscillating", beta, p, eps)


def uniform_density() -> OneDimMeasure:
    return OneDimMeasure("uniform")


# ---------------------------------------------------------------------------
# quadrature


def _quad(fn, pts, tol: float):
    val, err = mp.quad(fn, pts, error=True, maxdegree=10)
    if not mp.isfinite(val) or (val != 0 and err > tol * abs(val)):
        raise MuckenhouptError(f"quadrature did not converge (value {val}, error {err})",
                               partial=(val, err))
    return val, err


def _slope_bound(m: OneDimMeasure, x: float) -> float:
    """A bound on |U'| near x, used to size quadrature pieces."""
    if m.family == "uniform":
        return 0.0
    ax = abs(x) + 1.0
    return m.beta * ((1 + m.eps) * m.p * ax ** (m.p - 1.0) + m.eps * ax ** m.p)


def _log_exp_integral(m: OneDimMeasure, a: float, b: float, s: float, tol: float):
    """log int_a^b exp(s U(x)) dx and an absolute error bound on that log.

    Pieces are sized so that s U moves by O(1) across each; pieces whose
    dense-grid maximum lies more than log(1/tol) + 10 below the global
    maximum are dropped and their bound added to the error.
    """
    edges = [a]
    while edges[-1] < b:
        w = min(math.pi / 8, 2.0 / (abs(s) * _slope_bound(m, edges[-1]) + 1e-300))
        edges.append(min(b, edges[-1] + w))
    edges = np.array(edges)
    dense = np.linspace(a, b, max(2000, 16 * len(edges)))
    vals = s * m.U_array(dense)
    top = float(vals.max())
    idx = np.searchsorted(dense, edges)
    cut = top - math.log(1.0 / tol) - 10.0
    keep, dropped = [], 0.0
    for k in range(len(edges) - 1):
        lo, hi = idx[k], max(idx[k + 1], idx[k] + 1)
        pmax = float(vals[max(lo - 1, 0):min(hi + 1, len(vals))].max())
        if pmax < cut:
            dropped += (edges[k + 1] - edges[k]) * math.exp(pmax + 1.0 - top)
        else:
            keep.append(k)
    total, err = mp.mpf(0), mp.mpf(0)
    shift = mp.mpf(top)
    f = lambda x: mp.exp(s * m.U(x) - shift)
    # contiguous runs of kept pieces
    runs, cur = [], []
    for k in keep:
        if cur and k != cur[-1] + 1:
            runs.append(cur)
            cur = []
        cur.append(k)
    if cur:
        runs.append(cur)
    for run in runs:
        pts = [mp.mpf(float(edges[k])) for k in run] + [mp.mpf(float(edges[run[-1] + 1]))]
        v, e = _quad(f, pts, tol)
        total += v
        err += e
    if total <= 0:
        raise MuckenhouptError("integral vanished", partial=(total, err))
    return mp.log(total) + shift, float((err + dropped) / total)


def _tail_cut(m: OneDimMeasure, a: float, target_log: float) -> float:
    """Radius R > a with int_R^inf e^{-U} <= e^{target_log} via U >= b|x|^p."""
    b, p = m.tail_floor, m.p
    R = abs(a) + 1.0
    for _ in range(100000):
        # int_R^inf e^{-b x^p} dx <= e^{-b R^p} / (b p R^(p-1))
        lg = -b * R ** p - math.log(b * p * R ** (p - 1.0))
        if lg < target_log:
            return R
        R += 0.25
    raise MuckenhouptError("could not bound the tail")


def log_tail_mass(m: OneDimMeasure, r: float, tol: float = 1e-12, dps: int = 30):
    """log int_r^inf e^{-U} for r >= 0 and a relative error bound.

    The tail beyond a cutoff is bounded analytically by the domination
    U >= beta (1 - eps) |x|^p.
    """
    with mp.workdps(dps):
        xs = np.linspace(r, r + 2 * math.pi, 2001)
        head = -float(m.U_array(xs).min())
        R = _tail_cut(m, r, head + math.log(tol))
        val, rel = _log_exp_integral(m, r, R, -1.0, tol)
        return val, rel + tol


def log_inner_mass(m: OneDimMeasure, r: float, expo: float, tol: float = 1e-12, dps: int = 30):
    """log int_0^r e^{expo U} for r > 0 and a relative error bound."""
    with mp.workdps(dps):
        return _log_exp_integral(m, 0.0, r, expo, tol)


def b_plus(m: OneDimMeasure, r: float, q: float = 2.0, tol: float = 1e-12, dps: int = 30) -> float:
    """log B_+(r) for r > 0 (the normalization of rho cancels)."""
    if not r > 0:
        raise ValueError("b_plus needs r > 0")
    if not q > 1:
        raise ValueError("need q > 1")
    qc = q / (q - 1.0)
    if m.family == "uniform":
        raise ValueError("uniform density has no tail; use fd_spectral_gap")
    with mp.workdps(dps):
        tail, _ = log_tail_mass(m, r, tol, dps)
        inner, _ = log_inner_mass(m, r, qc / q, tol, dps)
        return float(tail / q + inner / qc)


def b_minus(m: OneDimMeasure, r: float, q: float = 2.0, tol: float = 1e-12, dps: int = 30) -> float:
    """log B_-(r) at the point -|r|; the families are even, so this mirrors b_plus
    through the substitution x -> -x."""
    return b_plus(m, abs(r), q, tol, dps)


def muckenhoupt_sup(m: OneDimMeasure, q: float = 2.0, r_max: float = 50.0, n_uniform: int = 50,
                    tol: float = 1e-12) -> Tuple[float, float]:
    """(max log B_+, argmax) over r_n = 2n pi + pi/2 and a uniform grid up to r_max."""
    grid = list(np.linspace(r_max / n_uniform, r_max, n_uniform))
    n = 0
    while 2 * n * math.pi + math.pi / 2 <= r_max:
        grid.append(2 * n * math.pi + math.pi / 2)
        n += 1
    vals = [(b_plus(m, float(r), q, tol), float(r)) for r in sorted(grid)]
    return max(vals)


# ---------------------------------------------------------------------------
# the oscillating counterexample


def structured_radius(n: int) -> float:
    return 2.0 * n * math.pi + math.pi / 2.0


def lower_bound_chain(beta: float, p: float, eps: float, q: float, n: int,
                      dps: int = 30) -> Tuple[float, float, float]:
    """Three successively weaker lower bounds for log B_+(r_n).

    (integral form, endpoint form, closed form); ``p`` is the potential exponent
    and q' = q/(q-1) enters through the inner factor.
    """
    qc = q / (q - 1.0)
    tn = 2.0 * n * math.pi
    with mp.workdps(dps):
        lo = power_potential(beta * (1 - eps / 2), p)
        hi = power_potential(beta * (1 + eps / 2), p)
        A, _ = _log_exp_integral(lo, tn + 4 * math.pi / 3, tn + 8 * math.pi / 3, -1.0, 1e-12)
        B, _ = _log_exp_integral(hi, tn - 2 * math.pi / 3, tn + 2 * math.pi / 3, qc / q, 1e-12)
        integral = float(A / q + B / qc)
    L = math.log(4.0 * math.pi / 3.0)
    endpoint = (-beta / q * abs(tn + 8 * math.pi / 3) ** p * (1 - eps / 2) + L / q
                + beta / q * abs(tn - 2 * math.pi / 3) ** p * (1 + eps / 2) + L / qc)
    closed = L + beta * tn ** p / q * (abs(1 - 1 / (3 * n)) ** p * (1 + eps / 2)
                                       - abs(1 + 4 / (3 * n)) ** p * (1 - eps / 2))
    return integral, endpoint, closed


@dataclass
class SeriesRow:
    n: int
    r_n: float
    logB: float
    log_lower_bound: float
    log_lower_endpoint: float
    log_lower_closed: float


def counterexample_series(beta: float = 1.0, p: float = 2.0, eps: float = 0.5, q: float = 2.0,
                          n_max: int = 4, tol: float = 1e-12, dps: int = 30) -> List[SeriesRow]:
    """Rows (n, r_n, log B_+(r_n), lower bounds) for n = 1..n_max."""
    if not 0 <= eps < 1 or beta <= 0 or p < 1:
        raise ValueError("need eps in [0,1), beta > 0, p >= 1")
    if n_max > 6:
        raise ValueError("n_max > 6 is outside the reliable range")
    m = oscillating_potential(beta, p, eps)
    rows = []
    for n in range(1, n_max + 1):
        r = structured_radius(n)
        lb = lower_bound_chain(beta, p, eps, q, n, dps) if eps > 0 else (-math.inf,) * 3
        rows.append(SeriesRow(n, r, b_plus(m, r, q, tol, dps), *lb))
    return rows


def growth_slope(rows: Sequence[SeriesRow], column: str = "logB", p: float = 2.0) -> float:
    """Least-squares slope of a column against (2 n pi)^p."""
    x = np.array([(2 * r.n * math.pi) ** p for r in rows])
    y = np.array([getattr(r, column) for r in rows])
    return float(np.polyfit(x, y, 1)[0])


def series_to_csv(rows: Sequence[SeriesRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "r_n", "logB", "log_lower_bound", "log_lower_endpoint", "log_lower_closed"])
    for r in rows:
        w.writerow([r.n, repr(r.r_n), repr(r.logB), repr(r.log_lower_bound),
                    repr(r.log_lower_endpoint), repr(r.log_lower_closed)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# finite-difference spectral gap


def fd_spectral_gap(m: OneDimMeasure, R: float, grid_n: int = 2048, tol: float = 1e-10,
                    max_iter: int = 500, dps: Optional[int] = None, seed: int = 0) -> float:
    """Smallest nonzero eigenvalue of the weighted Neumann problem on [-R, R].

    Dirichlet form sum w_{i+1/2}(f_{i+1}-f_i)^2/h^2 against sum w_i f_i^2.
    Block inverse iteration (two vectors, Rayleigh-Ritz) at shift 0 on the
    complement of constants; each solve is the exact flux recursion.  It runs
    in mpmath with enough digits to cover the dynamic range of the weights,
    since deflating constants must be accurate where the weight is tiny.
    The block of two handles near-degenerate pairs of symmetric wells.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")
    N = int(grid_n)
    xs_f = np.linspace(-R, R, N)
    hf = xs_f[1] - xs_f[0]
    Uf = np.concatenate([m.U_array(xs_f), m.U_array(xs_f[:-1] + hf / 2)])
    if dps is None:
        dps = int(math.ceil((Uf.max() - Uf.min()) / math.log(10.0))) + 30
    with mp.workdps(dps):
        h = mp.mpf(2 * R) / (N - 1)
        xs = [-mp.mpf(R) + i * h for i in range(N)]
        w = [mp.exp(-m.U(x)) for x in xs]
        wm = [mp.exp(-m.U(xs[i] + h / 2)) for i in range(N - 1)]
        wsum = mp.fsum(w)
        h2 = h * h

        def center(u):
            c = mp.fsum(wi * ui for wi, ui in zip(w, u)) / wsum
            return [ui - c for ui in u]

        def wdot(u, v):
            return mp.fsum(wi * a * b for wi, a, b in zip(w, u, v))

        def kdot(u, v):
            return mp.fsum(wm[i] * (u[i + 1] - u[i]) * (v[i + 1] - v[i]) for i in range(N - 1)) / h2

        def solve(g):
            s = mp.mpf(0)
            out = [mp.mpf(0)] * N
            for i in range(N - 1):
                s += w[i] * g[i]
                out[i + 1] = out[i] - h2 * s / wm[i]
            return center(out)

        def orthonormalize(U):
            out = []
            for u in U:
                for v in out:
                    c = wdot(u, v)
                    u = [a - c * b for a, b in zip(u, v)]
                nrm = mp.sqrt(wdot(u, u))
                out.append([a / nrm for a in u])
            return out

        rng = np.random.default_rng(seed)
        U = orthonormalize([center([mp.mpf(float(v)) for v in rng.standard_normal(N)])
                            for _ in range(2)])
        lam_prev = None
        for it in range(max_iter):
            U = orthonormalize([solve(u) for u in U])
            a, b, c = kdot(U[0], U[0]), kdot(U[0], U[1]), kdot(U[1], U[1])
            # smallest eigenvalue of [[a, b], [b, c]]
            lam = (a + c) / 2 - mp.sqrt(((a - c) / 2) ** 2 + b * b)
            if lam_prev is not None and abs(lam - lam_prev) <= tol * abs(lam):
                return float(lam)
            lam_prev = lam
        raise MuckenhouptError("inverse iteration did not converge",
                               partial=None if lam_prev is None else float(lam_prev))
