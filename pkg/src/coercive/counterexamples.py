"""No log-Sobolev inequality for a smooth-norm Gibbs measure on H_1.

For mu = exp(-beta phi^p)/Z with phi the Kaplan norm, the plateau family

    f_t = clip((2r - d(g, t x0)) / r, 0, 1),   r = t^((1-p)/2),

centered at dilates of a point x0 where grad phi vanishes, has
entropy/energy ratio growing without bound.  The same family on the
CC-norm measure stays bounded.

All integrals are ball-local: points are drawn uniformly from the CC ball
B(t x0, 2r) and integrands are weighted by exp(-beta (phi^p - phi(t x0)^p)),
so that nothing underflows even when beta phi(t x0)^p is in the thousands.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate

from . import functionals as F
from .functionals import Estimate, Functional, estimate
from .geometry import (Space, dilate, gradient_vanishing_scan, group_mul, homogeneous_norm,
                       kaplan_gradient)
from .measures import SampleSet, normalize, power_measure

DEFAULT_T_GRID = (4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0)
MIN_ESS = 1000.0


class NoLSError(RuntimeError):
    pass


def cc_unit_ball_volume() -> float:
    """Lebesgue volume of the unit CC ball of H_1.

    The boundary is swept by unit-speed geodesics from the origin with angle
    phi in [0, 2 pi]: |x| = 2 sin(phi/2)/phi, z = (phi - sin phi)/(2 phi^2).
    The ball is {|z| <= z(|x|)}, so its volume is int 2 pi rho 2 z(rho) drho.
    """
    def rho(a):
        return 2.0 * math.sin(a / 2.0) / a

    def drho(a):
        return (math.cos(a / 2.0) * a - 2.0 * math.sin(a / 2.0)) / (a * a)

    def zz(a):
        return (a - math.sin(a)) / (2.0 * a * a)

    val, _ = integrate.quad(lambda a: 4.0 * math.pi * rho(a) * zz(a) * abs(drho(a)),
                            1e-12, 2.0 * math.pi, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def uniform_ball(space: Space, radius: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points of the CC ball B(0, radius) by rejection from a box.

    The unit ball lies in |x| <= 1, |z| <= 1/(2 pi): the height
    (phi - sin phi)/(2 phi^2) of the boundary peaks at phi = pi.
    """
    out = []
    have = 0
    zmax = 1.0 / (2.0 * math.pi)
    while have < n:
        m = int(1.7 * (n - have)) + 64
        x = rng.uniform(-1.0, 1.0, size=(m, 2))
        z = rng.uniform(-zmax, zmax, size=m)
        pts = np.column_stack([x, z])
        keep = pts[homogeneous_norm(space, pts, "cc") <= 1.0]
        out.append(keep)
        have += keep.shape[0]
    pts = np.vstack(out)[:n]
    return dilate(space, radius, pts)


@dataclass
class NoLSExperiment:
    beta: float = 1.0
    p_exp: float = 2.0
    q: float = 2.0
    t_grid: Sequence[float] = DEFAULT_T_GRID
    norm: str = "kaplan"
    x0: Optional[np.ndarray] = None
    n_samples: int = 100_000
    max_samples: int = 1_600_000
    seed: int = 0

    def __post_init__(self):
        if not (1.0 < self.q <= 2.0 and self.p_exp >= 1.0 and self.beta > 0):
            raise ValueError("need q in (1, 2], p >= 1, beta > 0")
        if self.x0 is None:
            self.x0 = base_point(self.norm)
        self.x0 = np.asarray(self.x0, dtype=float)

    @property
    def space(self) -> Space:
        return Space.heisenberg(1)

    def radius(self, t: float) -> float:
        return float(t) ** ((1.0 - self.p_exp) / 2.0)

    def valid(self, t: float) -> bool:
        """t phi(x0) > 4 r keeps B(t x0, 2r) away from the origin."""
        phi0 = float(homogeneous_norm(self.space, self.x0, self.norm))
        return t * phi0 > 4.0 * self.radius(t)


def base_point(norm: str) -> np.ndarray:
    """x0 on the center axis with phi(x0) = 1.

    For the Kaplan norm this is where the scan finds grad phi = 0; the CC
    norm has no such point, so the control uses the same axis direction.
    """
    sp = Space.heisenberg(1)
    if norm == "kaplan":
        pt, gmin = gradient_vanishing_scan(sp, "kaplan")
        if gmin >= 1e-6:
            raise NoLSError(f"no vanishing gradient found (min {gmin:.3g})")
        pt = np.array([0.0, 0.0, abs(pt[2])])
        if np.linalg.norm(kaplan_gradient(sp, pt)) >= 1e-6:
            raise NoLSError("axis point does not have a vanishing gradient")
        return pt
    if norm == "cc":
        return np.array([0.0, 0.0, 1.0 / (4.0 * math.pi)])
    raise ValueError(f"unknown norm {norm!r}")


@dataclass
class NoLSRecord:
    t: float
    r: float
    entropy: Estimate
    energy: Estimate
    mass: Estimate
    ratio: Estimate
    ess: float
    n: int
    valid: bool
    weight_spread: float
    log_scale: float
    norm: str

    def row(self) -> list:
        return [repr(self.t), repr(self.r), repr(self.entropy.value), repr(self.energy.value),
                repr(self.mass.value), repr(self.ratio.value), repr(self.ratio.std_error),
                repr(float(self.ess)), self.n, int(self.valid), repr(self.weight_spread),
                repr(self.log_scale), self.norm]


CSV_COLUMNS = ["t", "r", "entropy", "energy", "mass", "ratio", "ratio_se", "ess", "n", "valid",
               "weight_spread", "log_scale", "norm"]


def _measure(exp: NoLSExperiment, norm: str):
    return normalize(power_measure(exp.space, exp.beta, exp.p_exp, norm))


def no_ls_ratio(exp: NoLSExperiment, t: float, norm: Optional[str] = None,
                x0: Optional[np.ndarray] = None, measure=None) -> NoLSRecord:
    """Entropy, energy and their ratio for f_t under the chosen norm's measure.

    Entropy, energy and mass are reported relative to the scale
    K = |B(2r)| exp(-beta phi(t x0)^p) / Z (``log_scale`` = log K); the ratio
    is scale free.  The sample is doubled until the importance ESS is >= 1000.
    """
    norm = exp.norm if norm is None else norm
    x0 = exp.x0 if x0 is None else np.asarray(x0, dtype=float)
    m = _measure(exp, norm) if measure is None else measure
    sp = exp.space
    q, beta, p = exp.q, exp.beta, exp.p_exp
    r = exp.radius(t)
    c = dilate(sp, float(t), x0)
    phic = float(homogeneous_norm(sp, c, norm))
    f = F.plateau(sp, c, r, 2.0 * r)
    log_scale = (math.log(cc_unit_ball_volume()) + 4.0 * math.log(2.0 * r)
                 - beta * phic ** p - m.logZ)
    n = exp.n_samples
    while True:
        rng = np.random.default_rng([exp.seed, int(round(1000 * t)), 0 if norm == "kaplan" else 1, n])
        h = uniform_ball(sp, 2.0 * r, n, rng)
        pts = group_mul(sp, h, c)
        ss = SampleSet(points=pts, seed=exp.seed, method="MC")
        phi = homogeneous_norm(sp, pts, norm)
        lw = -beta * (phi ** p - phic ** p)
        w = np.exp(lw)
        v = F._values(f, ss)
        gn = F.gradient_norms(f, ss, sp)
        if np.any(gn > (1.0 + 1e-8) / r):
            raise NoLSError("gradient bound |grad f| <= 1/r violated")
        fq = np.abs(v) ** q
        mw = fq * w
        ess = float(mw.sum() ** 2 / np.sum(mw * mw)) if np.any(mw > 0) else 0.0
        if ess >= MIN_ESS or n >= exp.max_samples:
            break
        n *= 2
    if ess < MIN_ESS:
        raise NoLSError(f"importance ESS {ess:.0f} below {MIN_ESS:.0f}")
    cols = np.column_stack([mw, F._xlogx(fq) * w, gn ** q * w])

    def ent(mm):
        a = mm[..., 0]
        return mm[..., 1] - a * np.log(a) - a * log_scale

    massF = Functional(cols, lambda mm: mm[..., 0])
    entF = Functional(cols, ent)
    enF = Functional(cols, lambda mm: mm[..., 2])
    ratF = Functional(cols, lambda mm: ent(mm) / mm[..., 2])
    supp = v > 0
    spread = float(np.exp(lw[supp].max() - lw[supp].min())) if np.any(supp) else float("nan")
    return NoLSRecord(float(t), r, estimate(entF, ss), estimate(enF, ss), estimate(massF, ss),
                      estimate(ratF, ss), ess, n, exp.valid(t), spread, log_scale, norm)


def no_ls_series(exp: NoLSExperiment, norm: Optional[str] = None) -> List[NoLSRecord]:
    norm = exp.norm if norm is None else norm
    x0 = exp.x0 if norm == exp.norm else base_point(norm)
    m = _measure(exp, norm)
    return [no_ls_ratio(exp, t, norm, x0, m) for t in exp.t_grid]


@dataclass
class ContrastTable:
    kaplan: List[NoLSRecord]
    cc: Optional[List[NoLSRecord]] = None
    checks: dict = field(default_factory=dict)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def series_checks(exp: NoLSExperiment, rows: Sequence[NoLSRecord]) -> dict:
    """Growth and scaling diagnostics on the valid rows."""
    rows = [r for r in rows if r.valid]
    t = np.array([r.t for r in rows])
    ratio = np.array([r.ratio.value for r in rows])
    ent_per_mass = np.array([r.entropy.value / r.mass.value for r in rows])
    en_per_mass = np.array([r.energy.value / r.mass.value for r in rows])
    rr = np.array([r.r for r in rows])
    return {
        "strictly_increasing": bool(np.all(np.diff(ratio) > 0)),
        "growth": float(ratio[-1] / ratio[0]),
        "entropy_slope": loglog_slope(t ** exp.p_exp, ent_per_mass),
        "energy_slope": loglog_slope(rr ** (-exp.q), en_per_mass),
        "band": float(ratio.max() / ratio.min()),
        "max_weight_spread": float(max(r.weight_spread for r in rows)),
        "n_excluded": int(sum(1 for r in rows if not r.valid)),
    }


def no_ls_contrast(exp: NoLSExperiment, cc_control: bool = True) -> ContrastTable:
    """Run f_t against the Kaplan-norm measure and, optionally, the CC-norm one."""
    if cc_control and exp.p_exp < 2:
        raise ValueError("the CC control needs p >= 2")
    kap = no_ls_series(exp, "kaplan")
    out = ContrastTable(kap, checks={"kaplan": series_checks(exp, kap)})
    if cc_control:
        cc = no_ls_series(exp, "cc")
        out.cc = cc
        out.checks["cc"] = series_checks(exp, cc)
    return out


def records_to_csv(rows: Sequence[NoLSRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.row())
    return buf.getvalue()
