"""The acceptance battery: one function per criterion.

Every function returns a ``CriterionResult`` holding named sub-checks, a
details dict and text artifacts (CSV/JSON).  Artifacts contain no timings, so
re-running a criterion with the same arguments reproduces them byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import special

from . import counterexamples as CX
from . import functionals as F
from . import geometry as G
from . import inequalities as I
from . import measures as M
from . import muckenhoupt as MK


@dataclass
class CriterionResult:
    number: int
    name: str
    checks: Dict[str, bool]
    details: dict = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def line(self) -> str:
        failed = [k for k, v in self.checks.items() if not v]
        tail = "all sub-checks passed" if not failed else "failed: " + ", ".join(failed)
        return (f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] "
                f"{self.name} ({self.runtime:.1f}s): {tail}")

    def digest(self) -> Dict[str, str]:
        return {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(self.artifacts.items())}


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _timed(fn):
    def run(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.runtime = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _no_violations(reports) -> bool:
    return all(r.verdict != I.VIOLATED for r in reports)


def _suite_for(m: M.MeasureSpec, ss: M.SampleSet, seed: int):
    d = M.measure_distance(m, ss.points)
    scale = float(np.median(d))
    return F.default_suite(m.space, seed=seed, scale=scale, anchors=ss.points[:: max(1, ss.n // 2000)]), scale


# ---------------------------------------------------------------------------
# 1. geometry


@_timed
def criterion_1(seed: int = 0, n_oracle: int = 20) -> CriterionResult:
    """Group axioms, dilations, homogeneity, eikonal, closed form vs oracle."""
    rng = np.random.default_rng(seed)
    checks, det = {}, {}
    ok_axioms = True
    for sp in (G.Space.heisenberg(1), G.Space.heisenberg(2)):
        a, b, c = (G.random_points(sp, 200, rng) for _ in range(3))
        assoc = np.abs(G.group_mul(sp, G.group_mul(sp, a, b), c) - G.group_mul(sp, a, G.group_mul(sp, b, c)))
        e = G.identity(sp)
        ident = np.abs(G.group_mul(sp, a, e) - a) + np.abs(G.group_mul(sp, e, a) - a)
        inv = np.abs(G.group_mul(sp, a, G.inverse(sp, a))) + np.abs(G.group_mul(sp, G.inverse(sp, a), a))
        s = 1.7
        hom = np.abs(G.dilate(sp, s, G.group_mul(sp, a, b)) - G.group_mul(sp, G.dilate(sp, s, a), G.dilate(sp, s, b)))
        ok_axioms &= bool(assoc.max() < 1e-12 and ident.max() == 0 and inv.max() < 1e-12 and hom.max() < 1e-12)
    checks["group_axioms_and_dilation_automorphism"] = ok_axioms
    sp = G.Space.heisenberg(1)
    g = G.random_points(sp, 200, rng)
    s = rng.uniform(0.1, 10.0, 200)
    d1 = G.cc_distance(sp, np.array([G.dilate(sp, s[k], g[k]) for k in range(200)]))
    rel = np.abs(d1 - s * G.cc_distance(sp, g)) / (s * G.cc_distance(sp, g))
    det["homogeneity_max_rel"] = float(rel.max())
    checks["homogeneity_1e-6"] = bool(rel.max() <= 1e-6)
    g = G.random_points(sp, 100, rng)
    g = g[np.linalg.norm(g[:, :-1], axis=1) > 1e-3][:100]
    dd, gr = G.distance_gradient(sp, g, h=1e-5)
    err = np.abs(np.linalg.norm(gr, axis=1) - 1.0)
    det["eikonal_fd_max_err"] = float(err.max())
    checks["eikonal_1e-3"] = bool(err.max() <= 1e-3)
    pts = G.random_points(sp, n_oracle, rng)
    pts = np.vstack([pts, [[0.0, 0.0, 1.0]]])
    rows, worst = [], 0.0
    for k, p in enumerate(pts):
        closed = float(G.cc_distance(sp, p))
        orac = G.cc_distance_oracle(sp, p, seed=k)
        r = abs(closed - orac) / closed
        worst = max(worst, r)
        rows.append(f"{k},{p[0]!r},{p[1]!r},{p[2]!r},{closed!r},{orac!r},{r!r}")
    det["oracle_max_rel"] = worst
    checks["closed_form_vs_oracle_1e-3"] = bool(worst <= 1e-3)
    csv_text = "k,x1,x2,z,closed_form,oracle,rel_diff\n" + "\n".join(rows) + "\n"
    res = CriterionResult(1, "geometry suite", checks, det,
                          {"c1_oracle.csv": csv_text, "c1_summary.json": _json({"checks": checks, **det})})
    return res


# ---------------------------------------------------------------------------
# 2. Kohn Laplacian of d


def _points_at_distance(sp, lo, hi, n, rng):
    g = G.random_points(sp, n, rng)
    g = g[np.linalg.norm(g[:, :-1], axis=1) > 1e-6]
    while g.shape[0] < n:
        extra = G.random_points(sp, n, rng)
        g = np.vstack([g, extra[np.linalg.norm(extra[:, :-1], axis=1) > 1e-6]])
    g = g[:n]
    target = rng.uniform(lo, hi, n)
    d = G.cc_distance(sp, g)
    return np.array([G.dilate(sp, target[k] / d[k], g[k]) for k in range(n)])


@_timed
def criterion_2(seed: int = 0, n_points: int = 500, h: float = 1e-3) -> CriterionResult:
    """Empirical bound on the Kohn Laplacian of d for d in [1, 5]."""
    rng = np.random.default_rng(seed)
    sp = G.Space.heisenberg(1)
    g = _points_at_distance(sp, 1.0, 5.0, n_points, rng)
    f = lambda p: G.cc_distance(sp, p)
    L1 = G.kohn_laplacian(sp, f, g, h)
    L2 = G.kohn_laplacian(sp, f, g, h / 2)
    K1, K2 = float(L1.max()), float(L2.max())
    stable = bool(np.isfinite(K1) and np.isfinite(K2) and abs(K2 - K1) <= 0.05 * abs(K1))
    base = _points_at_distance(sp, 1.0, 2.0, 20, rng)
    s = rng.uniform(1.5, 3.0, 20)
    Lb = G.kohn_laplacian(sp, f, base, h)
    Ls = np.array([G.kohn_laplacian(sp, f, G.dilate(sp, s[k], base[k])[None], h)[0] for k in range(20)])
    rel = np.abs(Ls * s - Lb) / np.abs(Lb)
    checks = {"max_finite_and_stable_5pct": stable, "inverse_scaling_1pct": bool(rel.max() <= 0.01)}
    det = {"K_h": K1, "K_h2": K2, "homogeneity_max_rel": float(rel.max())}
    return CriterionResult(2, "Kohn Laplacian bound", checks, det,
                           {"c2_summary.json": _json({"checks": checks, **det})})


# ---------------------------------------------------------------------------
# 3. U-bound chain


def _search_then_verify_D(m, q, weight_spec, C, seed_a, seed_b, n, grad_weight=None,
                          family="fourier", budget=150):
    ssa = M.sample(m, n, seed_a)
    suite_a, scale = _suite_for(m, ssa, seed_a)
    consts, res = I.search_mass_constant(m, ssa, q, weight_spec, C, suite_a, grad_weight,
                                         family=family, budget=budget, seed=seed_a, scale=scale)
    ssb = M.sample(m, n, seed_b)
    suite_b, _ = _suite_for(m, ssb, seed_b)
    return consts, ssb, suite_b, res


@_timed
def criterion_3(n: int = 100_000, seed: int = 1) -> CriterionResult:
    """U-bound chain on R^1 (theorem constants) and on H_1 (searched constants)."""
    checks, det, arts = {}, {}, {}
    for beta, p in ((1.0, 2.0), (1.0, 4.0)):
        for pert in (False, True):
            kw = {"W": {"family": "cosine", "theta": 0.1}} if pert else {}
            m = M.normalize(M.power_measure(G.Space.euclidean(1), beta, p, **kw))
            ss = M.sample(m, n, seed)
            suite, _ = _suite_for(m, ss, seed)
            c1 = I.constants_thm2_5(beta, p)
            if pert:
                dl, gm = I.w_cosine_gradient_bound(0.1, p)
                c1 = I.constants_thm2_6(c1.C, c1.D, dl, gm, 0.0)
            q = p / (p - 1.0)
            cq = I.constants_thm2_5p(c1.C, c1.D + 1.0, q, p)
            r1 = I.check_ubound(m, ss, 1.0, {"kind": "dp1"}, c1, suite)
            rq = I.check_ubound(m, ss, q, {"kind": "dqp1"}, cq, suite)
            tag = f"R1_b{beta:g}_p{p:g}{'_W' if pert else ''}"
            checks[f"{tag}_q1"] = _no_violations(r1)
            checks[f"{tag}_q{q:g}"] = _no_violations(rq)
            det[tag] = {"q1": I.summarize(r1), "q": I.summarize(rq), "C1": c1.to_dict(), "Cq": cq.to_dict()}
            arts[f"c3_{tag}_q1.csv"] = I.reports_to_csv(r1)
            arts[f"c3_{tag}_q.csv"] = I.reports_to_csv(rq)
    m = M.normalize(M.power_measure(G.Space.heisenberg(1), 1.0, 2.0))
    C = 2.0
    consts, ssb, suite_b, res = _search_then_verify_D(m, 2.0, {"kind": "dqp1"}, C, seed, seed + 100, n)
    rh = I.check_ubound(m, ssb, 2.0, {"kind": "dqp1"}, consts, suite_b)
    checks["H1_b1_p2_q2_searched"] = _no_violations(rh)
    det["H1"] = {"summary": I.summarize(rh), "constants": consts.to_dict()}
    arts["c3_H1.csv"] = I.reports_to_csv(rh)
    arts["c3_summary.json"] = _json({"checks": checks, **det})
    return CriterionResult(3, "U-bound chain", checks, det, arts)


# ---------------------------------------------------------------------------
# 4. Poincare and LS_q


@_timed
def criterion_4(n: int = 200_000, seed: int = 2) -> CriterionResult:
    """Sharp Gaussian constants and a searched LS_{4/3} constant for mu_4."""
    g = M.normalize(M.gaussian_1d())
    ss = M.sample(g, n, seed)
    rp = I.best_constant_search(g, ss, "poincare", "fourier", budget=300, seed=seed)
    rl = I.best_constant_search(g, ss, "lsq", "exp_tilt", budget=120, seed=seed)
    checks = {"gaussian_inverse_gap_0.5_2pct": abs(rp.ratio.value - 0.5) <= 0.01,
              "gaussian_ls_1_5pct": abs(rl.ratio.value - 1.0) <= 0.05}
    m4 = M.normalize(M.power_measure(G.Space.euclidean(1), 1.0, 4.0))
    q = 4.0 / 3.0
    ssa = M.sample(m4, n // 2, seed)
    suite_a, scale = _suite_for(m4, ssa, seed)
    r4 = I.best_constant_search(m4, ssa, "lsq", "fourier", budget=200, seed=seed, q=q,
                                candidates=suite_a, scale=scale)
    c = r4.candidate()
    ssb = M.sample(m4, n // 2, seed + 100)
    suite_b, _ = _suite_for(m4, ssb, seed + 100)
    reps = I.check_lsq(m4, ssb, q, c, suite_b)
    checks["mu4_lsq_4/3_searched"] = _no_violations(reps)
    det = {"inverse_gap": [rp.ratio.value, rp.ratio.std_error],
           "ls_constant": [rl.ratio.value, rl.ratio.std_error],
           "mu4_ls_ratio": r4.ratio.value, "mu4_c": c, "mu4_summary": I.summarize(reps)}
    return CriterionResult(4, "Poincare and LS_q", checks, det,
                           {"c4_mu4_lsq.csv": I.reports_to_csv(reps),
                            "c4_summary.json": _json({"checks": checks, **det})})


# ---------------------------------------------------------------------------
# 5. Phi-entropy


@_timed
def criterion_5(n: int = 100_000, seed: int = 3) -> CriterionResult:
    theta = 1.5
    m = M.normalize(M.power_measure(G.Space.euclidean(1), 1.0, theta))
    ssa = M.sample(m, n, seed)
    suite_a, scale = _suite_for(m, ssa, seed)
    res = I.best_constant_search(m, ssa, "phi_entropy", "fourier", budget=200, seed=seed,
                                 candidates=suite_a, scale=scale, theta=theta)
    c = res.candidate()
    ssb = M.sample(m, n, seed + 100)
    suite_b, _ = _suite_for(m, ssb, seed + 100)
    reps = I.check_phi_entropy(m, ssb, theta, c, suite_b)
    m1 = M.normalize(M.power_measure(G.Space.euclidean(1), 1.0, 1.0))
    ss1 = M.sample(m1, 20_000, seed)
    suite1, _ = _suite_for(m1, ss1, seed)
    r1 = I.check_phi_entropy(m1, ss1, 1.0, 1.0, suite1)
    zero = all(r.lhs.value == 0.0 for r in r1)
    checks = {"theta1.5_searched_no_violation": _no_violations(reps), "theta1_lhs_identically_zero": zero}
    det = {"c": c, "ratio": res.ratio.value, "summary": I.summarize(reps)}
    return CriterionResult(5, "Phi-entropy", checks, det,
                           {"c5_phi.csv": I.reports_to_csv(reps),
                            "c5_summary.json": _json({"checks": checks, **det})})


# ---------------------------------------------------------------------------
# 6. converse U-bound and exponential bound


def gaussian_log_mgf(s: float, absolute: bool) -> float:
    """log E e^{s X} (or e^{s|X|}) for X with density e^{-x^2}/sqrt(pi)."""
    if not absolute:
        return s * s / 4.0
    return math.log(2.0) + s * s / 4.0 + float(special.log_ndtr(s / math.sqrt(2.0)))


@_timed
def criterion_6(n: int = 100_000, seed: int = 4, t_grid: Sequence[float] = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0)) -> CriterionResult:
    g = M.normalize(M.gaussian_1d())
    ss = M.sample(g, n, seed)
    suite, _ = _suite_for(g, ss, seed)
    checks, det, arts = {}, {}, {}
    try:
        I.preflight_potential(g, ss, 2.0, 4.0, 0.0)
        checks["preflight_a4_b0"] = True
    except I.AssumptionViolatedError:
        checks["preflight_a4_b0"] = False
    consts, reps = I.check_converse_ubound(g, ss, 2.0, 4.0, 0.0, 1.0, suite)
    checks["converse_ubound_no_violation"] = _no_violations(reps)
    det["converse_constants"] = consts.to_dict()
    arts["c6_converse.csv"] = I.reports_to_csv(reps)
    sp = g.space
    fams = {"x": (F.coordinate(sp, 0), False, 0.0),
            "d": (F.TestFunction(sp, "radial_power", {"t": 0.0, "kappa": 1.0}, fid="d"), True, 1 / math.sqrt(math.pi))}
    eps = 0.5
    for name, (f, absolute, mean) in fams.items():
        rep = I.check_exp_bound(g, ss, f, 0.0, 1.0, 1.0, 2.0, eps, t_grid)
        holds = all(r.verdict == I.HOLDS for r in rep)
        agree, rows = True, []
        for t, r in zip(t_grid, rep):
            delta, C = I.exp_bound_parameters(1.0, 0.0, 1.0, 2.0, eps, t)
            exact = gaussian_log_mgf((1 - delta) * t, absolute)
            agree &= abs(r.lhs.value - exact) <= 3.0 * r.lhs.std_error
            agree &= exact <= t * mean + C * t * t
            rows.append({"t": t, "lhs_mc": r.lhs.value, "lhs_se": r.lhs.std_error, "lhs_exact": exact,
                         "rhs": r.rhs.value, "verdict": r.verdict})
        checks[f"exp_bound_{name}_holds"] = holds
        checks[f"exp_bound_{name}_matches_closed_form"] = bool(agree)
        det[f"exp_{name}"] = rows
        arts[f"c6_exp_{name}.csv"] = I.reports_to_csv(rep)
    arts["c6_summary.json"] = _json({"checks": checks, **det})
    return CriterionResult(6, "converse U-bound and exponential bound", checks, det, arts)


# ---------------------------------------------------------------------------
# 7. weighted inequalities


@_timed
def criterion_7(n: int = 100_000, seed: int = 5) -> CriterionResult:
    checks, det, arts = {}, {}, {}
    p = 4.0
    m = M.normalize(M.power_measure(G.Space.euclidean(1), 1.0, p))
    consts, ssb, suite_b, _ = _search_then_verify_D(m, 2.0, {"kind": "power", "a": p}, 0.5, seed, seed + 100, n,
                                                     grad_weight={"kind": "bracket", "p": p})
    rw = I.check_weighted(m, ssb, "bracket", 2.0, consts, suite_b)
    ru = I.check_ubound(m, ssb, 2.0, {"kind": "power", "a": p}, consts, suite_b, kind="unweighted_bracket")
    checks["bracket_weighted_no_violation"] = _no_violations(rw)
    checks["bracket_unweighted_no_violation"] = _no_violations(ru)
    det["bracket"] = {"constants": consts.to_dict(), "weighted": I.summarize(rw), "unweighted": I.summarize(ru)}
    arts["c7_bracket.csv"] = I.reports_to_csv(rw)
    arts["c7_bracket_unweighted.csv"] = I.reports_to_csv(ru)
    ms = M.normalize(M.MeasureSpec(G.Space.euclidean(3), M.PotentialSpec(slow_tail_beta=40.0)))
    c1 = I.slow_tail_c1(40.0, 3)
    cs, ssb, suite_b, _ = _search_then_verify_D(ms, 1.0, {"kind": "potential"}, c1, seed, seed + 100, n,
                                                grad_weight={"kind": "dlog"})
    cs.provenance = "Thm4_5ii1"
    rs = I.check_weighted(ms, ssb, "slow_tail", 1.0, cs, suite_b)
    checks["slow_tail_no_violation"] = _no_violations(rs)
    det["slow_tail"] = {"c1": c1, "constants": cs.to_dict(), "summary": I.summarize(rs)}
    arts["c7_slow_tail.csv"] = I.reports_to_csv(rs)
    arts["c7_summary.json"] = _json({"checks": checks, **det})
    return CriterionResult(7, "weighted inequalities", checks, det, arts)


# ---------------------------------------------------------------------------
# 8. Muckenhoupt counterexample


@_timed
def criterion_8(n_max: int = 4, grid_n: int = 2048) -> CriterionResult:
    rows = MK.counterexample_series(1.0, 2.0, 0.5, 2.0, n_max)
    logB = [r.logB for r in rows]
    slope = MK.growth_slope(rows, "logB")
    slope_lb = MK.growth_slope(rows, "log_lower_closed")
    above = all(r.logB >= max(r.log_lower_bound, r.log_lower_endpoint, r.log_lower_closed) for r in rows)
    osc = MK.oscillating_potential(1.0, 2.0, 0.5)
    gaps = [MK.fd_spectral_gap(osc, k * math.pi, grid_n) for k in (4, 6, 8, 10)]
    ggap = MK.fd_spectral_gap(MK.power_potential(1.0, 2.0), 8.0, grid_n)
    checks = {"logB_strictly_increasing": bool(np.all(np.diff(logB) > 0)),
              "logB_above_lower_bound_chain": above,
              "slope_vs_(2n pi)^2_is_0.25_within_20pct": abs(slope - 0.25) <= 0.2 * 0.25,
              "oscillating_gap_decreasing": bool(np.all(np.diff(gaps) < 0)),
              "gaussian_gap_2.0_0.01": abs(ggap - 2.0) <= 0.01}
    det = {"slope_logB": slope, "slope_lower_bound": slope_lb, "gaps": gaps, "gaussian_gap": ggap}
    return CriterionResult(8, "Muckenhoupt counterexample", checks, det,
                           {"c8_series.csv": MK.series_to_csv(rows),
                            "c8_summary.json": _json({"checks": checks, **det})})


# ---------------------------------------------------------------------------
# 9. no LS for the smooth-norm measure


@_timed
def criterion_9(n_samples: int = 100_000, seed: int = 0,
                t_grid: Sequence[float] = CX.DEFAULT_T_GRID) -> CriterionResult:
    exp = CX.NoLSExperiment(t_grid=tuple(t_grid), n_samples=n_samples, seed=seed)
    tab = CX.no_ls_contrast(exp, cc_control=True)
    k, c = tab.checks["kaplan"], tab.checks["cc"]
    checks = {"kaplan_ratio_increasing": k["strictly_increasing"],
              "kaplan_growth_10x": k["growth"] >= 10.0,
              "entropy_slope_in_[0.8,1.2]": 0.8 <= k["entropy_slope"] <= 1.2,
              "energy_slope_in_[0.8,1.2]": 0.8 <= k["energy_slope"] <= 1.2,
              "cc_band_below_5": c["band"] < 5.0}
    return CriterionResult(9, "no LS for the Kaplan-norm measure", checks, tab.checks,
                           {"c9_kaplan.csv": CX.records_to_csv(tab.kaplan),
                            "c9_cc.csv": CX.records_to_csv(tab.cc),
                            "c9_summary.json": _json({"checks": checks, **tab.checks})})


# ---------------------------------------------------------------------------
# 10. heat-kernel surrogate


def surrogate_w_gradient_check(ss: M.SampleSet, eps: float = 1.0) -> float:
    """max of |grad W|^2 - (eps^2 d^2 + 1) for W = -log(1 + eps |x| d)/2."""
    sp = G.Space.heisenberg(1)
    pts = ss.points
    d, gd = G.cc_distance_and_gradient(sp, pts)
    x = pts[:, :-1]
    r = np.linalg.norm(x, axis=1)
    # grad(|x| d) = d x/|x| + |x| grad d (the horizontal gradient of |x| is x/|x|)
    gprod = d[:, None] * x / r[:, None] + r[:, None] * gd
    gW = -0.5 * eps * gprod / (1.0 + eps * r * d)[:, None]
    return float(np.max(np.sum(gW * gW, axis=1) - (eps * eps * d * d + 1.0)))


@_timed
def criterion_10(n: int = 100_000, seed: int = 6) -> CriterionResult:
    m = M.normalize(M.surrogate_measure())
    consts, ssb, suite_b, _ = _search_then_verify_D(m, 2.0, {"kind": "power", "a": 2.0}, 32.0, seed, seed + 100, n)
    ru = I.check_ubound(m, ssb, 2.0, {"kind": "power", "a": 2.0}, consts, suite_b, kind="surrogate_ubound")
    ssa = M.sample(m, n, seed)
    suite_a, scale = _suite_for(m, ssa, seed)
    rp = I.best_constant_search(m, ssa, "poincare", "quadratic", seed=seed,
                                candidates=suite_a, scale=scale)
    Mc = 1.0 / rp.candidate()
    rpc = I.check_poincare(m, ssb, 2.0, Mc, suite_b)
    ssw = M.sample(m, 10_000, seed + 200)
    excess = surrogate_w_gradient_check(ssw)
    checks = {"surrogate_ubound_no_violation": _no_violations(ru),
              "surrogate_poincare_no_violation": _no_violations(rpc),
              "w_gradient_bound_pointwise": excess <= 0.0}
    det = {"ubound_constants": consts.to_dict(), "ubound": I.summarize(ru), "poincare_M": Mc,
           "poincare": I.summarize(rpc), "w_gradient_max_excess": excess}
    return CriterionResult(10, "heat-kernel surrogate", checks, det,
                           {"c10_ubound.csv": I.reports_to_csv(ru), "c10_poincare.csv": I.reports_to_csv(rpc),
                            "c10_summary.json": _json({"checks": checks, **det})})


CRITERIA: Dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def criterion_11(first: Dict[int, CriterionResult],
                 rerun: Optional[Dict[int, CriterionResult]] = None) -> CriterionResult:
    """Byte-identical artifacts when every criterion is re-executed."""
    t0 = time.perf_counter()
    if rerun is None:
        rerun = {k: CRITERIA[k]() for k in first}
    checks = {}
    for k in sorted(first):
        checks[f"criterion_{k}_artifacts_identical"] = first[k].artifacts == rerun[k].artifacts
    det = {str(k): first[k].digest() for k in sorted(first)}
    res = CriterionResult(11, "reproducibility", checks, det, {})
    res.runtime = time.perf_counter() - t0
    return res


def run_all(numbers: Sequence[int] = tuple(CRITERIA), reproducibility: bool = True) -> List[CriterionResult]:
    out = {k: CRITERIA[k]() for k in numbers}
    results = [out[k] for k in numbers]
    if reproducibility:
        results.append(criterion_11(out))
    return results
