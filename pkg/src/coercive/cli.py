"""Command-line experiment runner.

Every subcommand writes its CSV/JSON artifacts and a ``manifest.json`` into
``--out`` (default: ``$COERCIVE_OUT`` or ``./coercive_out``) and exits with

    0  expectations met
    1  an expectation failed (a VIOLATED verdict where HOLDS was expected, or
       the reverse for counterexample runs)
    2  invalid configuration
    3  numerical diagnostic error (partial artifacts are kept)

Heavy modules are imported after ``--threads`` has been applied to the
environment, so the flag bounds BLAS/OpenMP/numba thread pools.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from typing import Callable, Dict, List, Optional, Tuple

SCHEMA_VERSION = 1
ENV_OUT = "COERCIVE_OUT"

EXIT_OK, EXIT_EXPECTATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class Outcome:
    def __init__(self, ok: bool, artifacts: Dict[str, str], summary: dict, seed: Optional[int] = None):
        self.ok = ok
        self.artifacts = artifacts
        self.summary = summary
        self.seed = seed


class _Partial(Exception):
    def __init__(self, err: Exception, artifacts: Dict[str, str]):
        super().__init__(str(err))
        self.err = err
        self.artifacts = artifacts


def _numerical_errors() -> tuple:
    from .counterexamples import NoLSError
    from .functionals import FunctionalError, GradientDiagnosticError
    from .geometry import OracleError
    from .inequalities import AssumptionViolatedError
    from .measures import SamplerDiagnosticError
    from .muckenhoupt import MuckenhouptError
    return (SamplerDiagnosticError, MuckenhouptError, OracleError, GradientDiagnosticError,
            NoLSError, AssumptionViolatedError, FunctionalError, FloatingPointError)


# ---------------------------------------------------------------------------
# measures


def _build_measure(a):
    from . import geometry as G
    from . import measures as M
    name = a.measure
    if name == "gauss1d":
        m = M.gaussian_1d()
    elif name == "power":
        sp = G.Space.euclidean(a.dim) if a.space == "R" else G.Space.heisenberg(a.dim)
        W = {"family": "cosine", "theta": a.theta_w} if a.theta_w else None
        m = M.power_measure(sp, a.beta, a.p, a.norm, W=W)
    elif name == "surrogate":
        m = M.surrogate_measure()
    elif name == "slowtail":
        m = M.MeasureSpec(G.Space.euclidean(a.dim), M.PotentialSpec(slow_tail_beta=a.beta))
    else:
        raise ConfigError(f"unknown measure {name!r}")
    return M.normalize(m)


def _add_measure_args(p):
    p.add_argument("--measure", default="gauss1d", choices=["gauss1d", "power", "surrogate", "slowtail"])
    p.add_argument("--space", default="R", choices=["R", "H"], help="R^n or H_l for --measure power")
    p.add_argument("--dim", type=int, default=1, help="n for R^n, l for H_l")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0, help="potential exponent")
    p.add_argument("--norm", default="cc", choices=["cc", "kaplan"])
    p.add_argument("--theta-w", type=float, default=0.0, help="W = theta d^(p-1) cos d perturbation")
    p.add_argument("--n", type=int, default=100_000, help="number of samples")
    p.add_argument("--seed", type=int, default=0)


def _sample_and_suite(a, m):
    from . import experiments as E
    from . import measures as M
    ss = M.sample(m, a.n, a.seed)
    suite, scale = E._suite_for(m, ss, a.seed)
    return ss, suite, scale


# ---------------------------------------------------------------------------
# subcommands


def cmd_distance(a) -> Outcome:
    import numpy as np

    from . import geometry as G
    sp = G.Space.heisenberg(1) if len(a.point) == 3 else G.Space.heisenberg(2)
    if len(a.point) not in (3, 5):
        raise ConfigError("--point needs 3 (H_1) or 5 (H_2) coordinates")
    g = np.asarray(a.point, dtype=float)
    d = float(G.cc_distance(sp, g))
    out = {"point": list(map(float, a.point)), "distance": d}
    ok = True
    if a.oracle:
        o = G.cc_distance_oracle(sp, g, seed=a.seed)
        out["oracle"] = o
        out["rel_diff"] = abs(d - o) / max(d, 1e-300)
        ok = out["rel_diff"] <= a.rtol
    return Outcome(ok, {"distance.json": json.dumps(out, sort_keys=True, indent=2) + "\n"}, out, a.seed)


def cmd_constants(a) -> Outcome:
    from . import inequalities as I
    if a.theorem == "2_5":
        c = I.constants_thm2_5(a.beta, a.p, a.sigma, a.eps, a.K)
    elif a.theorem == "2_6":
        c = I.constants_thm2_6(a.C, a.D, a.delta, a.gamma, a.oscV)
    elif a.theorem == "2_5p":
        c = I.constants_thm2_5p(a.C, a.D, a.q, a.p)
    else:
        raise ConfigError(f"unknown theorem {a.theorem!r}")
    d = c.to_dict()
    return Outcome(True, {"constants.json": json.dumps(d, sort_keys=True, indent=2) + "\n"}, d)


def _expect_ok(reports, expect: str) -> bool:
    from . import inequalities as I
    if expect == "holds":
        return all(r.verdict != I.VIOLATED for r in reports)
    return any(r.verdict == I.VIOLATED for r in reports) and all(r.verdict != I.HOLDS for r in reports)


def cmd_check(a) -> Outcome:
    from . import functionals as F
    from . import inequalities as I
    m = _build_measure(a)
    ss, suite, scale = _sample_and_suite(a, m)
    if a.witness == "coordinate":
        suite = [F.coordinate(m.space, 0)]
    kind = a.kind
    if kind == "poincare":
        if a.M is None:
            raise ConfigError("--M is required for kind poincare")
        reps = I.check_poincare(m, ss, a.q, a.M, suite)
    elif kind == "lsq":
        if a.c is None:
            raise ConfigError("--c is required for kind lsq")
        reps = I.check_lsq(m, ss, a.q, a.c, suite)
    elif kind == "phi_entropy":
        if a.c is None:
            raise ConfigError("--c is required for kind phi_entropy")
        reps = I.check_phi_entropy(m, ss, a.theta, a.c, suite)
    elif kind in ("bracket", "slow_tail", "slow_tail_poincare"):
        if a.C is None or a.D is None:
            raise ConfigError("--C and --D are required for weighted kinds")
        consts = I.TheoremConstants(a.C, a.D, "Manual")
        reps = I.check_weighted(m, ss, kind, a.q, consts, suite)
    else:
        raise ConfigError(f"unknown kind {kind!r}")
    arts = {"reports.csv": I.reports_to_csv(reps), "summary.json": I.summary_json(reps) + "\n"}
    return Outcome(_expect_ok(reps, a.expect), arts, I.summarize(reps), a.seed)


def cmd_ubound(a) -> Outcome:
    from . import inequalities as I
    m = _build_measure(a)
    ss, suite, _ = _sample_and_suite(a, m)
    if a.C is not None and a.D is not None:
        consts = I.TheoremConstants(a.C, a.D, "Manual")
    else:
        pot = m.potential
        consts = I.constants_thm2_5(pot.beta, pot.p_exp, 1.0, 0.0, a.K)
        if a.theta_w:
            dl, gm = I.w_cosine_gradient_bound(a.theta_w, pot.p_exp)
            consts = I.constants_thm2_6(consts.C, consts.D, dl, gm, 0.0)
        if a.q != 1.0:
            consts = I.constants_thm2_5p(consts.C, consts.D + 1.0, a.q, pot.p_exp)
    reps = I.check_ubound(m, ss, a.q, {"kind": a.weight}, consts, suite)
    arts = {"reports.csv": I.reports_to_csv(reps), "summary.json": I.summary_json(reps) + "\n",
            "constants.json": json.dumps(consts.to_dict(), sort_keys=True, indent=2) + "\n"}
    return Outcome(_expect_ok(reps, a.expect), arts, I.summarize(reps), a.seed)


def cmd_muckenhoupt(a) -> Outcome:
    import numpy as np

    from . import muckenhoupt as MK
    if a.family != "oscillating":
        raise ConfigError("the series is defined for --family oscillating")
    rows = MK.counterexample_series(a.beta, a.p, a.eps, a.q, a.nmax)
    logB = [r.logB for r in rows]
    summary = {"strictly_increasing": bool(np.all(np.diff(logB) > 0)),
               "slope_logB": MK.growth_slope(rows, "logB", a.p),
               "above_lower_bounds": all(r.logB >= r.log_lower_bound for r in rows)}
    ok = summary["strictly_increasing"] and summary["above_lower_bounds"] if a.eps > 0 else True
    arts = {"series.csv": MK.series_to_csv(rows),
            "summary.json": json.dumps(summary, sort_keys=True, indent=2) + "\n"}
    return Outcome(ok, arts, summary)


def cmd_nols(a) -> Outcome:
    from . import counterexamples as CX
    grid = tuple(a.t_grid) if a.t_grid else CX.DEFAULT_T_GRID
    exp = CX.NoLSExperiment(beta=a.beta, p_exp=a.p, q=a.q, t_grid=grid, n_samples=a.n, seed=a.seed)
    tab = CX.no_ls_contrast(exp, cc_control=a.cc_control and a.p >= 2)
    arts = {"kaplan.csv": CX.records_to_csv(tab.kaplan)}
    if tab.cc is not None:
        arts["cc.csv"] = CX.records_to_csv(tab.cc)
    arts["summary.json"] = json.dumps(tab.checks, sort_keys=True, indent=2) + "\n"
    return Outcome(tab.checks["kaplan"]["strictly_increasing"], arts, tab.checks, a.seed)


def cmd_expbound(a) -> Outcome:
    from . import functionals as F
    from . import inequalities as I
    m = _build_measure(a)
    ss, _, _ = _sample_and_suite(a, m)
    sp = m.space
    if a.f == "x":
        f = F.coordinate(sp, 0)
    else:
        f = F.TestFunction(sp, "radial_power", {"t": 0.0, "kappa": 1.0}, fid="d")
    reps = I.check_exp_bound(m, ss, f, a.a, a.b, a.c_ls, a.q, a.eps, a.t_grid)
    arts = {"reports.csv": I.reports_to_csv(reps), "summary.json": I.summary_json(reps) + "\n"}
    return Outcome(_expect_ok(reps, "holds"), arts, I.summarize(reps), a.seed)


def cmd_suite(a) -> Outcome:
    from . import experiments as E
    nums = a.criteria or list(E.CRITERIA)
    done = {}
    arts: Dict[str, str] = {}
    lines = []
    try:
        for k in nums:
            r = E.CRITERIA[k]()
            done[k] = r
            arts.update(r.artifacts)
            lines.append(r.line())
            print(r.line(), flush=True)
    except _numerical_errors() as err:
        raise _Partial(err, arts)
    results = list(done.values())
    if a.reproducibility:
        r11 = E.criterion_11(done)
        results.append(r11)
        lines.append(r11.line())
        print(r11.line(), flush=True)
    summary = {str(r.number): {"passed": r.passed, "checks": r.checks} for r in results}
    arts["suite_summary.json"] = json.dumps(summary, sort_keys=True, indent=2) + "\n"
    return Outcome(all(r.passed for r in results), arts, summary)


COMMANDS: Dict[str, Tuple[Callable, Callable]] = {}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coercive", description="Coercive-inequality experiments.")
    ap.add_argument("--out", default=None, help=f"output directory (default ${ENV_OUT} or ./coercive_out)")
    ap.add_argument("--threads", type=int, default=None, help="bound on internal thread pools")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="CC distance on H_l with optional oracle cross-check",
                       description="Writes distance.json with keys point, distance, oracle, rel_diff.")
    p.add_argument("--point", type=float, nargs="+", required=True)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--rtol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    COMMANDS["distance"] = (p, cmd_distance)

    p = sub.add_parser("constants", help="theorem constants for given parameters",
                       description="Writes constants.json with C, D, provenance and free parameters.")
    p.add_argument("--theorem", required=True, choices=["2_5", "2_6", "2_5p"])
    for name, default in (("beta", 1.0), ("p", 2.0), ("sigma", 1.0), ("eps", 0.0), ("K", 0.0),
                          ("C", 0.5), ("D", 2.5), ("delta", 0.0), ("gamma", 0.0), ("oscV", 0.0), ("q", 2.0)):
        p.add_argument(f"--{name}", type=float, default=default)
    COMMANDS["constants"] = (p, cmd_constants)

    report_cols = ("reports.csv columns: kind, function_id, lhs, lhs_se, rhs, rhs_se, margin, "
                   "margin_se, margin_sigmas, verdict")
    p = sub.add_parser("check", help="any inequality kind over the default suite", description=report_cols)
    _add_measure_args(p)
    p.add_argument("--kind", required=True,
                   choices=["poincare", "lsq", "phi_entropy", "bracket", "slow_tail", "slow_tail_poincare"])
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--M", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--theta", type=float, default=1.5)
    p.add_argument("--witness", default="suite", choices=["suite", "coordinate"])
    p.add_argument("--expect", default="holds", choices=["holds", "violated"])
    COMMANDS["check"] = (p, cmd_check)

    p = sub.add_parser("ubound", help="U-bound with theorem or given constants", description=report_cols)
    _add_measure_args(p)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--weight", default="dp1", choices=["dp1", "dqp1", "dp", "d2theta", "potential"])
    p.add_argument("--K", type=float, default=0.0)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--D", type=float, default=None)
    p.add_argument("--expect", default="holds", choices=["holds", "violated"])
    COMMANDS["ubound"] = (p, cmd_ubound)

    p = sub.add_parser("muckenhoupt", help="log B_+ series for the oscillating potential",
                       description="series.csv columns: n, r_n, logB, log_lower_bound, "
                                   "log_lower_endpoint, log_lower_closed")
    p.add_argument("--family", default="oscillating", choices=["oscillating"])
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--nmax", type=int, default=4)
    COMMANDS["muckenhoupt"] = (p, cmd_muckenhoupt)

    p = sub.add_parser("nols", help="entropy/energy ratio of the plateau family on H_1",
                       description="kaplan.csv / cc.csv columns: " + ", ".join(
                           ["t", "r", "entropy", "energy", "mass", "ratio", "ratio_se", "ess", "n",
                            "valid", "weight_spread", "log_scale", "norm"]))
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--t-grid", type=float, nargs="+", default=None)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-cc-control", dest="cc_control", action="store_false")
    COMMANDS["nols"] = (p, cmd_nols)

    p = sub.add_parser("expbound", help="exponential bound from LS_q", description=report_cols)
    _add_measure_args(p)
    p.add_argument("--f", default="x", choices=["x", "d"])
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--c-ls", type=float, default=1.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--t-grid", type=float, nargs="+", default=[0.25, 0.5, 1.0, 1.5, 2.0, 3.0])
    COMMANDS["expbound"] = (p, cmd_expbound)

    p = sub.add_parser("suite", help="the full acceptance battery",
                       description="Writes every criterion's artifacts and suite_summary.json.")
    p.add_argument("--criteria", type=int, nargs="+", default=None)
    p.add_argument("--no-reproducibility", dest="reproducibility", action="store_false")
    COMMANDS["suite"] = (p, cmd_suite)

    p = sub.add_parser("run", help="run a YAML experiment config",
                       description="Config keys: schema (1), command, args (mapping), output (optional).")
    p.add_argument("config")
    return ap


# ---------------------------------------------------------------------------
# config files


def load_config(path: str) -> Tuple[str, List[str], Optional[str]]:
    """Validate a YAML config and turn it into subcommand argv."""
    import yaml
    with open(path) as fh:
        text = fh.read()
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: YAML parse error: {err}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    lines = {}
    if node is not None:
        for k, v in node.value:
            lines[k.value] = (k.start_mark.line + 1, v)
    allowed = {"schema", "command", "args", "output"}
    for k in data:
        if k not in allowed:
            raise ConfigError(f"{path}:{lines.get(k, (0,))[0]}: unknown key {k!r}")
    if data.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"{path}:{lines.get('schema', (1,))[0]}: schema must be {SCHEMA_VERSION}")
    cmd = data.get("command")
    _build_parser()
    if cmd not in COMMANDS or cmd == "run":
        raise ConfigError(f"{path}:{lines.get('command', (1,))[0]}: unknown command {cmd!r}")
    parser = COMMANDS[cmd][0]
    dests = {a.dest: a for a in parser._actions if a.dest != "help"}
    args = data.get("args") or {}
    if not isinstance(args, dict):
        raise ConfigError(f"{path}: args must be a mapping")
    arg_lines = {}
    if "args" in lines and hasattr(lines["args"][1], "value") and isinstance(lines["args"][1].value, list):
        for k, v in lines["args"][1].value:
            arg_lines[k.value] = k.start_mark.line + 1
    argv: List[str] = []
    for k, v in args.items():
        dest = str(k).replace("-", "_")
        if dest not in dests:
            raise ConfigError(f"{path}:{arg_lines.get(k, 0)}: unknown field args.{k} for command {cmd!r}")
        act = dests[dest]
        flag = act.option_strings[0] if act.option_strings else None
        if flag is None:
            argv.append(str(v))
        elif isinstance(act, argparse._StoreTrueAction) or isinstance(act, argparse._StoreFalseAction):
            if not isinstance(v, bool):
                raise ConfigError(f"{path}:{arg_lines.get(k, 0)}: args.{k} must be a boolean")
            if v != act.default:
                argv.append(flag)
        elif isinstance(v, list):
            argv.append(flag)
            argv.extend(str(x) for x in v)
        else:
            argv.extend([flag, str(v)])
    return cmd, argv, data.get("output")


# ---------------------------------------------------------------------------
# running


def _write(out_dir: str, command: str, argv: List[str], outcome_arts: Dict[str, str], seed,
           wall: float, status: str, summary=None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    hashes = {}
    for name, text in sorted(outcome_arts.items()):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            fh.write(text)
        hashes[name] = hashlib.sha256(text.encode()).hexdigest()
    try:
        from importlib.metadata import version
        ver = version("artifact")
    except Exception:
        ver = "unknown"
    cfg = json.dumps({"command": command, "argv": argv}, sort_keys=True)
    manifest = {"command": command, "argv": argv, "config_hash": hashlib.sha256(cfg.encode()).hexdigest(),
                "seed": seed, "wall_time_s": wall, "status": status, "code_version": ver,
                "artifacts": hashes}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def execute(command: str, argv: List[str], out_dir: Optional[str]) -> int:
    parser, fn = COMMANDS[command]
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    out_dir = out_dir or os.environ.get(ENV_OUT) or os.path.join(os.getcwd(), "coercive_out")
    t0 = time.perf_counter()
    seed = getattr(a, "seed", None)
    errors = _numerical_errors()
    try:
        res = fn(a)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except _Partial as err:
        _write(out_dir, command, argv, err.artifacts, seed, time.perf_counter() - t0, "numerical_error")
        print(f"numerical diagnostic error: {err.err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except errors as err:
        _write(out_dir, command, argv, {}, seed, time.perf_counter() - t0, "numerical_error")
        print(f"numerical diagnostic error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return EXIT_CONFIG
    status = "ok" if res.ok else "expectation_failed"
    _write(out_dir, command, argv, res.artifacts, seed if res.seed is None else res.seed,
           time.perf_counter() - t0, status)
    print(json.dumps({"status": status, "out": out_dir, "summary": res.summary}, sort_keys=True,
                     default=str))
    return EXIT_OK if res.ok else EXIT_EXPECTATION


def _apply_threads(n: Optional[int]) -> None:
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = _build_parser()
    try:
        top, rest = ap.parse_known_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        _apply_threads(top.threads)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if top.command == "run":
        try:
            cmd, sub_argv, output = load_config(top.config)
        except (ConfigError, OSError) as err:
            print(f"config error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        return execute(cmd, sub_argv, top.out or output)
    i = argv.index(top.command)
    return execute(top.command, argv[i + 1:], top.out)


if __name__ == "__main__":
    sys.exit(main())
