"""Command-line front end: ``dstab simulate | verify | probe | flatness | reproduce``.

Exit codes: 0 pass, 1 counterexample, 2 configuration error, 3 runtime error.
Options may also come from a plain-text file (``--config FILE``) holding
``key = value`` lines, optionally under ``[section]`` headers named after the
subcommand (``[simulate]``, ``[probe]``...); flags given on the command line
win over the file.  ``DSTAB_SEED`` overrides the default seed 42.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, fields
from dataclasses import field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from .catalog import get_problem
from .core import (COUNTEREXAMPLE, NO_VIOLATION_FOUND, ParameterError, ProbeReport,
                   StepSchedule, make_constant_schedule, make_power_schedule,
                   make_random_schedule, sublevel_intersection)
from .euler import Selector, simulate
from .flatness import compare_flatness, flatness_profile, ranking_csv, screen_flat_minima
from .lyapunov import (DecreaseCertificate, calibrate_p_dL, calibrate_pq_dL, check_conserved_many,
                       check_descent_window, check_first_order, check_second_order,
                       estimate_zeta, verify_dL, verify_p_dL, verify_pq_dL)
from .stability import (PROBE_CSV_HEADER, StabilityProbeConfig, check_distance_lower_bound,
                        check_verdier, estimate_subregularity, probe_asymptotic,
                        probe_attractor, probe_csv_row, probe_point_stability,
                        probe_set_stability)
from .svg import trajectory_svg

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
DEFAULT_SEED = 42


class ConfigError(ValueError):
    pass


def default_seed() -> int:
    env = os.environ.get("DSTAB_SEED")
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"DSTAB_SEED must be an integer, got {env!r}") from None


# ---------------------------------------------------------------------------
# value parsing


def parse_vector(text) -> np.ndarray:
    if isinstance(text, (list, tuple, np.ndarray)):
        return np.asarray(text, dtype=float)
    try:
        return np.array([float(t) for t in str(text).split(",") if t.strip()], dtype=float)
    except ValueError:
        raise ConfigError(f"not a comma-separated vector: {text!r}") from None


def parse_schedule(text: str, seed: int = 0) -> StepSchedule:
    """``pow:c=1,p=6[,cap=1]``, ``const:c=0.1`` or ``rand:cap=0.1[,seed=3]``.

    A ``rand`` schedule without ``seed=`` draws from ``seed``."""
    kind, _, rest = str(text).partition(":")
    kv = {}
    for tok in filter(None, (t.strip() for t in rest.split(","))):
        k, eq, v = tok.partition("=")
        if not eq:
            raise ConfigError(f"bad schedule token {tok!r}")
        try:
            kv[k.strip()] = float(v)
        except ValueError:
            raise ConfigError(f"bad schedule value {tok!r}") from None
    kind = kind.strip().lower()
    try:
        if kind in ("pow", "power"):
            c = kv.pop("c")
            sch = make_power_schedule(c, kv.pop("p", 1.0), kv.pop("cap", c))
        elif kind in ("const", "constant"):
            c = kv.pop("c")
            sch = make_constant_schedule(c, kv.pop("cap", None))
        elif kind in ("rand", "random"):
            sch = make_random_schedule(kv.pop("cap"), int(kv.pop("seed", seed)))
        else:
            raise ConfigError(f"unknown schedule kind {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"schedule {text!r} is missing {exc}") from None
    if kv:
        raise ConfigError(f"unknown schedule keys {sorted(kv)}")
    return sch


# ---------------------------------------------------------------------------
# experiment configuration file


@dataclass
class ExperimentConfig:
    """Flat experiment description with a lossless ``key = value`` text form."""

    problem: str = ""
    field: str = ""
    schedule: str = ""
    x0: Optional[tuple] = None
    steps: Optional[int] = None
    selector: str = "first"
    seed: int = DEFAULT_SEED
    csv: str = ""
    svg: str = ""
    probe: dict = dc_field(default_factory=dict)

    def to_text(self) -> str:
        lines = ["[experiment]"]
        for f in fields(self):
            if f.name == "probe":
                continue
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "x0":
                v = ",".join(repr(float(t)) for t in v)
            lines.append(f"{f.name} = {v}")
        if self.probe:
            lines.append("[probe]")
            for k in sorted(self.probe):
                lines.append(f"{k} = {self.probe[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        sections = read_config_text(text)
        exp = sections.get("experiment", {})
        kw = {}
        for f in fields(cls):
            if f.name == "probe" or f.name not in exp:
                continue
            v = exp[f.name]
            if f.name == "x0":
                v = tuple(float(t) for t in v.split(","))
            elif f.name in ("steps", "seed"):
                v = int(v)
            kw[f.name] = v
        return cls(probe=dict(sections.get("probe", {})), **kw)


def read_config_text(text: str) -> dict:
    """``{section: {key: value}}``; lines before any header go to ``""``."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    cp.optionxform = str
    try:
        cp.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config file: {exc}") from None
    out = {}
    for sec in cp.sections():
        out["" if sec == "__top__" else sec] = dict(cp.items(sec))
    return out


# ---------------------------------------------------------------------------
# argument parser

_DEFAULTS = {
    "field": None, "seed": None, "csv": None, "svg": None, "g_log": "auto",
    "steps": 100000, "selector": "first", "thin": 1,
    "alpha_bar": 0.1, "N": None, "A": 12, "region": "lyapunov", "p": None, "q": 2,
    "omega": None, "radius": None, "ell": 0.04, "kappa": None, "zeta": None, "T": 1.0,
    "alpha": 0.001, "epsilon": None, "deltas": None, "alpha_bars": None, "K": None,
    "c": None, "cap": None, "target": "attractor", "gbar": None, "radii": None,
    "rho": 0.1, "samples": 41, "outdir": ".", "witness": None, "vs": None, "at": None,
    "x0": None, "schedule": None, "tau_range": None,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="key = value file with optional [section] headers")
    common.add_argument("--problem", help="catalog id, e.g. ellipse:a=2,b=1")
    common.add_argument("--field", choices=["normalized", "bouligand"])
    common.add_argument("--seed", type=int)
    common.add_argument("--csv", help="output CSV path (default: standard output)")

    ap = argparse.ArgumentParser(prog="dstab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], argument_default=S,
                        help="run the Euler inclusion and write a trajectory CSV")
    sp.add_argument("--x0")
    sp.add_argument("--schedule", help="pow:c=1,p=6 | const:c=0.1 | rand:cap=0.1,seed=0")
    sp.add_argument("--steps", type=int)
    sp.add_argument("--selector", choices=["first", "random", "adversarial"])
    sp.add_argument("--thin", type=int)
    sp.add_argument("--svg")
    sp.add_argument("--g-log", dest="g_log", choices=["auto", "on", "off"])

    vp = sub.add_parser("verify", parents=[common], argument_default=S,
                        help="decrease certificates and conserved quantities")
    vp.add_argument("check", choices=["dl", "pdl", "pqdl", "first", "second", "conserved",
                                      "zeta", "descent"])
    for name, typ in (("--alpha-bar", float), ("--N", int), ("--A", int), ("--p", float),
                      ("--q", int), ("--omega", float), ("--radius", float), ("--ell", float),
                      ("--kappa", float), ("--zeta", float), ("--T", float),
                      ("--alpha", float)):
        vp.add_argument(name, dest=name[2:].replace("-", "_"), type=typ)
    vp.add_argument("--region")
    vp.add_argument("--at")
    vp.add_argument("--x0")
    vp.add_argument("--witness")

    pp = sub.add_parser("probe", parents=[common], argument_default=S,
                        help="stability and attractor probes, geometric estimators")
    pp.add_argument("kind", choices=["point", "set", "asymptotic", "attractor", "subreg",
                                     "verdier", "distbound"])
    for name, typ in (("--epsilon", float), ("--p", float), ("--c", float), ("--cap", float),
                      ("--K", int), ("--N", int), ("--A", int), ("--alpha-bar", float),
                      ("--rho", float), ("--gbar", float), ("--radius", float)):
        pp.add_argument(name, dest=name[2:].replace("-", "_"), type=typ)
    pp.add_argument("--at")
    pp.add_argument("--x0")
    pp.add_argument("--deltas")
    pp.add_argument("--alpha-bars", dest="alpha_bars")
    pp.add_argument("--radii")
    pp.add_argument("--target", choices=["attractor", "minima"])
    pp.add_argument("--tau-range", dest="tau_range")

    fp = sub.add_parser("flatness", parents=[common], argument_default=S,
                        help="flatness profiles, comparison and screening")
    fp.add_argument("kind", choices=["profile", "compare", "screen"])
    fp.add_argument("--at")
    fp.add_argument("--vs")
    fp.add_argument("--radii")
    fp.add_argument("--samples", type=int)

    rp = sub.add_parser("reproduce", argument_default=S, help="regenerate a figure experiment")
    rp.add_argument("figure", choices=["fig1", "fig2", "fig3"])
    rp.add_argument("--outdir")
    rp.add_argument("--g-log", dest="g_log", choices=["auto", "on", "off"])
    return ap


def _merge(ns: argparse.Namespace) -> argparse.Namespace:
    """Command line over config-file section over config-file top level over defaults."""
    given = vars(ns)
    merged = dict(_DEFAULTS)
    path = given.get("config")
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        secs = read_config_text(text)
        for sec in ("", "experiment", ns.command):
            for k, v in secs.get(sec, {}).items():
                merged[k.replace("-", "_")] = v
    merged.update(given)
    if merged.get("seed") is None:
        merged["seed"] = default_seed()
    return argparse.Namespace(**merged)


# ---------------------------------------------------------------------------
# helpers


def _num(ns, key, cast=float):
    v = getattr(ns, key, None)
    if v is None:
        return None
    try:
        return cast(v)
    except (TypeError, ValueError):
        raise ConfigError(f"--{key.replace('_', '-')} must be a number, got {v!r}") from None


def _problem(ns):
    if not getattr(ns, "problem", None):
        raise ConfigError("--problem is required")
    return get_problem(ns.problem)


def _field(problem, ns):
    return problem.descent(ns.field or problem.default_field)


def _emit(ns, text: str):
    if ns.csv:
        Path(ns.csv).write_text(text)
    else:
        sys.stdout.write(text)


def _region(problem, ns):
    name = ns.region or "lyapunov"
    if name not in problem.regions:
        raise ConfigError(f"{problem.name} has no region {name!r}; "
                          f"choose from {sorted(problem.regions)}")
    return lambda rng, m: problem.sample(name, rng, m)


def _point(ns, key, problem, default=None):
    v = getattr(ns, key, None)
    if v is None:
        if default is None:
            raise ConfigError(f"--{key} is required")
        return np.asarray(default, dtype=float)
    p = parse_vector(v)
    if p.size != problem.dim:
        raise ConfigError(f"--{key} needs {problem.dim} coordinates")
    return p


def _witness_csv(w) -> str:
    rows = ["key,value"]
    for k, v in (w or {}).items():
        if isinstance(v, np.ndarray):
            v = " ".join(format(float(t), ".17g") for t in v.ravel())
        rows.append(f"{k},{v}")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(ns) -> int:
    problem = _problem(ns)
    if not ns.x0:
        raise ConfigError("--x0 is required")
    x0 = _point(ns, "x0", problem)
    sch = parse_schedule(ns.schedule or "pow:c=1,p=6", int(ns.seed))
    K = _num(ns, "steps", int)
    F = _field(problem, ns)
    if ns.selector == "adversarial":
        if problem.g is None:
            raise ConfigError("adversarial selection needs an auxiliary g")
        sel = Selector("adversarial", objective=problem.g)
    else:
        sel = Selector(ns.selector or "first", seed=int(ns.seed))
    traj = simulate(problem, F, sch, x0, K, sel, seed=int(ns.seed),
                    thin=_num(ns, "thin", int) or 1)
    _emit(ns, traj.to_csv())
    if ns.svg:
        Path(ns.svg).write_text(trajectory_svg(problem, traj.points, ns.g_log))
    if traj.truncated:
        print(f"simulation truncated at k={traj.error[0]}: {traj.error[1]}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_PASS


def _cert_output(ns, certs) -> int:
    text = DecreaseCertificate.CSV_HEADER + "\n" + "".join(c.csv_row() + "\n" for c in certs)
    bad = [c for c in certs if not c.passed]
    for c in bad:
        if c.report.witness is not None:
            w = _witness_csv(c.report.witness)
            if ns.witness:
                Path(ns.witness).write_text(w)
            else:
                text += "\n" + w
    _emit(ns, text)
    return EXIT_FAIL if bad else EXIT_PASS


def cmd_verify(ns) -> int:
    problem = _problem(ns)
    F = _field(problem, ns)
    seed = int(ns.seed)
    ab = _num(ns, "alpha_bar")
    N, A = _num(ns, "N", int) or 200, _num(ns, "A", int)
    check = ns.check
    if check in ("dl", "pdl", "pqdl", "first", "second") and problem.g is None:
        raise ConfigError(f"{problem.name} has no auxiliary g")
    g = problem.g
    if check == "dl":
        cert = verify_dL(g, F, _region(problem, ns), ab, N, A, seed, label=ns.region)
        return _cert_output(ns, [cert])
    if check == "pdl":
        p = _num(ns, "p") or 2.0
        region = _region(problem, ns)
        omega = _num(ns, "omega")
        if omega is None:
            cal = calibrate_p_dL(g, F, region, p, ab, N, A, seed)
            cert = verify_p_dL(g, F, region, p, cal.omega, cal.alpha_bar, N, A, seed,
                               label=ns.region)
        else:
            cert = verify_p_dL(g, F, region, p, omega, ab, N, A, seed, label=ns.region)
        return _cert_output(ns, [cert])
    if check == "pqdl":
        p = _num(ns, "p") or 4.0
        q = _num(ns, "q", int)
        region = _region(problem, ns)
        omega = _num(ns, "omega")
        if omega is None:
            omega = calibrate_pq_dL(g, F, region, p, q, ab, N, seed=seed).omega
        cert = verify_pq_dL(g, F, region, p, q, omega, ab, N, seed=seed, label=ns.region)
        return _cert_output(ns, [cert])
    if check in ("first", "second"):
        x = _point(ns, "at", problem)
        if check == "first":
            s, ok = check_first_order(g, F, x)
        else:
            s, ok = check_second_order(g, F, x, _num(ns, "radius") or 0.1, N, seed)
        rep = ProbeReport(NO_VIOLATION_FOUND if ok else COUNTEREXAMPLE, s,
                          None if ok else {"x": x, "s": s}, {"n_trials": 1})
        return _cert_output(ns, [DecreaseCertificate(check + "order", 0.0, 0.0, rep,
                                                     region="at")])
    if check == "conserved":
        if not problem.conserved:
            raise ConfigError(f"{problem.name} declares no conserved quantity")
        region = ns.region if ns.region != "lyapunov" else "box"
        if region not in problem.regions:
            raise ConfigError(f"unknown region {region!r}")
        N = _num(ns, "N", int) or 10000
        certs = []
        reps = check_conserved_many(problem.conserved, F,
                                    lambda rng, m: problem.sample(region, rng, m), N, seed)
        for C, rep in zip(problem.conserved, reps):
            rep.stats["n_trials"] = rep.stats["n_points"]
            certs.append(DecreaseCertificate("conserved:" + C.name, 0.0, 0.0, rep,
                                             region=region))
        return _cert_output(ns, certs)
    if check == "zeta":
        X = problem.attractor or problem.minima
        z = estimate_zeta(problem, _num(ns, "ell"), X, _num(ns, "radius") or 0.1, N, seed)
        rep = ProbeReport(NO_VIOLATION_FOUND, z, None, {"n_trials": N})
        return _cert_output(ns, [DecreaseCertificate("zeta", 0.0, 0.0, rep, region="annulus")])
    # descent window
    x0 = _point(ns, "x0", problem)
    ell, T = _num(ns, "ell"), _num(ns, "T")
    alpha = _num(ns, "alpha")
    X = problem.attractor or problem.minima
    zeta = _num(ns, "zeta")
    if zeta is None:
        zeta = estimate_zeta(problem, ell, X, _num(ns, "radius") or 1.0, N, seed)
    kappa = _num(ns, "kappa")
    if kappa is None:
        raise ConfigError("--kappa is required for the descent check")
    K = int(np.ceil(T / alpha)) + 1
    traj = simulate(problem, F, make_constant_schedule(alpha), x0, K)
    rep = check_descent_window(traj, ell, kappa, zeta, T)
    rep.stats["n_trials"] = len(traj)
    return _cert_output(ns, [DecreaseCertificate("descent", 0.0, alpha, rep, region="window")])


def _probe_output(ns, name, rep) -> int:
    text = PROBE_CSV_HEADER + "\n" + probe_csv_row(name, rep) + "\n"
    if not rep.passed:
        w = {k: v for k, v in rep.witness.items() if k != "points"} \
            if isinstance(rep.witness, dict) else {"witness": rep.witness}
        text += "\n" + _witness_csv(w)
    _emit(ns, text)
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _probe_defaults(problem):
    return problem.notes.get("attractor_probe", {"c": 1.0, "cap": 0.5, "K": 20000})


def cmd_probe(ns) -> int:
    problem = _problem(ns)
    F = _field(problem, ns)
    seed = int(ns.seed)
    kind = ns.kind
    if kind in ("point", "set"):
        eps = _num(ns, "epsilon") or 0.05
        deltas = tuple(parse_vector(ns.deltas)) if ns.deltas else (eps / 5, 2 * eps / 5)
        abars = tuple(parse_vector(ns.alpha_bars)) if ns.alpha_bars else (eps / 10, eps / 5)
        cfg = StabilityProbeConfig(eps, deltas, abars, N_init=_num(ns, "N", int) or 2,
                                   K=_num(ns, "K", int) or 20000, seed=seed,
                                   watch_every=1 if kind == "point" else 10)
        if kind == "point":
            rep = probe_point_stability(problem, F, _point(ns, "at", problem), cfg)
        else:
            if ns.gbar is not None:
                X = sublevel_intersection(problem.g, _num(ns, "gbar"), problem.minima,
                                          label="[f<=0]&[g<=gbar]")
            else:
                X = problem.attractor if ns.target == "attractor" else problem.minima
            rep = probe_set_stability(problem, F, X, cfg)
        return _probe_output(ns, kind, rep)
    if kind in ("asymptotic", "attractor"):
        if problem.attractor is None:
            raise ConfigError(f"{problem.name} has no attractor descriptor")
        d = _probe_defaults(problem)
        p = _num(ns, "p") or problem.attractor_order or 2.0
        c = _num(ns, "c") or d["c"]
        cap = _num(ns, "cap") or d["cap"]
        K = _num(ns, "K", int) or d["K"]
        eps = _num(ns, "epsilon") or 0.2
        if kind == "attractor":
            N = _num(ns, "N", int) or 100
            rep = probe_attractor(problem, F, problem.attractor, p,
                                  lambda rng, m: problem.sample("basin", rng, m), eps, N, K,
                                  c=c, cap=cap, seed=seed)
        else:
            starts = _point(ns, "x0", problem)[None, :] if ns.x0 else None
            N = _num(ns, "N", int) or 4
            rep = probe_asymptotic(problem, F, problem.attractor, p, c, N, K, eps,
                                   starts=starts, cap=cap, seed=seed)
        return _probe_output(ns, kind, rep)
    M = problem.minima
    at = _point(ns, "at", problem, default=np.zeros(problem.dim))
    N = _num(ns, "N", int) or 200
    if kind == "subreg":
        radii = parse_vector(ns.radii) if ns.radii else np.geomspace(1e-3, 1e-1, 5)
        fit = estimate_subregularity(problem, M, at, radii, max(1, N // len(radii)), seed)
        ok = True
        if ns.tau_range:
            lo, hi = parse_vector(ns.tau_range)
            ok = lo <= fit.tau <= hi
        rep = ProbeReport(NO_VIOLATION_FOUND if ok else COUNTEREXAMPLE, fit.tau,
                          None if ok else {"tau": fit.tau},
                          {"n_trials": fit.n_used, "target": M.label})
        return _probe_output(ns, kind, rep)
    if kind == "verdier":
        rep = check_verdier(problem, M, at, N, r=_num(ns, "radius") or 0.1, seed=seed)
        rep.stats["target"] = M.label
        return _probe_output(ns, kind, rep)
    rep = check_distance_lower_bound(problem, M, at, _num(ns, "alpha_bar"), _num(ns, "rho"),
                                     N, _num(ns, "A", int), seed)
    rep.stats["target"] = M.label
    return _probe_output(ns, kind, rep)


def cmd_flatness(ns) -> int:
    problem = _problem(ns)
    radii = parse_vector(ns.radii) if ns.radii else np.geomspace(1e-3, 1e-2, 4)
    seed = int(ns.seed)
    if ns.kind == "profile":
        prof = flatness_profile(problem, _point(ns, "at", problem), radii, seed=seed)
        _emit(ns, prof.to_csv())
        return EXIT_PASS
    if ns.kind == "compare":
        v = compare_flatness(problem, _point(ns, "at", problem), _point(ns, "vs", problem),
                             radii, seed=seed)
        _emit(ns, f"verdict\n{v}\n")
        return EXIT_PASS
    if problem.minima is None:
        raise ConfigError(f"{problem.name} has no minimum-set descriptor")
    ranked = screen_flat_minima(problem, problem.minima, _num(ns, "samples", int), radii,
                                seed=seed)
    _emit(ns, ranking_csv(ranked))
    return EXIT_PASS


FIGURES = {
    "fig1": {"problem": "flat4", "x0": (2.5, 0.01), "schedule": (1.0, 6.0, 1.0)},
    "fig2": {"problem": "parabola", "x0": (0.9, 0.7), "schedule": (0.1, 6.0, 0.1)},
    "fig3": {"problem": "ellipse:a=2,b=1", "x0": (0.8, 0.2), "schedule": (1.0, 6.0, 1.0)},
}
FIGURE_STEPS = 100000


def run_figure(name: str):
    spec = FIGURES[name]
    problem = get_problem(spec["problem"])
    c, p, cap = spec["schedule"]
    traj = simulate(problem, problem.descent("normalized"), make_power_schedule(c, p, cap),
                    spec["x0"], FIGURE_STEPS)
    return problem, traj


def figure_check(name: str, problem, traj) -> tuple:
    """``(value, threshold, passed)`` for the figure's convergence criterion."""
    if name == "fig3":
        d = problem.attractor.dist(traj.last)
        return d, 0.15, d <= 0.15
    ratio = traj.g_values[-1] / traj.g_values[0]
    return ratio, 0.1, ratio <= 0.1


def cmd_reproduce(ns) -> int:
    out = Path(ns.outdir or ".")
    out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    problem, traj = run_figure(ns.figure)
    traj.to_csv(out / f"{ns.figure}.csv")
    (out / f"{ns.figure}.svg").write_text(
        trajectory_svg(problem, traj.points, ns.g_log or "auto", title=ns.figure))
    value, thr, ok = figure_check(ns.figure, problem, traj)
    what = "d(x_K, A)" if ns.figure == "fig3" else "g(x_K)/g(x_0)"
    print(f"{ns.figure}: {what} = {value:.3e} (threshold {thr}) "
          f"{'ok' if ok else 'NOT MET'}; {time.perf_counter() - t:.1f}s", file=sys.stderr)
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "probe": cmd_probe,
            "flatness": cmd_flatness, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_CONFIG
    try:
        ns = _merge(ns)
        return COMMANDS[ns.command](ns)
    except (ConfigError, ParameterError) as exc:
        print(f"dstab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime error
        print(f"dstab: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
