"""Command-line front end: ``python -m hc3kit <command> [options]``.

Commands
--------
constants   universal constants plus the mu, sigma and Montgomery curves
gamma       tangency curve, assumption report and gamma_hat for a surface
hc3         local critical fields over a list of kappa values
lambda1     lowest eigenvalue sweep on a disc-cylinder or box
glprobe     Ginzburg-Landau transition scan and state dumps

Every run writes ``manifest.json`` into the output directory.  Exit codes:
0 success, 2 assumption violation, 3 numerical failure, 64 bad usage.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BracketError, ConvergenceError, HC3Error

log = logging.getLogger("hc3kit")

EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64

COMMANDS = ("constants", "gamma", "hc3", "lambda1", "glprobe")


class UsageError(HC3Error):
    pass


# ---------------------------------------------------------------------------
# configuration


def _floats(text):
    return [float(eval_number(t)) for t in str(text).replace(";", ",").split(",") if t.strip()]


def eval_number(text):
    """Plain number, or a tiny arithmetic expression over ``pi``."""
    t = str(text).strip()
    try:
        return float(t)
    except ValueError:
        pass
    import sympy
    val = sympy.sympify(t, locals={"pi": sympy.pi})
    if val.free_symbols:
        raise UsageError(f"not a number: {text!r}")
    return float(val)


@dataclass
class RunConfig:
    task: str
    surface: dict = field(default_factory=lambda: {"kind": "sphere"})
    beta: tuple = (0.0, 0.0, 1.0)
    kappas: list = field(default_factory=lambda: [100.0])
    B_grid: list = field(default_factory=lambda: [200.0, 400.0, 600.0, 800.0, 1000.0])
    tolerances: dict = field(default_factory=lambda: {
        "theta0": 1e-10, "eigen": 1e-9, "root": 1e-10, "gamma_value": 1e-9})
    out: str = "hc3kit-out"
    seed: int = 0
    resolution: int = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.beta, float)
        nb = float(np.linalg.norm(b))
        if b.shape != (3,) or not nb > 0:
            raise UsageError(f"beta must be a nonzero 3-vector, got {self.beta}")
        self.beta = tuple(float(x) for x in b / nb)
        for k, v in self.tolerances.items():
            if not float(v) > 0:
                raise UsageError(f"tolerance {k} must be positive")
        if int(self.resolution) < 1:
            raise UsageError("resolution must be a positive integer")
        self.resolution = int(self.resolution)
        self.seed = int(self.seed)

    def echo(self):
        return json.loads(json.dumps(asdict(self)))


def load_config(task, path=None, overrides=None):
    """Read an INI file (sections ``run``, ``surface``, ``tolerances`` and one
    per command) into a :class:`RunConfig`."""
    cp = configparser.ConfigParser()
    if path is not None:
        if not Path(path).is_file():
            raise UsageError(f"config file not found: {path}")
        cp.read(path)
    kw = {"task": task}
    if cp.has_section("run"):
        r = cp["run"]
        if "out" in r:
            kw["out"] = r["out"]
        if "seed" in r:
            kw["seed"] = r.getint("seed")
        if "resolution" in r:
            kw["resolution"] = r.getint("resolution")
        if "beta" in r:
            kw["beta"] = tuple(_floats(r["beta"]))
        if "kappas" in r:
            kw["kappas"] = _floats(r["kappas"])
        if "b_grid" in r:
            kw["B_grid"] = _floats(r["b_grid"])
    if cp.has_section("surface"):
        kw["surface"] = dict(cp["surface"])
        if "beta" in kw["surface"]:
            kw["beta"] = tuple(_floats(kw["surface"].pop("beta")))
    if cp.has_section("tolerances"):
        tol = RunConfig(task).tolerances
        tol.update({k: float(v) for k, v in cp["tolerances"].items()})
        kw["tolerances"] = tol
    if cp.has_section(task):
        kw["options"] = dict(cp[task])
    for k, v in (overrides or {}).items():
        if v is not None:
            kw[k] = v
    return RunConfig(**kw)


# ---------------------------------------------------------------------------
# run bookkeeping


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    constants_used: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    exit_code: int = 0
    notes: list = field(default_factory=list)
    version: str = __version__

    def add_output(self, path, root):
        p = Path(path)
        self.outputs.append({"path": str(p.relative_to(root)), "sha256": sha256_file(p)})

    def write(self, root):
        self.outputs.sort(key=lambda d: d["path"])
        with open(Path(root) / "manifest.json", "w", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


class Run:
    """Output directory, timers and the manifest of a single command."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.root = Path(cfg.out)
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(cfg.echo())
        self._files = []

    def path(self, name):
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self._files.append(p)
        return p

    def timed(self, label):
        run = self

        class _T:
            def __enter__(self):
                self.t = time.perf_counter()

            def __exit__(self, *exc):
                run.manifest.wall_times[label] = round(time.perf_counter() - self.t, 3)

        return _T()

    def finish(self, code):
        self.manifest.exit_code = code
        for p in dict.fromkeys(self._files):
            if p.exists():
                self.manifest.add_output(p, self.root)
        self.manifest.write(self.root)
        return code


# ---------------------------------------------------------------------------
# constants with cache


def _discs(res):
    from .model_operators import Disc2D, DiscParams1D, MontgomeryDisc
    return (DiscParams1D(n=8192 * res), MontgomeryDisc(n=4000 * res),
            Disc2D(h=0.15 / res))


def _cache_dir(cfg):
    return Path(cfg.options.get("cache_dir", Path(cfg.out) / "cache"))


def cached_constants(cfg, resolution=None, note=None):
    """``ModelConstants`` for ``resolution``, read from or written to the cache.

    The key is ``(operator, resolution, tolerance)``.
    """
    from .model_operators import ModelConstants, compute_model_constants
    res = cfg.resolution if resolution is None else resolution
    tol = cfg.tolerances["theta0"]
    key = f"model_constants_r{res}_tol{tol:.0e}"
    path = _cache_dir(cfg) / f"{key}.json"
    if path.is_file():
        consts = ModelConstants.from_json(str(path))
        hit = True
    else:
        d1, dm, _ = _discs(res)
        consts = compute_model_constants(d1, dm)
        path.parent.mkdir(parents=True, exist_ok=True)
        consts.to_json(path)
        hit = False
    if note is not None:
        note[key] = {"cache_hit": hit, "sha256": sha256_file(path)}
    return consts


def _cached_curve(cfg, name, builder):
    from .model_operators import SpectralCurve
    path = _cache_dir(cfg) / f"{name}_r{cfg.resolution}.csv"
    if path.is_file():
        return SpectralCurve.from_csv(path), True
    curve = builder()
    path.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(path)
    return SpectralCurve.from_csv(path), False


def cmd_constants(cfg: RunConfig, run: Run):
    from .model_operators import montgomery_curve, mu_curve, sigma_curve
    opt = cfg.options
    with run.timed("constants"):
        consts = cached_constants(cfg, note=run.manifest.constants_used)
    consts.to_json(run.path("constants.json"))
    d1, dm, d2 = _discs(cfg.resolution)
    n_mu = int(opt.get("mu_points", 61))
    n_sigma = int(opt.get("sigma_points", 9))
    n_xi = int(opt.get("xi_points", 41))
    with run.timed("curves"):
        curves = {
            ("mu", n_mu): lambda: mu_curve(np.linspace(-0.5, 2.5, n_mu), d1),
            ("sigma", n_sigma): lambda: sigma_curve(np.linspace(0, math.pi / 2, n_sigma), d2, d1),
            ("montgomery", n_xi): lambda: montgomery_curve(np.linspace(-1.0, 2.0, n_xi), dm),
        }
        wanted = {c.strip() for c in opt.get("curves", "mu, sigma, montgomery").split(",")}
        unknown = wanted - {"mu", "sigma", "montgomery", ""}
        if unknown:
            raise UsageError(f"unknown curves {sorted(unknown)}")
        for (name, n), build in curves.items():
            if name not in wanted:
                continue
            curve, hit = _cached_curve(cfg, f"{name}_n{n}", build)
            curve.to_csv(run.path(f"{name}_curve.csv"))
            run.manifest.constants_used[f"{name}_curve"] = {"cache_hit": hit}
    if cfg.resolution >= 2:
        coarse = cached_constants(cfg, cfg.resolution // 2, run.manifest.constants_used)
        deltas = {k: abs(getattr(consts, k) - getattr(coarse, k))
                  for k in ("theta0", "s0", "delta0", "nu0_hat", "xi_min")}
        with open(run.path("cauchy_deltas.json"), "w", newline="\n") as fh:
            json.dump({"resolution": cfg.resolution, "coarse_resolution": cfg.resolution // 2,
                       "deltas": deltas}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    log.info("theta0 = %.12f", consts.theta0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# surfaces


def build_surface(spec):
    from . import surfaces
    spec = dict(spec)
    kind = spec.pop("kind", "sphere").strip().lower()
    num = {k: eval_number(v) for k, v in spec.items()
           if k not in ("x", "y", "z", "u_range", "v_range")}
    if kind == "sphere":
        return surfaces.sphere(num.get("radius", 1.0))
    if kind in ("ellipsoid", "spheroid"):
        return surfaces.ellipsoid(num.get("a", 1.0), num.get("b", 1.0), num.get("c", 1.0))
    if kind in ("capsule", "cylinder_patch"):
        return surfaces.capsule(num.get("radius", 1.0), num.get("half_length", 1.0))
    if kind == "expression":
        try:
            x, y, z = spec["x"], spec["y"], spec["z"]
        except KeyError as exc:
            raise UsageError(f"expression surface needs x, y and z: missing {exc}") from exc
        ur = tuple(_floats(spec.get("u_range", "0, pi")))
        vr = tuple(_floats(spec.get("v_range", "0, 2*pi")))
        return surfaces.expression_surface(x, y, z, ur, vr, constants=num)
    raise UsageError(f"unknown surface kind {kind!r}")


def _gamma_outputs(cfg, run, consts):
    from .surface_geometry import (TraceParams, check_assumptions, gamma_hat,
                                   trace_gamma)
    from .errors import GammaNotRegularError, GeometryError
    surf = build_surface(cfg.surface)
    prm = TraceParams(step=float(cfg.options.get("step", 1e-2)) / cfg.resolution)
    try:
        curves = trace_gamma(surf, cfg.beta, prm, consts)
    except (GammaNotRegularError, GeometryError):
        curves = None
    rep = check_assumptions(surf, cfg.beta, consts, prm, curves=curves)
    rep.to_json(run.path("assumptions.json"))
    if curves is None or not rep.all_pass:
        return rep, None, None
    for c in curves:
        c.to_csv(run.path(f"tangency_curve_{c.curve_id}.csv"))
    val, where = gamma_hat(curves, consts, cfg.tolerances["gamma_value"], prm)
    doc = {"gamma_hat": val,
           "minimizers": [{"curve_id": int(i), "s_interval": [float(a), float(b)]}
                          for i, (a, b) in where],
           "closed_form_sphere": 2 ** (-2 / 3) * consts.nu0_hat * consts.delta0 ** (2 / 3),
           "surface": surf.name, "beta": list(cfg.beta)}
    with open(run.path("gamma_hat.json"), "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rep, curves, val


def cmd_gamma(cfg: RunConfig, run: Run):
    consts = cached_constants(cfg, note=run.manifest.constants_used)
    with run.timed("gamma"):
        rep, _, val = _gamma_outputs(cfg, run, consts)
    if not rep.all_pass:
        run.manifest.notes.append("assumptions violated; see assumptions.json")
        log.warning("assumption check failed for %s", cfg.surface)
        return EXIT_ASSUMPTION
    log.info("gamma_hat = %.12f", val)
    return EXIT_OK


# ---------------------------------------------------------------------------
# critical fields


def _hc3_window(model, kappa, theta0, amplitude):
    if model == "wiggle":
        lo = max((kappa * kappa - amplitude - 1) / (theta0 * kappa), 1e-6 * kappa)
        hi = (kappa * kappa + amplitude + 1) / (theta0 * kappa)
        return lo, hi
    return 1e-3 * kappa / theta0, 2 * kappa / theta0


def cmd_hc3(cfg: RunConfig, run: Run):
    from .asymptotics import (hc3_two_term, leading_order_field, linear_model, local_fields,
                              two_term_model, wiggle_model)
    opt = cfg.options
    model = opt.get("model", "asymptotic").strip().lower()
    consts = cached_constants(cfg, note=run.manifest.constants_used)
    ghat = None
    if model == "asymptotic":
        rep, _, ghat = _gamma_outputs(cfg, run, consts)
        if not rep.all_pass:
            run.manifest.notes.append("assumptions violated; two-term law not applicable")
            return EXIT_ASSUMPTION
        ev = two_term_model(consts, ghat)
    elif model == "linear":
        ev = linear_model(consts.theta0)
    elif model == "wiggle":
        amp = float(opt.get("amplitude", 10.0))
        ev = wiggle_model(consts.theta0, amp, float(opt.get("frequency", 1.0)))
    else:
        raise UsageError(f"unknown lambda1 model {model!r}")
    if ghat is None:
        ghat = float(opt.get("gamma_hat", 2 ** (-2 / 3) * consts.nu0_hat * consts.delta0 ** (2 / 3)))
    C = float(opt.get("band_c", 2 * ghat * consts.theta0 ** (-5 / 3)))
    rows, reports = [], []
    with run.timed("hc3"):
        for kappa in cfg.kappas:
            if "window" in opt:
                win = tuple(_floats(opt["window"]))
            else:
                win = _hc3_window(model, kappa, consts.theta0, float(opt.get("amplitude", 10.0)))
            r = local_fields(ev, kappa, win, scan_n=int(opt.get("scan_n", 2048)),
                             rel_tol=cfg.tolerances["root"])
            lead, band = leading_order_field(kappa, consts, C)
            rows.append((kappa, lead, hc3_two_term(kappa, consts, ghat), r.underline_loc,
                         r.overline_loc, band))
            reports.append(json.loads(r.to_json()))
            if not r.monotone_flag:
                note = (f"kappa={kappa:g}: {len(r.crossing_list)} crossings, "
                        f"underline {r.underline_loc:.10g} < overline {r.overline_loc:.10g}")
                run.manifest.notes.append(note)
                print(f"note: {note}", file=sys.stderr)
    with open(run.path("hc3.csv"), "w", newline="\n") as fh:
        fh.write("kappa,leading,two_term,underline_loc,overline_loc\n")
        for k, lead, tt, lo, hi, _ in rows:
            fh.write(f"{k:.17g},{lead:.17g},{tt:.17g},{lo:.17g},{hi:.17g}\n")
    with open(run.path("hc3_sweep.csv"), "w", newline="\n") as fh:
        fh.write("kappa,underline,overline,hc3_two_term,leading,band\n")
        for k, lead, tt, lo, hi, band in rows:
            fh.write(f"{k:.17g},{lo:.17g},{hi:.17g},{tt:.17g},{lead:.17g},{band:.17g}\n")
    with open(run.path("critical_field_reports.json"), "w", newline="\n") as fh:
        json.dump({"model": model, "gamma_hat": ghat, "band_c": C, "reports": reports},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# direct solver and GL probe


def _domain_from(opt, resolution, default_kind="disc_cylinder"):
    from .magnetic_eigensolver import DiscreteDomain
    kind = opt.get("domain", default_kind)
    if kind == "disc_cylinder":
        return DiscreteDomain.disc_cylinder(
            eval_number(opt.get("r", 1.0)), eval_number(opt.get("l", 1.0)),
            int(opt.get("nr", 16)) * resolution, int(opt.get("nphi", 64)) * resolution,
            int(opt.get("nz", 8)),
            radial_n=int(opt.get("radial_n", 2000)) * resolution if opt.get(
                "solver", "radial") == "radial" else None,
            m_max=int(opt["m_max"]) if "m_max" in opt else None)
    if kind == "box":
        n = int(opt.get("n", 12)) * resolution
        side = eval_number(opt.get("side", 2.0))
        return DiscreteDomain.box(side, side, side, n, n, n)
    raise UsageError(f"unknown domain {kind!r}")


def cmd_lambda1(cfg: RunConfig, run: Run):
    from .magnetic_eigensolver import (build_operator, dump_eigenvector, lambda1_sweep,
                                       lowest_eigenpair, write_sweep_csv)
    opt = cfg.options
    dom = _domain_from(opt, cfg.resolution)
    with run.timed("sweep"):
        rows = lambda1_sweep(dom, cfg.B_grid, cfg.tolerances["eigen"], cfg.seed)
    write_sweep_csv(rows, run.path("lambda1_sweep.csv"))
    lam = [r[1] for r in rows]
    if any(b > a for a, b in zip(lam[1:], lam[:-1])):
        run.manifest.notes.append("lambda1 column is not monotone over the B grid")
    if opt.get("dump", "false").lower() in ("1", "true", "yes"):
        B = float(opt.get("dump_b", cfg.B_grid[-1]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = lowest_eigenpair(build_operator(dom, B), cfg.tolerances["eigen"], cfg.seed)
        p = run.path("eigenvector.bin")
        dump_eigenvector(res, p)
        run.path("eigenvector.bin.json")
    return EXIT_OK


def cmd_glprobe(cfg: RunConfig, run: Run):
    from . import gl_probe as gp
    opt = cfg.options
    kappa = float(opt.get("kappa", 2.0))
    dom = gp.default_gl_domain() if "r" not in opt else _domain_from(
        {**opt, "solver": "lattice"}, cfg.resolution)
    win = tuple(_floats(opt.get("window", "3.4, 4.2")))
    budget = int(opt.get("budget", 12))
    with run.timed("bisection"):
        est = gp.estimate_hc3_mod(kappa, win, budget, dom,
                                  maxiter=int(opt.get("maxiter", 600)))
    gp.write_transition_csv(est.log, run.path("transition.csv"))
    with run.timed("spectral_root"):
        root = gp.spectral_root(kappa, win, dom, cfg.tolerances["eigen"])
    H_in = float(opt.get("state_h", est.bracket[0] - 0.1 * (win[1] - win[0])))
    with run.timed("state"):
        best, _ = gp.minimize_best(kappa, H_in, dom, seeds=(cfg.seed + 1, cfg.seed + 2))
        ineq = gp.minimizer_inequality_check(best.state)
        base = run.path("state_nontrivial")
        gp.dump_state(best, base, ineq)
        for ext in (".psi", ".a", ".json"):
            run.path(f"state_nontrivial{ext}")
        run._files.remove(base)
    doc = {"kappa": kappa, "window": list(win), "H_estimate": est.H_estimate,
           "bracket": list(est.bracket), "eps_energy": est.eps_energy,
           "monotone_predicate": est.monotone, "spectral_root": root,
           "relative_gap": abs(est.H_estimate - root) / root,
           "state_H": H_in, "state_total": best.energy.total,
           "inequalities_pass": ineq.all_pass}
    with open(run.path("glprobe.json"), "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not best.converged:
        run.manifest.notes.append("descent at state_h did not reach the gradient tolerance")
        return EXIT_NUMERICAL
    return EXIT_OK


HANDLERS = {"constants": cmd_constants, "gamma": cmd_gamma, "hc3": cmd_hc3,
            "lambda1": cmd_lambda1, "glprobe": cmd_glprobe}


HELP = {
    "constants": "universal constants and model spectral curves (cached)",
    "gamma": "tangency curve, assumption report and gamma_hat of a surface",
    "hc3": "local critical fields for a list of kappa values",
    "lambda1": "lowest magnetic Neumann eigenvalue over a field grid",
    "glprobe": "Ginzburg-Landau onset scan on a disc-cylinder",
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="hc3kit", description="Surface superconductivity toolkit.")
    p.add_argument("--version", action="version", version=f"hc3kit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", help="INI file with [run], [surface], [tolerances] "
                                        f"and [{name}] sections")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="random seed")
        s.add_argument("--resolution", type=int, help="grid refinement factor (1, 2, 4, ...)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.command, args.config,
                          {"out": args.out, "seed": args.seed, "resolution": args.resolution})
    except UsageError as exc:
        print(f"hc3kit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    run = Run(cfg)
    try:
        code = HANDLERS[args.command](cfg, run)
    except UsageError as exc:
        print(f"hc3kit: {exc}", file=sys.stderr)
        return run.finish(EXIT_USAGE)
    except (ConvergenceError, BracketError) as exc:
        print(f"hc3kit: numerical failure: {exc}", file=sys.stderr)
        run.manifest.notes.append(f"numerical failure: {exc}")
        return run.finish(EXIT_NUMERICAL)
    return run.finish(code)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
