"""Command-line front end: ``onsagerlab <subcommand> [--config PATH] [--out DIR] [--key value ...]``.

Every subcommand writes ``summary.json`` (config echo, content hash of the
inputs, results, pass flag) plus its CSV tables into the output directory.
Exit status: 0 success, 2 failed check, 1 usage or input error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from . import commutators as cm
from . import euler, hypotheses, scenarios
from .config import ConfigError, blob_sha1, canonical, parse_value, read_config, resolve
from .errors import LabError, SmoothnessLostError
from .fields import Field, TimeSeriesField, load_field, save_field
from .geometry import coarea_check, disk, make_domain
from .mollify import MollifierKernel
from .roughgen import RoughSpec, bounded_density, lacunary_scalar, lacunary_vector, white_noise
from .seminorms import dyadic_shifts, full_shifts, seminorm

SCHEMA_VERSION = "1.0"
DYADIC = [2.0**-k for k in range(3, 8)]
COMMON = {"seed": 0, "threads": 0}


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


class Run:
    """Output directory plus the list of artifacts written."""

    def __init__(self, out, quiet):
        self.out = Path(out)
        self.quiet = quiet
        self.artifacts = []

    def path(self, name):
        self.artifacts.append(name)
        return self.out / name

    def say(self, msg):
        if not self.quiet:
            print(msg)


def _torus(cfg):
    dom = make_domain(cfg["domain"])
    if dom.kind != "torus":
        raise ConfigError("this command runs on torus1, torus2 or torus3")
    return dom


def _scalar_source(cfg, dom, seed):
    kind = cfg["source"]
    N = cfg["N"]
    if kind == "constant":
        return Field.constant(dom, N, cfg["value"])
    if kind == "trig":
        return Field.from_function(dom, N, lambda *x: np.cos(2 * np.pi * x[0]))
    if kind == "lacunary":
        return lacunary_scalar(dom, N, RoughSpec(cfg["alpha"], cfg["octaves"], seed))
    if kind == "noise":
        return white_noise(dom, N, seed)
    raise ConfigError(f"unknown source {kind!r} (constant, trig, lacunary, noise)")


# ------------------------------------------------------------------ commands


GEN = {"domain": "torus1", "N": 1024, "kind": "lacunary", "alpha": 1 / 3, "octaves": 8, "amplitude": 1.0,
       "m": 0.5, "M": 2.0, "name": "field"}


def cmd_gen(cfg, run):
    dom = _torus(cfg)
    spec = RoughSpec(cfg["alpha"], cfg["octaves"], cfg["seed"], cfg["amplitude"])
    kind = cfg["kind"]
    if kind == "lacunary":
        f = lacunary_scalar(dom, cfg["N"], spec)
    elif kind == "vector":
        f = lacunary_vector(dom, cfg["N"], spec)
    elif kind == "noise":
        f = white_noise(dom, cfg["N"], cfg["seed"], cfg["amplitude"])
    elif kind == "density":
        f = bounded_density(lacunary_scalar(dom, cfg["N"], spec), cfg["m"], cfg["M"])
    else:
        raise ConfigError(f"unknown kind {kind!r} (lacunary, vector, noise, density)")
    run.path(cfg["name"] + ".bin"), run.path(cfg["name"] + ".json")
    save_field(run.out / cfg["name"], f)
    mag = f.magnitude()
    return {"shape": list(f.shape), "components": f.components, "min": float(f.data.min()),
            "max": float(f.data.max()), "mean_magnitude": float(mag.mean())}, None


SEMINORM = {"input": "", "source": "constant", "domain": "torus1", "N": 256, "value": 1.0, "alpha": 1 / 3,
            "octaves": 6, "beta": 1 / 3, "p": math.inf, "delta": 0.125, "shifts": "dyadic", "directions": 8,
            "min_value": None, "max_value": None}


def cmd_seminorm(cfg, run):
    if cfg["input"]:
        f, _ = load_field(cfg["input"])
    else:
        f = _scalar_source(cfg, _torus(cfg), cfg["seed"])
    if cfg["shifts"] == "dyadic":
        S = dyadic_shifts(f.lattice, cfg["delta"], directions=cfg["directions"])
    elif cfg["shifts"] == "full":
        S = full_shifts(f.lattice, cfg["delta"])
    else:
        raise ConfigError("shifts must be 'dyadic' or 'full'")
    rep = seminorm(f, cfg["beta"], cfg["p"], S)
    rep.to_csv(run.path("per_shift.csv"))
    ok = None
    if cfg["min_value"] is not None or cfg["max_value"] is not None:
        lo = -math.inf if cfg["min_value"] is None else cfg["min_value"]
        hi = math.inf if cfg["max_value"] is None else cfg["max_value"]
        ok = bool(lo <= rep.value <= hi)
    return rep.summary(), ok


GRAD = {"domain": "torus1", "N": 2048, "source": "lacunary", "alpha": 1 / 3, "octaves": 9, "value": 1.0,
        "p": math.inf, "epsilons": DYADIC, "theory": None, "direction": "", "tol": 0.15}


def _write_fit(fit, run, name="scaling.csv"):
    fit.to_csv(run.path(name))
    return fit.summary()


def cmd_grad_scaling(cfg, run):
    f = _scalar_source(cfg, _torus(cfg), cfg["seed"])
    fit = cm.grad_scaling(f, cfg["p"], cfg["epsilons"])
    auto = {"lacunary": (-1 + cfg["alpha"], "ge"), "noise": (-1.0, "le"), "trig": (0.0, "eq"),
            "constant": (0.0, "ge")}[cfg["source"]]
    theory = auto[0] if cfg["theory"] is None else cfg["theory"]
    direction = cfg["direction"] or auto[1]
    ok = fit.check(theory, cfg["tol"], direction)
    return _write_fit(fit, run), ok


COMMUTATOR = {"domain": "torus1", "N": 2048, "beta1": 2 / 3, "beta2": 1 / 3, "p": 1.5, "p1": math.inf, "p2": 3.0,
              "octaves": 9, "epsilons": DYADIC, "tol": 0.15}


def cmd_commutator(cfg, run):
    dom = _torus(cfg)
    g1 = lacunary_scalar(dom, cfg["N"], RoughSpec(cfg["beta1"], cfg["octaves"], cfg["seed"]))
    g2 = lacunary_scalar(dom, cfg["N"], RoughSpec(cfg["beta2"], cfg["octaves"], cfg["seed"] + 1))
    fit = cm.product_commutator(g1, g2, cfg["p"], cfg["p1"], cfg["p2"], cfg["epsilons"])
    ok = fit.check(cfg["beta1"] + cfg["beta2"], cfg["tol"])
    return _write_fit(fit, run), ok


POWER = {"domain": "torus1", "N": 2**17, "gamma": 3.0, "octaves": 15, "m": 0.5, "M": 2.0,
         "epsilons": list(cm.POWER_EPSILONS),
         "tol": 0.15, "constant": False}


def cmd_power_commutator(cfg, run):
    dom = _torus(cfg)
    if cfg["constant"]:
        rho = Field.constant(dom, cfg["N"], 0.5 * (cfg["m"] + cfg["M"]), positive=True)
    else:
        rho = cm.power_commutator_rho(dom, cfg["N"], cfg["gamma"], cfg["seed"], cfg["octaves"], cfg["m"], cfg["M"])
    fit = cm.power_commutator_scaling(rho, cfg["gamma"], cfg["epsilons"])
    alpha = cm.onsager_alpha(cfg["gamma"])
    ok = fit.check(alpha * min(cfg["gamma"], 2.0), cfg["tol"])
    res = _write_fit(fit, run)
    res["alpha"] = alpha
    return res, ok


TAYLOR = {"gamma": 1.4, "samples": 1_000_000, "a_min": 0.5, "a_max": 2.0, "b_min": -0.5, "b_max": 1.0}


def cmd_taylor_defect(cfg, run):
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["samples"]
    a = rng.uniform(cfg["a_min"], cfg["a_max"], n)
    frac = rng.uniform(cfg["b_min"], cfg["b_max"], n)
    frac = np.where(frac == cfg["b_min"], 0.5 * (cfg["b_min"] + cfg["b_max"]), frac)  # keep the interval open
    b = a * frac
    rep = cm.taylor_defect_check(a, b, cfg["gamma"])
    ok = rep.violations == 0 and math.isfinite(rep.max_ratio)
    out = rep.summary()
    if cfg["gamma"] == 2.0:
        half = bool(np.all(rep.ratios[b != 0] == 0.5))
        out["all_half"] = half
        ok = ok and half
    return out, ok


RUN = {"system": "incompressible", "init": "taylor-green", "N": 128, "dt": 2e-3, "T": 1.0, "gamma": 1.4,
       "nu": 0.0, "rho_amp": 0.0, "amplitude": 0.05, "width": 0.08, "dealias": True, "sample_every": 10,
       "energy_tol": 1e-6, "mass_tol": 1e-10, "div_tol": 1e-7, "save_frames": False}


def _simulate(cfg, run):
    N = cfg["N"]
    inc = cfg["system"] == "incompressible"
    if inc:
        rho, u = {"taylor-green": scenarios.taylor_green, "shear": scenarios.shear}[cfg["init"]](N, cfg["rho_amp"])
    elif cfg["init"] == "pulse":
        rho, u = scenarios.gaussian_pulse(N, cfg["amplitude"], cfg["width"])
    elif cfg["init"] == "acoustic":
        rho, u = scenarios.acoustic_mode(N, cfg["amplitude"])
    else:
        raise ConfigError(f"unknown init {cfg['init']!r} for system {cfg['system']!r}")
    sc = euler.SolverConfig(N=N, dt=cfg["dt"], T=cfg["T"], dealias=cfg["dealias"], nu=cfg["nu"],
                            gamma=None if inc else cfg["gamma"], sample_every=cfg["sample_every"])
    if inc:
        return euler.run_incompressible(rho, u, sc)
    try:
        return euler.run_compressible(rho, u, sc)
    except SmoothnessLostError as exc:
        run.say(f"warning: {exc}; run truncated")
        return exc.partial


def cmd_euler_run(cfg, run):
    if cfg["system"] not in ("incompressible", "compressible"):
        raise ConfigError("system must be incompressible or compressible")
    tr = _simulate(cfg, run)
    tr.to_csv(run.path("diagnostics.csv"))
    if cfg["save_frames"]:
        for i, (t, f) in enumerate(tr.rho):
            save_field(run.out / f"rho_{i:04d}", f, t)
            save_field(run.out / f"u_{i:04d}", tr.u[i], t)
            run.artifacts += [f"rho_{i:04d}.bin", f"u_{i:04d}.bin"]
    res = tr.summary()
    ok = (res["energy_drift_rel"] <= cfg["energy_tol"] and res["mass_drift"] <= cfg["mass_tol"]
          and not tr.truncated)
    if "div_max" in res:
        ok = ok and res["div_max"] <= cfg["div_tol"]
    return res, bool(ok)


BUDGET = dict(RUN, T=0.1, epsilon=1 / 32, epsilons=[1 / 16, 1 / 32, 1 / 64], min_exponent=1.8)


def cmd_budget(cfg, run):
    tr = _simulate(cfg, run)
    K = MollifierKernel(cfg["epsilon"], 2)
    if cfg["system"] == "incompressible":
        b = euler.budget_terms(tr, K)
        b.fits = euler.budget_scaling(tr, cfg["epsilons"])
    else:
        b = euler.compressible_budget(tr, cfg["gamma"], K, cfg["epsilons"])
    for f in b.fits.values():
        f.check(cfg["min_exponent"], 0.0)
    b.to_csv(run.path("budget.csv"))
    res = b.summary()
    ok = all(f.passed for f in b.fits.values())
    return res, bool(ok)


HYP = {"theorem": "1.3", "scenario": "", "N": 128, "gamma": 1.4, "alpha": 1 / 3, "octaves": 5, "frames": 3,
       "deltas": [], "epsilons": []}


def _hyp_traj(cfg):
    from types import SimpleNamespace

    th, sc, N = cfg["theorem"], cfg["scenario"], cfg["N"]
    if not sc:
        sc = "tangential" if th in ("1.4", "1.7") else "smooth"
    times = np.linspace(0.0, 1.0, cfg["frames"])
    if th in ("1.4", "1.7"):
        dom = disk()
        lat = dom.lattice(N)
        rho = Field.constant(dom, lat, 1.0, positive=True)
        P = Field.constant(dom, lat, 1.0)
        phi = lambda x, y: np.hypot(x, y) - 1.0
        vel = {
            "tangential": lambda x, y: (-y, x),
            "normal": lambda x, y: (1.0 + 0 * x, 0 * x),
            "certified": lambda x, y: (-y + np.abs(phi(x, y)) ** 0.967, x),
        }
        if sc not in vel:
            raise ConfigError(f"bounded scenarios: {sorted(vel)}")
        u = Field.from_function(dom, lat, vel[sc])
    else:
        dom = scenarios.unit_torus2()
        if sc == "smooth":
            rho, u = scenarios.taylor_green(N)
            P = scenarios.taylor_green_pressure(N)
        elif sc == "rough":
            rho, u = scenarios.rough_velocity(N, cfg["alpha"], cfg["octaves"], cfg["seed"])
            P = Field.constant(dom, N, 0.0)
        elif sc == "vacuum":
            _, u = scenarios.taylor_green(N)
            rho = Field.from_function(dom, N, lambda x, y: np.sin(np.pi * x) ** 2 + 0 * y)
            P = scenarios.taylor_green_pressure(N)
        else:
            raise ConfigError("torus scenarios: smooth, rough, vacuum")
    ts = lambda f: TimeSeriesField(times, [f] * len(times))
    return SimpleNamespace(rho=ts(rho), u=ts(u), P=ts(P)), dom, u.lattice


def cmd_check_hypotheses(cfg, run):
    traj, dom, lat = _hyp_traj(cfg)
    probes = hypotheses.ProbeGrid.default(dom, lat)
    if cfg["deltas"] or cfg["epsilons"]:
        probes = hypotheses.ProbeGrid(tuple(cfg["deltas"] or probes.deltas), tuple(cfg["epsilons"] or probes.epsilons))
    th = cfg["theorem"]
    if th == "1.3":
        rep = hypotheses.check_torus_incompressible(traj, probes)
    elif th == "1.4":
        rep = hypotheses.check_bounded_incompressible(traj, probes)
    elif th in ("1.5", "1.7"):
        rep = hypotheses.check_compressible(traj, cfg["gamma"], probes, bounded=(th == "1.7"))
    else:
        raise ConfigError("theorem must be one of 1.3, 1.4, 1.5, 1.7")
    rep.to_json(run.path("report.json"))
    run.say(rep.table())
    return rep.to_dict(), None


COAREA = {"N": 256, "r1": 0.05, "r2": 0.3, "shells": 32, "tol": 0.02, "layer_eps": 0.2}


def cmd_coarea_selftest(cfg, run):
    from .geometry import LayerSpec, layer_integral

    dom = disk()
    lat = dom.lattice(cfg["N"])
    tests = {
        "one": lambda x, y: 1.0 + 0 * x,
        "radius": lambda x, y: np.hypot(x, y),
        "poly": lambda x, y: 1.0 + x**2 - 0.5 * x * y,
    }
    rows = {}
    ok = True
    for name, fn in tests.items():
        f = Field.from_function(dom, lat, fn)
        a, s = coarea_check(dom, f, cfg["r1"], cfg["r2"], lat, cfg["shells"])
        rel = abs(a - s) / abs(a)
        rows[name] = {"area": a, "shells": s, "rel_diff": rel}
        ok = ok and rel <= cfg["tol"]
    _, area = layer_integral(dom, Field.constant(dom, lat, 1.0), LayerSpec(cfg["layer_eps"]), 1.0)
    exact = np.pi * (1 - (1 - cfg["layer_eps"]) ** 2)
    layer_rel = abs(area - exact) / exact
    ok = ok and layer_rel <= 0.01
    with open(run.path("coarea.csv"), "w") as fh:
        fh.write("integrand,area,shells,rel_diff\n")
        for k, r in rows.items():
            fh.write(f"{k},{r['area']!r},{r['shells']!r},{r['rel_diff']!r}\n")
    return {"integrands": rows, "layer_area": area, "layer_area_exact": exact, "layer_rel": layer_rel}, bool(ok)


COMMANDS = {
    "gen": (GEN, cmd_gen),
    "seminorm": (SEMINORM, cmd_seminorm),
    "grad-scaling": (GRAD, cmd_grad_scaling),
    "commutator": (COMMUTATOR, cmd_commutator),
    "power-commutator": (POWER, cmd_power_commutator),
    "taylor-defect": (TAYLOR, cmd_taylor_defect),
    "euler-run": (RUN, cmd_euler_run),
    "budget": (BUDGET, cmd_budget),
    "check-hypotheses": (HYP, cmd_check_hypotheses),
    "coarea-selftest": (COAREA, cmd_coarea_selftest),
}


# ------------------------------------------------------------------ schemas

_NUM = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}
_NUM_OR_NULL = {"anyOf": [_NUM, {"type": "null"}]}


def _obj(*required, **props):
    return {"type": "object", "required": list(required), "properties": props}


_FIT = _obj("label", "epsilons", "values", "exponent", "theory_exponent", "pass",
            epsilons={"type": "array", "items": _NUM}, values={"type": "array", "items": _NUM},
            exponent=_NUM_OR_NULL, theory_exponent=_NUM_OR_NULL, exact_zero={"type": "array", "items": {"type": "boolean"}},
            **{"pass": {"type": ["boolean", "null"]}})

RESULT_SCHEMAS = {
    "gen": _obj("shape", "components", "min", "max", shape={"type": "array", "items": {"type": "integer"}},
                components={"type": "integer"}, min=_NUM, max=_NUM),
    "seminorm": _obj("value", "argmax_shift", "beta", "p", "delta", "n_shifts", value=_NUM, p=_NUM,
                     n_shifts={"type": "integer"}),
    "grad-scaling": _FIT,
    "commutator": _FIT,
    "power-commutator": {"allOf": [_FIT, _obj("alpha", alpha=_NUM)]},
    "taylor-defect": _obj("gamma", "max_ratio", "violations", "n", max_ratio=_NUM, violations={"type": "integer"}),
    "euler-run": _obj("kind", "steps", "t_final", "energy_drift_rel", "mass_drift", "truncated",
                      kind={"enum": ["incompressible", "compressible"]}, energy_drift_rel=_NUM, mass_drift=_NUM),
    "budget": _obj("epsilon", "energy_drift_rel", "defects_max", "fits",
                   defects_max={"type": "object", "additionalProperties": _NUM},
                   fits={"type": "object", "additionalProperties": _FIT}),
    "check-hypotheses": _obj("theorem", "conditions", theorem={"enum": ["1.3", "1.4", "1.5", "1.7"]},
                             conditions={"type": "array", "items": _obj(
                                 "name", "values", "verdict",
                                 verdict={"enum": ["satisfied", "violated", "inconclusive"]})}),
    "coarea-selftest": _obj("integrands", "layer_area", "layer_area_exact", "layer_rel", layer_rel=_NUM),
}


def summary_schema(command):
    """JSON schema (draft 2020-12) of ``summary.json`` for ``command``."""
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["schema_version", "command", "config", "input_hash", "results", "pass", "artifacts",
                     "timestamps"],
        "additionalProperties": False,
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "command": {"const": command},
            "config": {"type": "object", "required": ["seed", "threads"]},
            "input_hash": {"type": "string", "pattern": "^[0-9a-f]{40}$"},
            "results": RESULT_SCHEMAS[command],
            "pass": {"type": ["boolean", "null"]},
            "artifacts": {"type": "array", "items": {"type": "string"}},
            "timestamps": _obj("started", "elapsed_s", started={"type": "string"}, elapsed_s={"type": "number"}),
        },
    }


# ------------------------------------------------------------------ driver


def _overrides(extra):
    """Turn ``['--key', 'value', '--k2=v2']`` into a dict."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for --{key}")
            val = extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = parse_value(val)
    return out


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; here 2 is reserved for failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="onsagerlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--quiet", action="store_true")
    return ap


def _input_hash(cfg, args):
    data = canonical(_clean(cfg)).encode()
    if args.config is not None:
        data += Path(args.config).read_bytes()
    src = cfg.get("input")
    if src:
        stem = Path(src)
        for suffix in (".json", ".bin", ".mask.bin"):
            p = stem.with_suffix(suffix) if suffix != ".mask.bin" else Path(str(stem) + ".mask.bin")
            if p.exists():
                data += p.read_bytes()
    return blob_sha1(data)


def main(argv=None):
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    defaults, fn = COMMANDS[args.command]
    defaults = {**COMMON, **defaults}
    try:
        file_cfg = read_config(args.config) if args.config else {}
        cli = _overrides(extra)
        flags = {k: getattr(args, k) for k in ("seed", "threads") if getattr(args, k) is not None}
        cfg = resolve(defaults, file_cfg, cli, flags)
        args.out.mkdir(parents=True, exist_ok=True)
        probe = args.out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except (ConfigError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    run = Run(args.out, args.quiet)
    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    workers = cfg["threads"] if cfg["threads"] > 0 else (os.cpu_count() or 1)
    try:
        with sfft.set_workers(workers):
            results, ok = fn(cfg, run)
    except (ConfigError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except LabError as exc:
        print(f"error [{exc.condition}]: {exc}", file=sys.stderr)
        return 1
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "config": cfg,
        "input_hash": _input_hash(cfg, args),
        "results": results,
        "pass": ok,
        "artifacts": sorted(run.artifacts),
        "timestamps": {"started": started.isoformat(), "elapsed_s": time.perf_counter() - t0},
    }
    (args.out / "summary.json").write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")
    if ok is not None:
        run.say(f"{args.command}: {'pass' if ok else 'FAIL'}")
    return 0 if ok in (None, True) else 2


if __name__ == "__main__":
    sys.exit(main())
