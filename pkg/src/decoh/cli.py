"""Command-line front end: ``decoh <subcommand> [options]``.

Configuration is a flat ``section.key = value`` text file; ``--set`` and the
dedicated flags override it. Every run writes a CSV plus a JSON manifest to
the output directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from . import evolution as evo
from .core import ConvergenceError, EpsilonMode, UnitSystem, ValidationError, make_bath, set_thread_count
from .rate import (
    QuadratureSpec,
    per_collision_decoherence,
    rate_general_curve,
    rate_via_replacement_curve,
)
from .scattering import BornPotential, ConstantSWave, GaussianPotential, HardSphere, YukawaPotential
from .selfcheck import run_checks
from .thermal import split_bath
from .wavepacket_mc import McConfig, mc_rate
from .weak_coupling import GbarSpec, born_strength_check, gbar_closed, gbar_integral, rate_weak_coupling_curve

SUBCOMMANDS = ("rate-curve", "compare-routes", "eta", "gbar", "mc-verify", "evolve", "selfcheck")

EXIT_CONFIG = 1
EXIT_CONVERGENCE = 2
EXIT_SELFCHECK = 3


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text):
    return None if text.strip().lower() in ("", "auto", "none") else int(text)


def _optional_float(text):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


# key -> (parser, default)
SCHEMA = {
    "bath.mass": (float, 1.0),
    "bath.temperature": (float, 1.0),
    "bath.density": (float, 1e-3),
    "units.hbar": (float, 1.0),
    "units.boltzmann": (float, 1.0),
    "model.kind": (str, "constant_swave"),
    "model.f0": (float, 0.1),
    "model.radius": (float, 1.0),
    "model.l_max": (_optional_int, None),
    "model.v0": (float, 0.02),
    "model.width": (float, 0.35),
    "model.strength": (float, 0.01),
    "model.screening": (float, 2.0),
    "epsilon": (str, "corrected"),
    "route": (str, "general"),
    "grid.min": (float, 0.1),
    "grid.max": (float, 10.0),
    "grid.count": (int, 8),
    "grid.spacing": (str, "log"),
    "grid.axis": (_floats, [0.0, 0.0, 1.0]),
    "quad.radial_nodes": (int, 32),
    "quad.radial_qmax_thermal_units": (float, 8.0),
    "quad.angular_theta_nodes": (int, 24),
    "quad.angular_phi_nodes": (int, 8),
    "quad.refine_tol": (float, 1e-9),
    "quad.max_refinements": (int, 4),
    "mc.seed": (int, 0),
    "mc.samples": (int, 20_000),
    "mc.delta_t": (_optional_float, None),
    "mc.transverse_window": (_optional_float, None),
    "mc.bar_fraction": (float, McConfig().bar_fraction),
    "mc.nodes": (int, 6),
    "eta.momentum": (float, 1.0),
    "gbar.q": (_floats, [0.25, 0.5, 1.0, 2.0, 4.0]),
    "gbar.omega": (_floats, [-2.0, -1.0, 0.0, 1.0, 2.0]),
    "evolve.points": (int, 64),
    "evolve.extent": (float, 12.0),
    "evolve.separation": (float, 6.0),
    "evolve.width": (float, 0.7),
    "evolve.times": (_floats, [0.0, 1e3, 1e4, 1e5]),
    "selfcheck.extended": (_bool, False),
}


class ConfigError(ValidationError):
    def __init__(self, message, line=None, source=None):
        where = f"{source}:{line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.source = source


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=lambda: {k: v for k, (_, v) in SCHEMA.items()})
    out_dir: str = "."
    threads: int | None = None

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key, text, line=None, source=None):
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line, source)
        parser = SCHEMA[key][0]
        try:
            self.values[key] = parser(text.strip())
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", line, source) from None

    def echo(self):
        return {k: self.values[k] for k in sorted(self.values)}


def parse_config_text(config, text, source="<config>"):
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", number, source)
        key, value = line.split("=", 1)
        config.set(key, value, number, source)
    return config


# -- builders ----------------------------------------------------------------

def build_bath(cfg):
    units = UnitSystem(cfg["units.hbar"], cfg["units.boltzmann"])
    return make_bath(cfg["bath.mass"], cfg["bath.temperature"], cfg["bath.density"], units)


def build_potential(cfg):
    kind = cfg["model.kind"]
    if kind == "born_gaussian":
        return GaussianPotential(cfg["model.v0"], cfg["model.width"])
    if kind == "born_yukawa":
        return YukawaPotential(cfg["model.strength"], cfg["model.screening"])
    return None


def build_model(cfg, bath):
    kind = cfg["model.kind"]
    hb = bath.hbar
    if kind == "constant_swave":
        return ConstantSWave(cfg["model.f0"], hb)
    if kind == "hard_sphere":
        return HardSphere(cfg["model.radius"], cfg["model.l_max"], hb)
    pot = build_potential(cfg)
    if pot is None:
        raise ConfigError(f"unknown model.kind {kind!r}")
    born_strength_check(pot, bath.mass, hb)
    return BornPotential(pot, bath.mass, hb)


def build_quad(cfg):
    return QuadratureSpec(
        radial_nodes=cfg["quad.radial_nodes"],
        radial_qmax_thermal_units=cfg["quad.radial_qmax_thermal_units"],
        angular_theta_nodes=cfg["quad.angular_theta_nodes"],
        angular_phi_nodes=cfg["quad.angular_phi_nodes"],
        refine_tol=cfg["quad.refine_tol"],
        max_refinements=cfg["quad.max_refinements"],
    )


def build_separations(cfg, bath):
    """Grid bounds are in units of hbar / q_th."""
    lo, hi, n = cfg["grid.min"], cfg["grid.max"], cfg["grid.count"]
    if n < 1 or not (0 < lo <= hi):
        raise ConfigError("grid needs count >= 1 and 0 < min <= max")
    axis = np.asarray(cfg["grid.axis"], float)
    if axis.shape != (3,) or not np.linalg.norm(axis) > 0:
        raise ConfigError("grid.axis must be three components, not all zero")
    axis = axis / np.linalg.norm(axis)
    spacing = cfg["grid.spacing"]
    if spacing == "log":
        radii = np.geomspace(lo, hi, n)
    elif spacing == "linear":
        radii = np.linspace(lo, hi, n)
    else:
        raise ConfigError("grid.spacing must be log or linear")
    scale = bath.hbar / bath.thermal_momentum
    return [r * scale * axis for r in radii]


# -- output ------------------------------------------------------------------

def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def curve_rows(curve, epsilon_label=None):
    eps = epsilon_label or curve.epsilon.value.replace("_", "-")
    stderr = curve.stderr if curve.stderr is not None else [0.0] * len(curve.values)
    return [(float(r), float(v), float(e), curve.route.value, eps) for r, v, e in zip(curve.radii, curve.values, stderr)]


F_HEADER = ["R", "F", "stderr", "route", "epsilon"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(path, cfg, started, outputs, diagnostics, notes):
    manifest = {
        "command": cfg.command,
        "version": _version(),
        "seed": cfg["mc.seed"],
        "config": cfg.echo(),
        "wall_time_s": time.perf_counter() - started,
        "outputs": outputs,
        "diagnostics": diagnostics,
        "warnings": notes,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- subcommands -------------------------------------------------------------

def cmd_rate_curve(cfg, bath, out):
    model = build_model(cfg, bath)
    seps = build_separations(cfg, bath)
    quad = build_quad(cfg)
    route = cfg["route"]
    eps = EpsilonMode.parse(cfg["epsilon"])
    if route == "general":
        curve = rate_general_curve(bath, model, seps, quad, eps)
    elif route == "replacement":
        curve = rate_via_replacement_curve(bath, model, seps, quad)
    elif route == "weak":
        pot = build_potential(cfg)
        if pot is None:
            raise ConfigError("route=weak needs a born_gaussian or born_yukawa model")
        curve = rate_weak_coupling_curve(bath, pot, seps, quad)
    else:
        raise ConfigError("route must be general, replacement or weak")
    if route != "general" and eps is not EpsilonMode.CORRECTED:
        raise ConfigError("only the general route supports epsilon = gallis-fleming")
    path = os.path.join(out, "rate_curve.csv")
    write_csv(path, F_HEADER, curve_rows(curve))
    return [path], {"route": curve.metadata}, f"wrote {len(seps)} points to {path}"


def cmd_compare_routes(cfg, bath, out):
    model = build_model(cfg, bath)
    seps = build_separations(cfg, bath)
    quad = build_quad(cfg)
    eps = EpsilonMode.parse(cfg["epsilon"])
    general = rate_general_curve(bath, model, seps, quad)
    other = EpsilonMode.GALLIS_FLEMING if eps is EpsilonMode.CORRECTED else EpsilonMode.CORRECTED
    general_eps = rate_general_curve(bath, model, seps, quad, eps) if eps is not EpsilonMode.CORRECTED else general
    general_other = rate_general_curve(bath, model, seps, quad, other)
    repl = rate_via_replacement_curve(bath, model, seps, quad)
    rows = curve_rows(general_eps) + curve_rows(general_other) + curve_rows(repl)
    base = general.values
    summary = {"max_rel_diff_replacement": _max_rel(repl.values, base)}
    pot = build_potential(cfg)
    if pot is not None:
        weak = rate_weak_coupling_curve(bath, pot, seps, quad)
        rows += curve_rows(weak)
        summary["max_rel_diff_weak_coupling"] = _max_rel(weak.values, base)
    gf = general_eps if eps is EpsilonMode.GALLIS_FLEMING else general_other
    ratio = gf.values / base
    summary["epsilon_ratio_min"] = float(np.min(ratio))
    summary["epsilon_ratio_max"] = float(np.max(ratio))
    path = os.path.join(out, "compare_routes.csv")
    write_csv(path, F_HEADER, rows)
    lines = [f"{k}: {v:.6g}" for k, v in summary.items()]
    return [path], {"summary": summary}, "\n".join(lines)


def _max_rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny)))


def cmd_eta(cfg, bath, out):
    model = build_model(cfg, bath)
    seps = build_separations(cfg, bath)
    p = cfg["eta.momentum"] * bath.thermal_momentum * np.array([0.0, 0.0, 1.0])
    rows = []
    for R in seps:
        eta = per_collision_decoherence(model, p, R)
        rows.append((float(np.linalg.norm(R)), float(eta.real), float(eta.imag), float(abs(eta))))
    path = os.path.join(out, "eta.csv")
    write_csv(path, ["R", "eta_re", "eta_im", "eta_abs"], rows)
    return [path], {"momentum": float(np.linalg.norm(p))}, f"wrote {len(rows)} rows to {path}"


def cmd_gbar(cfg, bath, out):
    pot = build_potential(cfg)
    if pot is None:
        raise ConfigError("gbar needs model.kind born_gaussian or born_yukawa")
    spec = GbarSpec(bath, pot)
    rows = []
    worst = 0.0
    for q in np.asarray(cfg["gbar.q"]) * bath.thermal_momentum:
        for w in np.asarray(cfg["gbar.omega"]) * bath.kt / bath.hbar:
            c = float(gbar_closed(spec, q, w))
            i = gbar_integral(spec, q, w)
            rel = abs(c - i) / abs(c) if c != 0 else abs(i)
            worst = max(worst, rel)
            rows.append((float(q), float(w), c, i, rel))
    path = os.path.join(out, "gbar.csv")
    write_csv(path, ["q", "omega", "closed", "integral", "rel_diff"], rows)
    return [path], {"max_rel_diff": worst}, f"max relative difference {worst:.3g}"


def cmd_mc_verify(cfg, bath, out):
    model = build_model(cfg, bath)
    seps = build_separations(cfg, bath)
    quad = build_quad(cfg)
    mc = McConfig(
        seed=cfg["mc.seed"],
        samples=cfg["mc.samples"],
        delta_t=cfg["mc.delta_t"],
        transverse_window=cfg["mc.transverse_window"],
        bar_fraction=cfg["mc.bar_fraction"],
        nodes=cfg["mc.nodes"],
    )
    split = split_bath(bath, mc.bar_fraction)
    ref = rate_general_curve(bath, model, seps, quad)
    rows, z, diags, notes = [], [], [], []
    for R, f_ref in zip(seps, ref.values):
        est = mc_rate(bath, split, model, 0.5 * R, -0.5 * R, mc)
        r = float(np.linalg.norm(R))
        rows.append((r, float(f_ref), 0.0, "General", "corrected"))
        rows.append((r, est.value, est.stderr, "MonteCarlo", "corrected"))
        z.append((est.value - f_ref) / est.stderr if est.stderr > 0 else 0.0)
        diags.append(est.diagnostics)
        notes.extend(est.warnings)
    path = os.path.join(out, "mc_verify.csv")
    write_csv(path, F_HEADER, rows)
    msg = "z-scores: " + ", ".join(f"{v:+.2f}" for v in z)
    return [path], {"z_scores": z, "mc": diags, "mc_warnings": notes}, msg


def cmd_evolve(cfg, bath, out):
    model = build_model(cfg, bath)
    quad = build_quad(cfg)
    n = cfg["evolve.points"]
    if n < 2:
        raise ConfigError("evolve.points must be >= 2")
    axis = np.asarray(cfg["grid.axis"], float)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * cfg["evolve.extent"]
    x = np.linspace(-half, half, n)
    grid = evo.two_packet_superposition(axis, x, cfg["evolve.separation"], cfg["evolve.width"])
    curve = rate_general_curve(bath, model, [k * grid.spacing * axis for k in range(n)], quad)
    rate = evo.tabulated_rate(curve)
    rows, lengths = [], []
    for t in cfg["evolve.times"]:
        snap = evo.evolve(grid, rate, t)
        cl = evo.coherence_length(snap)
        lengths.append({"time": t, "length": cl.length, "reached": cl.reached})
        for i in range(n):
            for j in range(n):
                v = snap.values[i, j]
                rows.append((float(t), float(x[i]), float(x[j]), float(v.real), float(v.imag)))
    path = os.path.join(out, "evolve.csv")
    write_csv(path, ["t", "R1", "R2", "rho_re", "rho_im"], rows)
    return [path], {"coherence_lengths": lengths}, f"wrote {len(cfg['evolve.times'])} snapshots to {path}"


def cmd_selfcheck(cfg, bath, out):
    results = run_checks(extended=cfg["selfcheck.extended"])
    path = os.path.join(out, "selfcheck.csv")
    write_csv(
        path,
        ["check", "value", "tolerance", "passed", "seconds"],
        [(r.name, r.value, r.tolerance, str(r.passed).lower(), r.seconds) for r in results],
    )
    table = "\n".join(r.row() for r in results)
    failed = [r.name for r in results if not r.passed]
    return [path], {"failed": failed, "count": len(results)}, table


COMMANDS = {
    "rate-curve": cmd_rate_curve,
    "compare-routes": cmd_compare_routes,
    "eta": cmd_eta,
    "gbar": cmd_gbar,
    "mc-verify": cmd_mc_verify,
    "evolve": cmd_evolve,
    "selfcheck": cmd_selfcheck,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="decoh", description="Collisional decoherence rates and checks.")
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
    parser.add_argument("--threads", type=int, help="worker threads (default DECOH_THREADS or 1)")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed (unsigned 64-bit)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--epsilon", choices=["corrected", "gallis-fleming"])
    parser.add_argument("--extended", action="store_true", help="selfcheck: run the slow tier too")
    return parser


def load_config(args):
    cfg = RunConfig(args.command, out_dir=args.out, threads=args.threads)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        parse_config_text(cfg, text, args.config)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key, value, source="--set")
    if args.seed is not None:
        cfg.set("mc.seed", str(args.seed))
    if args.epsilon is not None:
        cfg.set("epsilon", args.epsilon)
    if args.extended:
        cfg.values["selfcheck.extended"] = True
    return cfg


def _error(kind, exc, code):
    payload = {"error": kind, "message": str(exc), "exit_code": code}
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    notes = []
    try:
        cfg = load_config(args)
        set_thread_count(cfg.threads)
        os.makedirs(cfg.out_dir, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            bath = build_bath(cfg)
            outputs, diagnostics, message = COMMANDS[cfg.command](cfg, bath, cfg.out_dir)
        notes = [str(w.message) for w in caught]
    except ConvergenceError as exc:
        return _error("convergence", exc, EXIT_CONVERGENCE)
    except (ValidationError, ValueError) as exc:
        return _error("config", exc, EXIT_CONFIG)
    finally:
        set_thread_count(None)
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    manifest = os.path.join(cfg.out_dir, cfg.command.replace("-", "_") + ".json")
    write_manifest(manifest, cfg, started, outputs, diagnostics, notes)
    print(message)
    if cfg.command == "selfcheck" and diagnostics["failed"]:
        return _error("selfcheck", RuntimeError("failed: " + ", ".join(diagnostics["failed"])), EXIT_SELFCHECK)
    return 0


if __name__ == "__main__":
    sys.exit(main())
