"""Command-line interface: ``simplex-reach {simulate,region,verify,figure1}``.

Exit codes: 0 success, 1 verification violation, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import os
import re
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import reachability as rc
from . import suites
from .errors import (
    DegenerateGeneratorError,
    InvalidInputError,
    MajorisationViolation,
    NumericalFailure,
)
from .generator import (
    EnergySpec,
    build_B0,
    build_lindblad_pair,
    gibbs_vector,
    prob_vector,
    semigroup_step,
)
from .majorisation import (
    build_polytope,
    classical_margin,
    d_majorises_many,
    dominating_vertex,
    permute_region,
    permutohedron_vertices,
)
from .svg import BLUE, HULL, RED, TRAJ, TernaryCanvas

log = logging.getLogger("simplex_reach")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

FIG1_X0 = (0.9, 0.07, 0.03)
DEFAULT_THETA = math.pi / 6
SUITE_DEFAULTS = {
    "thm1": {"n": 3, "grid_spacing": 0.05, "eps": 0.02, "budget": 40, "m": 1},
    "thm2": {"n": 2, "grid_spacing": 0.1, "eps": 0.03, "budget": 40, "m": 2},
}


class ConfigError(Exception):
    pass


# --- configuration -------------------------------------------------------------

def load_schema() -> dict:
    text = resources.files("simplex_reach").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _describe(err: jsonschema.ValidationError, text: str, command: str) -> str:
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - allowed)
        parts = []
        for key in extra:
            line = _line_of(text, key) if text else None
            where = f"line {line}: " if line else ""
            parts.append(f"{where}unknown key {key!r} for command {command!r}")
        return "; ".join(parts)
    keys = [p for p in err.absolute_path if isinstance(p, str)]
    line = _line_of(text, keys[-1]) if (keys and text) else None
    where = f"line {line}: " if line else ""
    path = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}{path}: {err.message}"


def validate_config(cfg: dict, command: str, text: str = "") -> dict:
    schema = load_schema()
    sub = dict(schema["$defs"][command])
    sub["$defs"] = schema["$defs"]
    validator = jsonschema.Draft202012Validator(sub)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("\n".join(_describe(e, text, command) for e in errors))
    return cfg


def read_config(path: str | None) -> tuple[dict, str]:
    if not path:
        return {}, ""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, text


def _parse_theta(text: str):
    vals = [float(v) for v in text.split(",") if v.strip()]
    return vals[0] if len(vals) == 1 else vals


def _parse_temperature(text: str):
    return "inf" if text.strip().lower() in ("inf", "infinity") else float(text)


def merged_config(args, command: str) -> dict:
    cfg, text = read_config(args.config)
    for key in ("n", "seed", "out", "theta", "temperature", "workers", "suite"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "include_timing", False):
        cfg["include_timing"] = True
    return validate_config(cfg, command, text)


def model_from_config(cfg: dict):
    """Return ``(G, pair)``: the generator and the jump operators behind it.

    Precedence: explicit ``theta``, then ``energies``/``temperature``, then a
    constant angle of pi/6 (the qutrit figure instance).
    """
    if "theta" in cfg:
        theta = cfg["theta"]
        n = cfg.get("n") or (len(theta) + 1 if isinstance(theta, list) else 3)
    elif "energies" in cfg:
        energies = cfg["energies"]
        T = cfg.get("temperature", "inf")
        T = math.inf if T == "inf" else float(T)
        n = len(energies)
        if "n" in cfg and cfg["n"] != n:
            raise ConfigError(f"n = {cfg['n']} but {n} energies given")
        if T == 0:
            # T -> 0+ limit of the detailed-balance angles
            gaps = np.diff(energies)
            theta = np.where(gaps > 0, 0.0, np.where(gaps < 0, np.pi / 2, np.pi / 4))
        else:
            d = gibbs_vector(EnergySpec(tuple(energies), T))
            theta = np.arctan2(np.sqrt(d[1:]), np.sqrt(d[:-1]))
    else:
        n = cfg.get("n", 3)
        theta = DEFAULT_THETA
    pair = build_lindblad_pair(n, theta)
    return build_B0(pair), pair


def x0_from_config(cfg: dict, n: int) -> np.ndarray:
    if "x0" in cfg:
        x0 = prob_vector(cfg["x0"])
        if x0.size != n:
            raise ConfigError(f"x0 has {x0.size} entries, expected {n}")
        return x0
    if n == 3:
        return prob_vector(FIG1_X0)
    w = 0.5 ** np.arange(n)
    return prob_vector(w / w.sum())


# --- output helpers ------------------------------------------------------------

def _g17(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(path: Path, rows, n: int, with_run: bool = False) -> None:
    header = (["run"] if with_run else []) + ["t"] + [f"x_{k + 1}" for k in range(n)]
    lines = [",".join(header)]
    for row in rows:
        run, t, x = row
        cells = ([str(run)] if with_run else []) + [_g17(t)] + [_g17(v) for v in x]
        lines.append(",".join(cells))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _flow_samples(G, x0, times):
    return [(float(t), semigroup_step(G, float(t), x0)) for t in times]


def _time_grid(cfg, G, default_t_max: float = 4.0, default_n: int = 101):
    if "t_grid" in cfg:
        return [float(t) for t in cfg["t_grid"]]
    t_max = cfg.get("t_max", default_t_max)
    return np.linspace(0.0, t_max, cfg.get("n_times", default_n)).tolist()


def distinct_permutations(x) -> list[np.ndarray]:
    return list(permutohedron_vertices(x))


# --- commands --------------------------------------------------------------------

def cmd_simulate(cfg: dict) -> int:
    G, _ = model_from_config(cfg)
    x0 = x0_from_config(cfg, G.n)
    out = Path(cfg.get("out", "trajectory.csv"))
    starts = distinct_permutations(x0) if cfg.get("all_permutations") else [x0]
    trajectories = []
    for start in starts:
        if "controls" in cfg:
            c = rc.ControlSequence(tuple((s["perm"], s["tau"]) for s in cfg["controls"]))
            traj = rc.simulate(start, G, c, cfg.get("samples_per_dwell", 4))
            trajectories.append(list(zip(traj.times.tolist(), traj.states)))
        else:
            trajectories.append(_flow_samples(G, start, _time_grid(cfg, G)))
    multi = len(trajectories) > 1
    rows = [(k, t, x) for k, tr in enumerate(trajectories) for t, x in tr]
    write_csv(out, rows, G.n, with_run=multi)
    log.info("wrote %s (%d rows)", out, len(rows))
    if "svg" in cfg:
        if G.n != 3:
            raise ConfigError("SVG output needs n = 3")
        canvas = TernaryCanvas("relaxation toward the fixed point")
        canvas.frame()
        for tr in trajectories:
            canvas.polyline("trajectories", [x for _, x in tr])
            canvas.marker("trajectories", tr[0][1], TRAJ, 3)
        canvas.marker("fixed_point", G.fixed_point, RED, 5)
        canvas.add_legend("trajectories", TRAJ)
        canvas.add_legend("fixed point d", RED)
        Path(cfg["svg"]).write_text(canvas.render())
    return EXIT_OK


def region_data(G, x0, cap: int = 5) -> dict:
    d = np.array(G.fixed_point)
    if np.any(d <= 0):
        raise ConfigError("the region needs a strictly positive fixed point (T > 0)")
    P = build_polytope(d, x0, cap=cap)
    P_sorted = build_polytope(d, rc.align_to_chamber(x0, d), cap=cap)
    z = dominating_vertex(P_sorted)
    permuted = []
    for perm in itertools.permutations(range(G.n)):
        Q = permute_region(P, perm)
        permuted.append({"perm": list(perm), "polytope": Q.to_json_dict()})
    return {
        "d": d.tolist(),
        "x0": np.asarray(x0).tolist(),
        "polytope": P.to_json_dict(),
        "permuted": permuted,
        "z": z.tolist(),
        "hull_vertices": permutohedron_vertices(z).tolist(),
    }


def _field_points(divisions: int) -> np.ndarray:
    pts = rc.simplex_grid(3, divisions)
    return pts[np.all(pts > 0, axis=1)]


def draw_region(canvas: TernaryCanvas, G, data: dict, resolution: int,
                field_divisions: int) -> None:
    d = np.array(data["d"])
    x0 = np.array(data["x0"])
    for item in data["permuted"][1:]:
        pd = np.array(item["polytope"]["d"])
        py = np.array(item["polytope"]["y"])
        canvas.raster("blue_regions", lambda X, pd=pd, py=py: d_majorises_many(pd, py, X, 1e-12),
                      resolution, BLUE, 0.35)
        canvas.polygon("blue_regions", item["polytope"]["vertices"], BLUE)
    canvas.raster("red_region", lambda X: d_majorises_many(d, x0, X, 1e-12),
                  resolution, RED, 0.5)
    canvas.polygon("red_region", data["polytope"]["vertices"], RED, width=2)
    canvas.polygon("hull", data["hull_vertices"], HULL, width=2, dash="6,4")
    for v in data["hull_vertices"]:
        canvas.marker("hull", v, HULL, 4)
    pts = _field_points(field_divisions)
    canvas.arrows("field", pts, np.array([rc.vector_field(G, p) for p in pts]))
    canvas.marker("fixed_point", d, "black", 4)
    canvas.add_legend("states d-majorised by x0", RED)
    canvas.add_legend("permuted images", BLUE)
    canvas.add_legend("hull of permutations of z", HULL)
    canvas.add_legend("vector field", "#7f7f7f")


def cmd_region(cfg: dict) -> int:
    G, _ = model_from_config(cfg)
    x0 = x0_from_config(cfg, G.n)
    data = region_data(G, x0, cfg.get("cap", 5))
    out = Path(cfg.get("out", "region.json"))
    write_json(out, data)
    if "svg" in cfg:
        if G.n != 3:
            raise ConfigError("SVG output needs n = 3")
        canvas = TernaryCanvas("d-majorisation region")
        canvas.frame()
        draw_region(canvas, G, data, cfg.get("resolution", 400), cfg.get("field_divisions", 12))
        Path(cfg["svg"]).write_text(canvas.render())
    return EXIT_OK


def run_suite(cfg: dict) -> rc.Report:
    suite = cfg.get("suite")
    if suite is None:
        raise ConfigError("no suite given")
    seed = cfg.get("seed", 0)
    workers = cfg.get("workers", 1)
    tol = cfg.get("tolerance", 1e-10)
    if suite in SUITE_DEFAULTS:
        p = dict(SUITE_DEFAULTS[suite])
        p.update({k: cfg[k] for k in ("n", "grid_spacing", "eps", "budget", "m") if k in cfg})
        x0 = cfg.get("x0")
        return rc.check_thm1_coverage(p["n"], p["grid_spacing"], p["eps"], p["budget"],
                                      m=p["m"], x0=x0, workers=workers)
    if suite == "oracle":
        ns = [cfg["n"]] if "n" in cfg else [2, 3, 4]
        return suites.run_oracle(ns, cfg.get("samples", 1000), seed, workers)
    G, pair = model_from_config(cfg)
    if suite == "quantum":
        return suites.run_quantum(G, pair.operators, seed, tol,
                                  tuple(cfg.get("times", suites.QUANTUM_TIMES)))
    x0 = x0_from_config(cfg, G.n)
    spd = cfg.get("samples_per_dwell", 2)
    if suite == "thm4":
        return rc.check_thm4(G.fixed_point, cfg.get("samples", 1000), cfg.get("budget", 30),
                             seed, samples_per_dwell=spd, workers=workers, tol=tol)
    if suite in ("thm5", "thm6"):
        membership = "hull-lp" if suite == "thm5" else "partial-sums"
        return rc.check_thm5_6(G.fixed_point, x0, cfg.get("samples", 100),
                               cfg.get("budget", 30), seed, samples_per_dwell=spd,
                               workers=workers, membership=membership, tol=tol)
    if suite == "facts":
        return suites.run_facts(G.fixed_point, x0, cfg.get("samples", 200), seed, tol, workers)
    raise ConfigError(f"unknown suite {suite!r}")


def cmd_verify(cfg: dict) -> int:
    report = run_suite(cfg)
    out = Path(cfg.get("out", f"report_{cfg['suite']}.json"))
    write_json(out, report.to_json_dict(cfg.get("include_timing", False)))
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {report.name}: {report.samples} samples, "
          f"{report.violation_count} violations -> {out}")
    return EXIT_OK if report.passed else EXIT_VIOLATION


def cmd_figure1(cfg: dict) -> int:
    G, _ = model_from_config(cfg)
    if G.n != 3:
        raise ConfigError("figure1 needs n = 3")
    x0 = x0_from_config(cfg, 3)
    outdir = Path(cfg.get("out", "figure1"))
    outdir.mkdir(parents=True, exist_ok=True)
    times = np.linspace(0.0, cfg.get("t_max", 4.0), cfg.get("n_times", 101)).tolist()
    resolution = cfg.get("resolution", 400)
    field_divisions = cfg.get("field_divisions", 12)
    d = np.array(G.fixed_point)

    from_x0 = [_flow_samples(G, s, times) for s in distinct_permutations(x0)]
    from_d = [_flow_samples(G, s, times) for s in distinct_permutations(d)]
    write_csv(outdir / "panel_a.csv",
              [(k, t, x) for k, tr in enumerate(from_x0) for t, x in tr], 3, True)
    write_csv(outdir / "panel_b.csv",
              [(k, t, x) for k, tr in enumerate(from_x0 + from_d) for t, x in tr], 3, True)

    for name, trs, title in (("panel_a", from_x0, "(a) relaxation of permuted x0"),
                             ("panel_b", from_x0 + from_d, "(b) including permutations of d")):
        canvas = TernaryCanvas(title)
        canvas.frame()
        for k, tr in enumerate(trs):
            color = TRAJ if k < len(from_x0) else BLUE
            canvas.polyline("trajectories", [x for _, x in tr], color)
            canvas.marker("trajectories", tr[0][1], color, 3)
        canvas.marker("fixed_point", d, RED, 5)
        canvas.add_legend("from permutations of x0", TRAJ)
        if name == "panel_b":
            canvas.add_legend("from permutations of d", BLUE)
        canvas.add_legend("fixed point d", RED)
        (outdir / f"{name}.svg").write_text(canvas.render())

    data = region_data(G, x0)
    write_json(outdir / "region.json", data)
    canvas = TernaryCanvas("(c) d-majorised region, permutations and hull")
    canvas.frame()
    draw_region(canvas, G, data, resolution, field_divisions)
    for tr in from_x0 + from_d:
        canvas.polyline("trajectories", [x for _, x in tr], TRAJ, 0.8)
    (outdir / "panel_c.svg").write_text(canvas.render())

    z = np.array(data["z"])
    margins = [classical_margin(z, x) for tr in from_x0 + from_d for _, x in tr]
    outside = int(sum(m > 1e-10 for m in margins))
    summary = {"d": d.tolist(), "x0": x0.tolist(), "z": z.tolist(),
               "trajectory_points": len(margins), "outside_hull": outside,
               "max_margin": max(margins)}
    write_json(outdir / "figure1.json", summary)
    print(f"{'PASS' if outside == 0 else 'FAIL'} figure1: "
          f"{len(margins)} trajectory points, {outside} outside the hull -> {outdir}")
    return EXIT_OK if outside == 0 else EXIT_VIOLATION


COMMANDS = {"simulate": cmd_simulate, "region": cmd_region,
            "verify": cmd_verify, "figure1": cmd_figure1}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simplex-reach", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "verify":
            p.add_argument("suite", nargs="?", default=None,
                           help="thm1|thm2|thm4|thm5|thm6|facts|quantum|oracle")
            p.add_argument("--workers", type=int, default=None)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--temperature", type=_parse_temperature, default=None)
        p.add_argument("--theta", type=_parse_theta, default=None,
                       help="one angle or a comma-separated list (radians)")
        p.add_argument("--include-timing", action="store_true",
                       help="record runtime_ms in reports (breaks byte-identical output)")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("SIMPLEX_REACH_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = merged_config(args, args.command)
        return COMMANDS[args.command](cfg)
    except (ConfigError, InvalidInputError, DegenerateGeneratorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MajorisationViolation as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
