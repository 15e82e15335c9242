"""Command-line driver.

Subcommands::

    rieszlab gen      [CONFIG] [key=value ...] [--out FILE]   write a measure CSV
    rieszlab run      [CONFIG] [key=value ...] [--flags]      run stages, write a report
    rieszlab validate [CONFIG] [key=value ...] [--flags]      dry run, print diagnostics
    rieszlab report   --input DIR                             summarise report.json, redraw figures

A configuration is a flat ``key = value`` text file, ``key=value`` words on
the command line, and flags, in increasing order of precedence.

Exit codes: 0 success, 2 invalid configuration, 3 scale-window violation,
4 internal invariant failure.
"""

import argparse
import csv
import json
import math
import os
import sys

from . import _svg
from .baup import baup_test, eligible_cells, rarefy
from .carleson import alternating_layers, carleson_constant, non_carleson_layers
from .exceptions import ConstructionInvariantError, RieszLabError, ScaleWindowError
from .flatness import FlatnessQuery, analytic_defect, best_plane, flat_predicate
from .lattice import build_lattice, scale_of, small_boundary_profile
from .measure import (
    ad_regularity, gen_cantor, gen_hyperplane, gen_lipschitz_graph, load_csv, save_csv,
)
from .riesz.kernels import Hyperplane, KernelSpec
from .riesz.operators import Tree, op_norm

EXIT_OK, EXIT_CONFIG, EXIT_WINDOW, EXIT_INTERNAL = 0, 2, 3, 4

STAGES = ("lattice", "flatness", "baup", "carleson", "layers", "riesz")
NEEDS = {"lattice": (), "flatness": ("lattice",), "baup": ("lattice",),
         "carleson": ("baup",), "layers": ("carleson",), "riesz": ()}
REPORT_KEYS = ("meta", "measure", "lattice", "riesz", "flatness", "baup", "carleson", "layers")

# key -> (parser, default)
KEYS = {
    "gen": (str, None), "input": (str, None), "out": (str, "rieszlab_out"),
    "d": (int, 1), "h": (float, 0.005), "extent": (float, 1.0), "amp": (float, 0.1),
    "freq": (float, 1.0), "depth": (int, 4), "mesh": (float, None),
    "stages": (str, "lattice"), "seed": (int, 0), "threads": (int, None),
    "delta": (float, 0.1), "outer_delta": (float, None), "a": (float, 6.0), "alpha": (float, 0.1),
    "eps": (float, 1.0 / 64.0), "kmin": (int, None), "kmax": (int, None),
    "tree_theta": (float, None), "tree_order": (str, "dipole"),
    "analytic": (int, 0), "max_cells": (int, 64), "interior": (int, 0),
    "m": (int, 3), "eta": (float, 0.5), "k": (int, 1), "n": (int, 1), "s": (int, 2),
    "riesz_factors": (str, "4,8,16,32"),
}
# keys that do not change results and stay out of report.json
NON_SEMANTIC = ("out", "threads")
GENERATORS = ("plane", "lipschitz", "cantor")


class ConfigError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _norm_key(key):
    return key.strip().lower().replace("-", "_")


def read_config_file(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[_norm_key(k)] = v.strip()
    return out


def _parse_value(key, raw):
    if key not in KEYS:
        raise ConfigError(f"unknown configuration key: {key}")
    parser, _ = KEYS[key]
    if raw is None:
        return None
    try:
        return parser(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {parser.__name__}") from None


def build_config(words, flags):
    """Merge config files, ``key=value`` words and flags (later wins)."""
    raw = {}
    for w in words:
        if "=" in w:
            k, v = w.split("=", 1)
            raw[_norm_key(k)] = v
        else:
            raw.update(read_config_file(w))
    for k, v in flags.items():
        if v is not None:
            raw[k] = v
    cfg = {k: default for k, (_, default) in KEYS.items()}
    for k, v in raw.items():
        cfg[_norm_key(k)] = _parse_value(_norm_key(k), v if isinstance(v, str) else str(v))
    cfg["stages"] = [s.strip() for s in cfg["stages"].split(",") if s.strip()]
    return cfg


def stage_diagnostics(stages):
    out = []
    seen = set()
    for s in stages:
        if s not in STAGES:
            out.append(f"unknown stage {s!r}; choose from {', '.join(STAGES)}")
            continue
        for need in NEEDS[s]:
            if need not in seen:
                out.append(f"stage {s!r} needs {need!r} earlier in the stage list")
        seen.add(s)
    return out


def parameter_diagnostics(cfg):
    out = []
    if not cfg["a"] > 5:
        out.append(f"A={cfg['a']}: the flatness window factor must satisfy A > 5")
    if not 0 < cfg["eps"] <= 1.0 / 48.0:
        out.append(f"eps={cfg['eps']}: the cell cutoff requires eps < 1/48 (the endpoint 1/48 is accepted)")
    if not cfg["alpha"] > 0:
        out.append(f"alpha={cfg['alpha']}: must be positive")
    if not 0 < cfg["delta"] < 1:
        out.append(f"delta={cfg['delta']}: must lie in (0, 1)")
    if cfg["outer_delta"] is not None and not cfg["delta"] < cfg["outer_delta"] < 0.5:
        out.append(f"outer_delta={cfg['outer_delta']}: annulus needs delta < outer_delta < 1/2")
    if cfg["m"] < 1:
        out.append("M must be at least 1")
    if not 0 < cfg["eta"] < 1:
        out.append(f"eta={cfg['eta']}: must lie in (0, 1)")
    if cfg["k"] < 0 or cfg["n"] < 1 or cfg["s"] < 1:
        out.append("layer parameters need K >= 0, N >= 1, S >= 1")
    if cfg["threads"] is not None and cfg["threads"] < 1:
        out.append("threads must be at least 1")
    if cfg["tree_theta"] is not None and not 0 < cfg["tree_theta"] < 1:
        out.append(f"tree_theta={cfg['tree_theta']}: must lie in (0, 1)")
    if cfg["tree_order"] not in ("monopole", "dipole"):
        out.append(f"tree_order={cfg['tree_order']!r}: choose monopole or dipole")
    if cfg["gen"] is None and cfg["input"] is None:
        out.append("no input: give gen=plane|lipschitz|cantor or input=FILE.csv")
    if cfg["gen"] is not None and cfg["gen"] not in GENERATORS:
        out.append(f"gen={cfg['gen']!r}: choose from {', '.join(GENERATORS)}")
    if cfg["input"] is not None and cfg["gen"] is None and not os.path.isfile(cfg["input"]):
        out.append(f"input file not found: {cfg['input']}")
    try:
        [float(x) for x in cfg["riesz_factors"].split(",")]
    except ValueError:
        out.append(f"riesz_factors={cfg['riesz_factors']!r}: expected comma-separated numbers")
    return out


def scale_diagnostics(cfg, mu):
    out = []
    if cfg["kmax"] is not None and scale_of(cfg["kmax"]) < 4.0 * mu.mesh * (1 - 1e-12):
        out.append(f"kmax={cfg['kmax']}: scale 16^-{cfg['kmax']}={scale_of(cfg['kmax']):.6g} "
                   f"is below 4*mesh={4 * mu.mesh:.6g}")
    if cfg["kmin"] is not None and scale_of(cfg["kmin"]) > mu.diameter * (1 + 1e-12):
        out.append(f"kmin={cfg['kmin']}: scale {scale_of(cfg['kmin']):.6g} exceeds the diameter "
                   f"{mu.diameter:.6g}")
    if cfg["kmin"] is not None and cfg["kmax"] is not None and cfg["kmin"] > cfg["kmax"]:
        out.append("kmin must not exceed kmax")
    return out


def make_measure(cfg):
    g = cfg["gen"]
    if g == "plane":
        return gen_hyperplane(cfg["d"], cfg["extent"], cfg["h"])
    if g == "lipschitz":
        return gen_lipschitz_graph(cfg["d"], cfg["amp"], cfg["freq"], cfg["extent"], cfg["h"])
    if g == "cantor":
        return gen_cantor(cfg["depth"])
    return load_csv(cfg["input"], mesh=cfg["mesh"])


def _method(cfg):
    return Tree(cfg["tree_theta"], cfg["tree_order"]) if cfg["tree_theta"] is not None else None


def _pick(ids, limit):
    ids = sorted(ids)
    if limit is None or len(ids) <= limit:
        return ids
    step = len(ids) / limit
    return [ids[int(i * step)] for i in range(limit)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _plot_points(mu, limit=4000):
    stride = max(1, math.ceil(len(mu) / limit))
    return list(range(0, len(mu), stride))


# ---------------------------------------------------------------- stages


def stage_measure(mu, cfg):
    out = {"d": mu.d, "n_points": len(mu), "mesh": mu.mesh, "diameter": mu.diameter,
           "total_mass": mu.total_mass, "provenance": mu.provenance}
    r_min, r_max = 4.0 * mu.mesh, mu.diameter / 4.0
    if r_max > r_min:
        est = ad_regularity(mu, r_min, r_max, 200, cfg["seed"])
        out["ad_regularity"] = {"c_low": est.c_low, "C_high": est.C_high, "samples": est.samples,
                                "r_range": list(est.r_range)}
    return out


def stage_lattice(lat, outdir):
    prof = small_boundary_profile(lat)
    levels = [{"k": k, "scale": scale_of(k), "n_cells": len(lat.levels[k])}
              for k in range(lat.k_min, lat.k_max + 1)]
    _write_csv(os.path.join(outdir, "tables", "lattice_cells.csv"),
               ["id", "k", "center", "parent", "n_members", "mass"],
               [[c.id, c.k, int(c.center), "" if c.parent is None else c.parent, len(c.members),
                 repr(lat.mass(c.id))] for c in lat.cells])
    return {"k_min": lat.k_min, "k_max": lat.k_max, "n_cells": len(lat), "levels": levels,
            "certified": True,
            "small_boundary": {"cells": prof["cells"], "monotone_fraction": prof["monotone_fraction"],
                               "gamma": prof["gamma"], "C": prof["C"]}}


def stage_flatness(mu, lat, cfg, outdir):
    rows, per_level = [], []
    for k in range(lat.k_min, lat.k_max + 1):
        vals = []
        skipped = 0
        for cid in _pick(lat.levels[k], cfg["max_cells"]):
            c = lat.cells[cid]
            z = lat.center_point(cid)
            try:
                plane, geo = best_plane(mu, z, c.scale, cfg["a"])
            except ScaleWindowError:
                skipped += 1
                continue
            row = {"id": cid, "k": k, "alpha_geo": geo, "normal": plane.normal.tolist()}
            if cfg["analytic"]:
                q = FlatnessQuery(z, c.scale, cfg["a"], Hyperplane(plane.normal))
                row["alpha_an"] = analytic_defect(mu, q, seed=cfg["seed"])
            row["flat"] = bool(geo <= cfg["alpha"] and row.get("alpha_an", 0.0) <= cfg["alpha"])
            rows.append(row)
            vals.append(geo)
        per_level.append({"k": k, "tested": len(vals), "window_skipped": skipped,
                          "flat": sum(1 for r in rows if r["k"] == k and r["flat"]),
                          "max_alpha_geo": max(vals) if vals else None,
                          "mean_alpha_geo": math.fsum(vals) / len(vals) if vals else None})
        if vals:
            pts = [lat.center_point(r["id"]) for r in rows if r["k"] == k]
            _write(os.path.join(outdir, "figures", f"flatness_k{k}.svg"),
                   _svg.heat([p[0] for p in pts], [p[1] for p in pts], vals,
                             title=f"geometric flatness defect, level {k}", xlabel="x0", ylabel="x1"))
    _write_csv(os.path.join(outdir, "tables", "flatness.csv"),
               ["id", "k", "alpha_geo", "alpha_an", "flat"],
               [[r["id"], r["k"], repr(r["alpha_geo"]), repr(r["alpha_an"]) if "alpha_an" in r else "",
                 int(r["flat"])] for r in rows])
    return {"A": cfg["a"], "alpha": cfg["alpha"], "analytic": bool(cfg["analytic"]),
            "levels": per_level, "cells": rows}


def stage_baup(mu, lat, cfg, outdir):
    interior = bool(cfg["interior"])
    elig = eligible_cells(mu, lat, cfg["delta"], interior)
    verdicts = [baup_test(mu, lat, cid, cfg["delta"], seed=cfg["seed"]) for cid in elig]
    fam = [v.cell for v in verdicts if v.non_baup]
    rare = rarefy(lat, fam)
    _write_csv(os.path.join(outdir, "tables", "baup.csv"), ["id", "k", "non_baup", "rarefied"],
               [[cid, lat.cells[cid].k, int(cid in fam), int(cid in rare)] for cid in elig])
    return {"delta": cfg["delta"], "interior_only": interior, "eligible": len(elig),
            "non_baup": fam, "verdicts": [v.to_dict() for v in verdicts],
            "fraction": len(fam) / len(elig) if elig else 0.0, "rarefied": rare,
            "rarefied_mass": math.fsum(lat.mass(c) for c in rare) / mu.total_mass}


def stage_carleson(lat, family, outdir):
    rep = carleson_constant(lat, family)
    items = sorted(rep.ratios.items(), key=lambda kv: (-kv[1], kv[0]))
    _write_csv(os.path.join(outdir, "tables", "carleson_ratios.csv"), ["cell", "k", "ratio"],
               [[p, lat.cells[p].k, repr(r)] for p, r in items])
    top = items[:30]
    _write(os.path.join(outdir, "figures", "carleson_ratios.svg"),
           _svg.bar([p for p, _ in top], [r for _, r in top], title="Carleson packing ratios",
                    xlabel="cell", ylabel="ratio"))
    out = rep.to_dict()
    out["family"] = "non_baup"
    out["family_size"] = len(family)
    return out


def stage_layers(lat, family, cfg):
    nc = non_carleson_layers(lat, family, cfg["m"], cfg["eta"])
    normal = [0.0] * lat.mu.ambient_dim
    normal[-1] = 1.0
    flat = flat_predicate(lat, [normal], cfg["a"], cfg["alpha"])
    alt = alternating_layers(lat, family, flat, cfg["k"], cfg["eta"], cfg["n"], cfg["s"])
    return {"M": cfg["m"], "eta": cfg["eta"], "K": cfg["k"], "N": cfg["n"], "S": cfg["s"],
            "plane_normal": normal, "non_carleson": nc.to_dict(), "alternating": alt.to_dict()}


def stage_riesz(mu, cfg, outdir):
    factors = [float(x) for x in cfg["riesz_factors"].split(",")]
    method = _method(cfg)
    rows = []
    for f in factors:
        est = op_norm(mu, KernelSpec("full", f * mu.mesh), seed=cfg["seed"], method=method,
                      threads=cfg["threads"], strict_window=False)
        rows.append({"factor": f, **est.to_dict()})
    _write_csv(os.path.join(outdir, "tables", "op_norm.csv"), ["delta", "value", "iters", "converged"],
               [[repr(r["delta"]), repr(r["value"]), r["iters"], int(r["converged"])] for r in rows])
    _write(os.path.join(outdir, "figures", "op_norm.svg"),
           _svg.line([r["delta"] for r in rows], [r["value"] for r in rows],
                     title="operator norm of the truncated Riesz transform",
                     xlabel="delta", ylabel="norm", logx=True))
    return {"variant": "full", "method": method.to_dict() if method else {"name": "naive"},
            "op_norm": rows}


def _support_figure(mu, lat, outdir):
    idx = _plot_points(mu)
    colors = None
    overlay = ()
    if lat is not None:
        k = min(lat.k_min + 1, lat.k_max)
        colors = [int(lat.labels[k][i]) for i in idx]
        overlay = [tuple(lat.center_point(c)[:2]) for c in lat.levels[k]][:500]
    _write(os.path.join(outdir, "figures", "support.svg"),
           _svg.scatter([mu.points[i][0] for i in idx], [mu.points[i][1] for i in idx], colors,
                        title="support and lattice cells", xlabel="x0", ylabel="x1", overlay=overlay))


def _json_default(o):
    import numpy as np
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _finite(o):
    """Replace non-finite floats by None so the report is strict JSON."""
    if isinstance(o, float):
        return o if math.isfinite(o) else None
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


def dumps(report):
    text = json.dumps(report, default=_json_default)
    return json.dumps(_finite(json.loads(text)), sort_keys=True, indent=1, allow_nan=False) + "\n"


def run_pipeline(cfg):
    """Execute the configured stages and write the report tree; returns the report dict."""
    from . import __version__

    diags = stage_diagnostics(cfg["stages"]) + parameter_diagnostics(cfg)
    if diags:
        raise ConfigError("; ".join(diags))
    mu = make_measure(cfg)
    win = scale_diagnostics(cfg, mu)
    if win:
        raise ConfigError("; ".join(win), EXIT_WINDOW)
    outdir = cfg["out"]
    for sub in ("", "figures", "tables"):
        os.makedirs(os.path.join(outdir, sub), exist_ok=True)
    report = {key: None for key in REPORT_KEYS}
    report["meta"] = {"package": "rieszlab", "version": __version__, "stages": cfg["stages"],
                      "config": {k: v for k, v in sorted(cfg.items()) if k not in NON_SEMANTIC}}
    report["measure"] = stage_measure(mu, cfg)
    lat = None
    family = None
    for stage in cfg["stages"]:
        if stage == "lattice":
            lat = build_lattice(mu, cfg["kmin"], cfg["kmax"])
            report["lattice"] = stage_lattice(lat, outdir)
        elif stage == "flatness":
            report["flatness"] = stage_flatness(mu, lat, cfg, outdir)
        elif stage == "baup":
            report["baup"] = stage_baup(mu, lat, cfg, outdir)
            family = report["baup"]["non_baup"]
        elif stage == "carleson":
            report["carleson"] = stage_carleson(lat, family, outdir)
        elif stage == "layers":
            report["layers"] = stage_layers(lat, family, cfg)
        elif stage == "riesz":
            report["riesz"] = stage_riesz(mu, cfg, outdir)
    _support_figure(mu, lat, outdir)
    _write(os.path.join(outdir, "report.json"), dumps(report))
    return report


def _plan(cfg):
    return {"input": cfg["input"] or f"gen={cfg['gen']}", "stages": cfg["stages"], "out": cfg["out"],
            "config": {k: v for k, v in sorted(cfg.items())}}


def validate_config(cfg):
    """Diagnostics for a configuration, without running any stage."""
    diags = stage_diagnostics(cfg["stages"]) + parameter_diagnostics(cfg)
    if not any(d.startswith(("no input", "gen=", "input file")) for d in diags):
        try:
            diags += scale_diagnostics(cfg, make_measure(cfg))
        except RieszLabError as exc:
            diags.append(f"input: {exc}")
    return diags


def summarize(report):
    lines = []
    m = report.get("measure") or {}
    lines.append(f"measure: d={m.get('d')} n={m.get('n_points')} mesh={m.get('mesh')}")
    if report.get("lattice"):
        lt = report["lattice"]
        lines.append(f"lattice: levels {lt['k_min']}..{lt['k_max']}, {lt['n_cells']} cells")
    if report.get("flatness"):
        for lev in report["flatness"]["levels"]:
            lines.append(f"flatness k={lev['k']}: {lev['flat']}/{lev['tested']} flat")
    if report.get("baup"):
        b = report["baup"]
        lines.append(f"baup: {len(b['non_baup'])}/{b['eligible']} non-BAUP at delta={b['delta']}")
    if report.get("carleson"):
        lines.append(f"carleson: best constant {report['carleson']['best_constant']}")
    if report.get("layers"):
        lines.append(f"layers: non-Carleson ok={report['layers']['non_carleson']['ok']}, "
                     f"alternating ok={report['layers']['alternating']['ok']}")
    if report.get("riesz"):
        for r in report["riesz"]["op_norm"]:
            lines.append(f"op_norm delta={r['delta']:.6g}: {r['value']:.6g}")
    return "\n".join(lines)


def _redraw(report, outdir):
    os.makedirs(os.path.join(outdir, "figures"), exist_ok=True)
    if report.get("riesz"):
        rows = report["riesz"]["op_norm"]
        _write(os.path.join(outdir, "figures", "op_norm.svg"),
               _svg.line([r["delta"] for r in rows], [r["value"] for r in rows],
                         title="operator norm of the truncated Riesz transform",
                         xlabel="delta", ylabel="norm", logx=True))
    if report.get("carleson"):
        items = sorted(((int(p), r) for p, r in report["carleson"]["ratios"].items()),
                       key=lambda kv: (-kv[1], kv[0]))[:30]
        _write(os.path.join(outdir, "figures", "carleson_ratios.svg"),
               _svg.bar([p for p, _ in items], [r for _, r in items], title="Carleson packing ratios",
                        xlabel="cell", ylabel="ratio"))


FLAG_KEYS = {"input": "input", "out": "out", "stages": "stages", "delta": "delta", "A": "a",
             "alpha": "alpha", "eps": "eps", "kmin": "kmin", "kmax": "kmax", "seed": "seed",
             "threads": "threads", "tree_theta": "tree_theta", "tree_order": "tree_order"}


def _parser():
    p = argparse.ArgumentParser(prog="rieszlab", description="Diagnostics for discrete measures.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("gen", "run", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="*", help="config files and key=value words")
        sp.add_argument("--input")
        sp.add_argument("--out")
        sp.add_argument("--stages")
        sp.add_argument("--delta")
        sp.add_argument("--A", dest="A")
        sp.add_argument("--alpha")
        sp.add_argument("--eps")
        sp.add_argument("--kmin")
        sp.add_argument("--kmax")
        sp.add_argument("--seed")
        sp.add_argument("--threads")
        sp.add_argument("--tree-theta", dest="tree_theta")
        sp.add_argument("--tree-order", dest="tree_order")
    rp = sub.add_parser("report")
    rp.add_argument("--input", required=True, help="directory holding report.json")
    return p


def main(argv=None):
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    bad = [w for w in extra if w.startswith("-") or args.command == "report"]
    if bad:
        parser.error(f"unrecognized arguments: {' '.join(bad)}")
    if extra:
        args.config = list(args.config) + extra
    try:
        if args.command == "report":
            path = os.path.join(args.input, "report.json")
            if not os.path.isfile(path):
                raise ConfigError(f"report not found: {path}")
            with open(path, encoding="utf-8") as fh:
                report = json.load(fh)
            missing = [k for k in REPORT_KEYS if k not in report]
            if missing:
                raise ConfigError(f"{path}: missing keys {missing}")
            _redraw(report, args.input)
            print(summarize(report))
            return EXIT_OK
        flags = {FLAG_KEYS[k]: v for k, v in vars(args).items() if k in FLAG_KEYS}
        cfg = build_config(args.config, flags)
        if args.command == "validate":
            diags = validate_config(cfg)
            print(json.dumps({"plan": _plan(cfg), "diagnostics": diags}, sort_keys=True, indent=1))
            return EXIT_OK
        if args.command == "gen":
            diags = [d for d in parameter_diagnostics(cfg) if not d.startswith("input file")]
            if cfg["gen"] is None:
                diags.append("gen needs gen=plane|lipschitz|cantor")
            if diags:
                raise ConfigError("; ".join(diags))
            mu = make_measure(cfg)
            path = cfg["out"] if cfg["out"].endswith(".csv") else os.path.join(cfg["out"], "measure.csv")
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            save_csv(mu, path)
            print(path)
            return EXIT_OK
        report = run_pipeline(cfg)
        print(summarize(report))
        return EXIT_OK
    except ConfigError as exc:
        print(f"rieszlab: {exc}", file=sys.stderr)
        return exc.code
    except ScaleWindowError as exc:
        print(f"rieszlab: scale window: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except ConstructionInvariantError as exc:
        print(f"rieszlab: internal invariant failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except RieszLabError as exc:
        print(f"rieszlab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a bug
        print(f"rieszlab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
