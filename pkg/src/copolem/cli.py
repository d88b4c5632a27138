"""Command-line front-end: table builds, sweeps, and diagram exports.

Every subcommand reads a flat key=value configuration (file and/or
command-line overrides), resolves it against a typed schema, and writes
a CSV table plus a JSON document.  The JSON embeds the resolved
configuration, its hash, and the cache keys of every table the run used,
which is enough to regenerate the artifact exactly.  All computation is
seeded, so rerunning a command with the same configuration reproduces
identical output bytes.

With ``--cache-dir`` the expensive artifacts (entropy rows, interface
tables, pair tables, percolation sweeps) are written to and reused from
a versioned cache; keys fold in the keys of their upstream dependencies,
so changing, say, the block-size schedule of the crossing entropy
automatically invalidates every pair table built on it.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import caching, config
from .blockpairs import PsiTable, build_psi_tables
from .config import ConfigError, FieldSpec, RunConfig
from .entropy import CoverageError, kappa_row
from .freeenergy import SURFACE_COLUMNS, _surface_row, f_surface
from .interface import DEFAULT_MU_GRID, InterfaceTable, build_interface_table
from .model import InteractionParams
from .oracle import quenched_f_mc
from .percolation import BracketError, estimate_p_c_detail, rho_star
from .phases import (DEFAULT_A_GRID, critical_curve, diagram_to_csv,
                     diagram_to_json, phase_diagram)

M_SCHEDULE_DEFAULT = (100, 200, 400)
SAMPLES_DEFAULT = 4
L_SCHEDULE_DEFAULT = (16, 32, 64)
LEVELS_DEFAULT = 2

_COMMON = [
    FieldSpec("seed", "int", 0, help="base seed for every random stream"),
]

_TABLE_KEYS = [
    FieldSpec("a_grid", "floats", DEFAULT_A_GRID,
              help="block-pair traversal times"),
    FieldSpec("m_schedule", "ints", M_SCHEDULE_DEFAULT,
              help="interface strip sizes"),
    FieldSpec("samples", "int", SAMPLES_DEFAULT,
              help="disorder samples per interface size"),
    FieldSpec("L_schedule", "ints", L_SCHEDULE_DEFAULT,
              help="block sizes for the crossing entropy"),
    FieldSpec("levels", "int", LEVELS_DEFAULT,
              help="extrapolation levels over the block sizes"),
    FieldSpec("grid_nodes", "int", 16,
              help="coarse nodes per pair optimization axis"),
]

_CAP_KEYS = [
    FieldSpec("rho_star_A", "float", None,
              help="A-block frequency cap; computed when unset"),
    FieldSpec("rho_star_B", "float", None,
              help="B-block frequency cap; computed when unset"),
    FieldSpec("perc_length", "int", 256,
              help="diagonal length for cap estimation"),
    FieldSpec("perc_samples", "int", 32,
              help="disorder samples for cap estimation"),
]

SCHEMAS = {
    "kappa": _COMMON + [
        FieldSpec("a_grid", "floats",
                  tuple(np.round(np.arange(2.0, 6.001, 0.25), 12))),
        FieldSpec("nu", "float", 1.0),
        FieldSpec("L_schedule", "ints", L_SCHEDULE_DEFAULT),
        FieldSpec("levels", "int", LEVELS_DEFAULT),
    ],
    "phi": _COMMON + [
        FieldSpec("alpha", "float", required=True),
        FieldSpec("beta", "float", required=True),
        FieldSpec("mu_grid", "floats", tuple(DEFAULT_MU_GRID)),
        FieldSpec("m_schedule", "ints", M_SCHEDULE_DEFAULT),
        FieldSpec("samples", "int", SAMPLES_DEFAULT),
    ],
    "psi": _COMMON + _TABLE_KEYS + [
        FieldSpec("alphas", "floats", required=True),
        FieldSpec("betas", "floats", required=True),
    ],
    "perc": _COMMON + [
        FieldSpec("p_grid", "floats",
                  tuple(np.round(np.arange(0.1, 0.901, 0.1), 12))),
        FieldSpec("length", "int", 512),
        FieldSpec("samples", "int", 64),
        FieldSpec("pc", "bool", True, help="also bisect for p_c"),
        FieldSpec("pc_tol", "float", 0.01),
        FieldSpec("pc_resolution", "float", 1e-3),
    ],
    "free-energy": _COMMON + _TABLE_KEYS + _CAP_KEYS + [
        FieldSpec("alphas", "floats", required=True),
        FieldSpec("betas", "floats", required=True),
        FieldSpec("p", "float", required=True),
        FieldSpec("level_tol", "float", 1e-8),
    ],
    "curve": _COMMON + [
        FieldSpec("alphas", "floats", required=True),
        FieldSpec("p", "float", required=True),
        FieldSpec("tol", "float", 1e-3),
        FieldSpec("m_schedule", "ints", M_SCHEDULE_DEFAULT),
        FieldSpec("samples", "int", SAMPLES_DEFAULT),
        FieldSpec("beta_cap", "float", 4.0),
        FieldSpec("probe_step", "float", 0.15),
    ],
    "phase-diagram": _COMMON + _TABLE_KEYS + _CAP_KEYS + [
        FieldSpec("p", "float", required=True),
        FieldSpec("alphas", "floats",
                  tuple(np.round(np.arange(0.0, 2.401, 0.2), 12))),
        FieldSpec("betas", "floats",
                  tuple(np.round(np.arange(-0.8, 2.401, 0.2), 12))),
        FieldSpec("enter_tol", "float", 2e-4),
        FieldSpec("loc_margin", "float", 1e-3),
        FieldSpec("cross_tol", "float", 2e-3),
        FieldSpec("level_tol", "float", 1e-8),
        FieldSpec("supercritical", "str", "auto",
                  help="auto, true, or false"),
    ],
    "oracle-check": _COMMON + _TABLE_KEYS + _CAP_KEYS + [
        FieldSpec("points", "points", ((0.5, -0.5), (1.0, 0.5), (1.5, 1.0))),
        FieldSpec("p", "float", 0.7),
        FieldSpec("schedule", "points", ((4, 400), (6, 900), (8, 1600)),
                  help="L,n pairs for the enumeration oracle"),
        FieldSpec("mc_samples", "int", 4),
        FieldSpec("level_tol", "float", 1e-8),
    ],
}

COMMANDS = tuple(sorted(SCHEMAS))


def _pmap(fn, items, threads: int):
    """Order-preserving map, threaded over independent items."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _meta_block(cfg: RunConfig, cache_keys=None) -> dict:
    values = {k: config._canon_value(v) for k, v in sorted(cfg.values.items())}
    return {
        "schema_version": config.SCHEMA_VERSION,
        "command": cfg.command,
        "config_hash": cfg.config_hash,
        "config": values,
        "cache_keys": dict(cache_keys or {}),
    }


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in row])


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def _write_dat(path, columns, rows) -> None:
    """Whitespace-separated plot data with a commented header."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(str(c) for c in columns) + "\n")
        for row in rows:
            fh.write(" ".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _store(args):
    return caching.CacheStore(args.cache_dir) if args.cache_dir else None


def _cached_psi(cfg, store, alphas, betas):
    """Pair table from cache or fresh build; returns (table, key)."""
    key = caching.psi_key(alphas, betas, cfg["a_grid"], cfg["m_schedule"],
                          cfg["samples"], cfg["seed"], cfg["L_schedule"],
                          cfg["levels"], cfg["grid_nodes"])
    if store is not None and store.has("psi", key):
        return PsiTable.from_json(store.artifact_path("psi", key)), key
    table = build_psi_tables(alphas, betas, cfg["a_grid"], cfg["m_schedule"],
                             cfg["samples"], cfg["seed"], cfg["L_schedule"],
                             cfg["levels"], cfg["grid_nodes"])
    if store is not None:
        table.to_json(store.artifact_path("psi", key))
        store.register("psi", key)
    return table, key


def _cached_cap(cfg, store, density: float, cache_keys: dict) -> float:
    """One frequency cap, from config override, cache, or a fresh sweep."""
    key = caching.percolation_key([density], cfg["perc_length"],
                                  cfg["perc_samples"], cfg["seed"])
    cache_keys[f"perc[{density!r}]"] = key
    if store is not None:
        payload = store.read_payload("perc", key)
        if payload is not None:
            return float(payload["rho_star"][0])
    est = rho_star(density, cfg["perc_length"], cfg["perc_samples"],
                   cfg["seed"])
    if store is not None:
        store.write_payload("perc", key, {
            "p_grid": [density], "rho_star": [est.rho_star],
            "stderr": [est.stderr]})
    return float(est.rho_star)


def _resolve_caps_cfg(cfg, store, p, cache_keys):
    cap_a = cfg["rho_star_A"]
    cap_b = cfg["rho_star_B"]
    if cap_a is None:
        cap_a = _cached_cap(cfg, store, float(p), cache_keys)
    if cap_b is None:
        cap_b = _cached_cap(cfg, store, round(1.0 - float(p), 12), cache_keys)
    return min(max(float(cap_a), 0.0), 1.0), min(max(float(cap_b), 0.0), 1.0)


# ---------------------------------------------------------------------------
# subcommand handlers; each returns (csv_columns, csv_rows, json_payload)


def _run_kappa(cfg, store, args):
    cache_keys = {}
    key = caching.cache_key("kappa-rows", {
        "entropy": caching.entropy_key(cfg["L_schedule"], cfg["levels"]),
        "a_grid": [float(a) for a in cfg["a_grid"]],
        "nu": float(cfg["nu"]),
    })
    cache_keys["kappa"] = key
    payload = store.read_payload("kappa", key) if store is not None else None
    if payload is None:
        vals, errs = kappa_row(np.asarray(cfg["a_grid"], dtype=float),
                               float(cfg["nu"]), cfg["L_schedule"],
                               cfg["levels"])
        payload = {"a": [float(a) for a in cfg["a_grid"]],
                   "kappa": [float(v) for v in vals],
                   "err": [float(e) for e in errs]}
        if store is not None:
            store.write_payload("kappa", key, payload)
    rows = list(zip(payload["a"], [float(cfg["nu"])] * len(payload["a"]),
                    payload["kappa"], payload["err"]))
    doc = {"format": 1, "kappa": payload, "meta": _meta_block(cfg, cache_keys)}
    return ("a", "nu", "kappa", "err"), rows, doc


def _run_phi(cfg, store, args):
    cache_keys = {}
    key = caching.interface_key(cfg["m_schedule"], cfg["samples"],
                                cfg["seed"], cfg["mu_grid"], cfg["alpha"],
                                cfg["beta"])
    cache_keys["interface"] = key
    table = None
    if store is not None and store.has("interface", key):
        table = InterfaceTable.from_json(store.artifact_path("interface", key))
    if table is None:
        table = build_interface_table(
            InteractionParams(cfg["alpha"], cfg["beta"]), cfg["mu_grid"],
            cfg["m_schedule"], cfg["samples"], cfg["seed"])
        if store is not None:
            table.to_json(store.artifact_path("interface", key))
            store.register("interface", key)
    rows = [(float(m), float(v), float(s))
            for m, v, s in zip(table.mu_grid, table.phi_vals, table.stderr)]
    doc = {"format": 1, "alpha": table.alpha, "beta": table.beta,
           "mu": [float(m) for m in table.mu_grid],
           "phi": [float(v) for v in table.phi_vals],
           "stderr": [float(s) for s in table.stderr],
           "table_meta": dict(table.meta),
           "meta": _meta_block(cfg, cache_keys)}
    return ("mu", "phi", "stderr"), rows, doc


def _psi_rows(table: PsiTable):
    rows = []
    for i, al in enumerate(table.alphas):
        for j, be in enumerate(table.betas):
            for kind in ("AA", "AB", "BA", "BB"):
                for k, a in enumerate(table.a_vals):
                    row = [float(al), float(be), kind, float(a),
                           float(table.values[kind][i, j, k])]
                    if kind in ("AB", "BA"):
                        row += [float(table.b_opt[kind][i, j, k]),
                                float(table.c_opt[kind][i, j, k])]
                    else:
                        row += ["", ""]
                    rows.append(row)
    return rows


def _run_psi(cfg, store, args):
    table, key = _cached_psi(cfg, store, cfg["alphas"], cfg["betas"])
    doc = {"format": 1,
           "alphas": [float(a) for a in table.alphas],
           "betas": [float(b) for b in table.betas],
           "a_vals": [float(a) for a in table.a_vals],
           "values": {k: table.values[k].tolist() for k in table.values},
           "table_meta": dict(table.meta),
           "meta": _meta_block(cfg, {"psi": key})}
    return ("alpha", "beta", "kind", "a", "psi", "b", "c"), \
        _psi_rows(table), doc


def _run_perc(cfg, store, args):
    cache_keys = {}
    key = caching.percolation_key(cfg["p_grid"], cfg["length"],
                                  cfg["samples"], cfg["seed"])
    cache_keys["perc"] = key
    payload = store.read_payload("perc", key) if store is not None else None
    if payload is None:
        def one(p):
            return rho_star(float(p), cfg["length"], cfg["samples"],
                            cfg["seed"])
        ests = _pmap(one, cfg["p_grid"], args.threads)
        payload = {"p_grid": [float(p) for p in cfg["p_grid"]],
                   "rho_star": [e.rho_star for e in ests],
                   "stderr": [e.stderr for e in ests]}
        if store is not None:
            store.write_payload("perc", key, payload)
    doc = {"format": 1, "percolation": payload,
           "meta": _meta_block(cfg, cache_keys)}
    if cfg["pc"]:
        detail = estimate_p_c_detail(cfg["length"], cfg["samples"],
                                     cfg["pc_tol"], cfg["seed"],
                                     p_resolution=cfg["pc_resolution"])
        doc["p_c"] = {"estimate": detail.p_c,
                      "threshold_full": detail.threshold_full,
                      "threshold_half": detail.threshold_half,
                      "finite_size_spread": detail.finite_size_spread}
    rows = list(zip(payload["p_grid"], payload["rho_star"],
                    payload["stderr"]))
    return ("p", "rho_star", "stderr"), rows, doc


def _run_free_energy(cfg, store, args):
    cache_keys = {}
    table, key = _cached_psi(cfg, store, cfg["alphas"], cfg["betas"])
    cache_keys["psi"] = key
    cap_a, cap_b = _resolve_caps_cfg(cfg, store, cfg["p"], cache_keys)
    results = f_surface(cfg["alphas"], cfg["betas"], cfg["p"], table,
                        cap_a, cap_b, cfg["level_tol"])
    rows = [_surface_row(res) for res in results]
    doc = {"format": 1, "columns": list(SURFACE_COLUMNS),
           "rows": [[float(v) for v in row] for row in rows],
           "rho_star_A": cap_a, "rho_star_B": cap_b,
           "meta": _meta_block(cfg, cache_keys)}
    return SURFACE_COLUMNS, rows, doc


def _run_curve(cfg, store, args):
    cache_keys = {}
    key = caching.cache_key("curve", {
        "alphas": [float(a) for a in cfg["alphas"]],
        "p": float(cfg["p"]), "tol": float(cfg["tol"]),
        "beta_cap": float(cfg["beta_cap"]),
        "probe_step": float(cfg["probe_step"]),
        "interface": caching.interface_key(cfg["m_schedule"],
                                           cfg["samples"], cfg["seed"]),
    })
    cache_keys["curve"] = key
    payload = store.read_payload("curve", key) if store is not None else None
    if payload is None:
        curve = critical_curve(cfg["alphas"], cfg["p"], cfg["tol"],
                               cfg["m_schedule"], cfg["samples"],
                               cfg["seed"], cfg["beta_cap"],
                               cfg["probe_step"])
        payload = {"alphas": list(curve.alphas), "betas": list(curve.betas),
                   "alpha_star": curve.alpha_star,
                   "slope_discontinuity_detected":
                       curve.slope_discontinuity_detected,
                   "tol": curve.tol}
        if store is not None:
            store.write_payload("curve", key, payload)
    rows = list(zip(payload["alphas"], payload["betas"]))
    doc = {"format": 1, "curve": payload,
           "meta": _meta_block(cfg, cache_keys)}
    return ("alpha", "beta_c"), rows, doc


def _run_phase_diagram(cfg, store, args):
    cache_keys = {}
    table, key = _cached_psi(cfg, store, cfg["alphas"], cfg["betas"])
    cache_keys["psi"] = key
    cap_a, cap_b = _resolve_caps_cfg(cfg, store, cfg["p"], cache_keys)
    mode = cfg["supercritical"].strip().lower()
    if mode == "auto":
        supercritical = None
    elif mode in ("true", "false"):
        supercritical = mode == "true"
    else:
        raise ConfigError(
            f"key 'supercritical' must be auto, true, or false, "
            f"got {cfg['supercritical']!r}")
    diag = phase_diagram(cfg["p"], cfg["alphas"], cfg["betas"], table,
                         rho_star_A=cap_a, rho_star_B=cap_b,
                         level_tol=cfg["level_tol"],
                         enter_tol=cfg["enter_tol"],
                         loc_margin=cfg["loc_margin"],
                         cross_tol=cfg["cross_tol"],
                         supercritical=supercritical)
    return diag, cache_keys


def _run_oracle_check(cfg, store, args):
    cache_keys = {}
    alphas = sorted({float(a) for a, _ in cfg["points"]})
    betas = sorted({float(b) for _, b in cfg["points"]})
    table, key = _cached_psi(cfg, store, alphas, betas)
    cache_keys["psi"] = key
    cap_a, cap_b = _resolve_caps_cfg(cfg, store, cfg["p"], cache_keys)

    from .freeenergy import evaluate_f

    jobs = []
    for al, be in cfg["points"]:
        f_var = evaluate_f(InteractionParams(al, be), cfg["p"], table,
                           cap_a, cap_b, cfg["level_tol"]).f
        for L, n in cfg["schedule"]:
            jobs.append((al, be, int(round(L)), int(round(n)), f_var))

    def one(job):
        al, be, L, n, f_var = job
        res = quenched_f_mc(InteractionParams(al, be), cfg["p"], n, L,
                            cfg["mc_samples"], cfg["seed"])
        return (al, be, float(cfg["p"]), L, n, f_var, res.f_mean,
                res.stderr, f_var - res.f_mean)
    rows = _pmap(one, jobs, args.threads)

    trend = {}
    for al, be, _, L, n, f_var, f_mc, _, gap in rows:
        trend.setdefault(f"({al},{be})", []).append(
            {"L": L, "n": n, "gap": gap})
    doc = {"format": 1, "rows": [list(r) for r in rows],
           "columns": ["alpha", "beta", "p", "L", "n", "f_variational",
                       "f_oracle", "oracle_stderr", "gap"],
           "gap_trend": trend, "rho_star_A": cap_a, "rho_star_B": cap_b,
           "meta": _meta_block(cfg, cache_keys)}
    return ("alpha", "beta", "p", "L", "n", "f_variational", "f_oracle",
            "oracle_stderr", "gap"), rows, doc


HANDLERS = {
    "kappa": _run_kappa,
    "phi": _run_phi,
    "psi": _run_psi,
    "perc": _run_perc,
    "free-energy": _run_free_energy,
    "curve": _run_curve,
    "phase-diagram": _run_phase_diagram,
    "oracle-check": _run_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copolem",
        description="Block-copolymer emulsion free-energy toolkit")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("overrides", nargs="*", metavar="key=value",
                        help="inline configuration overrides")
    parser.add_argument("--config", help="key=value configuration file")
    parser.add_argument("--out", help="output path base (default "
                                      "copolem-<command>)")
    parser.add_argument("--cache-dir", help="directory for table caches")
    parser.add_argument("--seed", type=int, help="override the seed key")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent grid points")
    parser.add_argument("--emit-plot-data", action="store_true",
                        help="also write whitespace-separated .dat files")
    return parser


def run(args) -> list:
    """Execute one parsed invocation; returns the list of files written."""
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    file_items = []
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
        file_items = config.read_config_text(text, source=args.config)
    override_items = config.parse_overrides(args.overrides)
    if args.seed is not None:
        override_items.append(("seed", str(args.seed), "--seed"))
    cfg = config.resolve(args.command, SCHEMAS[args.command], file_items,
                         override_items)
    store = _store(args)
    base = args.out or f"copolem-{args.command}"
    written = []

    if args.command == "phase-diagram":
        diag, cache_keys = _run_phase_diagram(cfg, store, args)
        diagram_to_csv(diag, base + ".csv")
        diagram_to_json(diag, base + ".json",
                        extra_meta=_meta_block(cfg, cache_keys))
        written += [base + ".csv", base + ".json"]
        if args.emit_plot_data:
            order = sorted({lab for row in diag.labels for lab in row
                            if lab is not None})
            rows = []
            for i, al in enumerate(diag.alphas):
                for j, be in enumerate(diag.betas):
                    lab = diag.labels[i][j]
                    if lab is None:
                        continue
                    rows.append((float(al), float(be), diag.f_vals[i][j],
                                 diag.s_vals[i][j], order.index(lab), lab))
            _write_dat(base + ".points.dat",
                       ("alpha", "beta", "f", "S_excess", "label_index",
                        "label"), rows)
            with open(base + ".curves.dat", "w") as fh:
                fh.write("# boundary polylines; blocks separated by blank "
                         "lines\n")
                for curve in diag.curves:
                    fh.write(f"# {curve['label']} | "
                             f"{','.join(curve['separates'])}\n")
                    for x, y in curve["points"]:
                        fh.write(f"{x!r} {y!r}\n")
                    fh.write("\n")
            written += [base + ".points.dat", base + ".curves.dat"]
        return written

    columns, rows, doc = HANDLERS[args.command](cfg, store, args)
    _write_csv(base + ".csv", columns, rows)
    _write_json(base + ".json", doc)
    written += [base + ".csv", base + ".json"]
    if args.emit_plot_data:
        _write_dat(base + ".dat", columns, rows)
        written.append(base + ".dat")
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        written = run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except caching.CacheVersionError as exc:
        print(f"cache error: {exc}", file=sys.stderr)
        return 3
    except (CoverageError, BracketError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
