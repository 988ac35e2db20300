"""Command-line surface: simulate, analyze, match, report.

Config files are strict-schema JSON; dB <-> linear SNR and bits <-> nats
conversions happen only here, the library works in linear SNR and nats.
Results land as delimited CSV plus a manifest echoing the fully resolved
config (re-running on the echoed config reproduces the CSV byte for byte).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from fmatchlab.channel import ConfigError, RegimeError, SystemConfig, subchannel_rate
from fmatchlab.analysis import (
    SchemeSpec,
    dmr_chunk,
    dmt_fixed_scheme,
    k_threshold,
    r_threshold,
)
from fmatchlab.graph import FProfile, hopcroft_karp, load_graph, max_f_matching
from fmatchlab.montecarlo import conditional_experiment, sweep
from fmatchlab.numerics import SaddleInputs, cond_dmt, solve_saddle
from fmatchlab.presets import PRESETS, get_preset
from fmatchlab.pver2hk import PhaseTrace, pver2hk

RESULT_COLUMNS = ["scheme", "user", "gamma_db", "p_out", "ci_lo", "ci_hi", "source"]


class ConfigFileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

_SWEEP_FIELDS = {
    "experiment": str,
    "num_users": int,
    "num_bands": int,
    "num_subchannels": int,
    "target_rates": list,
    "multiplexing_gains": list,
    "rate_unit": str,
    "schemes": list,
    "chunk_caps": list,
    "snr_db": dict,
    "trials": int,
    "seed": int,
    "workers": int,
    "use_pver2hk": bool,
    "eta": (int, float),
    "paired": bool,
    "out": str,
}
_COND_FIELDS = {
    "experiment": str,
    "n_channels": int,
    "n_good": int,
    "multiplexing_gain": (int, float),
    "target_rate": (int, float),
    "rate_unit": str,
    "snr_db": dict,
    "trials": int,
    "seed": int,
    "workers": int,
    "out": str,
}
_DEFAULTS = {"experiment": "sweep", "rate_unit": "nats", "workers": 1,
             "use_pver2hk": False, "eta": 2.0, "paired": False}


def validate_experiment(raw: dict) -> dict:
    """Fill defaults and type-check against the strict schema.

    Raises ConfigFileError naming the offending field.
    """
    if not isinstance(raw, dict):
        raise ConfigFileError("config root must be a JSON object")
    kind = raw.get("experiment", "sweep")
    if kind not in ("sweep", "conditional"):
        raise ConfigFileError(f"field 'experiment' must be 'sweep' or 'conditional', got {kind!r}")
    fields = _SWEEP_FIELDS if kind == "sweep" else _COND_FIELDS
    cfg = {k: v for k, v in _DEFAULTS.items() if k in fields}
    cfg.update(raw)
    for key, val in cfg.items():
        if key not in fields:
            raise ConfigFileError(f"unknown field {key!r} for a {kind} experiment")
        if not isinstance(val, fields[key]) and val is not None:
            raise ConfigFileError(f"field {key!r} has wrong type {type(val).__name__}")
    required = (
        ["num_users", "num_bands", "num_subchannels", "schemes", "snr_db", "trials", "seed"]
        if kind == "sweep"
        else ["n_channels", "n_good", "snr_db", "trials", "seed"]
    )
    for key in required:
        if key not in cfg:
            raise ConfigFileError(f"missing field {key!r}")
    grid = cfg["snr_db"]
    for key in ("start", "stop", "step"):
        if key not in grid or not isinstance(grid[key], (int, float)):
            raise ConfigFileError(f"field 'snr_db.{key}' missing or non-numeric")
    if grid["step"] <= 0 or grid["stop"] < grid["start"]:
        raise ConfigFileError("field 'snr_db' must have step > 0 and stop >= start")
    if cfg["rate_unit"] not in ("nats", "bits"):
        raise ConfigFileError("field 'rate_unit' must be 'nats' or 'bits'")
    if kind == "sweep":
        if ("target_rates" in cfg) == ("multiplexing_gains" in cfg):
            raise ConfigFileError(
                "supply exactly one of 'target_rates' / 'multiplexing_gains'"
            )
    else:
        if ("multiplexing_gain" in cfg) == ("target_rate" in cfg):
            raise ConfigFileError(
                "supply exactly one of 'multiplexing_gain' / 'target_rate'"
            )
    return cfg


def snr_grid_db(cfg: dict) -> np.ndarray:
    grid = cfg["snr_db"]
    n = int(round((grid["stop"] - grid["start"]) / grid["step"])) + 1
    return grid["start"] + grid["step"] * np.arange(n)


def _to_nats(value, unit: str):
    scale = math.log(2.0) if unit == "bits" else 1.0
    if isinstance(value, list):
        return [v * scale for v in value]
    return value * scale


def system_config(cfg: dict, snr_linear: float = 1.0) -> SystemConfig:
    rates = cfg.get("target_rates")
    gains = cfg.get("multiplexing_gains")
    return SystemConfig(
        num_users=cfg["num_users"],
        num_bands=cfg["num_bands"],
        num_subchannels=cfg["num_subchannels"],
        snr=snr_linear,
        target_rates=tuple(_to_nats(rates, cfg["rate_unit"])) if rates else None,
        multiplexing_gains=tuple(gains) if gains else None,
    )


def scheme_specs(cfg: dict) -> list[SchemeSpec]:
    out = []
    for kind in cfg["schemes"]:
        caps = tuple(cfg["chunk_caps"]) if kind == "chunk_coded" else None
        out.append(SchemeSpec(kind=kind, chunk_caps=caps))
    return out


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(path: Path, cfg: dict, derived: dict) -> None:
    manifest = {"config": cfg, "config_hash": config_hash(cfg), "derived": derived}
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return f"{x:.10g}"
    return str(x)


def write_csv(path: Path, columns: list[str], rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _derived_block(cfg: dict) -> dict:
    if cfg["experiment"] != "sweep":
        return {}
    top_db = snr_grid_db(cfg)[-1]
    sc = system_config(cfg, 10.0 ** (top_db / 10.0))
    r_s, r_c = subchannel_rate(sc)
    kt = sc.ktilde()
    derived = {
        "n_per_band": sc.n_per_band,
        "r_s_at_top_snr": r_s,
        "r_c_at_top_snr": r_c,
        "ktilde": kt.tolist(),
        "k_threshold": [k_threshold(sc, m, kt) for m in range(sc.num_users)],
    }
    if sc.num_subchannels == sc.num_bands:
        derived["r_threshold"] = [r_threshold(sc, m) for m in range(sc.num_users)]
    return derived


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out or cfg.get("out") or "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    gammas_db = snr_grid_db(cfg)
    if cfg["experiment"] == "conditional":
        rate = cfg.get("target_rate")
        rows = []
        for est in conditional_experiment(
            cfg["n_channels"],
            cfg["n_good"],
            10.0 ** (gammas_db / 10.0),
            cfg["trials"],
            cfg["seed"],
            r=cfg.get("multiplexing_gain"),
            rate=_to_nats(rate, cfg["rate_unit"]) if rate is not None else None,
        ):
            rows.append(
                (est.scheme, est.user, 10.0 * math.log10(est.gamma), est.p_hat,
                 est.ci_lo, est.ci_hi, "mc_censored" if est.censored else "monte_carlo")
            )
        write_csv(out_dir / "results.csv", RESULT_COLUMNS, rows)
    else:
        base = system_config(cfg)
        rows = sweep(
            base,
            scheme_specs(cfg),
            gammas_db,
            cfg["trials"],
            cfg["seed"],
            workers=cfg["workers"],
            use_pver2hk=cfg["use_pver2hk"],
            eta=cfg["eta"],
            paired=cfg["paired"],
        )
        write_csv(
            out_dir / "results.csv",
            RESULT_COLUMNS,
            [
                (r.scheme, r.user, r.gamma_db, r.p_out, r.ci_lo, r.ci_hi, r.source)
                for r in rows
            ],
        )
    write_manifest(out_dir / "manifest.json", cfg, _derived_block(cfg))
    if args.figures:
        from fmatchlab.report import render_results

        render_results(out_dir / "results.csv", out_dir)
    print(f"wrote {out_dir / 'results.csv'}")
    return 0


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

SADDLE_COLUMNS = ["gamma_db", "K", "k", "R_c", "lambda_star", "sigma_sq", "bound"]


def _analyze_conditional(cfg: dict, out_dir: Path) -> None:
    gammas_db = snr_grid_db(cfg)
    K, k = cfg["n_channels"], cfg["n_good"]
    rows = []
    exp_rows = []
    prev = None
    for g_db in gammas_db:
        gamma = 10.0 ** (g_db / 10.0)
        if "multiplexing_gain" in cfg:
            rate = cfg["multiplexing_gain"] * math.log1p(gamma)
        else:
            rate = _to_nats(cfg["target_rate"], cfg["rate_unit"])
        r_c = rate / K
        sol = solve_saddle(SaddleInputs(K, k, gamma, r_c))
        rows.append((g_db, K, k, r_c, sol.lambda_star, sol.sigma_sq, min(1.0, sol.bound)))
        if prev is not None and prev[1] > 0 and sol.bound > 0:
            slope = -(math.log(sol.bound) - math.log(prev[1])) / (
                math.log(gamma) - math.log(prev[0])
            )
            exp_rows.append(((g_db + prev[2]) / 2.0, slope))
        prev = (gamma, sol.bound, g_db)
    write_csv(out_dir / "saddle.csv", SADDLE_COLUMNS, rows)
    r_gain = cfg.get("multiplexing_gain", 0.0)
    dmt = cond_dmt(K, k, r_gain)
    write_csv(
        out_dir / "exponent.csv",
        ["gamma_db", "outage_exponent", "conditional_dmt"],
        [(g, e, dmt) for g, e in exp_rows],
    )


def _analyze_sweep(cfg: dict, out_dir: Path) -> None:
    gammas_db = snr_grid_db(cfg)
    base = system_config(cfg)
    specs = scheme_specs(cfg)
    from fmatchlab.montecarlo import _formula_row  # formula overlays share the sweep logic

    rows = []
    for spec in specs:
        for g_db in gammas_db:
            gamma = 10.0 ** (g_db / 10.0)
            for m in range(base.num_users):
                p, src = _formula_row(base, spec, m, gamma)
                rows.append((spec.kind, m, g_db, p, src))
    write_csv(out_dir / "formulas.csv", ["scheme", "user", "gamma_db", "p_out", "source"], rows)

    # DMT/DMR polylines; the chunk curve uses the N = L companion bundling
    dmt_rows = []
    r_grid = np.linspace(0.0, float(base.ktilde().min()) / base.n_per_band, 61)
    for kind in ("rb_coded", "interleaved", "tdma", "localized"):
        for m in range(base.num_users):
            for r in r_grid:
                dmt_rows.append((kind, m, r, max(0.0, dmt_fixed_scheme(base, kind, m, r))))
    try:
        chunk_cfg = (
            base
            if base.num_subchannels == base.num_bands
            else SystemConfig(
                num_users=base.num_users,
                num_bands=base.num_bands,
                num_subchannels=base.num_bands,
                snr=base.snr,
                target_rates=base.target_rates,
                multiplexing_gains=base.multiplexing_gains,
            )
        )
        r_grid_c = np.linspace(0.0, float(chunk_cfg.ktilde().min()), 61)
        for m in range(chunk_cfg.num_users):
            for r in r_grid_c:
                d = dmr_chunk(chunk_cfg, np.full(chunk_cfg.num_users, r)).d[m]
                dmt_rows.append(("chunk_coded", m, r, max(0.0, float(d))))
    except (ConfigError, ValueError):
        pass
    write_csv(out_dir / "dmt.csv", ["scheme", "user", "r", "d"], dmt_rows)


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out or cfg.get("out") or "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg["experiment"] == "conditional":
        _analyze_conditional(cfg, out_dir)
    else:
        _analyze_sweep(cfg, out_dir)
    write_manifest(out_dir / "manifest.json", cfg, _derived_block(cfg))
    if args.figures:
        from fmatchlab.report import render_analysis

        render_analysis(out_dir, out_dir)
    print(f"wrote analysis tables under {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# match
# ---------------------------------------------------------------------------


def cmd_match(args) -> int:
    graph = load_graph(Path(args.graph).read_text())
    caps = np.array([int(x) for x in args.caps.split(",")], dtype=np.int64)
    if len(caps) != graph.num_users:
        raise ConfigFileError(
            f"caps list has {len(caps)} entries for {graph.num_users} users"
        )
    profile = FProfile(caps)
    rng = np.random.default_rng(args.seed)
    trace = PhaseTrace()
    if args.eta is not None:
        matching = pver2hk(graph, profile, args.eta, rng, trace=trace)
        exact = max_f_matching(graph, profile, np.random.default_rng(args.seed))
        ratio = matching.size() / max(exact.size(), 1)
        print(f"pver2hk size: {matching.size()}  exact size: {exact.size()}  ratio: {ratio:.4f}")
    else:
        from fmatchlab.graph import max_f_matching_from_uniforms

        uniforms = rng.random(1 + int(profile.total))
        matching = max_f_matching_from_uniforms(graph, profile, uniforms, trace=trace)
        print(f"maximum f-matching size: {matching.size()}")
    degrees = matching.degrees()
    for m in range(graph.num_users):
        flag = "saturated" if degrees[m] == caps[m] else "unsaturated"
        print(f"user {m}: k={int(degrees[m])} / cap {int(caps[m])} [{flag}]")
    if args.trace:
        write_csv(
            Path(args.trace),
            ["phase", "l", "paths", "matching_size"],
            trace.rows,
        )
        print(f"wrote phase trace to {args.trace}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _load_config(args) -> dict:
    if getattr(args, "preset", None):
        cfg = get_preset(args.preset)
    elif getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigFileError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}")
    else:
        raise ConfigFileError("pass --preset or --config")
    cfg = validate_experiment(cfg)
    for key in ("trials", "seed", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "eta", None) is not None:
        cfg["eta"] = args.eta
        cfg["use_pver2hk"] = True
    if getattr(args, "paired", False):
        cfg["paired"] = True
    return cfg


def _add_common(sub):
    sub.add_argument("--config", help="experiment config JSON")
    sub.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
    sub.add_argument("--trials", type=int, help="override trial count")
    sub.add_argument("--seed", type=int, help="override seed")
    sub.add_argument("--workers", type=int, help="worker threads")
    sub.add_argument("--eta", type=float, help="run matching with pver2hk at this eta")
    sub.add_argument("--paired", action="store_true", help="common random numbers across schemes")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--figures", action="store_true", help="also render figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmatchlab",
        description="Channel-allocation laboratory: f-matching schemes, outage analysis, Monte Carlo",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    sim = subs.add_parser("simulate", help="Monte Carlo sweep -> results.csv + manifest.json")
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)
    ana = subs.add_parser("analyze", help="closed-form tables: formulas, saddle, DMT/DMR")
    _add_common(ana)
    ana.set_defaults(func=cmd_analyze)
    mat = subs.add_parser("match", help="run the matching engine on a graph file")
    mat.add_argument("--graph", required=True, help="graph file (header 'M N L', edges 'm n')")
    mat.add_argument("--caps", required=True, help="comma-separated per-user caps K_m")
    mat.add_argument("--seed", type=int, default=0)
    mat.add_argument("--eta", type=float, help="also run pver2hk at this eta and compare")
    mat.add_argument("--trace", help="write phase trace CSV here")
    mat.set_defaults(func=cmd_match)
    rep = subs.add_parser("report", help="render figures from result/analysis CSVs")
    rep.add_argument("--results", required=True, help="results dir or CSV file")
    rep.add_argument("--out", help="figure output directory (default: alongside input)")
    rep.set_defaults(func=cmd_report)
    return parser


def cmd_report(args) -> int:
    from fmatchlab.report import render_directory

    src = Path(args.results)
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent)
    out.mkdir(parents=True, exist_ok=True)
    written = render_directory(src, out)
    for p in written:
        print(f"wrote {p}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigFileError, ConfigError, RegimeError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
