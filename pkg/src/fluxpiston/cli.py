"""Command-line front end: ``fluxpiston {params,steady-state,pv,simulate,analyze}``.

Exit codes: 0 success, 1 runtime failure, 2 configuration/schema error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, circuit, config, io, sim
from .model import occupations_at_detuning
from .sde import IntegrationError

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _out_dir(args, cfg) -> Path:
    return Path(args.out or cfg.get("output_path") or "out")


# -- params -------------------------------------------------------------------

def cmd_params(args, cfg) -> int:
    c = config.require(cfg, "circuit")
    coupling = config.require(cfg, "circuit.coupling")
    try:
        if coupling == "capacitive":
            raw = circuit.CapacitiveCircuit(*(float(config.require(cfg, "circuit." + k))
                                              for k in ("C_tilde", "CJ_tilde", "C_c", "L", "E_J")))
            eff = circuit.effective_capacitive(raw)
        elif coupling == "inductive":
            raw = circuit.InductiveCircuit(*(float(config.require(cfg, "circuit." + k))
                                             for k in ("C_tilde", "CJ_tilde", "L", "E_J")))
            eff = circuit.effective_inductive(raw)
        else:
            raise config.ConfigError("'circuit.coupling' must be 'capacitive' or 'inductive'")
    except circuit.CircuitError as exc:
        raise config.ConfigError(str(exc)) from exc

    derived = circuit.derive_params(eff)
    report = circuit.validate_regime(derived, eff.E_J, float(c.get("expected_occupation", 0.0)),
                                     float(c.get("threshold", circuit.DEFAULT_RATIO)))
    result = {
        "coupling": coupling,
        "effective": {"xi": eff.xi, "C": eff.C, "C_J": eff.C_J},
        "derived": {"omega0": derived.omega0, "omega_p": derived.omega_p, "g": derived.g,
                    "E_c": derived.E_c, "hbar_E_c": derived.hbar_E_c, "Phi_r": derived.Phi_r,
                    "Phi0": derived.Phi0},
        "regime": {"g_over_omega0": report.g_over_omega0,
                   "omegap_over_omega0": report.omegap_over_omega0,
                   "vacuum_over_EJ": report.vacuum_over_EJ,
                   "occupation_over_critical": report.occupation_over_critical,
                   "threshold": report.threshold, "checks": report.checks, "ok": report.ok},
    }
    if c.get("kappa_C") is not None:
        result["engine_units"] = circuit.to_engine_units(derived, eff.E_J, float(c["kappa_C"]))

    def flat(prefix, node):
        for key, value in node.items():
            if isinstance(value, dict):
                yield from flat(f"{prefix}{key}.", value)
            else:
                yield f"{prefix}{key}", value

    for key, value in flat("", result):
        print(f"{key} = {value}")
    io.write_json(_out_dir(args, cfg) / "params.json", result)
    return EXIT_OK


# -- steady state ---------------------------------------------------------------

def cmd_steady_state(args, cfg) -> int:
    p = config.engine_params(cfg)
    ss = cfg["steady_state"]
    kappas = config.require(cfg, "steady_state.kappa_H_list")
    n = int(ss.get("n_delta", 0))
    if not kappas or n < 1:
        raise config.ConfigError("steady-state sweep needs a non-empty kappa_H_list and n_delta >= 1")
    if p.n_H <= 0:
        raise config.ConfigError("n_H must be positive to normalise occupations")
    x = np.linspace(float(ss["delta_min"]), float(ss["delta_max"]), n)
    rows = []
    for kH in kappas:
        pk = p.replace(kappa_H=float(kH))
        n_a, n_b = occupations_at_detuning(x * pk.kappa_H, pk)
        rows.extend(zip([float(kH)] * n, x, n_a / p.n_H, n_b / p.n_H))
    io.write_csv(_out_dir(args, cfg) / "steady_state.csv",
                 ["kappa_H", "Delta_over_kappa_H", "n_a_ss_over_n_H", "n_b_ss_over_n_H"], rows,
                 io.provenance(preset=cfg.get("preset"), params=p.to_dict()))
    return EXIT_OK


# -- pV -------------------------------------------------------------------------

def cmd_pv(args, cfg) -> int:
    p = config.engine_params(cfg)
    taus = [float(t) for t in config.require(cfg, "pv.tau_omega_list")]
    n_points = int(cfg["pv"].get("n_points", 720))
    curves, summary, stars = [], [], []
    for i, tau in enumerate(taus):
        rec = analysis.pv_curve(p, tau, n_points)
        curves.extend(zip([i] * n_points, [tau] * n_points, rec.phi_samples, rec.V_samples, rec.p_samples))
        summary.append((i, tau, rec.loop_area, analysis.predicted_loop_area(p, tau)))
        for kind in ("max", "min"):
            s = rec.stars[kind]
            stars.append((i, kind, s["phi"], s["V"], s["p"]))
    out = _out_dir(args, cfg)
    meta = io.provenance(preset=cfg.get("preset"), params=p.to_dict())
    io.write_csv(out / "pv_curves.csv", ["curve_id", "tau_omega", "phi", "V", "p"], curves, meta)
    io.write_csv(out / "pv_summary.csv", ["curve_id", "tau_omega", "loop_area", "predicted_area"],
                 summary, meta)
    io.write_csv(out / "pv_stars.csv", ["curve_id", "star", "phi", "V", "p"], stars, meta)
    return EXIT_OK


# -- simulate -----------------------------------------------------------------------

def _initial_state(cfg, p):
    model = cfg["model"]
    init = cfg.get("init") or {}
    phi, L = float(init.get("phi", 0.0)), float(init.get("L", 0.0))
    state = sim.equilibrium_state(model, p, phi, L)
    if init.get("n_a") is not None:
        n_a = float(init["n_a"])
        if n_a < 0:
            raise config.ConfigError("'init.n_a' must be non-negative")
        if model == "reduced":
            state = sim.ReducedState(n_a, phi, L)
        else:
            state = sim.FullState(complex(math.sqrt(n_a)), state.b, phi, L)
    return state


def cmd_simulate(args, cfg) -> int:
    p = config.engine_params(cfg)
    model = cfg["model"]
    dt, t_end = float(cfg["dt"]), float(cfg["t_end"])
    n_traj, seed = int(cfg["n_traj"]), int(cfg["seed"])
    if dt <= 0 or t_end < 0 or n_traj < 1 or not 0 <= seed < 2**64:
        raise config.ConfigError("need dt > 0, t_end >= 0, n_traj >= 1 and 0 <= seed < 2**64")
    init = _initial_state(cfg, p)
    step = max(1, n_traj // 10)

    def progress(i):
        if (i + 1) % step == 0:
            print(f"trajectory {i + 1}/{n_traj}", file=sys.stderr)

    ens = sim.run_ensemble(model, init, p, dt, t_end, n_traj, seed, cfg.get("sample_stride"),
                           workers=int(cfg.get("workers", 1)), progress=progress)
    out = _out_dir(args, cfg)
    meta = io.provenance(preset=cfg.get("preset"), model=model, params=p.to_dict(), seed=seed,
                         dt=dt, t_end=t_end, n_traj=n_traj, init=cfg.get("init"),
                         sample_stride=ens.metadata["sample_stride"])
    if cfg.get("write_trajectories", True):
        cols = ["stream_id", "t", "n_a", "phi", "L"] + (["n_b"] if model == "full" else [])

        def rows():
            for tr in ens.trajectories:
                extra = (tr.n_b,) if model == "full" else ()
                for r in zip([tr.stream_id] * len(tr.times), tr.times, tr.n_a, tr.phi, tr.L, *extra):
                    yield r

        io.write_csv(out / "trajectories.csv", cols, rows(), meta)

    manifest = dict(meta)
    clamps = [tr.clamp_fraction for tr in ens.trajectories]
    manifest.update(completed=ens.count, failures=ens.failures,
                    clamp_fraction_mean=float(np.mean(clamps)), clamp_fraction_max=float(np.max(clamps)))
    window = float(cfg["smoothing_window"])
    if ens.count >= 2 and ens.times[-1] - ens.times[0] >= window and len(ens.times) >= 2:
        stats = analysis.ensemble_stats(ens, window, p)
        io.write_stats(out / "stats.csv", stats, meta)
        manifest["stats_file"] = "stats.csv"
    else:
        manifest["stats_file"] = None
    io.write_json(out / "manifest.json", manifest)
    return EXIT_OK


# -- analyze ------------------------------------------------------------------------

def analyze_stats(stats: analysis.EnsembleStats, meta: dict, tol: dict) -> dict:
    """Pass/fail report of a stats file against the free-rotation predictions."""
    from .model import EngineParams

    params = {k: v for k, v in meta["params"].items() if k != "J"}
    p = EngineParams(**params)
    init = meta.get("init") or {}
    win = analysis.validity_window(stats, tol["threshold"], tol["min_rotating_fraction"])
    report = {
        "chi": stats.chi, "var_offset": stats.var_offset, "n_traj": stats.n_traj,
        "snr_undefined_samples": int(np.count_nonzero(~stats.snr_defined)),
        "window": {"start": win.start, "end": win.end, "empty": win.empty},
        "crossing_time": win.crossing_time, "checks": {},
    }
    checks = report["checks"]
    swing = analysis.pendulum_swing_time(p, float(init.get("phi", 0.0))) if p.EcEJ > 0 else 0.0
    after = stats.times >= swing
    report["swing_time"] = swing
    checks["mean_positive_after_swing"] = bool(np.all(stats.mean_L[after] > 0))
    if win.empty:
        checks["gain_ratio"] = checks["var_ratio"] = checks["snr_stable"] = False
    else:
        agree = analysis.window_agreement(stats, win)
        report["agreement"] = agree
        lo, hi = tol["gain_range"]
        checks["gain_ratio"] = bool(lo <= agree["gain_ratio"] <= hi)
        lo, hi = tol["var_range"]
        checks["var_ratio"] = bool(lo <= agree["var_ratio"] <= hi)
        checks["snr_stable"] = bool(agree["snr_variation"] < tol["snr_variation_max"])
    target = tol["crossing_time"]
    checks["crossing_time"] = bool(win.crossing_time is not None and
                                   abs(win.crossing_time - target) <= tol["crossing_rtol"] * target)
    report["passed"] = all(checks.values())
    return report


def cmd_analyze(args, cfg) -> int:
    path = Path(args.stats) if args.stats else _out_dir(args, cfg) / "stats.csv"
    try:
        stats, meta = io.read_stats(path)
    except io.SchemaError as exc:
        raise config.ConfigError(f"schema error: {exc}") from exc
    if "params" not in meta:
        raise config.ConfigError(f"schema error: {path} lacks parameter provenance")
    report = analyze_stats(stats, meta, cfg["analyze"])
    io.write_json(_out_dir(args, cfg) / "analysis.json", report)
    for name, ok in report["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

COMMANDS = {
    "params": cmd_params,
    "steady-state": cmd_steady_state,
    "pv": cmd_pv,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--preset", choices=sorted(config.PRESETS))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--n-traj", type=int, dest="n_traj")
    common.add_argument("--dt", type=float)
    common.add_argument("--t-end", type=float, dest="t_end")
    common.add_argument("--workers", type=int)

    parser = argparse.ArgumentParser(prog="fluxpiston", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "analyze":
            sp.add_argument("stats", nargs="?", help="stats.csv written by 'simulate'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_cfg = config.load_file(args.config) if args.config else {}
        overrides = {"seed": args.seed, "n_traj": args.n_traj, "dt": args.dt, "t_end": args.t_end,
                     "workers": args.workers}
        cfg = config.build_config(file_cfg, args.preset, overrides)
        return COMMANDS[args.command](args, cfg)
    except config.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
