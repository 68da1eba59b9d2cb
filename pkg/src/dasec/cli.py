"""Experiment runner: single solves, figure-style sweeps, activation
heatmaps, invariant validation and brute-force subcommands.

All persistence is CSV with a header row and one provenance comment line
(config hash + seed); identical config and seed reproduce every file byte
for byte.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from . import oracle
from .ci_core import SymbolSpec
from .precoder import (
    FallbackAllOn,
    PrecoderSolution,
    SolverFailure,
    Variant,
    fixed_t_solve,
    sca_solve,
)
from .scenario import (
    ChannelSet,
    ConfigError,
    Layout,
    ScenarioConfig,
    config_hash,
    draw_channels,
    load_config,
    make_deployment,
    noise_power,
    with_overrides,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


class SweepVar(Enum):
    GAMMA_D = "GammaD"
    GAMMA_K = "GammaK"
    EDGE_FRACTION = "EdgeFraction"
    NUM_EVES = "NumEves"
    SIGMA_E = "SigmaE"


_SWEEP_FIELD = {
    SweepVar.GAMMA_D: "gamma_d_db",
    SweepVar.GAMMA_K: "gamma_k_db",
    SweepVar.EDGE_FRACTION: "edge_fraction",
    SweepVar.NUM_EVES: "n_eves",
    SweepVar.SIGMA_E: "sigma_e",
}


@dataclass
class SweepSpec:
    sweep_var: SweepVar
    values: list
    n_trials: int = 1
    variants: tuple = (Variant.IMPERFECT_PROB,)
    layouts: tuple = (Layout.DA_GRID,)
    no_as: bool = False

    def __post_init__(self):
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if sorted(self.values) != list(self.values):
            raise ValueError("sweep values must be sorted ascending")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


def _fnum(x) -> str:
    if isinstance(x, float):
        return "%.10g" % x
    return str(x)


def _write_csv(path: Path, cfg: ScenarioConfig, header: list, rows: list, extra_comments=()):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash(cfg)} seed={cfg.seed}\n")
        for line in extra_comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fnum(v) for v in row])


def _instance(cfg: ScenarioConfig):
    """Deterministic deployment + channels from the config seed."""
    dep = make_deployment(cfg)
    ch = draw_channels(dep, cfg, np.random.default_rng(cfg.seed + 1))
    return dep, ch


def _solve(variant: Variant, ch: ChannelSet, cfg: ScenarioConfig, sym: SymbolSpec,
           no_as: bool = False) -> PrecoderSolution:
    if no_as:
        return fixed_t_solve(variant, ch, cfg, sym, np.ones(cfg.n_das))
    return sca_solve(variant, ch, cfg, sym)


def run_single(cfg: ScenarioConfig, variant: Variant, out_dir: Path, n_samples: int) -> PrecoderSolution:
    """One solve plus MC report, trace and region-sample files."""
    dep, ch = _instance(cfg)
    sym = SymbolSpec(cfg.m_psk)
    sol = sca_solve(variant, ch, cfg, sym)

    rows = []
    for n in range(cfg.n_das):
        z_re = sol.z[n].real if sol.z is not None else ""
        z_im = sol.z[n].imag if sol.z is not None else ""
        rows.append([n, sol.u[n].real, sol.u[n].imag, z_re, z_im,
                     sol.selection.t[n], int(sol.selection.t_rounded[n])])
    _write_csv(out_dir / "solution.csv", cfg,
               ["antenna", "u_re", "u_im", "z_re", "z_im", "t", "t_rounded"], rows,
               extra_comments=[
                   "variant=%s status=%s iterations=%d" % (variant.value, sol.status.value, sol.iterations),
                   "total_mw=%s tx_mw=%s circuit_mw=%s" % (
                       _fnum(sol.power.total_mw), _fnum(sol.power.tx_mw), _fnum(sol.power.circuit_mw)),
               ])

    rep = oracle.mc_validate(sol, ch, cfg, sym, n_samples, np.random.default_rng(cfg.seed + 2))
    mrows = [["n_samples", rep.n_samples], ["ir_ci_prob", rep.ir_ci_prob],
             ["mean_margin", rep.mean_margin], ["worst_violation", rep.worst_violation]]
    for k, (p, q) in enumerate(zip(rep.eve_destr_prob, rep.eve_sinr_exceed_prob)):
        mrows.append([f"eve{k}_destr_prob", p])
        mrows.append([f"eve{k}_sinr_exceed_prob", q])
    _write_csv(out_dir / "mc_report.csv", cfg, ["metric", "value"], mrows)

    _write_csv(out_dir / "trace.csv", cfg, ["iteration", "objective_mw"],
               [[i + 1, v] for i, v in enumerate(sol.trace)])

    # the same rng seed as the report, so region points reproduce its draws
    r_d, r_k = oracle.ir_points(sol, ch, cfg, sym, n_samples, np.random.default_rng(cfg.seed + 2))
    sigma_n = math.sqrt(noise_power(cfg))
    prows = [["ir", p.real, p.imag] for p in r_d]
    for k in range(r_k.shape[0]):
        prows.extend([[f"eve{k}", p.real, p.imag] for p in r_k[k]])
    _write_csv(out_dir / "region_samples.csv", cfg, ["who", "re", "im"], prows,
               extra_comments=[
                   "tan_theta=%s" % _fnum(SymbolSpec(cfg.m_psk).tan_theta),
                   "radius_d=%s" % _fnum(sigma_n * math.sqrt(cfg.gamma_d_lin)),
                   "radius_k=%s" % _fnum(sigma_n * math.sqrt(cfg.gamma_k_lin)),
               ])
    return sol


def run_sweep(cfg: ScenarioConfig, spec: SweepSpec, out_dir: Path, n_samples: int = 2000):
    """Figure-style sweep: one CSV row per (variant, layout, value, trial)."""
    field_name = _SWEEP_FIELD[spec.sweep_var]
    rows = []
    for variant in spec.variants:
        for layout in spec.layouts:
            for value in spec.values:
                cast = int(value) if field_name == "n_eves" else float(value)
                for trial in range(spec.n_trials):
                    c = with_overrides(cfg, layout=layout, seed=cfg.seed + trial,
                                       **{field_name: cast})
                    dep, ch = _instance(c)
                    sym = SymbolSpec(c.m_psk)
                    try:
                        sol = _solve(variant, ch, c, sym, no_as=spec.no_as)
                    except (SolverFailure, FallbackAllOn) as exc:
                        rows.append([variant.value, layout.value, spec.sweep_var.value,
                                     value, trial, "", "", "", "", "", type(exc).__name__, ""])
                        continue
                    rep = oracle.mc_validate(sol, ch, c, sym, n_samples,
                                             np.random.default_rng(c.seed + 2))
                    rows.append([variant.value, layout.value, spec.sweep_var.value, value,
                                 trial, sol.power.total_mw, sol.power.tx_mw,
                                 sol.power.circuit_mw, int(sol.selection.t_rounded.sum()),
                                 sol.iterations, sol.status.value, rep.ir_ci_prob])
    header = ["variant", "layout", "sweep_var", "value", "trial", "total_mw", "tx_mw",
              "circuit_mw", "active_antennas", "iterations", "status", "ir_ci_prob"]
    _write_csv(out_dir / "sweep.csv", cfg, header, rows)

    summary = []
    for variant in spec.variants:
        for layout in spec.layouts:
            for value in spec.values:
                totals = [r[5] for r in rows
                          if r[0] == variant.value and r[1] == layout.value
                          and r[3] == value and r[5] != ""]
                if totals:
                    summary.append([variant.value, layout.value, value,
                                    float(np.mean(totals)), float(np.std(totals)), len(totals)])
                else:
                    summary.append([variant.value, layout.value, value, "", "", 0])
    _write_csv(out_dir / "sweep_summary.csv", cfg,
               ["variant", "layout", "value", "mean_total_mw", "std_total_mw", "n_ok"], summary)
    return rows


def activation_heatmap(cfg: ScenarioConfig, variant: Variant, n_trials: int, out_dir: Path):
    """Per-antenna activation frequency over random user placements."""
    counts = np.zeros(cfg.n_das)
    solved = 0
    dep0 = make_deployment(cfg)
    sym = SymbolSpec(cfg.m_psk)
    for trial in range(n_trials):
        c = with_overrides(cfg, seed=cfg.seed + trial)
        dep, ch = _instance(c)
        try:
            sol = sca_solve(variant, ch, c, sym)
        except (SolverFailure, FallbackAllOn):
            continue
        counts += sol.selection.t_rounded
        solved += 1
    freq = counts / max(solved, 1)
    rows = [[n, dep0.da_positions[n, 0], dep0.da_positions[n, 1], freq[n]]
            for n in range(cfg.n_das)]
    _write_csv(out_dir / "heatmap.csv", cfg, ["antenna", "x_m", "y_m", "activation_freq"],
               rows, extra_comments=[f"n_trials={n_trials} solved={solved}"])
    return freq, solved


def validate(cfg: ScenarioConfig, n_samples: int) -> list[tuple[str, bool, str]]:
    """Invariant suite: MC bars, brute force agreement at small N, threshold
    monotonicity. Returns (check, ok, detail) rows."""
    checks = []
    sym = SymbolSpec(cfg.m_psk)

    # MC bars on a derived-covariance probabilistic solve. Per-constraint
    # level eta gives a provable joint bound of 2*eta - 1 (union bound), so
    # that is the bar for the joint constructive rate; each Eve rate is
    # covered by a single constraint and gets the full eta - 0.02 bar.
    c = with_overrides(cfg, cov_mode="derived")
    dep, ch = _instance(c)
    try:
        sol = sca_solve(Variant.IMPERFECT_PROB, ch, c, sym)
        rep = oracle.mc_validate(sol, ch, c, sym, n_samples, np.random.default_rng(c.seed + 2))
        bar_ir = 2.0 * c.eta_d - 1.0 - 0.02
        ok = rep.ir_ci_prob >= bar_ir
        checks.append(("mc_ir_ci_prob", ok, f"{rep.ir_ci_prob:.4f} >= {bar_ir:.4f}"))
        bar_k = c.eta_k - 0.02
        for k, p in enumerate(rep.eve_destr_prob):
            checks.append((f"mc_eve{k}_destr_prob", p >= bar_k, f"{p:.4f} >= {bar_k:.4f}"))
    except (SolverFailure, FallbackAllOn) as exc:
        checks.append(("mc_probabilistic_solve", False, str(exc)))

    # deterministic worst case: no violations inside the error ball
    cd = with_overrides(cfg, sproc_mode="norm_robust")
    try:
        sold = sca_solve(Variant.IMPERFECT_DET, ch, cd, sym)
        repd = oracle.mc_validate(sold, ch, cd, sym, max(n_samples, 1000),
                                  np.random.default_rng(cd.seed + 3),
                                  ball_radius=math.sqrt(cd.sigma_ball))
        checks.append(("det_inball_violations", repd.worst_violation == 0.0,
                       f"worst={repd.worst_violation:.3g}"))
    except (SolverFailure, FallbackAllOn) as exc:
        checks.append(("det_solve", False, str(exc)))

    # brute-force agreement at reduced size
    cb = with_overrides(cfg, n_das=4, n_eves=min(cfg.n_eves, 2))
    depb, chb = _instance(cb)
    try:
        solb = sca_solve(Variant.IMPERFECT_PROB, chb, cb, sym)
        bf = oracle.brute_force_selection(Variant.IMPERFECT_PROB, chb, cb, sym)
        if bf.feasible:
            gap = solb.power.total_mw - bf.best_total_mw
            checks.append(("bruteforce_dominates", gap >= -1e-6, f"gap={gap:.4g} mW"))
            checks.append(("bruteforce_gap_5pct",
                           solb.power.total_mw <= 1.05 * bf.best_total_mw,
                           f"sca={solb.power.total_mw:.4g} bf={bf.best_total_mw:.4g}"))
        else:
            checks.append(("bruteforce", False, "no feasible selection"))
    except (SolverFailure, FallbackAllOn) as exc:
        checks.append(("bruteforce_solve", False, str(exc)))

    # threshold monotonicity on fixed channels
    totals = []
    try:
        for g in (0.0, 10.0, 20.0):
            cg = with_overrides(cfg, gamma_d_db=g)
            sol = sca_solve(Variant.IMPERFECT_PROB, ch, cg, sym)
            totals.append(sol.power.total_mw)
        mono = all(b >= a - 1e-6 for a, b in zip(totals, totals[1:]))
        checks.append(("gamma_d_monotone", mono, " -> ".join("%.4g" % t for t in totals)))
    except (SolverFailure, FallbackAllOn) as exc:
        checks.append(("gamma_d_monotone", False, str(exc)))
    return checks


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dasec", description="Secure precoding with antenna selection: experiment harness")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, samples_default):
        sp.add_argument("--config", required=True, help="path to a key = value config file")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out-dir", default="out", help="directory for CSV outputs")
        sp.add_argument("--samples", type=int, default=samples_default, help="Monte Carlo sample count")
        sp.add_argument("--variant", default="imperfect-prob",
                        choices=[v.value for v in Variant])

    sp = sub.add_parser("run", help="single solve with reports")
    common(sp, 5000)

    sp = sub.add_parser("sweep", help="figure-style parameter sweep")
    common(sp, 2000)
    sp.add_argument("--sweep-var", required=True, choices=[v.value for v in SweepVar])
    sp.add_argument("--values", required=True, help="comma-separated ascending values")
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--layouts", default="DaGrid", help="comma-separated layouts")
    sp.add_argument("--no-as", action="store_true", help="force all antennas on (no selection)")

    sp = sub.add_parser("heatmap", help="per-antenna activation frequency")
    common(sp, 0)
    sp.add_argument("--trials", type=int, default=50)

    sp = sub.add_parser("validate", help="invariant suite; nonzero exit on failure")
    common(sp, 20000)

    sp = sub.add_parser("bruteforce", help="exhaustive selection at small N")
    common(sp, 0)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = with_overrides(cfg, seed=args.seed)
        variant = Variant(args.variant)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out_dir)

    try:
        if args.command == "run":
            sol = run_single(cfg, variant, out_dir, args.samples)
            print(f"status={sol.status.value} total_mw={sol.power.total_mw:.6g} "
                  f"active={int(sol.selection.t_rounded.sum())}/{cfg.n_das} "
                  f"iterations={sol.iterations}")
        elif args.command == "sweep":
            try:
                spec = SweepSpec(
                    sweep_var=SweepVar(args.sweep_var),
                    values=[float(v) for v in args.values.split(",")],
                    n_trials=args.trials,
                    variants=(variant,),
                    layouts=tuple(Layout(s) for s in args.layouts.split(",")),
                    no_as=args.no_as,
                )
            except ValueError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            run_sweep(cfg, spec, out_dir, n_samples=max(args.samples, 1000))
            print(f"sweep written to {out_dir}/sweep.csv")
        elif args.command == "heatmap":
            freq, solved = activation_heatmap(cfg, variant, args.trials, out_dir)
            print(f"heatmap written to {out_dir}/heatmap.csv ({solved}/{args.trials} solved)")
        elif args.command == "validate":
            checks = validate(cfg, args.samples)
            width = max(len(name) for name, _, _ in checks)
            failed = 0
            for name, ok, detail in checks:
                print(f"{name.ljust(width)}  {'PASS' if ok else 'FAIL'}  {detail}")
            failed = sum(1 for _, ok, _ in checks if not ok)
            if failed:
                print(f"{failed} check(s) failed", file=sys.stderr)
                return EXIT_VALIDATION
        elif args.command == "bruteforce":
            dep, ch = _instance(cfg)
            bf = oracle.brute_force_selection(variant, ch, cfg, SymbolSpec(cfg.m_psk))
            rows = [[",".join(str(int(b)) for b in bits),
                     total if total is not None else "infeasible"]
                    for bits, total in bf.table]
            _write_csv(out_dir / "bruteforce.csv", cfg, ["t", "total_mw"], rows)
            if bf.feasible:
                print(f"best_t={bf.best_t.astype(int)} best_total_mw={bf.best_total_mw:.6g}")
            else:
                print("no feasible selection", file=sys.stderr)
                return EXIT_VALIDATION
    except (SolverFailure, FallbackAllOn) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
