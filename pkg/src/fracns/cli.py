"""Command-line entry point and pipeline orchestration.

Run directories are reproducible and self-describing: config.ini (verbatim
input), params.json, fields/, the documented CSVs, and verdicts.txt.  A
completed directory whose stored config matches the requested one is never
recomputed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from . import energy as energy_mod
from . import glue as glue_mod
from . import mild as mild_mod
from . import montecarlo as mc
from .bilinear import VSpaceSpec, bilinear_B, trilinear_b, v_norm, vdual_bound
from .norms import hs, lebesgue, space_norm
from .params import ProblemParams, derive_params, derive_uniqueness_spec, write_params_json
from .randomize import (
    distribution,
    hs_profile_coeffs,
    make_plan,
    single_mode_coeffs,
    synthesize,
    taylor_green_coeffs,
    write_plan,
)
from .semigroup import Trajectory, graded_times, heat_flow, heat_flow_trajectory
from .spectral import inner, l2_norm, make_grid, random_field, write_field, zero_field
from .verifiers import (
    CSV_HEADER,
    make_forcing_family,
    saturating_profile,
    verify_history_operators,
    verify_maximal_regularity,
    verify_smoothing,
    verify_time_hls,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

LEMMA_IDS = ("PQ", "EY", "MR", "MR1", "ML", "HL", "NW", "SE", "TAIL", "A16", "A17", "EE")


@dataclass
class RunConfig:
    """Flat key = value configuration; validated before any compute."""

    d: int = 2
    N: int = 32
    alpha: float = 0.8
    s: float = -0.4
    seed: int = 0
    dist: str = "gaussian"
    cutoff: int = 8
    T: float = 1.0
    dt: float = 1e-3
    tau: str = "auto"  # "auto" or an explicit time
    tau_threshold: float = 0.05
    tol: float = 1e-8
    grading_rho: float = 2.0
    mild_nodes: int = 120
    select_nodes: int = 200
    profile: str = "hs"  # hs | taylor-green | zero | single-mode
    profile_delta: float = 0.25
    amplitude: float = 1.0
    normalize_y1: float = 0.0  # > 0: rescale data so ||h||_{Y_1} equals this
    gronwall_c: float = 0.0  # 0: self-calibrate with a 1.5 safety factor
    weakform_tests: int = 50
    mc_samples: int = 10000
    mc_check: str = "khinchin"
    threads: int = 1
    out: str = "runs/run"

    def text(self) -> str:
        lines = []
        for f in dc_fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {ln}: expected 'key = value', got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        out[key] = val
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    raw = {}
    if path is not None:
        raw.update(parse_config_text(Path(path).read_text()))
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig()
    casts = {f.name: f.type for f in dc_fields(cfg)}
    for key, val in raw.items():
        if key not in casts:
            raise ValueError(f"unknown config key {key!r}")
        kind = casts[key]
        if kind == "int":
            val = int(val)
        elif kind == "float":
            val = float(val)
        setattr(cfg, key, val)
    return cfg


def write_csv(path, header: str, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(x) for x in row) + "\n")


def _fmt_cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


# ---------------------------------------------------------------------------
# Data construction
# ---------------------------------------------------------------------------

def build_data(cfg: RunConfig, params: ProblemParams):
    """Returns (grid, plan, u0) with the configured amplitude convention."""
    grid = make_grid(cfg.d, cfg.N)
    if cfg.cutoff > grid.N // 3:
        raise ValueError(
            f"cutoff {cfg.cutoff} above the dealiased band N/3 = {grid.N // 3}"
        )
    if cfg.profile == "hs":
        coeff_fn = hs_profile_coeffs(cfg.s, cfg.profile_delta, cfg.d)
        override = None
    elif cfg.profile == "taylor-green":
        if cfg.d != 2:
            raise ValueError("taylor-green profile requires d = 2")
        coeff_fn = taylor_green_coeffs
        override = "ones"
    elif cfg.profile == "single-mode":
        coeff_fn = single_mode_coeffs((1,) + (0,) * (cfg.d - 1))
        override = None
    elif cfg.profile == "zero":
        coeff_fn = lambda modes: np.zeros((modes.shape[0], cfg.d - 1))
        override = "ones"
    else:
        raise ValueError(f"unknown data profile {cfg.profile!r}")
    plan = make_plan(grid, cfg.cutoff, coeff_fn, cfg.dist, seed=cfg.seed)
    g = np.ones_like(plan.coeffs) if override == "ones" else None
    u0 = synthesize(plan, override_g=g)
    u0 = u0 * cfg.amplitude
    if cfg.normalize_y1 > 0 and l2_norm(u0) > 0:
        times = graded_times(1.0, cfg.select_nodes, cfg.grading_rho)
        h = heat_flow_trajectory(u0, times, params.alpha)
        y1 = mild_mod.y_norm(h, params, 1.0)
        u0 = u0 * (cfg.normalize_y1 / y1)
    return grid, plan, u0


def mild_time_grid(tau: float, dt: float, m_graded: int, rho: float) -> np.ndarray:
    """Graded nodes on [0, tau/2] then one node per energy step on [tau/2, tau]."""
    half = graded_times(tau / 2.0, m_graded, rho)
    n_half = int(round((tau / 2.0) / dt))
    overlap = tau / 2.0 + dt * np.arange(n_half + 1)
    return np.unique(np.concatenate([half, overlap]))


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

class StageFailure(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage
        self.exc = exc


def run_pipeline(cfg: RunConfig, out_dir: Path) -> int:
    """randomize -> heat flow -> select tau -> picard -> galerkin -> glue ->
    certificates; returns the process exit code."""
    out_dir = Path(out_dir)
    config_text = cfg.text()
    verdicts_path = out_dir / "verdicts.txt"
    stored = out_dir / "config.ini"
    if verdicts_path.exists() and stored.exists() and stored.read_text() == config_text:
        last = verdicts_path.read_text().strip().splitlines()[-1]
        code = int(last.split()[-1]) if last.startswith("EXIT") else EXIT_FAIL
        print(f"{out_dir}: already complete (config unchanged), exit {code}")
        return code
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "fields").mkdir(exist_ok=True)
    stored.write_text(config_text)

    verdicts = []
    stage = "params"
    try:
        params = derive_params(cfg.d, cfg.alpha, cfg.s)
        write_params_json(out_dir / "params.json", params, cfg.N)
        uspec = derive_uniqueness_spec(params)

        stage = "randomize"
        grid, plan, u0 = build_data(cfg, params)
        write_plan(out_dir / "plan.txt", plan)
        write_field(out_dir / "fields" / "u0.txt", u0, time=0.0, alpha=cfg.alpha)

        stage = "select_tau"
        horizon = min(1.0, cfg.T)
        sel_times = graded_times(horizon, cfg.select_nodes, cfg.grading_rho)
        h_sel = heat_flow_trajectory(u0, sel_times, params.alpha)
        if cfg.tau == "auto":
            tau = mild_mod.select_tau(h_sel, cfg.tau_threshold, params)
        else:
            tau = float(cfg.tau)
        n_half = max(1, int(round((tau / 2.0) / cfg.dt)))
        dt = (tau / 2.0) / n_half

        stage = "picard"
        times_m = mild_time_grid(tau, dt, cfg.mild_nodes, cfg.grading_rho)
        h_m = glue_mod.h_on(times_m, u0, params.alpha)
        w1, pstate = mild_mod.picard_solve(h_m, tau, params.alpha, params, tol=cfg.tol)
        rows = []
        for i, res in enumerate(pstate.residuals, 1):
            ratio = pstate.ratios[i - 2] if i >= 2 else math.nan
            rows.append((i, res, ratio))
        write_csv(out_dir / "picard.csv", "iteration,residual,ratio", rows)
        verdicts.append(("picard_converged", pstate.converged))
        verdicts.append(("picard_ball_certificate", pstate.ball_certificate))
        write_field(out_dir / "fields" / "w1_half_tau.txt", w1.at(tau / 2.0),
                    time=tau / 2.0, alpha=cfg.alpha)
        reg = mild_mod.regularity_report(w1, h_m, params)
        write_csv(out_dir / "norms.csv", "time_or_composite,spec_string,value",
                  [("mild", k, v) for k, v in reg.rows()])

        stage = "energy"
        rec_overlap = times_m[times_m >= tau / 2.0 - 1e-12]
        n_total = int(round((cfg.T - tau / 2.0) / dt))
        stride = max(1, n_total // 64)
        rec_coarse = tau / 2.0 + dt * np.arange(0, n_total + 1, stride)
        rec = np.unique(np.concatenate([rec_overlap, rec_coarse, [tau / 2.0 + n_total * dt]]))
        w2, ledger = energy_mod.run_energy(
            w1.at(tau / 2.0), u0, params, tau / 2.0, tau / 2.0 + n_total * dt, dt,
            record_times=rec,
        )
        c_fit = cfg.gronwall_c
        self_calibrated = c_fit <= 0
        if self_calibrated:
            c_fit = 1.5 * max(energy_mod.fit_gronwall_constant([ledger], params), 1.0)
        gron = energy_mod.gronwall_check(ledger, params, c_fit)
        curve = c_fit * energy_mod.gronwall_rhs_curve(ledger, params)
        write_csv(
            out_dir / "energy.csv",
            "time,l2_sq,diss_sq,rhs_bwwh,rhs_bhwh,e_w,gronwall_rhs,margin",
            [(t, a, b, c, dd, e, g, g - e) for t, a, b, c, dd, e, g in zip(
                ledger.times, ledger.l2_sq, ledger.diss_sq, ledger.rhs_bwwh,
                ledger.rhs_bhwh, ledger.e_w, curve)],
        )
        verdicts.append(("gronwall_margin_positive", gron.verdict))
        ident = energy_mod.energy_identity_residual(ledger)

        stage = "glue"
        tol_model = 10.0 * cfg.tol + 100.0 * dt**2 * max(l2_norm(f) for f in w1.fields)
        w, overlap = glue_mod.glue_solutions(w1, w2, tol_model)
        write_csv(out_dir / "overlap.csv", "time,mismatch",
                  list(zip(overlap.times, overlap.mismatches)))
        verdicts.append(("overlap_within_tolerance", overlap.max_mismatch <= tol_model))
        v1_win = w1.window(tau / 2.0, tau)
        ts_win = v1_win.times
        wsu = glue_mod.weak_strong_residual(
            v1_win, Trajectory(ts_win, [w2.at(t) for t in ts_win]),
            glue_mod.h_on(ts_win, u0, params.alpha), uspec, noise_level=tol_model,
        )
        verdicts.append(("weak_strong_uniqueness", wsu.verdict))

        stage = "assemble"
        h_full = glue_mod.h_on(w.times, u0, params.alpha)
        u = glue_mod.assemble_u(h_full, w)
        certs = glue_mod.solution_certificates(w, params)
        rng = np.random.default_rng(cfg.seed + 99)
        tests = [random_field(grid, cfg.d, rng, divergence_free=True)
                 for _ in range(cfg.weakform_tests)]
        wf = glue_mod.weak_form_residual(u, params, tests, (tau / 2.0, min(cfg.T, tau * 4)))
        write_field(out_dir / "fields" / "u_final.txt", u.fields[-1],
                    time=float(u.times[-1]), alpha=cfg.alpha)
        write_field(out_dir / "fields" / "w_final.txt", w.fields[-1],
                    time=float(w.times[-1]), alpha=cfg.alpha)

        stage = "certificates"
        u_l2 = np.array([l2_norm(f) for f in u.fields])
        h_l2 = np.array([l2_norm(f) for f in h_full.fields])
        w_l2 = np.array([l2_norm(f) for f in w.fields])
        write_csv(out_dir / "decay.csv", "time,u_l2,h_l2,w_l2",
                  list(zip(u.times, u_l2, h_l2, w_l2)))
        late = u.times >= tau / 2.0
        if np.all(u_l2[late] > 0):
            rate = -np.polyfit(u.times[late], np.log(u_l2[late]), 1)[0]
        else:
            rate = math.nan
        active = np.any(plan.coeffs != 0.0, axis=1)
        shells = np.unique(np.round(plan.mode_norms()[active] ** 2))
        rate_theory = float(shells[0] ** params.alpha) if len(shells) == 1 else math.nan
        cert_rows = [
            ("tau", tau, math.nan, "info"),
            ("lambda_tau", pstate.lambda_tau, cfg.tau_threshold, _pf(
                pstate.lambda_tau <= cfg.tau_threshold)),
            ("picard_iterations", pstate.iterations, 15, _pf(pstate.iterations <= 15)),
            ("energy_identity_residual", ident, math.nan, "info"),
            ("gronwall_c_fit", c_fit, math.nan,
             "self-calibrated" if self_calibrated else "configured"),
            ("gronwall_margin", gron.ratio, 0.0, _pf(gron.verdict)),
            ("overlap_max_mismatch", overlap.max_mismatch, tol_model,
             _pf(overlap.max_mismatch <= tol_model)),
            ("weak_strong_c_fit", wsu.fitted, math.nan, _pf(wsu.verdict)),
            ("weighted_sup_l2", certs["weighted_sup_l2"], math.nan,
             _pf(math.isfinite(certs["weighted_sup_l2"]))),
            ("weighted_l2_halpha", certs["weighted_l2_halpha"], math.nan,
             _pf(math.isfinite(certs["weighted_l2_halpha"]))),
            ("continuity_modulus", certs["continuity_modulus"], math.nan,
             _pf(math.isfinite(certs["continuity_modulus"]))),
            ("weak_form_residual", wf["max_relative_residual"], 1e-4,
             _pf(wf["max_relative_residual"] <= 1e-4)),
            ("decay_rate_fitted", rate, math.nan, "info"),
            ("decay_rate_theory", rate_theory, math.nan, "info"),
        ]
        write_csv(out_dir / "certificates.csv", "name,value,threshold,verdict", cert_rows)
        verdicts.append(("weak_form_residual", wf["max_relative_residual"] <= 1e-4))
        verdicts.append(("certificates_finite", all(
            math.isfinite(certs[k]) for k in
            ("weighted_sup_l2", "weighted_l2_halpha", "continuity_modulus"))))
    except Exception as exc:  # partial run directory retained
        with open(verdicts_path, "w") as fh:
            for name, ok in verdicts:
                fh.write(f"{name} {'PASS' if ok else 'FAIL'}\n")
            fh.write(f"stage_{stage} FAIL: {exc}\n")
            fh.write(f"EXIT {EXIT_FAIL}\n")
        raise StageFailure(stage, exc) from exc

    all_ok = all(ok for _, ok in verdicts)
    code = EXIT_OK if all_ok else EXIT_FAIL
    with open(verdicts_path, "w") as fh:
        for name, ok in verdicts:
            fh.write(f"{name} {'PASS' if ok else 'FAIL'}\n")
        fh.write(f"EXIT {code}\n")
    return code


def _pf(ok: bool) -> str:
    return "pass" if ok else "fail"


# ---------------------------------------------------------------------------
# Verifier suite
# ---------------------------------------------------------------------------

def verify_suite(cfg: RunConfig, lemmas, out_dir: Path | None = None) -> tuple[dict, list]:
    """Run the requested lemma verifiers with config-derived parameters."""
    unknown = [l for l in lemmas if l not in LEMMA_IDS]
    if unknown:
        raise ValueError(f"unknown lemma id(s) {unknown}; known: {LEMMA_IDS}")
    params = derive_params(cfg.d, cfg.alpha, cfg.s)
    verdicts = {}
    rows = []
    rng = np.random.default_rng(cfg.seed)

    for lemma in lemmas:
        if lemma == "PQ":
            grid = make_grid(2, 256)
            phi = saturating_profile(grid, delta=0.05)
            rep = verify_smoothing(phi, 1.0, 2.0, 2.0, cfg.alpha, (1e-2, 1e-1),
                                   saturating=True)
        elif lemma == "EY":
            rep = verify_time_hls([((0.0, 1.0), lambda s: 1.0),
                                   ((0.0, 1.0), lambda s: s),
                                   ((0.0, 2.0), lambda s: math.exp(-s))],
                                  0.5, 4.0 / 3.0, 4.0)
        elif lemma == "MR":
            grid = make_grid(cfg.d, 16)
            fam = make_forcing_family(grid, cfg.d, 8, seed=cfg.seed)
            rep = verify_maximal_regularity(fam, 2.0, 2.0, cfg.alpha, n_times=32)
        elif lemma == "MR1":
            grid = make_grid(cfg.d, 16)
            fam = make_forcing_family(grid, cfg.d, 4, seed=cfg.seed)
            rep = verify_maximal_regularity(fam, 2.0, 2.0, cfg.alpha,
                                            zeta=2.0 * cfg.alpha + 0.2, n_times=24)
        elif lemma in ("ML", "HL"):
            grid = make_grid(cfg.d, 16)
            fam = make_forcing_family(grid, cfg.d, 4, seed=cfg.seed)
            rep = verify_history_operators(fam, max(1.0, cfg.alpha), 0.25, cfg.alpha,
                                           n_times=24)
        elif lemma == "NW":
            rep = mc.khinchin_suite(cfg.dist, max(cfg.mc_samples, 1000), params.r_s,
                                    seed=cfg.seed)
        elif lemma == "SE":
            grid = make_grid(cfg.d, cfg.N)
            rep = mc.se_suite(grid, params, cfg.dist, max(cfg.mc_samples // 5, 1000),
                              seed=cfg.seed, cutoffs=(cfg.cutoff // 2, cfg.cutoff))
        elif lemma == "TAIL":
            grid = make_grid(cfg.d, cfg.N)
            plan = make_plan(grid, cfg.cutoff,
                             hs_profile_coeffs(cfg.s, cfg.profile_delta, cfg.d),
                             cfg.dist, seed=cfg.seed)
            norms = mc.sample_heatflow_norms(plan, math.inf, 0.0, cfg.s, cfg.alpha,
                                             max(cfg.mc_samples, 1000))
            rep = mc.tail_check(norms, params.r_s)
        elif lemma in ("A16", "A17"):
            rep = _identity_report(lemma, cfg, rng)
        elif lemma == "EE":
            rep = _ee_report(cfg, rng)
        verdicts[lemma] = rep.verdict
        rows.append(rep.csv_row())

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "verify.csv", "w") as fh:
            fh.write(CSV_HEADER + "\n")
            fh.write("\n".join(rows) + "\n")
    return verdicts, rows


def _identity_report(lemma: str, cfg: RunConfig, rng):
    from .verifiers import VerifierReport

    grid = make_grid(cfg.d, cfg.N)
    worst = 0.0
    for _ in range(20):
        f = random_field(grid, cfg.d, rng, divergence_free=True)
        g = random_field(grid, cfg.d, rng)
        h = random_field(grid, cfg.d, rng)
        scale = max(l2_norm(f) * l2_norm(g) * l2_norm(h) * grid.N, 1e-300)
        if lemma == "A17":
            worst = max(worst, abs(trilinear_b(f, h, h)) / scale)
        else:
            worst = max(worst, abs(trilinear_b(f, g, h) + trilinear_b(f, h, g)) / scale)
    return VerifierReport(lemma, worst, 0.0, worst, 1e-12, worst <= 1e-12,
                          details={"N": grid.N, "draws": 20})


def _ee_report(cfg: RunConfig, rng):
    from .verifiers import VerifierReport

    grid = make_grid(cfg.d, cfg.N)
    vspec = VSpaceSpec(cfg.d, cfg.alpha)
    worst = 0.0
    f = random_field(grid, cfg.d, rng, divergence_free=True)
    g = random_field(grid, cfg.d, rng)
    Bfg = bilinear_B(f, g)
    bound, _ = vdual_bound(f, g, vspec)
    for _ in range(100):
        h = random_field(grid, cfg.d, rng, divergence_free=True)
        pairing = abs(inner(Bfg, h))
        worst = max(worst, pairing / max(bound * v_norm(h, vspec), 1e-300))
    return VerifierReport("EE", worst, 1.0, worst, 0.0, worst <= 1.0,
                          details={"N": grid.N, "draws": 100})


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _common(cfg_args) -> RunConfig:
    overrides = {k: v for k, v in vars(cfg_args).items()
                 if k in {f.name for f in dc_fields(RunConfig)} and v is not None}
    cfg = load_config(cfg_args.config, overrides)
    if cfg.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(cfg.threads))
    return cfg


def cmd_run(args) -> int:
    cfg = _common(args)
    try:
        derive_params(cfg.d, cfg.alpha, cfg.s)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_pipeline(cfg, Path(cfg.out))
    except StageFailure as exc:
        print(exc, file=sys.stderr)
        return EXIT_FAIL


def cmd_mild(args) -> int:
    cfg = _common(args)
    try:
        params = derive_params(cfg.d, cfg.alpha, cfg.s)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid, plan, u0 = build_data(cfg, params)
    sel = graded_times(min(1.0, cfg.T), cfg.select_nodes, cfg.grading_rho)
    h_sel = heat_flow_trajectory(u0, sel, params.alpha)
    tau = (mild_mod.select_tau(h_sel, cfg.tau_threshold, params)
           if cfg.tau == "auto" else float(cfg.tau))
    n_half = max(1, int(round((tau / 2.0) / cfg.dt)))
    dt = (tau / 2.0) / n_half
    times_m = mild_time_grid(tau, dt, cfg.mild_nodes, cfg.grading_rho)
    h_m = glue_mod.h_on(times_m, u0, params.alpha)
    w1, st = mild_mod.picard_solve(h_m, tau, params.alpha, params, tol=cfg.tol)
    rows = [(i, res, st.ratios[i - 2] if i >= 2 else math.nan)
            for i, res in enumerate(st.residuals, 1)]
    write_csv(out / "picard.csv", "iteration,residual,ratio", rows)
    write_field(out / "w1_final.txt", w1.fields[-1], time=tau, alpha=cfg.alpha)
    print(f"tau = {tau:.6g}, lambda_tau = {st.lambda_tau:.6g}, "
          f"iterations = {st.iterations}, converged = {st.converged}")
    return EXIT_OK if st.converged else EXIT_FAIL


def cmd_energy(args) -> int:
    cfg = _common(args)
    try:
        params = derive_params(cfg.d, cfg.alpha, cfg.s)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid, plan, u0 = build_data(cfg, params)
    t0 = args.t0 if args.t0 is not None else 0.0
    if args.w0:
        from .spectral import read_field

        w0, _ = read_field(args.w0)
    else:
        w0 = zero_field(grid, cfg.d)
    traj, ledger = energy_mod.run_energy(w0, u0, params, t0, cfg.T, cfg.dt)
    c = 1.5 * max(energy_mod.fit_gronwall_constant([ledger], params), 1.0)
    curve = c * energy_mod.gronwall_rhs_curve(ledger, params)
    write_csv(out / "energy.csv",
              "time,l2_sq,diss_sq,rhs_bwwh,rhs_bhwh,e_w,gronwall_rhs,margin",
              [(t, a, b, cc, d_, e, g, g - e) for t, a, b, cc, d_, e, g in zip(
                  ledger.times, ledger.l2_sq, ledger.diss_sq, ledger.rhs_bwwh,
                  ledger.rhs_bhwh, ledger.e_w, curve)])
    resid = energy_mod.energy_identity_residual(ledger)
    print(f"energy run [{t0}, {cfg.T}] dt={cfg.dt}: identity residual/unit time "
          f"= {resid:.3e}")
    return EXIT_OK


def cmd_mc(args) -> int:
    cfg = _common(args)
    try:
        params = derive_params(cfg.d, cfg.alpha, cfg.s)
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    check = args.check or cfg.mc_check
    n = args.samples or cfg.mc_samples
    grid = make_grid(cfg.d, cfg.N)
    summary = []
    if check == "khinchin":
        rep = mc.khinchin_suite(cfg.dist, n, params.r_s, seed=cfg.seed)
        rows = [(k, v["ratio"] if isinstance(v, dict) else v)
                for k, v in rep.details["ratios"].items()]
        write_csv(out / "mc_khinchin.csv", "family,ratio", rows)
        summary.append(("khinchin", rep.ratio, "pass" if rep.verdict else "fail"))
        ok = rep.verdict
    elif check == "senorm":
        rep = mc.se_suite(grid, params, cfg.dist, n, seed=cfg.seed,
                          cutoffs=(max(2, cfg.cutoff // 2), cfg.cutoff))
        rows = []
        for case, d in rep.details["ratios"].items():
            rows += [(f"{case}/{k}", v) for k, v in d.items()]
        write_csv(out / "mc_senorm.csv", "case,ratio", rows)
        summary.append(("senorm", rep.ratio, "pass" if rep.verdict else "fail"))
        ok = rep.verdict
    elif check == "tail":
        plan = make_plan(grid, cfg.cutoff,
                         hs_profile_coeffs(cfg.s, cfg.profile_delta, cfg.d),
                         cfg.dist, seed=cfg.seed)
        norms = mc.sample_heatflow_norms(plan, math.inf, 0.0, cfg.s, cfg.alpha, n)
        rep = mc.tail_check(norms, params.r_s)
        write_csv(out / "mc_tail.csv", "lambda,exceedance",
                  list(zip(rep.details["lambda_grid"], rep.details["exceedance"])))
        summary.append(("tail", rep.fitted, "pass" if rep.verdict else "fail"))
        ok = rep.verdict
    else:
        print(f"unknown mc check {check!r}", file=sys.stderr)
        return EXIT_CONFIG
    write_csv(out / "mc_summary.csv", "check,statistic,verdict", summary)
    print(f"mc {check}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    cfg = _common(args)
    lemmas = []
    for item in args.lemmas or []:
        lemmas += [x.strip() for x in item.split(",") if x.strip()]
    if not lemmas:
        print("verify: empty lemma list, nothing to do")
        return EXIT_OK
    try:
        verdicts, rows = verify_suite(cfg, lemmas, out_dir=Path(cfg.out))
    except ValueError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for lemma, ok in verdicts.items():
        print(f"{lemma}: {'pass' if ok else 'FAIL'}")
    return EXIT_OK if all(verdicts.values()) else EXIT_FAIL


def cmd_norms(args) -> int:
    cfg = _common(args)
    from .spectral import read_field

    f, meta = read_field(args.field)
    rows = []
    for spec in (lebesgue(2), lebesgue(4), lebesgue(math.inf),
                 hs(cfg.s), hs(cfg.alpha), hs(1.0)):
        rows.append((f"t={meta['time']}", spec.label(), space_norm(f, spec)))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "norms.csv", "time_or_composite,spec_string,value", rows)
    for row in rows:
        print(f"{row[1]}: {row[2]:.9g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracns",
        description="Pseudo-spectral laboratory for the generalized Navier-Stokes "
                    "equations with randomized rough data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="flat key=value config file")
        p.add_argument("--out", type=str, default=None, help="run directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--dist", type=str, default=None,
                       choices=["gaussian", "rademacher", "uniform"], help="draw family")

    p_run = sub.add_parser("run", help="full pipeline into a run directory")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_mild = sub.add_parser("mild", help="small-time Picard solution only")
    common(p_mild)
    p_mild.add_argument("--tau", type=str, default=None, help="'auto' or explicit time")
    p_mild.add_argument("--threshold", dest="tau_threshold", type=float, default=None)
    p_mild.add_argument("--tol", type=float, default=None)
    p_mild.set_defaults(func=cmd_mild)

    p_en = sub.add_parser("energy", help="Galerkin energy solution only")
    common(p_en)
    p_en.add_argument("--t0", type=float, default=None)
    p_en.add_argument("--T", dest="T", type=float, default=None)
    p_en.add_argument("--dt", type=float, default=None)
    p_en.add_argument("--w0", type=str, default=None, help="initial field snapshot file")
    p_en.set_defaults(func=cmd_energy)

    p_mc = sub.add_parser("mc", help="Monte Carlo ensemble checks")
    common(p_mc)
    p_mc.add_argument("--samples", type=int, default=None)
    p_mc.add_argument("--check", type=str, default=None,
                      choices=["khinchin", "senorm", "tail"])
    p_mc.set_defaults(func=cmd_mc)

    p_ver = sub.add_parser("verify", help="lemma verifier suite")
    common(p_ver)
    p_ver.add_argument("lemmas", nargs="*", help=f"ids from {LEMMA_IDS}")
    p_ver.set_defaults(func=cmd_verify)

    p_norms = sub.add_parser("norms", help="norm battery of a field snapshot")
    common(p_norms)
    p_norms.add_argument("--field", type=str, required=True)
    p_norms.set_defaults(func=cmd_norms)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
