"""Experiment drivers and artifact emission.

A run is deterministic given its configuration: fixed seeds, fixed stepping,
stable serialization. Artifacts per output directory:

* ``config.json``      the exact configuration,
* ``timeseries.csv``   one diagnostics row per cadence step,
* ``snapshots/``       binary field snapshots (initial and final state),
* ``report_*.json``    comparison / bound / identity / dispersion reports,
* ``failure.json``     present only if the solver aborted mid-run,
* ``manifest.json``    config hash plus a content hash of every file above.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classical import NSState, ns_step
from .config import RunConfig
from .diagnostics import (
    DispersionReport, EpsilonBoundReport, KBoundsReport, VGrowthReport,
    displacement_bounds, epsilon_bound, k_bounds, pair_dispersion,
    record_classical, record_el, v_growth, write_timeseries_csv,
)
from .el import (
    ELState, WState, cotangent_step, derive, el_step, grad_ell_sup,
    initial_state, reset_labels,
)
from .errors import ConfigError, ElflowError, BlowUpError
from .fields import ScalarField, VectorField, l2_norm, sup_norm
from .identities import run_identity_suite, check_gamma_commutation, \
    check_C_evolution, make_test_state
from .initial import make_initial, random_scalar
from .snapshots import write_snapshot
from .spectral import gradient

__all__ = [
    "RunResult", "CompareReport", "run_classical", "run_el", "run_cotangent",
    "compare_runs", "execute", "bounds_suite", "identity_suite_with_orders",
]

RMS_BLOWUP_FACTOR = 1e6


@dataclass
class RunResult:
    config: RunConfig
    kind: str
    records: list = field(default_factory=list)
    times: list = field(default_factory=list)
    u_series: list = field(default_factory=list)
    w_series: list = field(default_factory=list)
    resets: list = field(default_factory=list)
    initial_state: object = None
    final_state: object = None
    failure: dict | None = None


def _plan_steps(cfg: RunConfig, u0: VectorField) -> tuple[int, float]:
    if cfg.dt is not None:
        steps = max(1, round(cfg.t_end / cfg.dt))
        if abs(steps * cfg.dt - cfg.t_end) > 1e-9 * cfg.t_end:
            steps = math.ceil(cfg.t_end / cfg.dt)
        return steps, cfg.t_end / steps
    peak = max(sup_norm(u0), 1e-12)
    dt = cfg.cfl_target * u0.grid.spacing / peak
    steps = max(1, math.ceil(cfg.t_end / dt))
    return steps, cfg.t_end / steps


def _guard_rms(u: VectorField, initial_rms: float, t: float) -> None:
    rms = float(np.sqrt(np.mean(u.components**2)))
    if rms > RMS_BLOWUP_FACTOR * max(initial_rms, 1e-300):
        raise BlowUpError(
            f"velocity RMS grew {rms / initial_rms:.3g}x past the initial value", t=t)


def _failure_dict(exc: ElflowError, t: float) -> dict:
    return {"error": type(exc).__name__, "message": str(exc), "t": t}


def run_classical(cfg: RunConfig) -> RunResult:
    grid = cfg.grid.build()
    forcing = cfg.forcing.build()
    u0 = make_initial(cfg.initial.kind, grid, cfg.initial.seed,
                      amplitude=cfg.initial.amplitude, band=cfg.initial.band,
                      mode=cfg.initial.mode)
    steps, dt = _plan_steps(cfg, u0)
    state = NSState(0.0, u0)
    result = RunResult(cfg, "classical", initial_state=state)
    initial_rms = float(np.sqrt(np.mean(u0.components**2)))

    def sample():
        result.records.append(record_classical(state, cfg.nu))
        result.times.append(state.t)
        result.u_series.append(state.u.copy())

    sample()
    try:
        for step in range(1, steps + 1):
            state = ns_step(state, forcing, dt, nu=cfg.nu, cfl_limit=cfg.cfl_limit)
            _guard_rms(state.u, initial_rms, state.t)
            if step % cfg.cadence == 0 or step == steps:
                sample()
    except ElflowError as exc:
        result.failure = _failure_dict(exc, state.t)
    result.final_state = state
    return result


def run_el(cfg: RunConfig, v0: VectorField | None = None) -> RunResult:
    grid = cfg.grid.build()
    forcing = cfg.forcing.build()
    u0 = make_initial(cfg.initial.kind, grid, cfg.initial.seed,
                      amplitude=cfg.initial.amplitude, band=cfg.initial.band,
                      mode=cfg.initial.mode)
    steps, dt = _plan_steps(cfg, u0)
    state = initial_state(v0 if v0 is not None else u0,
                          potential_mode=cfg.potential_mode)
    result = RunResult(cfg, "el", initial_state=state)
    initial_rms = float(np.sqrt(np.mean(u0.components**2)))

    def sample():
        d = derive(state)
        result.records.append(record_el(state, d, cfg.nu, m_list=cfg.m_list,
                                        forcing=forcing))
        result.times.append(state.t)
        result.u_series.append(d.u)
        result.w_series.append(d.w)

    sample()
    try:
        for step in range(1, steps + 1):
            state = el_step(state, forcing, dt, nu=cfg.nu, cfl_limit=cfg.cfl_limit)
            if cfg.reset.enabled and grad_ell_sup(state) > cfg.reset.threshold:
                state = reset_labels(state)
                result.resets.append(state.t)
            _guard_rms(state.v, initial_rms, state.t)
            if step % cfg.cadence == 0 or step == steps:
                sample()
    except ElflowError as exc:
        result.failure = _failure_dict(exc, state.t)
    result.final_state = state
    return result


def run_cotangent(cfg: RunConfig) -> RunResult:
    grid = cfg.grid.build()
    forcing = cfg.forcing.build()
    u0 = make_initial(cfg.initial.kind, grid, cfg.initial.seed,
                      amplitude=cfg.initial.amplitude, band=cfg.initial.band,
                      mode=cfg.initial.mode)
    steps, dt = _plan_steps(cfg, u0)
    state = WState(0.0, u0)
    result = RunResult(cfg, "cotangent", initial_state=state)
    initial_rms = float(np.sqrt(np.mean(u0.components**2)))

    from .spectral import leray_project

    def sample():
        u = leray_project(state.w)
        result.records.append(record_classical(NSState(state.t, u), cfg.nu))
        result.times.append(state.t)
        result.u_series.append(u)
        result.w_series.append(state.w.copy())

    sample()
    try:
        for step in range(1, steps + 1):
            state = cotangent_step(state, forcing, dt, nu=cfg.nu,
                                   cfl_limit=cfg.cfl_limit)
            _guard_rms(state.w, initial_rms, state.t)
            if step % cfg.cadence == 0 or step == steps:
                sample()
    except ElflowError as exc:
        result.failure = _failure_dict(exc, state.t)
    result.final_state = state
    return result


def gauge_twin_initial(cfg: RunConfig) -> VectorField:
    """u0 plus the gradient of a random scalar with matched L2 gradient norm.

    The scalar is kept well inside the dealias cutoff (band n/8, fast
    spectral decay): the twin-run check certifies gauge invariance of the
    formulation, which at finite resolution only holds up to truncation of
    the gauge field itself.
    """
    grid = cfg.grid.build()
    u0 = make_initial(cfg.initial.kind, grid, cfg.initial.seed,
                      amplitude=cfg.initial.amplitude, band=cfg.initial.band,
                      mode=cfg.initial.mode)
    phi = random_scalar(grid, cfg.gauge_seed, band=max(2, grid.n // 8), width=2.0)
    dphi = gradient(phi)
    norm = l2_norm(dphi)
    if norm > 0:
        dphi.components *= l2_norm(u0) / norm
    return VectorField(grid, u0.components + dphi.components)


@dataclass
class CompareReport:
    kind: str
    times: list
    rel_l2: list
    rel_linf: list
    max_rel_l2: float
    max_rel_linf: float
    w_rel_l2: list | None = None
    max_w_rel_l2: float | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "times": self.times, "rel_l2": self.rel_l2,
            "rel_linf": self.rel_linf, "max_rel_l2": self.max_rel_l2,
            "max_rel_linf": self.max_rel_linf, "w_rel_l2": self.w_rel_l2,
            "max_w_rel_l2": self.max_w_rel_l2,
        }


def compare_runs(a: RunResult, b: RunResult, kind: str = "",
                 include_w: bool | None = None) -> CompareReport:
    """Relative velocity differences on matching sample times.

    Raises ``ConfigError`` on mismatched grids or sample times. The relative
    L2 difference of the cotangent series is included for cotangent
    comparisons (gauge twins legitimately differ by a gradient there).
    """
    if include_w is None:
        include_w = kind == "cotangent"
    if a.config.grid != b.config.grid:
        raise ConfigError("compare_runs: mismatched grids")
    if len(a.times) != len(b.times) or any(
            abs(ta - tb) > 1e-12 for ta, tb in zip(a.times, b.times)):
        raise ConfigError("compare_runs: mismatched sample times")
    rel_l2, rel_linf = [], []
    for ua, ub in zip(a.u_series, b.u_series):
        diff = VectorField(ua.grid, ua.components - ub.components)
        ref_l2 = max(l2_norm(ub), 1e-300)
        ref_inf = max(sup_norm(ub), 1e-300)
        rel_l2.append(l2_norm(diff) / ref_l2)
        rel_linf.append(sup_norm(diff) / ref_inf)
    w_rel = None
    if include_w and a.w_series and b.w_series:
        w_rel = []
        for wa, wb in zip(a.w_series, b.w_series):
            diff = VectorField(wa.grid, wa.components - wb.components)
            w_rel.append(l2_norm(diff) / max(l2_norm(wb), 1e-300))
    return CompareReport(
        kind=kind, times=list(a.times), rel_l2=rel_l2, rel_linf=rel_linf,
        max_rel_l2=max(rel_l2), max_rel_linf=max(rel_linf),
        w_rel_l2=w_rel, max_w_rel_l2=max(w_rel) if w_rel else None,
    )


# -- bound and identity suites ------------------------------------------------------

def bounds_suite(cfg: RunConfig, result: RunResult | None = None) -> dict:
    """Full bound report on an (unbroken) EL run; returns reports keyed by name."""
    if cfg.reset.enabled:
        raise ConfigError("bound suites require reset.enabled = false")
    if result is None:
        result = run_el(cfg)
    grid = cfg.grid.build()
    forcing = cfg.forcing.build()
    reports: dict = {}
    reports["k_bounds"] = k_bounds(result.records, forcing, cfg.nu, grid, C_K=cfg.C_K)
    reports["displacement"] = displacement_bounds(result.records, forcing,
                                                  cfg.nu, grid, C_K=cfg.C_K)
    reports["epsilon"] = epsilon_bound(result.records, cfg.nu, grid, forcing)
    reports["v_growth"] = [
        v_growth(result.records, nu=cfg.nu, grid=grid, m=m, C0=cfg.C0)
        for m in cfg.m_list
    ]
    delta0 = cfg.mc.delta0 if cfg.mc.delta0 is not None else grid.length / 8.0
    state: ELState = result.final_state
    reports["dispersion"] = pair_dispersion(
        state.ell, delta0, cfg.mc.samples, cfg.mc.seed,
        t=state.t, E0=result.records[0].energy,
        eps_B=reports["k_bounds"].eps_B)
    return reports


def _observed_order(residuals, dts) -> float:
    logs = np.log(np.asarray(residuals))
    return float(np.polyfit(np.log(np.asarray(dts)), logs, 1)[0])


def identity_suite_with_orders(cfg: RunConfig) -> dict:
    """Identity suite on the configured grid plus dt-convergence orders."""
    grid = cfg.grid.build()
    reports = run_identity_suite(grid, seed=cfg.identity_seed, nu=max(cfg.nu, 0.05))
    state = make_test_state(grid, cfg.identity_seed, 0.05)
    gsc = random_scalar(grid, cfg.identity_seed + 2)
    nu = max(cfg.nu, 0.05)
    gamma_res, cevo_res = [], []
    for dt in cfg.identity_dts:
        gamma_res.append(check_gamma_commutation(state, gsc, dt, nu=nu).residual)
        cevo_res.append(check_C_evolution(state, dt, nu=nu).residual)
    orders = {
        "gamma_commutation": {"nominal": 2.0,
                              "observed": _observed_order(gamma_res, cfg.identity_dts),
                              "residuals": gamma_res},
        "c_evolution": {"nominal": 1.0,
                        "observed": _observed_order(cevo_res, cfg.identity_dts),
                        "residuals": cevo_res},
    }
    orders_pass = all(abs(o["observed"] - o["nominal"]) <= 0.3 for o in orders.values())
    return {"reports": reports, "orders": orders, "orders_pass": orders_pass}


# -- artifact emission ----------------------------------------------------------------

def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               allow_nan=True) + "\n")


def _emit_snapshots(outdir: Path, result: RunResult, cfg: RunConfig) -> None:
    if cfg.snapshots == "none":
        return
    snapdir = outdir / "snapshots"
    snapdir.mkdir(exist_ok=True)

    def dump(tag, state):
        t = getattr(state, "t", 0.0)
        if isinstance(state, ELState):
            d = derive(state)
            fields = {"ell": state.ell, "v": state.v, "u": d.u, "n": d.n,
                      "w": d.w, "det_grad_A": d.det}
            from .fields import magnitude
            c_mag = ScalarField(state.ell.grid, magnitude(d.C))
            fields["C_magnitude"] = c_mag
        elif isinstance(state, WState):
            from .spectral import leray_project
            fields = {"w": state.w, "u": leray_project(state.w)}
        else:
            fields = {"u": state.u}
        for name, f in fields.items():
            write_snapshot(snapdir / f"{tag}_{name}.bin", f, time=t, name=name)

    dump("initial", result.initial_state)
    dump("final", result.final_state)


def _manifest(outdir: Path, cfg: RunConfig) -> None:
    files = {}
    for path in sorted(outdir.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            files[str(path.relative_to(outdir))] = digest
    _write_json(outdir / "manifest.json",
                {"config_hash": cfg.config_hash(), "files": files})


def _emit_common(outdir: Path, cfg: RunConfig, result: RunResult) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    _write_json(outdir / "config.json", cfg.to_dict())
    write_timeseries_csv(result.records, outdir / "timeseries.csv",
                         m_list=cfg.m_list)
    if result.resets:
        _write_json(outdir / "resets.json", {"times": result.resets})
    if result.failure is not None:
        _write_json(outdir / "failure.json", result.failure)
    _emit_snapshots(outdir, result, cfg)


def _reports_payload(reports: dict) -> dict:
    def convert(obj):
        if isinstance(obj, (KBoundsReport, DispersionReport, VGrowthReport,
                            EpsilonBoundReport)):
            return obj.to_dict()
        if isinstance(obj, list):
            return [convert(o) for o in obj]
        if hasattr(obj, "to_dict"):
            return obj.to_dict()
        return obj
    return {key: convert(val) for key, val in reports.items()}


def execute(cfg: RunConfig, outdir, command: str = "run") -> int:
    """Run one CLI command; returns the process exit code.

    0 success, 2 solver failure (partial artifacts emitted), 3 assertion
    failure in a bound/identity suite. Configuration errors raise
    ``ConfigError`` for the CLI to map to exit code 1.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    if command == "verify-identities":
        payload = identity_suite_with_orders(cfg)
        reports = payload["reports"]
        _write_json(outdir / "config.json", cfg.to_dict())
        _write_json(outdir / "report_identities.json", {
            "reports": [r.to_dict() for r in reports],
            "orders": payload["orders"],
            "orders_pass": payload["orders_pass"],
        })
        _manifest(outdir, cfg)
        ok = all(r.passed for r in reports) and payload["orders_pass"]
        return 0 if ok else 3

    if command == "bounds-report":
        result = run_el(cfg)
        _emit_common(outdir, cfg, result)
        if result.failure is not None:
            _manifest(outdir, cfg)
            return 2
        reports = bounds_suite(cfg, result)
        _write_json(outdir / "report_bounds.json", _reports_payload(reports))
        _manifest(outdir, cfg)
        asserted_ok = (
            reports["k_bounds"].all_asserted_pass
            and all(c.passed for c in reports["displacement"] if c.asserted)
            and all(v.all_asserted_pass for v in reports["v_growth"])
            and reports["dispersion"].passed
        )
        return 0 if asserted_ok else 3

    if command == "pair-dispersion":
        result = run_el(cfg)
        _emit_common(outdir, cfg, result)
        if result.failure is not None:
            _manifest(outdir, cfg)
            return 2
        grid = cfg.grid.build()
        forcing = cfg.forcing.build()
        delta0 = cfg.mc.delta0 if cfg.mc.delta0 is not None else grid.length / 8.0
        state: ELState = result.final_state
        report = pair_dispersion(state.ell, delta0, cfg.mc.samples, cfg.mc.seed,
                                 t=state.t, E0=result.records[0].energy,
                                 eps_B=forcing.eps_bound(cfg.nu, grid.length))
        _write_json(outdir / "report_dispersion.json", report.to_dict())
        _manifest(outdir, cfg)
        return 0 if report.passed else 3

    # command == "run" or "compare"
    mode = "compare" if command == "compare" else cfg.mode
    if mode == "classical":
        result = run_classical(cfg)
        _emit_common(outdir, cfg, result)
    elif mode == "el":
        result = run_el(cfg)
        _emit_common(outdir, cfg, result)
    elif mode == "cotangent":
        result = run_cotangent(cfg)
        _emit_common(outdir, cfg, result)
    else:
        if cfg.compare_kind == "classical":
            result = run_el(cfg)
            other = run_classical(cfg)
        elif cfg.compare_kind == "cotangent":
            result = run_el(cfg)
            other = run_cotangent(cfg)
        else:
            result = run_el(cfg)
            other = run_el(cfg, v0=gauge_twin_initial(cfg))
        _emit_common(outdir, cfg, result)
        if result.failure is None and other.failure is None:
            report = compare_runs(result, other, kind=cfg.compare_kind)
            _write_json(outdir / "report_compare.json", report.to_dict())
        else:
            result.failure = result.failure or other.failure
            _write_json(outdir / "failure.json", result.failure)
    _manifest(outdir, cfg)
    return 2 if result.failure is not None else 0
