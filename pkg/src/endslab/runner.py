"""Execute a run configuration and write ``report.json``, ``report.md`` and ``series/*.csv``."""
from __future__ import annotations

import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigError, EndsLabError
from .estimates.alpha import alpha_level_series, alpha_report
from .estimates.growth import omega_diagnostics
from .estimates.meanvalue import sobolev_measure
from .estimates.pipeline import end_count_pipeline, moser_radii
from .geometry import ProfileSeries, build_manifold, check_area_volume, verify_rho_conditions, volume_area_profiles
from .solitons import (ball_alpha_series, entropy, f_bounds_check, get_soliton, soliton_alpha,
                       soliton_identity_residual)
from .solver import dump_end_function

IDENTITY_TOL = 1e-12


def to_jsonable(obj):
    """Plain JSON types; infinities become the string ``"inf"`` and NaN becomes ``null``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class RunResult:
    report: dict
    series: dict[str, ProfileSeries] = field(default_factory=dict)
    end_dumps: list = field(default_factory=list)
    manifold: object = None

    @property
    def passed(self) -> bool:
        return bool(self.report["pass"])


def _model_run(cfg: RunConfig, jobs: int) -> RunResult:
    man = build_manifold(cfg.model)
    stages = set(cfg.pipeline)
    rho = verify_rho_conditions(man)
    area_vol = check_area_volume(man)
    checks = {"geometry.rho_conditions": not rho.violation, "geometry.area_volume": area_vol.ok}
    report: dict = {"geometry": {"rho": rho.to_dict(), "area_volume": area_vol.to_dict(),
                                 "n_vertices": man.n_vertices, "m": man.m}}
    V, A = volume_area_profiles(man)
    series = {"volume": V, "area": A}
    pcfg = cfg.pipeline_config(jobs)
    dumps = []
    advisories: list[str] = []

    if stages & {"ends", "growth", "moser", "dimension"}:
        rep = end_count_pipeline(man, pcfg)
        c = rep.checks
        d = rep.to_dict()
        advisories += rep.advisories()
        if "ends" in stages:
            report["ends"] = {key: d[key] for key in ("k", "rank", "singular_values", "separation",
                                                      "comparison_margin", "end_functions")}
            for key in ("rank_equals_ends", "separation", "comparison", "converged"):
                checks[f"ends.{key}"] = c[key]
            dumps = [(f"end_function_{ef.end_index}", ef) for ef in rep.end_functions]
        if "growth" in stages:
            omegas = []
            for ef in rep.end_functions:
                try:
                    om = omega_diagnostics(man, ef.values, 4 * man.R0, man.m, rep.Upsilon)
                except EndsLabError as err:
                    omegas.append({"error": str(err)})
                    continue
                omegas.append(om.to_dict())
                series[f"omega_{ef.end_index}"] = om.omega
                series[f"omega_residual_{ef.end_index}"] = om.residual
            for i, ch in enumerate(rep.chi):
                if ch is not None:
                    series[f"chi_{i}"] = ch.chi
                    series[f"chi_prime_{i}"] = ch.chi_prime
            report["growth"] = {"Upsilon": d["Upsilon"], "fits": d["growth"], "chi": d["chi"], "omega": omegas}
            checks["growth.within_bound"] = c["growth_within_bound"]
        if "moser" in stages:
            R = moser_radii(man)[-1]
            report["moser"] = {
                "radii": moser_radii(man),
                "reports": d["mean_value"],
                "spread": d["mean_value_spread"],
                "sobolev_lower_bound": {"R": R, "mu": pcfg.nu / (pcfg.nu - 1), "seed": cfg.seed,
                                        "value": sobolev_measure(man, R, mu=pcfg.nu / (pcfg.nu - 1),
                                                                 seed=cfg.seed)},
            }
            checks["moser.theta_exponent"] = c["mean_value_theta_exponent"]
            checks["moser.stable"] = c["mean_value_stable"]
        if "dimension" in stages:
            report["dimension"] = d["dimension"]
            checks["dimension.ends_within_bound"] = c["ends_within_dimension_bound"]
    if "alpha" in stages:
        al = alpha_report(man, pcfg.q, pcfg.tail_fraction)
        report["alpha"] = al.to_dict()
        checks["alpha.holder_monotone"] = al.holder_ok
        r, v = alpha_level_series(man, pcfg.q)
        series["alpha_level"] = ProfileSeries(r, v, "alpha_level")

    report["checks"] = checks
    report["advisories"] = advisories
    return RunResult(report, series, dumps, man)


def _soliton_run(cfg: RunConfig) -> RunResult:
    params = {k: v for k, v in cfg.soliton.items() if k != "name"}
    try:
        ex = get_soliton(cfg.soliton["name"], **params)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{cfg.source}: soliton: {err}") from None
    quad_tol = cfg.tolerances["quad_tol"]
    tail_fraction = cfg.settings.get("tail_fraction", 0.3)
    residual = soliton_identity_residual(ex)
    fb = f_bounds_check(ex)
    ent = entropy(ex, quad_tol)
    alpha = soliton_alpha(ex, tail_fraction)
    R, vals = ball_alpha_series(ex)
    checks = {
        "soliton.identity": residual <= IDENTITY_TOL,
        "soliton.f_bounds": fb.lower_ok and fb.upper_ok,
        "soliton.curvature_nonnegative": bool(np.all(ex.S(np.linspace(0, ex.r_quad_max, 1001)) >= 0)),
    }
    report = {
        "soliton": {
            "name": ex.name,
            "n": ex.n,
            "exact": ex.exact,
            "ball_note": ex.ball_note,
            "params": ex.params,
            "identity_residual": residual,
            "f_bounds": fb.to_dict(),
            "entropy": ent.to_dict(),
            "alpha": alpha,
        },
        "checks": checks,
        "advisories": [] if ex.exact else [f"{ex.name}: the identity is imposed by construction"],
    }
    return RunResult(report, {"ball_alpha": ProfileSeries(R, vals, "ball_alpha")})


def execute(cfg: RunConfig, jobs: int = 1) -> RunResult:
    """Run every requested stage; runtime errors from the checks are recorded as failures."""
    try:
        res = _model_run(cfg, jobs) if cfg.model is not None else _soliton_run(cfg)
    except ConfigError:
        raise
    except EndsLabError as err:
        res = RunResult({"checks": {"run.completed": False},
                         "advisories": [f"{type(err).__name__}: {err}"]})
    res.report = {
        "config": {
            "name": cfg.name,
            "description": cfg.description,
            "pipeline": list(cfg.pipeline),
            "tolerances": cfg.tolerances,
            "settings": cfg.settings,
            "seed": cfg.seed,
            "model": cfg.model.to_dict() if cfg.model is not None else None,
            "soliton": cfg.soliton,
        },
        **res.report,
        "pass": all(res.report["checks"].values()),
    }
    res.report = to_jsonable(res.report)
    return res


def _num(x) -> str:
    return f"{x:.6g}" if isinstance(x, (int, float)) else str(x)


def render_markdown(report: dict) -> str:
    cfg = report["config"]
    lines = [f"# Run report: {cfg['name']}", ""]
    if cfg.get("description"):
        lines += [cfg["description"], ""]
    lines += [f"Overall: **{'PASS' if report['pass'] else 'FAIL'}**", "", "| check | result |", "|---|---|"]
    lines += [f"| {k} | {'pass' if v else 'FAIL'} |" for k, v in report["checks"].items()]
    lines.append("")
    if "ends" in report:
        e = report["ends"]
        lines += ["## End functions", "", f"- ends: {e['k']}, Gram rank: {e['rank']}",
                  f"- comparison margin: {e['comparison_margin']:.3e}"]
        for ef in e["end_functions"]:
            ladder = ", ".join(f"R={x['R']:g}" for x in ef["ladder"])
            lines.append(f"- end {ef['end_index']}: ladder {ladder}; gap {ef['convergence_gap']:.3e}")
        lines.append("")
    if "growth" in report:
        lines += ["## Growth", "", "| end | fitted exponent | bound | margin |", "|---|---|---|---|"]
        for i, g in enumerate(report["growth"]["fits"]):
            bound = g["bound_a"] if g["bound_a"] is not None else g["bound_Gamma"]
            lines.append(f"| {i} | {g['fitted_exponent']:.4f} | {_num(bound)} | {_num(g['margin'])} |")
        lines.append("")
    if "moser" in report:
        lines += ["## Mean value constants", ""]
        for i, reps in enumerate(report["moser"]["reports"]):
            parts = ", ".join(f"R={r['R']:g}: A0={r['A0']:.4f}, exponent {r['theta_exponent']:.3f}" for r in reps)
            lines.append(f"- end {i}: {parts}")
        lines.append("")
    if "alpha" in report:
        a = report["alpha"]
        lines += ["## Potential decay", "", f"- level-set value (q={a['q']}): {a['alpha_level']}",
                  f"- ball value: {a['alpha_ball']}", f"- volume ratio: {a['V_infinity']}", ""]
    if "dimension" in report:
        d = report["dimension"]
        lines += ["## Dimension bound", "", f"- degree {d['d']}, Gamma_bar {d['Gamma_bar']:g}, bound {d['bound']:.4g}", ""]
    if "soliton" in report:
        s = report["soliton"]
        lines += [f"## Soliton `{s['name']}` (n={s['n']})", "",
                  f"- identity residual: {s['identity_residual']:.3e}",
                  f"- entropy: {s['entropy']['mu']:.12g}",
                  f"- f bounds: c1={s['f_bounds']['c1']:g}, c2={s['f_bounds']['c2']:.6g}",
                  f"- ball curvature functional: {s['alpha']}", f"- {s['ball_note']}", ""]
    if report.get("advisories"):
        lines += ["## Advisories", ""] + [f"- {a}" for a in report["advisories"]] + [""]
    return "\n".join(lines)


def write_outputs(res: RunResult, out: Path, argv: list[str] | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    series_dir = out / "series"
    series_dir.mkdir(exist_ok=True)
    (out / "report.json").write_text(json.dumps(res.report, indent=2, sort_keys=True) + "\n")
    (out / "report.md").write_text(render_markdown(res.report))
    meta = {"created": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "version": __version__,
            "python": platform.python_version(), "argv": argv if argv is not None else sys.argv}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")
    for name, s in res.series.items():
        s.to_csv(series_dir / f"{name}.csv")
    for name, ef in res.end_dumps:
        dump_end_function(ef, res.manifold, series_dir / f"{name}.csv")
