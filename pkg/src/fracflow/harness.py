"""Experiment orchestration: a single sectioned key-value config drives one of
the experiment kinds, emitting deterministic CSV/JSON/f64 outputs plus a
manifest with content hashes."""

from __future__ import annotations

import configparser
import io
import os
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .errors import ConfigError
from .fracops import (
    FracOrder,
    c_ns_closed_form,
    calibrate_spectral_symbol,
    compute_C_ns,
    lambda_closed_form,
    make_constants,
)
from .io_utils import fmt, inventory, write_csv, write_field_f64, write_front_csv, write_json
from .wells import default_well

KINDS = ("constants", "layer", "corrector", "fmcf", "allencahn", "compare", "barrier-check")

DEFAULTS = {
    "run": {"kind": "constants", "seed": 0},
    "order": {"s": 0.35, "n": 2},
    "grid": {"npoints": 512, "box": 1.0},
    "layer": {"core_half": 30.0, "core_h": 0.012, "outer_half": 1.0e5, "stretch": 1.03},
    "flow": {"rho_cells": 6, "cfl": 0.3, "r_max_frac": 0.25, "far_mode": "plane",
             "r0": 0.35, "until": 0.5},
    "omega": {"resolutions": [256, 512, 1024], "radii": [0.2, 0.4]},
    "allencahn": {"epsilon": 0.02, "t_frac": 0.3, "snapshots": 4},
    "compare": {"epsilons": [0.08, 0.04, 0.02], "r0": 0.35, "t_frac": 0.3,
                "k_in_radius": 0.1, "k_out_radius": 0.45, "checkpoints": 3},
    "barrier": {"epsilons": [0.004, 0.002, 0.001], "sigma": 0.04, "rho": 0.095,
                "r0": 0.25, "r_min": 0.2, "npoints": 4096, "margin": 1.0},
}


@dataclass
class RunConfig:
    """Parsed configuration: section -> key -> typed value."""

    sections: dict = dc_field(default_factory=dict)

    @staticmethod
    def _parse_value(raw):
        if isinstance(raw, (int, float, list)):
            return raw
        txt = str(raw).strip()
        if "," in txt:
            return [RunConfig._parse_value(tok) for tok in txt.split(",") if tok.strip()]
        for caster in (int, float):
            try:
                return caster(txt)
            except ValueError:
                continue
        return txt

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        sections = {name: dict(DEFAULTS.get(name, {})) for name in DEFAULTS}
        for sec in cp.sections():
            tgt = sections.setdefault(sec, {})
            for key, raw in cp[sec].items():
                tgt[key] = cls._parse_value(raw)
        return cls(sections=sections)

    @classmethod
    def from_defaults(cls) -> "RunConfig":
        return cls(sections={name: dict(vals) for name, vals in DEFAULTS.items()})

    def override(self, dotted: str, raw: str):
        if "." not in dotted:
            raise ConfigError([f"--set expects section.key=value, got '{dotted}'"])
        sec, key = dotted.split(".", 1)
        self.sections.setdefault(sec, {})[key] = self._parse_value(raw)

    def get(self, sec: str, key: str):
        return self.sections[sec][key]

    def serialize(self) -> str:
        out = io.StringIO()
        for sec in sorted(self.sections):
            out.write(f"[{sec}]\n")
            for key in sorted(self.sections[sec]):
                val = self.sections[sec][key]
                if isinstance(val, list):
                    txt = ",".join(fmt(v) if isinstance(v, (int, float)) else str(v) for v in val)
                elif isinstance(val, (int, float)):
                    txt = fmt(val)
                else:
                    txt = str(val)
                out.write(f"{key} = {txt}\n")
            out.write("\n")
        return out.getvalue()

    # ---- typed views ----

    def order(self) -> FracOrder:
        try:
            return FracOrder(s=float(self.get("order", "s")), n=int(self.get("order", "n")))
        except ValueError as exc:
            raise ConfigError([f"FracOrder: {exc}"]) from None

    def validate(self):
        """Cross-field constraints, every violation reported at once."""
        violations = []
        try:
            self.order()
        except ConfigError as exc:
            violations.extend(exc.violations)
        kind = self.get("run", "kind")
        if kind not in KINDS:
            violations.append(f"unknown experiment kind '{kind}'")
        box = float(self.get("grid", "box"))
        N = int(self.get("grid", "npoints"))
        h = box / N
        if float(self.get("flow", "r_max_frac")) > 0.25 + 1e-12:
            violations.append("flow.r_max_frac exceeds 1/4 (kernel truncation beyond box/4)")
        if not (0.0 < float(self.get("flow", "cfl")) < 1.0):
            violations.append("flow.cfl outside (0,1)")
        if kind in ("allencahn", "compare"):
            eps_list = self.get("compare", "epsilons") if kind == "compare" \
                else [self.get("allencahn", "epsilon")]
            if not isinstance(eps_list, list):
                eps_list = [eps_list]
            for eps in eps_list:
                if float(eps) < 4.0 * h:
                    violations.append(
                        f"epsilon = {eps} under 4 cells at npoints = {N}")
        if kind == "barrier-check":
            bsec = self.sections["barrier"]
            hb = box / int(bsec["npoints"])
            eps_list = bsec["epsilons"] if isinstance(bsec["epsilons"], list) else [bsec["epsilons"]]
            for eps in eps_list:
                if float(eps) < 4.0 * hb:
                    violations.append(f"barrier epsilon = {eps} under 4 cells")
                delta = float(eps) ** 0.4
                if 2.0 * delta >= 1.0:
                    violations.append(f"barrier delta = eps^0.4 = {delta} too large")
            if float(bsec["sigma"]) >= float(bsec["rho"]) / 2.0:
                violations.append("barrier sigma_tilde must be below rho/2")
        if violations:
            raise ConfigError(violations)


# --------------------------------------------------------------------------- #
# shared computed ingredients
# --------------------------------------------------------------------------- #

class Ingredients:
    """Lazy holder for the expensive shared objects of one run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.order = config.order()
        self.well = default_well()
        self._cache = {}

    def constants(self):
        if "constants" not in self._cache:
            self._cache["constants"] = make_constants(self.order)
        return self._cache["constants"]

    def layer(self):
        if "layer" not in self._cache:
            from .profiles import LayerGrid, solve_layer

            sec = self.config.sections["layer"]
            grid = LayerGrid(core_half=float(sec["core_half"]),
                             core_h=float(sec["core_h"]),
                             outer_half=float(sec["outer_half"]),
                             stretch=float(sec["stretch"]))
            self._cache["layer"] = solve_layer(self.well, self.order,
                                               self.constants().c_ns, grid)
        return self._cache["layer"]

    def c0(self):
        if "c0" not in self._cache:
            from .profiles import compute_c0

            self._cache["c0"] = compute_c0(self.layer())
        return self._cache["c0"]

    def corrector(self):
        if "corrector" not in self._cache:
            from .profiles import solve_corrector

            self._cache["corrector"] = solve_corrector(
                self.layer(), self.well, self.c0(), self.constants().c_ns)
        return self._cache["corrector"]

    def omega(self):
        if "omega" not in self._cache:
            from .geometry import omega_constant

            sec = self.config.sections["omega"]
            res = tuple(int(r) for r in sec["resolutions"])
            radii = tuple(float(r) for r in sec["radii"])
            self._cache["omega"] = omega_constant(self.order, resolutions=res,
                                                  radii=radii)
        return self._cache["omega"]

    def fmc_params(self):
        from .fmcf import FmcParams

        box = float(self.config.get("grid", "box"))
        return FmcParams(order=self.order, c0=self.c0(), omega=self.omega()[0],
                         r_max=float(self.config.get("flow", "r_max_frac")) * box,
                         cfl=float(self.config.get("flow", "cfl")))


# --------------------------------------------------------------------------- #
# experiment pipelines
# --------------------------------------------------------------------------- #

def _run_constants(ing: Ingredients, outdir: str):
    order = ing.order
    cns_quad = compute_C_ns(order)
    cns_closed = c_ns_closed_form(order)
    lam_cal = calibrate_spectral_symbol(order)
    lam_closed = lambda_closed_form(order)
    omega, omega_report = ing.omega()
    payload = {
        "s": order.s, "n": order.n,
        "C_ns_quadrature": cns_quad, "C_ns_closed_form": cns_closed,
        "C_ns_residual": abs(cns_quad - cns_closed) / cns_closed,
        "lambda_calibrated": lam_cal, "lambda_closed_form": lam_closed,
        "lambda_residual": abs(lam_cal - lam_closed) / lam_closed,
        "c0": ing.c0(),
        "omega": omega,
        "omega_report": {str(k): v for k, v in omega_report.items()},
        "layer_residual": ing.layer().meta["residual"],
    }
    write_json(os.path.join(outdir, "constants.json"), payload)


def _profile_rows(prof, dphi, psi=None):
    rows = []
    for i in range(len(prof.xi)):
        row = [prof.xi[i], prof.values[i], dphi[i]]
        if psi is not None:
            row.append(psi[i])
        rows.append(row)
    return rows


def _run_layer(ing: Ingredients, outdir: str, with_corrector: bool):
    from .profiles import phi_dot, solvability_defect

    prof = ing.layer()
    dphi = phi_dot(prof)
    meta = {
        "s": ing.order.s, "n": ing.order.n,
        "half_width": prof.half_width, "npoints": len(prof.xi),
        "c_ns": prof.meta["c_ns"], "c_star": prof.meta["c_star"],
        "residual": prof.meta["residual"], "c0": ing.c0(),
        "tail": {"left": [prof.left_tail.value, prof.left_tail.coeff, prof.left_tail.decay],
                 "right": [prof.right_tail.value, prof.right_tail.coeff, prof.right_tail.decay]},
        "solvability_defect": solvability_defect(prof, ing.well, ing.c0()),
    }
    if with_corrector:
        cor = ing.corrector()
        meta["corrector_residual"] = cor.residual_norm
        meta["corrector_orthogonality"] = cor.orthogonality_defect
        rows = _profile_rows(prof, dphi, cor.psi_tilde.values)
        header = ["xi", "phi", "phi_dot", "psi_tilde"]
    else:
        rows = _profile_rows(prof, dphi)
        header = ["xi", "phi", "phi_dot"]
    write_csv(os.path.join(outdir, "profile.csv"), header, rows)
    write_json(os.path.join(outdir, "profile.json"), meta)


def _run_fmcf(ing: Ingredients, outdir: str):
    from .fmcf import extinction_time, fit_radius_power_law, run_circle_benchmark

    cfg = ing.config
    params = ing.fmc_params()
    box = float(cfg.get("grid", "box"))
    N = int(cfg.get("grid", "npoints"))
    r0 = float(cfg.get("flow", "r0"))
    rows, state = run_circle_benchmark(
        r0, params, box=box, npoints=N,
        rho_cells=int(cfg.get("flow", "rho_cells")),
        until=float(cfg.get("flow", "until")),
        far_mode=str(cfg.get("flow", "far_mode")))
    write_csv(os.path.join(outdir, "radius_law.csv"),
              ["t", "r_measured", "r_exact"], rows)
    a, b, r2, t_ext = fit_radius_power_law(rows, ing.order.s)
    t_exact = extinction_time(r0, params.c0, params.omega, ing.order.s)
    write_json(os.path.join(outdir, "radius_fit.json"), {
        "intercept": a, "slope": b, "r_squared": r2,
        "extinction_fit": t_ext, "extinction_law": t_exact,
        "extinction_rel_dev": abs(t_ext - t_exact) / t_exact,
        "c0": params.c0, "omega": params.omega, "s": ing.order.s, "r0": r0,
    })
    write_front_csv(os.path.join(outdir, "front_final.csv"), state.front())


def _ac_time_step(ing: Ingredients, eps: float, t_end: float, r_typ: float) -> float:
    """Time step for Allen-Cahn runs: the balance default capped by the front
    CFL and by resolving the run window."""
    h = float(ing.config.get("grid", "box")) / int(ing.config.get("grid", "npoints"))
    s = ing.order.s
    speed = ing.c0() * ing.omega()[0] / max(r_typ, 1e-6) ** (2.0 * s)
    return min(0.1 * eps ** (1.0 + 2.0 * s), 0.5 * h / speed, t_end / 40.0)


def _run_allencahn(ing: Ingredients, outdir: str):
    from .allen_cahn import diffuse_front, energy, run_to_time, well_prepared_init
    from .fmcf import exact_circle_radius, extinction_time
    from .geometry import signed_distance_circle

    cfg = ing.config
    box = float(cfg.get("grid", "box"))
    N = int(cfg.get("grid", "npoints"))
    eps = float(cfg.get("allencahn", "epsilon"))
    r0 = float(cfg.get("flow", "r0"))
    center = (box / 2.0, box / 2.0)
    rho_init = min(0.07 * box, (box / 2.0 - r0) / 4.0)
    sdf = signed_distance_circle(center, r0, box, N, rho_init)
    state = well_prepared_init(sdf, ing.layer(), eps, ing.well, ing.order)
    cst = ing.constants()
    T = extinction_time(r0, ing.c0(), ing.omega()[0], ing.order.s)
    t_end = float(cfg.get("allencahn", "t_frac")) * T
    nsnap = int(cfg.get("allencahn", "snapshots"))
    dt = _ac_time_step(ing, eps, t_end, exact_circle_radius(
        r0, t_end, ing.c0(), ing.omega()[0], ing.order.s))
    rows = []
    for k in range(nsnap):
        t_target = (k + 1) / nsnap * t_end
        state, diags = run_to_time(state, t_target, cst, dt)
        rep = energy(state, cst)
        rows.append((state.t, rep.gagliardo, rep.potential, rep.total))
        write_field_f64(os.path.join(outdir, f"u_{k:03d}.f64"), state.u,
                        {"t": state.t, "epsilon": eps, "s": ing.order.s})
    write_csv(os.path.join(outdir, "energy.csv"),
              ["t", "gagliardo", "potential", "total"], rows)
    front = diffuse_front(state)
    if not front.is_empty:
        write_front_csv(os.path.join(outdir, "front_final.csv"), front)


def _run_compare(ing: Ingredients, outdir: str):
    rows, front_files = compare_experiment(ing, outdir)
    write_csv(os.path.join(outdir, "compare.csv"),
              ["epsilon", "t", "hausdorff", "sup_dev_inside", "sup_outside"], rows)


def compare_experiment(ing: Ingredients, outdir: str | None = None):
    """Theorem-1.1 at desk scale: for each epsilon, march the Allen-Cahn field
    and the level-set flow on the same torus to t* = t_frac * T_extinction and
    compare the half-level front with the flow front."""
    from .allen_cahn import diffuse_front, run_to_time, well_prepared_init
    from .fmcf import (
        exact_circle_radius,
        extinction_time,
        make_flow_state,
        measured_radius,
        step,
    )
    from .geometry import hausdorff, signed_distance_circle

    cfg = ing.config
    box = float(cfg.get("grid", "box"))
    N = int(cfg.get("grid", "npoints"))
    sec = cfg.sections["compare"]
    r0 = float(sec["r0"])
    center = (box / 2.0, box / 2.0)
    s = ing.order.s
    c0 = ing.c0()
    omega = ing.omega()[0]
    cst = ing.constants()
    T = extinction_time(r0, c0, omega, s)
    t_star = float(sec["t_frac"]) * T

    # level-set reference on the torus (the spectral AC operator acts there)
    rho = int(cfg.get("flow", "rho_cells")) * box / N
    params = ing.fmc_params()
    sdf = signed_distance_circle(center, r0, box, N, rho)
    flow = make_flow_state(sdf, params, far_mode="torus")
    h = box / N
    while flow.front_exists and flow.t < t_star - 1e-18:
        flow = step(flow, dt_cap=t_star - flow.t)
    ref_front = flow.front()
    if outdir:
        write_front_csv(os.path.join(outdir, "front_fmcf.csv"), ref_front)

    ax = (np.arange(N) + 0.5) * h
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    rr = np.hypot(X - center[0], Y - center[1])
    k_in = rr <= float(sec["k_in_radius"])
    k_out = rr >= float(sec["k_out_radius"])

    eps_list = [float(e) for e in (sec["epsilons"] if isinstance(sec["epsilons"], list)
                                   else [sec["epsilons"]])]
    rho_init = min(0.07 * box, (box / 2.0 - r0) / 4.0)
    sdf0 = signed_distance_circle(center, r0, box, N, rho_init)
    rows, files = [], []
    for eps in eps_list:
        state = well_prepared_init(sdf0, ing.layer(), eps, ing.well, ing.order)
        dt = _ac_time_step(ing, eps, t_star,
                           exact_circle_radius(r0, t_star, c0, omega, s))
        state, diags = run_to_time(state, t_star, cst, dt)
        front = diffuse_front(state)
        dist = hausdorff(front, ref_front)
        sup_in = float(np.max(np.abs(state.u.data[k_in] - 1.0)))
        sup_out = float(np.max(state.u.data[k_out]))
        rows.append((eps, state.t, dist, sup_in, sup_out))
        if outdir:
            fname = f"front_ac_eps{eps:g}.csv"
            write_front_csv(os.path.join(outdir, fname), front)
            files.append(fname)
    return rows, files


def _run_barrier(ing: Ingredients, outdir: str):
    report = barrier_experiment(ing)
    write_json(os.path.join(outdir, "barrier_report.json"), report)


def barrier_experiment(ing: Ingredients):
    """Residual check of the global subsolution under the forced circle
    motion, over the epsilon ladder with delta = eps^0.4."""
    from .barrier import (
        BarrierConfig,
        ProfileTables,
        ResidualReport,
        forced_circle_motion,
        forcing_speed,
        subsolution_residual,
    )
    from .profiles import phi_dot

    cfg = ing.config
    sec = cfg.sections["barrier"]
    box = float(cfg.get("grid", "box"))
    N = int(sec["npoints"])
    r0, r_min = float(sec["r0"]), float(sec["r_min"])
    sigma = float(sec["sigma"])
    rho = float(sec["rho"])
    order = ing.order
    s = order.s
    c0 = ing.c0()
    omega = ing.omega()[0]
    cst = ing.constants()
    well = ing.well
    prof = ing.layer()
    cor = ing.corrector()
    tables = ProfileTables(prof, cor.psi_tilde, phi_dot(prof))

    speed = forcing_speed(c0, omega, sigma, r_min, s, margin=float(sec["margin"]))
    t_end = (r0 - r_min) / speed
    center = (box / 2.0, box / 2.0)
    d_of_t = forced_circle_motion(center, r0, speed, box, N, rho)
    t0 = 0.5 * t_end
    dt_time = min(0.02 * t_end, min(float(e) for e in sec["epsilons"]) ** 2)

    out = {"speed": speed, "t_end": t_end, "sigma": sigma, "rho": rho,
           "c0": c0, "omega": omega, "s": s, "npoints": N, "ladder": []}
    eps_list = [float(e) for e in (sec["epsilons"] if isinstance(sec["epsilons"], list)
                                   else [sec["epsilons"]])]
    for eps in sorted(eps_list, reverse=True):
        bc = BarrierConfig(epsilon=eps, sigma=sigma, rho=rho,
                           r_trunc=box / 4.0, box=box, npoints=N,
                           alpha=well.alpha)
        rep = subsolution_residual(d_of_t, t0, dt_time, tables, well, bc,
                                   order, cst, c0)
        out["ladder"].append({
            "epsilon": eps, "delta": bc.delta,
            "frac_negative": rep.frac_negative,
            "frac_negative_band": rep.frac_negative_band,
            "max_band": rep.max_band, "max_all": rep.max_all,
            "percentiles": rep.percentiles,
            "audit_sup_band": rep.audit_sup_band,
            "forcing_margin": rep.forcing_margin,
            "n_band": rep.n_band,
        })
    ladder = out["ladder"]
    out["pass"] = {
        "J_negative_95pct_smallest_eps": ladder[-1]["frac_negative"] >= 0.95,
        "J_negative_band_100pct_smallest_eps": ladder[-1]["frac_negative_band"] >= 1.0,
        "max_band_decreasing": all(ladder[i + 1]["max_band"] < ladder[i]["max_band"]
                                   for i in range(len(ladder) - 1)),
    }
    return out


@dataclass
class RunManifest:
    config_text: str
    kind: str
    version: str
    wall_time_s: float
    files: list
    tolerances: dict

    def to_json(self):
        return {"config": self.config_text, "kind": self.kind,
                "artifact_version": self.version,
                "wall_time_s": self.wall_time_s, "files": self.files,
                "tolerances": self.tolerances}


TOLERANCES = {
    "operator_identity_rel": 1e-3,
    "kernel_closed_form_rel": 5e-3,
    "layer_residual": 1e-8,
    "tail_exponent_abs": 0.03,
    "tail_coefficient_rel": 0.05,
    "solvability": 1e-8,
    "corrector_residual": 1e-6,
    "ball_slope_abs": 0.02,
    "omega_two_radius_rel": 0.01,
    "radius_law_r2": 0.999,
    "extinction_rel": 0.05,
    "max_principle_slack": 1e-10,
    "energy_increase_rel": 1e-9,
    "barrier_negative_fraction": 0.95,
}


def run(config: RunConfig, outdir: str) -> RunManifest:
    """Validate, dispatch, emit outputs, and write the manifest."""
    config.validate()
    os.makedirs(outdir, exist_ok=True)
    kind = config.get("run", "kind")
    ing = Ingredients(config)
    t0 = time.time()
    if kind == "constants":
        _run_constants(ing, outdir)
    elif kind == "layer":
        _run_layer(ing, outdir, with_corrector=False)
    elif kind == "corrector":
        _run_layer(ing, outdir, with_corrector=True)
    elif kind == "fmcf":
        _run_fmcf(ing, outdir)
    elif kind == "allencahn":
        _run_allencahn(ing, outdir)
    elif kind == "compare":
        _run_compare(ing, outdir)
    elif kind == "barrier-check":
        _run_barrier(ing, outdir)
    wall = time.time() - t0
    manifest = RunManifest(config_text=config.serialize(), kind=kind,
                           version=__version__, wall_time_s=wall,
                           files=inventory(outdir), tolerances=TOLERANCES)
    write_json(os.path.join(outdir, "manifest.json"), manifest.to_json())
    return manifest


# --------------------------------------------------------------------------- #
# golden verification
# --------------------------------------------------------------------------- #

GOLDEN_TOLERANCES = {
    "C_ns_quadrature": 1e-9,
    "lambda_calibrated": 1e-6,
    "c0": 1e-3,
    "omega": 2e-2,
    "tail_coefficient": 5e-2,
}


def verify_goldens(directory: str) -> dict:
    """Recompute the cheap quantities stored in a constants golden and diff
    them at per-quantity tolerances. Missing entries report 'absent'."""
    import json

    path = os.path.join(directory, "constants.json")
    report = {}
    if not os.path.exists(path):
        return {"constants.json": {"status": "absent"}}
    with open(path) as f:
        golden = json.load(f)
    order = FracOrder(s=float(golden["s"]), n=int(golden["n"]))
    fresh = {
        "C_ns_quadrature": compute_C_ns(order),
        "lambda_calibrated": calibrate_spectral_symbol(order),
    }
    for key, tol in GOLDEN_TOLERANCES.items():
        if key not in golden:
            report[key] = {"status": "absent"}
            continue
        if key not in fresh:
            continue
        got, want = fresh[key], float(golden[key])
        ok = abs(got - want) <= tol * max(abs(want), 1e-300)
        report[key] = {"status": "pass" if ok else "fail", "recomputed": got,
                       "golden": want, "tolerance": tol}
    return report
