"""Verification suites run by ``conewave verify``.

Each suite takes a :class:`SuiteConfig` and returns a JSON-ready report
``{test, params, seed, statistics, decision}``.  Unset config fields fall
back to the suite's own defaults.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis as an
from . import geometry as geo
from . import presets
from .rng import STREAM_CONTROL, STREAM_DIAGNOSTICS, RngStream
from .sampling import kernel_reflection_identity_check, sample_brownian_boundary, uniform_point
from .solver import (conservation_report, perturbation_experiment, sample_boundary_functions, solve,
                     unit_l1_forcing)

IDENTITY_TOL = 1e-12
ANGLE_TOL = 1e-10
CONSERVATION_TOL = 1e-9
ORACLE_TOL = 1e-9
ANTIPODAL_GUARD = 1e-6
# non-antipodal cutoff on |P + Q| for the formula-equivalence check;
# the inversion amplifies rounding by 1/|P + Q|
FORMULA_GUARD = 1e-2


@dataclass
class SuiteConfig:
    seed: int = 0
    d: int | None = None
    mesh_exp: int | None = None
    window_exp: int | None = None
    replicas: int | None = None
    corrupt: str | None = None
    threads: int = 1


def _pick(value, default):
    return default if value is None else value


def _report(test: str, params: dict, cfg: SuiteConfig, statistics: dict, decision: bool) -> dict:
    return {"test": test, "params": params, "seed": cfg.seed, "statistics": statistics, "decision": bool(decision)}


def identities(cfg: SuiteConfig, trials: int = 10**5) -> dict:
    stats = {}
    ok = True
    for d in (1, 2, 3):
        gen = RngStream(cfg.seed, STREAM_DIAGNOSTICS, (d,)).generator()
        P, Q, S = (uniform_point(gen, d, trials) for _ in range(3))
        axis = gen.standard_normal((trials, d + 1))
        zero = np.zeros_like(axis)
        once = geo.reflect_across(axis, S)
        inv = max(float(np.max(geo.norm(geo.reflect_across(axis, once) - S))),
                  float(np.max(geo.norm(geo.reflect_across(zero, geo.reflect_across(zero, S)) - S))))
        iso = float(np.max(np.abs(geo.norm(once - geo.reflect_across(axis, Q)) - geo.norm(S - Q))))
        pq = geo.norm(P + Q)
        keep = pq >= FORMULA_GUARD
        exch = float(np.max(np.maximum(geo.norm(geo.reflect_across(P + Q, P) - Q),
                                       geo.norm(geo.reflect_across(P + Q, Q) - P))[keep]))
        step = geo.wave_step(P, Q, S)
        formula = float(np.max(geo.norm(step[keep] - geo.reflection_formula(P[keep], Q[keep], S[keep]))))
        sphere = float(np.max(np.abs(geo.norm(step) - 1.0)))
        entry = {"involution": inv, "isometry": iso, "exchange": exch, "formula": formula,
                 "sphere": sphere, "excluded_near_antipodal": int((~keep).sum())}
        passed = max(inv, iso, exch, formula, sphere) <= IDENTITY_TOL
        if d == 1:
            a = geo.wrap_angle(geo.angle(step) - (geo.angle(P) + geo.angle(Q) - geo.angle(S)))
            entry["angle_law"] = float(np.max(np.abs(a[keep])))
            passed = passed and entry["angle_law"] <= ANGLE_TOL
        entry["pass"] = bool(passed)
        stats[f"d={d}"] = entry
        ok = ok and passed
    return _report("identities", {"trials": trials, "tolerance": IDENTITY_TOL}, cfg, stats, ok)


def conservation(cfg: SuiteConfig) -> dict:
    stats = {}
    ok = True
    sizes = (8, 10) if cfg.mesh_exp is None else (cfg.mesh_exp + _pick(cfg.window_exp, 0),)
    dims = (1, 2) if cfg.d is None else (cfg.d,)
    for k in sizes:
        for d in dims:
            b = sample_brownian_boundary(k, 0, d, RngStream(cfg.seed, STREAM_DIAGNOSTICS, (k, d)))
            rep = conservation_report(solve(b, threads=cfg.threads)).to_dict()
            rep["pass"] = rep["max_deviation"] <= CONSERVATION_TOL and rep["norm_drift"] <= CONSERVATION_TOL
            stats[f"side={2**k + 1},d={d}"] = rep
            ok = ok and rep["pass"]
    return _report("conservation", {"tolerance": CONSERVATION_TOL}, cfg, stats, ok)


def oracle_d1(cfg: SuiteConfig) -> dict:
    replicas = _pick(cfg.replicas, 100)
    N = _pick(cfg.mesh_exp, 6)
    L = _pick(cfg.window_exp, 0)
    worst = 0.0
    used = 0
    for values, amin in an.brownian_ensemble(replicas, N, L, 1, RngStream(cfg.seed), threads=cfg.threads):
        yp, ym = values[:, :, 0], values[:, 0, :]
        theta = (geo.angle(yp)[:, :, None] + geo.angle(ym)[:, None, :] - geo.angle(yp[:, :1])[:, :, None])
        err = np.abs(geo.wrap_angle(geo.angle(values) - theta)).reshape(len(values), -1).max(axis=1)
        keep = amin >= ANTIPODAL_GUARD
        used += int(keep.sum())
        if keep.any():
            worst = max(worst, float(err[keep].max()))
    stats = {"max_angle_error": worst, "replicas_used": used, "replicas": replicas}
    return _report("oracle-d1", {"mesh_exp": N, "window_exp": L, "tolerance": ORACLE_TOL,
                                 "antipodal_guard": ANTIPODAL_GUARD}, cfg, stats,
                   worst <= ORACLE_TOL and used > 0)


def chain_invariance(cfg: SuiteConfig) -> dict:
    d = _pick(cfg.d, 1)
    N = _pick(cfg.mesh_exp, 6)
    L = _pick(cfg.window_exp, 0)
    replicas = _pick(cfg.replicas, 500)
    rep = an.chain_invariance_test(replicas, N, L, d, None, RngStream(cfg.seed), corrupt=cfg.corrupt,
                                   threads=cfg.threads)
    stats = {"main": rep.to_dict()}
    decision = rep.decision
    if cfg.corrupt is None:
        control = an.chain_invariance_test(replicas, N, L, d, None, RngStream(cfg.seed, STREAM_CONTROL),
                                           corrupt="identity-step", threads=cfg.threads)
        stats["negative_control"] = control.to_dict()
        decision = decision and not control.decision
    return _report("chain-invariance", rep.params, cfg, stats, decision)


def translation(cfg: SuiteConfig) -> dict:
    d = _pick(cfg.d, 1)
    N = _pick(cfg.mesh_exp, 6)
    L = _pick(cfg.window_exp, 0)
    replicas = _pick(cfg.replicas, 1000)
    offset, probes = (8, 8), [(1, 1), (2, 5)]
    rep = an.translation_invariance_test(replicas, N, L, d, offset, probes, RngStream(cfg.seed),
                                         threads=cfg.threads)
    start = np.zeros(d + 1)
    start[0] = 1.0
    control = an.translation_invariance_test(replicas, N, L, d, offset, probes,
                                             RngStream(cfg.seed, STREAM_CONTROL), start=start,
                                             threads=cfg.threads)
    stats = {"main": rep.to_dict(), "negative_control": control.to_dict()}
    return _report("translation", rep.params, cfg, stats, rep.decision and not control.decision)


MODULUS_A_GRID = [0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 3.5, 4.0]


def modulus(cfg: SuiteConfig, pairs: int = 10**6) -> dict:
    d = _pick(cfg.d, 1)
    N = _pick(cfg.mesh_exp, 8)
    L = _pick(cfg.window_exp, 0)
    replicas = _pick(cfg.replicas, 200)
    stats = {}
    p99 = {}
    ok = True
    for n in (N - 1, N):
        reps = an.modulus_ensemble(replicas, n, L, d, RngStream(cfg.seed, 0, (n,)), pairs=pairs,
                                   threads=cfg.threads)
        curve = an.modulus_tail_curve(reps, MODULUS_A_GRID)
        probs = [p for _, p in curve]
        sup = np.array([r.sup_ratio for r in reps])
        finite = all(np.isfinite(v).all() for r in reps for v in r.per_scale.values())
        p99[n] = float(np.percentile(sup, 99))
        monotone = all(b <= a for a, b in zip(probs, probs[1:]))
        stats[f"N={n}"] = {"tail_curve": curve, "sup_ratio_p99": p99[n], "per_scale_finite": bool(finite),
                           "tail_nonincreasing": bool(monotone),
                           "per_scale_max": {str(k): float(max(max(r.per_scale[k]) for r in reps))
                                             for k in reps[0].per_scale}}
        ok = ok and finite and monotone
    ratio = max(p99.values()) / min(p99.values())
    stats["p99_ratio"] = ratio
    return _report("modulus", {"d": d, "mesh_exp": N, "window_exp": L, "replicas": replicas, "pairs": pairs},
                   cfg, stats, ok and ratio <= 1.5)


def kernel_identity(cfg: SuiteConfig) -> dict:
    e1 = kernel_reflection_identity_check(0.05, 1, 10**4, RngStream(cfg.seed, STREAM_DIAGNOSTICS, (1,)))
    e2 = kernel_reflection_identity_check(0.1, 2, 10**3, RngStream(cfg.seed, STREAM_DIAGNOSTICS, (2,)),
                                          truncation=60)
    stats = {"d=1": {"t": 0.05, "trials": 10**4, "max_rel_error": e1, "tolerance": 1e-7},
             "d=2": {"t": 0.1, "trials": 10**3, "max_rel_error": e2, "tolerance": 1e-6, "truncation": 60}}
    return _report("kernel-identity", {}, cfg, stats, e1 <= 1e-7 and e2 <= 1e-6)


def heat_tail(cfg: SuiteConfig, steps: int = 10**6) -> dict:
    t = 2.0 ** -6
    frac = an.heat_tail_exceedance(t, [4.0, 5.0, 6.0], steps, RngStream(cfg.seed, STREAM_DIAGNOSTICS))
    bound = 10.0 * t ** (25.0 / 8.0)
    vals = [frac[4.0], frac[5.0], frac[6.0]]
    ok = frac[5.0] <= bound and vals[0] >= vals[1] >= vals[2]
    stats = {"exceedance": {str(k): v for k, v in frac.items()}, "bound_at_A=5": bound}
    return _report("heat-tail", {"t": t, "steps": steps, "d": 1}, cfg, stats, ok)


def converge(cfg: SuiteConfig) -> dict:
    rows1 = an.convergence_study(presets.circle_sin(), 1, range(4, 11), eval_points=101,
                                 oracle=presets.circle_sin_exact)
    rows2 = an.convergence_study(presets.great_circle_precession(), 2, range(4, 10), reference_N=11)
    grid_ok = all(r["grid_error"] <= ORACLE_TOL for r in rows1)
    errs = [r["sup_error"] for r in rows2]
    strict = all(b < a for a, b in zip(errs, errs[1:]))
    stats = {"d=1": rows1, "d=2": rows2, "d1_grid_exact": grid_ok,
             "d1_offgrid_nonincreasing": an.errors_nonincreasing(rows1),
             "d2_strictly_decreasing": strict, "d2_final_error": errs[-1]}
    return _report("converge", {"d1_N": [4, 10], "d2_N": [4, 9], "d2_reference_N": 11}, cfg, stats,
                   grid_ok and strict and errs[-1] < 1e-2)


def boundary_ramp(boundary, direction=None):
    """Boundary displacement growing linearly from 0 at the origin; total l1 variation 1."""
    d = boundary.d
    e = np.zeros(d + 1)
    e[-1] = 1.0
    e = e if direction is None else np.asarray(direction, dtype=np.float64)
    rp = (np.arange(boundary.M + 1) / (2.0 * boundary.M))[:, None] * e
    rm = (np.arange(boundary.N + 1) / (2.0 * boundary.N))[:, None] * e
    return rp, rm


def perturb(cfg: SuiteConfig) -> dict:
    N = _pick(cfg.mesh_exp, 6)
    b = sample_boundary_functions(presets.great_circle_precession(), N, 0)
    shape = unit_l1_forcing(b.M, b.N, 2)
    sweep = {}
    for eps in (1e-2, 1e-3, 1e-4):
        diff, ratio = perturbation_experiment(b, eps, shape)
        bdiff, bratio = perturbation_experiment(b, eps, None, boundary_ramp(b))
        sweep[repr(eps)] = {"sup_diff": diff, "ratio": ratio, "boundary_sup_diff": bdiff, "boundary_ratio": bratio}
    zero, _ = perturbation_experiment(b, 0.0, shape)
    ratios = [v["ratio"] for v in sweep.values()]
    bratios = [v["boundary_ratio"] for v in sweep.values()]
    spread = max(ratios) / min(ratios)
    bspread = max(bratios) / min(bratios)
    stats = {"sweep": sweep, "ratio_spread": spread, "boundary_ratio_spread": bspread, "sup_diff_at_zero": zero}
    return _report("perturb", {"d": 2, "mesh_exp": N, "preset": "great-circle-precession"}, cfg, stats,
                   spread < 4.0 and bspread < 4.0 and zero == 0.0)


SUITES = {
    "identities": identities,
    "conservation": conservation,
    "oracle-d1": oracle_d1,
    "chain-invariance": chain_invariance,
    "translation": translation,
    "modulus": modulus,
    "kernel-identity": kernel_identity,
    "heat-tail": heat_tail,
    "converge": converge,
    "perturb": perturb,
}


def run(name: str, cfg: SuiteConfig) -> dict:
    if name == "all":
        reports = {k: fn(cfg) for k, fn in SUITES.items()}
        return {"test": "all", "params": {}, "seed": cfg.seed, "statistics": reports,
                "decision": all(r["decision"] for r in reports.values())}
    return SUITES[name](cfg)
