"""
parameter sweeps over Kirchhoff solutions: a-priori sup-norm windows under grid refinement,
blow-up of the upper branch and convergence of the lower branch as b -> 0
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from kirlab.branch import CaseLabel, KirchhoffParams, find_roots
from kirlab.exceptions import ConfigurationError, KirlabError
from kirlab.grid import DomainSpec, Grid, build_domain, smallest_eigenvalue
from kirlab.groundstate import GroundState, solve_groundstate
from kirlab.kirchhoff import (PerturbationSpec, SolutionRecord, continuation, homotopy_step, reconstruct,
                              uniform_schedule)

PARAM_VARIABLES = ("a", "b", "alpha")
PERT_VARIABLES = ("mu", "lam", "lam_fraction", "q", "q1")
SWEEP_VARIABLES = ("t",) + PARAM_VARIABLES + PERT_VARIABLES
WINDOW_TOL = 0.1
SLOPE_TOL = 0.05


def regime_of(params: KirchhoffParams) -> str:
    if params.p < 1:
        return "sublinear"
    if params.p > 2 * params.alpha + 1:
        return "superlinear"
    return "intermediate"


@dataclass(frozen=True)
class SweepSpec:
    """
    one swept variable, the grid resolutions compared, and for 1<p<2 alpha+1 the fixed homotopy level t0
    """
    variable: str
    values: Tuple[float, ...]
    resolutions: Tuple[int, ...] = (64, 128)
    t0: Optional[float] = None

    def violations(self, params: KirchhoffParams) -> List[str]:
        out = []
        if self.variable not in SWEEP_VARIABLES:
            out.append(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not self.values:
            out.append("sweep values must not be empty")
        if len(self.resolutions) < 1:
            out.append("sweep needs at least one resolution")
        regime = regime_of(params)
        if regime == "intermediate":
            if self.t0 is None or not 0 < self.t0 <= 1:
                out.append("for 1<p<2 alpha+1 bounds are only defined at a fixed t0 in (0, 1]")
            if self.variable == "t":
                out.append("for 1<p<2 alpha+1 the homotopy level is fixed by t0 and cannot be swept")
        if self.variable == "t" and any(not 0 <= v <= 1 for v in self.values):
            out.append("swept t values must lie in [0, 1]")
        return out

    def to_dict(self):
        return {"variable": self.variable, "values": list(self.values), "resolutions": list(self.resolutions),
                "t0": self.t0}


@dataclass
class BoundsReport:
    regime: str
    table: pd.DataFrame
    windows: Dict[int, Tuple[float, float]]
    refinement_change: Optional[Dict[str, float]]
    stable: Optional[bool]
    failures: List[dict] = field(default_factory=list)
    lam_margin: Optional[Dict[int, float]] = None
    unbounded: Optional[bool] = None
    hypothesis_limits: Optional[dict] = None

    @property
    def ok(self) -> bool:
        if self.failures:
            return False
        if self.regime == "intermediate":
            return True
        return all(lo > 0 for lo, _ in self.windows.values()) and self.stable is not False

    def to_dict(self):
        return {"regime": self.regime,
                "ok": self.ok,
                "windows": {str(k): list(v) for k, v in self.windows.items()},
                "refinement_change": self.refinement_change,
                "stable": self.stable,
                "failures": self.failures,
                "lam_margin": None if self.lam_margin is None else {str(k): v for k, v in self.lam_margin.items()},
                "unbounded": self.unbounded,
                "hypothesis_limits": self.hypothesis_limits,
                "cells": self.table.to_dict(orient="records")}


def _row(resolution, variable, value, record: SolutionRecord, branch=None):
    return {"resolution": resolution, "variable": variable, "value": value,
            "branch": branch if branch is not None else -1, "t": record.t,
            "sup": record.sup_norm, "min": record.min, "residual": record.residual_rel,
            "status": "ok", "error": ""}


def _failed(resolution, variable, value, err):
    return {"resolution": resolution, "variable": variable, "value": value, "branch": -1, "t": math.nan,
            "sup": math.nan, "min": math.nan, "residual": math.nan, "status": "failed",
            "error": f"{type(err).__name__}: {err}"}


def _apply(params, pert, variable, value):
    if variable in PARAM_VARIABLES:
        return params.with_(**{variable: value}), pert
    if variable in PERT_VARIABLES:
        if variable == "lam":
            return params, replace(pert, lam=value, lam_fraction=None)
        if variable == "lam_fraction":
            return params, replace(pert, lam=None, lam_fraction=value)
        return params, replace(pert, **{variable: value})
    return params, pert


def _uniform_cell(grid, gs, lam1, params, pert, sweep, value, t_schedule, step_kwargs):
    resolution = grid.spec.resolution
    if sweep.variable == "t":
        schedule = sorted(set(t_schedule) | {float(v) for v in sweep.values})
        cell_params, cell_pert = params, pert
    else:
        schedule = t_schedule
        cell_params, cell_pert = _apply(params, pert, sweep.variable, value)
    cell_pert = cell_pert.resolve(cell_params.a, lam1)
    path = continuation(grid, cell_params, cell_pert, schedule, gs=gs, lam1=lam1, **step_kwargs)
    if sweep.variable == "t":
        return [_row(resolution, "t", r.t, r) for r in path if r.t in {float(v) for v in sweep.values}]
    return [_row(resolution, sweep.variable, value, path[-1])]


def _intermediate_cell(grid, gs, lam1, params, pert, sweep, value, step_kwargs):
    resolution = grid.spec.resolution
    cell_params, cell_pert = _apply(params, pert, sweep.variable, value)
    cell_pert = cell_pert.resolve(cell_params.a, lam1)
    t0 = sweep.t0
    # at level t0 the unperturbed problem is the Kirchhoff problem with b replaced by t0 b
    effective = cell_params.with_(b=t0 * cell_params.b)
    report = find_roots(effective, gs.S)
    rows = []
    for k, beta in enumerate(report.roots):
        record = reconstruct(gs, beta, effective, root_index=k)
        if cell_pert.kind != "none":
            record = homotopy_step(grid, cell_params, cell_pert, t0, record.u, lam1=lam1, **step_kwargs)
        else:
            record.t = t0
        rows.append(_row(resolution, sweep.variable, value, record, branch=k))
    return rows


def bound_sweep(domain: DomainSpec, params: KirchhoffParams, pert: PerturbationSpec, sweep: SweepSpec,
                t_schedule: Optional[Sequence[float]] = None, threads: int = 1, gs_tol: float = 1e-10,
                verbose: bool = False, **step_kwargs) -> BoundsReport:
    """
    sup-norms of all converged solutions over the sweep, per resolution
    :param domain: DomainSpec; its resolution is replaced by each of sweep.resolutions
    :param params: KirchhoffParams fixing the regime
    :param pert: PerturbationSpec
    :param sweep: SweepSpec
    :param t_schedule: homotopy schedule for the guaranteed-existence regimes (default 11 uniform points)
    :param threads: number of concurrently evaluated cells
    :param gs_tol: ground-state tolerance
    :param verbose: print progress
    :param step_kwargs: passed to homotopy_step
    :return: BoundsReport with cells ordered by (resolution, value, branch, t)
    """
    bad = sweep.violations(params)
    if bad:
        raise ConfigurationError(bad)
    regime = regime_of(params)
    t_schedule = uniform_schedule() if t_schedule is None else list(t_schedule)

    cells = []
    lam_margin = {} if pert.kind == "superlinear" else None
    for resolution in sweep.resolutions:
        grid = build_domain(replace(domain, resolution=int(resolution)))
        gs = solve_groundstate(grid, params.p, tol=gs_tol)
        lam1, _ = smallest_eigenvalue(grid)
        if lam_margin is not None:
            # smallest relative gap a lambda_1 - lam over the swept perturbations
            swept = sweep.values if sweep.variable in ("lam", "lam_fraction", "a") else [None]
            margins = []
            for value in swept:
                cell_params, cell_pert = _apply(params, pert, sweep.variable, value)
                lam = cell_pert.resolve(cell_params.a, lam1).lam
                margins.append(1 - lam / (cell_params.a * lam1))
            lam_margin[resolution] = min(margins)
        if verbose:
            print(f"resolution {resolution}: S={gs.S:.12g}  lambda_1={lam1:.12g}")
        for value in (sweep.values if sweep.variable != "t" else [None]):
            cells.append((grid, gs, lam1, value))

    def run(cell):
        grid, gs, lam1, value = cell
        try:
            if regime == "intermediate":
                return _intermediate_cell(grid, gs, lam1, params, pert, sweep, value, step_kwargs)
            return _uniform_cell(grid, gs, lam1, params, pert, sweep, value, t_schedule, step_kwargs)
        except KirlabError as err:
            return [_failed(grid.spec.resolution, sweep.variable, value, err)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(cell) for cell in cells]

    table = pd.DataFrame([row for rows in results for row in rows])
    table = table.sort_values(["resolution", "value", "branch", "t"], kind="mergesort", na_position="first")
    table = table.reset_index(drop=True)
    ok = table[table["status"] == "ok"]
    failures = table[table["status"] != "ok"][["resolution", "value", "error"]].to_dict(orient="records")
    if failures:
        warnings.warn(f"{len(failures)} sweep cells failed to converge")

    windows = {int(res): (float(grp["sup"].min()), float(grp["sup"].max()))
               for res, grp in ok.groupby("resolution")}
    refinement_change, stable = None, None
    res_sorted = sorted(windows)
    if len(res_sorted) >= 2:
        (lo0, hi0), (lo1, hi1) = windows[res_sorted[0]], windows[res_sorted[1]]
        refinement_change = {"min": abs(lo1 - lo0) / abs(lo1), "max": abs(hi1 - hi0) / abs(hi1)}
        stable = max(refinement_change.values()) < WINDOW_TOL

    unbounded = None
    if regime == "intermediate" and sweep.variable == "b":
        finest = ok[ok["resolution"] == res_sorted[-1]] if res_sorted else ok
        peaks = finest.groupby("value")["sup"].max().sort_index(ascending=False).to_numpy()
        unbounded = bool(len(peaks) >= 2 and np.all(np.diff(peaks) > 0))

    # small-amplitude limits of h behind (H1)/(H2), at the finest lambda_1
    limits = None if pert.kind == "none" else pert.resolve(params.a, lam1).hypothesis_limits(params.p)
    return BoundsReport(regime, table, windows, refinement_change, stable, failures, lam_margin, unbounded, limits)


@dataclass
class ProbeReport:
    table: pd.DataFrame
    lower_error_monotone: bool
    upper_increasing: Optional[bool] = None
    upper_slope: Optional[float] = None
    expected_upper_slope: Optional[float] = None
    flagged: int = 0

    @property
    def slope_error(self) -> Optional[float]:
        if self.upper_slope is None or self.expected_upper_slope is None:
            return None
        return abs(self.upper_slope - self.expected_upper_slope) / abs(self.expected_upper_slope)

    @property
    def ok(self) -> bool:
        checks = [self.lower_error_monotone]
        if self.upper_increasing is not None:
            checks.append(self.upper_increasing)
        if self.expected_upper_slope is not None:
            checks.append(self.slope_error is not None and self.slope_error <= SLOPE_TOL)
        return all(checks)

    def to_dict(self):
        return {"ok": self.ok,
                "lower_error_monotone": self.lower_error_monotone,
                "upper_increasing": self.upper_increasing,
                "upper_slope": self.upper_slope,
                "expected_upper_slope": self.expected_upper_slope,
                "slope_error": self.slope_error,
                "flagged": self.flagged,
                "table": self.table.to_dict(orient="records")}


def _reference(gs: GroundState, params: KirchhoffParams):
    # b = 0 solution of -a Lap u = u^p
    return params.a ** (1 / (params.p - 1)) * gs.v.values


def blowup_probe(grid: Grid, params: KirchhoffParams, b_sequence: Sequence[float],
                 gs: Optional[GroundState] = None, verbose: bool = False) -> ProbeReport:
    """
    both branches along a decreasing sequence of b for 1 < p < 2 alpha + 1
    :return: ProbeReport; lower-branch distance to the b = 0 solution, upper-branch sup-norms and
        their log-log slope (expected -1/gamma)
    """
    if not 1 < params.p < 2 * params.alpha + 1:
        raise ConfigurationError(f"blowup_probe needs 1<p<2 alpha+1, got p={params.p}, alpha={params.alpha}")
    gs = solve_groundstate(grid, params.p) if gs is None else gs
    ref = _reference(gs, params)
    rows = []
    for b in sorted(b_sequence, reverse=True):
        report = find_roots(params.with_(b=b), gs.S)
        if report.case_label is not CaseLabel.TWO_BRANCH or len(report.roots) != 2:
            rows.append({"b": b, "y1": math.nan, "y2": math.nan, "lower_error": math.nan,
                         "upper_sup": math.nan, "flagged": True})
            continue
        lower = reconstruct(gs, report.roots[0], params.with_(b=b), root_index=0)
        upper = reconstruct(gs, report.roots[1], params.with_(b=b), root_index=1)
        rows.append({"b": b, "y1": report.roots[0], "y2": report.roots[1],
                     "lower_error": float((lower.u.values - ref).abs().max()),
                     "upper_sup": upper.sup_norm, "flagged": False})
        if verbose:
            print(f"b={b:.6g}: lower error {rows[-1]['lower_error']:.3e}  upper sup {upper.sup_norm:.6g}")
    table = pd.DataFrame(rows)
    flagged = int(table["flagged"].sum())
    if flagged:
        warnings.warn(f"{flagged} values of b leave the two-root zone and are flagged")

    ok = table[~table["flagged"]]
    lower = ok["lower_error"].to_numpy()
    upper = ok["upper_sup"].to_numpy()
    slope = float(np.polyfit(np.log(ok["b"]), np.log(upper), 1)[0]) if len(ok) >= 2 else None
    return ProbeReport(table,
                       lower_error_monotone=bool(np.all(np.diff(lower) < 0)),
                       upper_increasing=bool(np.all(np.diff(upper) > 0)),
                       upper_slope=slope,
                       expected_upper_slope=-1 / params.gamma,
                       flagged=flagged)


def limit_probe(grid: Grid, params: KirchhoffParams, b_sequence: Sequence[float],
                gs: Optional[GroundState] = None, verbose: bool = False) -> ProbeReport:
    """
    the unique solution u_b for 0<p<1 or p>2 alpha+1 approaches the b = 0 solution as b decreases
    """
    if 1 < params.p <= 2 * params.alpha + 1:
        raise ConfigurationError(f"limit_probe needs 0<p<1 or p>2 alpha+1, got p={params.p}")
    gs = solve_groundstate(grid, params.p) if gs is None else gs
    ref = _reference(gs, params)
    rows = []
    for b in sorted(b_sequence, reverse=True):
        cell = params.with_(b=b)
        report = find_roots(cell, gs.S)
        record = reconstruct(gs, report.roots[0], cell)
        rows.append({"b": b, "y": report.roots[0], "sup": record.sup_norm,
                     "error": float((record.u.values - ref).abs().max())})
        if verbose:
            print(f"b={b:.6g}: distance to b=0 solution {rows[-1]['error']:.3e}")
    table = pd.DataFrame(rows)
    return ProbeReport(table, lower_error_monotone=bool(np.all(np.diff(table["error"].to_numpy()) < 0)))
