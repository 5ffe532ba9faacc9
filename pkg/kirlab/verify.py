"""
acceptance suite: closed-form fixtures, randomized regime classification and small PDE runs
on radial disks and coarse squares
"""

import math
import time
import warnings

import numpy as np
import torch

from kirlab.branch import (CaseLabel, KirchhoffParams, asymptotic_b_to_zero, eval_f, eval_fprime, extremum_value,
                           find_roots, scaled_residual)
from kirlab.data import fixtures
from kirlab.exceptions import FixedPointError, KirlabError, NonPositiveError
from kirlab.grid import DomainSpec, build_domain, smallest_eigenvalue, solve_poisson
from kirlab.groundstate import solve_groundstate
from kirlab.kirchhoff import PerturbationSpec, continuation, homotopy_step, reconstruct, recover_groundstate
from kirlab.shooting import shooting_oracle
from kirlab.sweep import SLOPE_TOL, SweepSpec, blowup_probe, bound_sweep

SEED = 20240101
SAMPLES = 1000


def _log_uniform(rng, lo, hi):
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _sample(rng, case):
    box = fixtures.coefficient_box
    margin = fixtures.region_margin
    a = _log_uniform(rng, *box["a"])
    b = _log_uniform(rng, *box["b"])
    S = _log_uniform(rng, *box["S"])
    alpha = float(rng.uniform(*fixtures.case_boxes[case]["alpha"]))
    if case == "sublinear":
        p = rng.uniform(*fixtures.case_boxes[case]["p"])
    elif case == "subcritical_two_branch":
        p = rng.uniform(1 + margin, 2 * alpha + 1 - margin)
    elif case == "supercritical":
        p = 2 * alpha + 1 - rng.uniform(*fixtures.case_boxes[case]["gamma"])
    else:
        p = 2 * alpha + 1
    return KirchhoffParams(a, b, alpha, float(p)), S


def _absolute_residual(y, params, S):
    """
    |f(y)| / max(aS, 1), from the scaled residual without forming the large terms of f
    """
    log_scale = max(math.log(params.a * S), 0.0)
    excess = max((params.p - 1) / 2 * math.log(y) - log_scale, 0.0)
    with np.errstate(over="ignore"):
        return float(scaled_residual(y, params, S) * np.exp(excess))


def check_classification(samples=SAMPLES, seed=SEED):
    """
    root counts of randomized tuples match the case prediction; the sign of f(y0) agrees with the
    threshold test; every root has a scaled residual below 1e-10. The residual in units of max(aS, 1)
    is reported alongside; large roots cannot meet it in float64.
    """
    rng = np.random.default_rng(seed)
    mismatches, errors, worst, worst_abs, abs_exceed = 0, [], 0.0, 0.0, 0
    counts = {}
    for case in fixtures.case_boxes:
        for _ in range(samples):
            params, S = _sample(rng, case)
            try:
                report = find_roots(params, S)
            except KirlabError as err:
                errors.append(f"{params} S={S}: {type(err).__name__}: {err}")
                continue
            if report.case_label.value != case or len(report.roots) != report.predicted_count:
                mismatches += 1
            if report.case_label is CaseLabel.TWO_BRANCH and not report.tangent:
                if (extremum_value(params, S) > 0) != (report.predicted_count == 2):
                    mismatches += 1
            for y in report.roots:
                worst = max(worst, scaled_residual(y, params, S))
                absolute = _absolute_residual(y, params, S)
                worst_abs = max(worst_abs, absolute)
                abs_exceed += absolute > 1e-10
            counts[(case, report.predicted_count)] = counts.get((case, report.predicted_count), 0) + 1
    passed = mismatches == 0 and not errors and worst <= 1e-10
    return passed, {"mismatches": mismatches, "errors": errors[:10], "error_count": len(errors),
                    "worst_scaled_residual": worst, "worst_absolute_residual": worst_abs,
                    "absolute_exceedances": int(abs_exceed),
                    "counts": {f"{k[0]}:{k[1]}": v for k, v in counts.items()}}


def check_fixtures():
    details = {}
    passed = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for fix in fixtures.branch_fixtures:
            params = KirchhoffParams(**fix["params"])
            report = find_roots(params, fix["S"])
            err = max((abs(y - r) for y, r in zip(report.roots, fix["roots"])), default=math.inf)
            ok = len(report.roots) == len(fix["roots"]) and err <= 1e-10 * max(fix["roots"])
            if "y0" in fix:
                ok = ok and abs(report.y0 - fix["y0"]) <= 1e-12 * fix["y0"]
            details[fix["name"]] = {"roots": report.roots, "error": err}
            passed = passed and ok
    return passed, details


def check_reduction():
    """
    3x3x3 (a, b, p) grid: ||grad u||^2 = beta, Kirchhoff residual and round trip to the ground state
    """
    grid = build_domain(DomainSpec.disk(1.0, 256))
    worst = {"identity": 0.0, "residual": 0.0, "round_trip": 0.0}
    records = 0
    for p in (0.5, 2.0, 4.0):
        gs = solve_groundstate(grid, p)
        for a in (0.5, 1.0, 2.0):
            for b in (0.0, 1e-3, 1e-1):
                params = KirchhoffParams(a, b, 1.0, p)
                for k, beta in enumerate(find_roots(params, gs.S).roots):
                    record = reconstruct(gs, beta, params, root_index=k)
                    v = recover_groundstate(record)
                    worst["identity"] = max(worst["identity"], abs(record.grad_sq - beta) / beta)
                    worst["residual"] = max(worst["residual"], record.residual_rel)
                    worst["round_trip"] = max(worst["round_trip"], float((v.values - gs.v.values).abs().max()))
                    records += 1
    passed = worst["identity"] <= 1e-6 and worst["residual"] <= 1e-8 and worst["round_trip"] <= 1e-6
    return passed, {**worst, "records": records}


def check_groundstate():
    grid = build_domain(DomainSpec.disk(1.0, 256))
    gs = solve_groundstate(grid, 3.0)
    oracle = shooting_oracle(3.0, 1.0)
    s_err = abs(gs.S_omega - oracle.S_omega) / oracle.S_omega
    sup_err = abs(gs.sup - oracle.sup) / oracle.sup
    identity = abs(gs.S - gs.S_omega ** 2) / gs.S
    energy = abs(gs.grad_norm ** 2 - gs.energy()) / gs.grad_norm ** 2
    passed = s_err <= 0.01 and sup_err <= 0.01 and identity <= 1e-6 and energy <= 1e-8
    return passed, {"S_omega": gs.S_omega, "oracle_S_omega": oracle.S_omega, "relative_error": s_err,
                    "sup_error": sup_err, "identity_error": identity, "energy_error": energy}


def check_asymptotics():
    family = fixtures.asymptotic_family
    params = KirchhoffParams(**family["params"])
    report = asymptotic_b_to_zero(params, family["S"], family["b_sequence"])
    slope_err = abs(report.y2_slope - report.expected_y2_slope) / abs(report.expected_y2_slope)

    grid = build_domain(DomainSpec.disk(1.0, 256))
    gs = solve_groundstate(grid, 2.0)
    # a b < 1/(4 S^2) keeps every b <= 1 inside the two-root zone
    blowup = blowup_probe(grid, params.with_(a=1 / (64 * gs.S ** 2)), family["b_sequence"], gs=gs)
    passed = (report.y1_error_monotone and slope_err <= SLOPE_TOL and blowup.ok and blowup.flagged == 0)
    return passed, {"y2_slope": report.y2_slope, "expected": report.expected_y2_slope,
                    "y1_error_monotone": report.y1_error_monotone, "upper_slope": blowup.upper_slope,
                    "expected_upper_slope": blowup.expected_upper_slope, "upper_slope_error": blowup.slope_error,
                    "lower_error_monotone": blowup.lower_error_monotone,
                    "upper_increasing": blowup.upper_increasing}


def check_homotopy():
    grid = build_domain(DomainSpec.disk(1.0, 128))
    lam1, _ = smallest_eigenvalue(grid)
    details = {}
    passed = True
    runs = [("sublinear", KirchhoffParams(1.0, 1.0, 1.0, 0.5),
             PerturbationSpec.sublinear(**{k: v for k, v in fixtures.sublinear_perturbation.items() if k != "kind"})),
            ("superlinear", KirchhoffParams(1.0, 1.0, 1.0, 5.0),
             PerturbationSpec.superlinear(q=2.0, lam_fraction=0.5).resolve(1.0, lam1)),
            ("unperturbed", KirchhoffParams(1.0, 1.0, 1.0, 0.5), PerturbationSpec.none())]
    gs_cache = {}
    for name, params, pert in runs:
        if params.p not in gs_cache:
            gs_cache[params.p] = solve_groundstate(grid, params.p)
        gs = gs_cache[params.p]
        path = continuation(grid, params, pert, gs=gs, lam1=lam1)
        end = path[-1]
        ok = end.t == 1 and end.residual_rel <= 1e-8
        details[name] = {"steps": len(path), "residual": end.residual_rel, "sup": end.sup_norm}
        if pert.kind == "none":
            ref = reconstruct(gs, find_roots(params, gs.S).roots[0], params)
            diff = float((ref.u.values - end.u.values).abs().max())
            details[name]["reconstruct_difference"] = diff
            ok = ok and diff <= 1e-6
        passed = passed and ok
    return passed, details


def check_bounds(resolutions=(64, 128)):
    domain = DomainSpec.disk(1.0, resolutions[0])
    details = {}
    params = KirchhoffParams(1.0, 1.0, 1.0, 0.5)
    pert = PerturbationSpec.sublinear(mu=1.0, q=0.7, q1=0.8)
    sub = bound_sweep(domain, params, pert, SweepSpec("t", (0.0, 0.25, 0.5, 0.75, 1.0), tuple(resolutions)))
    sup_params = KirchhoffParams(1.0, 1.0, 1.0, 5.0)
    sup_pert = PerturbationSpec.superlinear(q=2.0, lam_fraction=0.1)
    sup = bound_sweep(domain, sup_params, sup_pert, SweepSpec("lam_fraction", (0.1, 0.9), tuple(resolutions)))
    details["sublinear"] = {"windows": sub.windows, "refinement_change": sub.refinement_change}
    details["superlinear"] = {"windows": sup.windows, "refinement_change": sup.refinement_change,
                              "lam_margin": sup.lam_margin}
    return sub.ok and sup.ok, details


def check_nonexistence():
    """
    picard iteration at t = 1 from above the upper branch: it must fail where the threshold test rules out
    a root (a = 1, b >= 1/2) and settle on the upper branch of the control cell a b S^2 = 1/64
    """
    grid = build_domain(DomainSpec.rectangle(1.0, 1.0, 32))
    gs = solve_groundstate(grid, 2.0)
    outcomes = {}
    passed = True
    cells = [(1.0, b) for b in (0.5, 1.0, 2.0, 4.0, 8.0)] + [(1 / (64 * gs.S ** 2), 1.0)]
    for a, b in cells:
        params = KirchhoffParams(a, b, 1.0, 2.0)
        report = find_roots(params, gs.S)
        # c = 1/(b S^2) lies above every fixed point of the amplitude map c -> c^2 / (a + b c^2 S^2)
        init = gs.v.like(gs.v.values / (b * gs.S ** 2))
        branch_error = None
        try:
            record = homotopy_step(grid, params, PerturbationSpec.none(), 1.0, init, method="picard", maxiter=1000)
            outcome = "converged"
            if report.roots:
                branch_error = abs(record.grad_sq - report.roots[-1]) / report.roots[-1]
        except FixedPointError as err:
            outcome = err.reason
        except NonPositiveError:
            outcome = "nonpositive"
        outcomes[f"a={a:.6g},b={b:g}"] = {"roots": len(report.roots), "outcome": outcome,
                                          "branch_error": branch_error}
        if report.roots:
            passed = passed and outcome == "converged" and branch_error <= 1e-6
        else:
            passed = passed and outcome != "converged"
    return passed, outcomes


def check_infrastructure():
    errors = []
    for n in (16, 32, 64):
        grid = build_domain(DomainSpec.rectangle(1.0, 1.0, n))
        exact = grid.from_function(lambda x, y: torch.sin(math.pi * x) * torch.sin(math.pi * y))
        w = solve_poisson(grid, exact.like(2 * math.pi ** 2 * exact.values))
        errors.append(float((w.values - exact.values).abs().max()))
    ratios = [e0 / e1 for e0, e1 in zip(errors, errors[1:])]
    lam, _ = smallest_eigenvalue(build_domain(DomainSpec.rectangle(1.0, 1.0, 64)))
    lam_err = abs(lam - 2 * math.pi ** 2) / (2 * math.pi ** 2)

    params, S = KirchhoffParams(0.25, 0.25, 1.0, 2.0), 1.0
    fd_err = 0.0
    for y in (0.1, 1.0, 2.0, 20.0):
        h = 1e-5 * y
        fd = (eval_f(y + h, params, S) - eval_f(y - h, params, S)) / (2 * h)
        exact_d = eval_fprime(y, params, S)
        fd_err = max(fd_err, abs(fd - exact_d) / max(abs(exact_d), 1e-300))
    passed = all(3.5 <= r <= 4.5 for r in ratios) and lam_err <= 0.01 and fd_err <= 1e-6
    return passed, {"poisson_errors": errors, "ratios": ratios, "lambda_1": lam, "lambda_1_error": lam_err,
                    "fprime_error": fd_err}


CHECKS = [("regime_classification", check_classification),
          ("closed_form_roots", check_fixtures),
          ("reduction_identity", check_reduction),
          ("groundstate_cross_validation", check_groundstate),
          ("asymptotics", check_asymptotics),
          ("homotopy_existence", check_homotopy),
          ("uniform_bounds", check_bounds),
          ("nonexistence", check_nonexistence),
          ("numerical_infrastructure", check_infrastructure)]


def run_verify(only=None, verbose=False):
    """
    run the acceptance checks
    :param only: optional list of check names
    :param verbose: print one line per check
    :return: (all passed, list of {name, passed, details | error})
    """
    results = []
    for name, check in CHECKS:
        if only and name not in only:
            continue
        start = time.perf_counter()
        try:
            passed, details = check()
            entry = {"name": name, "passed": bool(passed), "details": details}
        except KirlabError as err:
            entry = {"name": name, "passed": False, "error": f"{type(err).__name__}: {err}"}
        if verbose:
            print(f"{name:32s} {'ok' if entry['passed'] else 'FAILED'}  ({time.perf_counter() - start:.1f} s)")
        results.append(entry)
    return all(r["passed"] for r in results), results
