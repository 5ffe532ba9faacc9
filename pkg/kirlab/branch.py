"""
the scalar branch equation

    f(y) = y^((p-1)/2) - b S y^alpha - a S

whose positive roots beta parameterize the positive solutions u = (a + b beta^alpha)^(1/(p-1)) v of the
unperturbed Kirchhoff problem. Classification follows the sign of gamma = 2 alpha + 1 - p.
"""

import math
import warnings
from dataclasses import dataclass, field, replace, asdict
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from kirlab.exceptions import (BracketError, BranchInconsistencyError, ConfigurationError, DomainError)

EQ_TOL = 1e-9
DEFAULT_ROOT_TOL = 1e-10
BRACKET_CAP = 200
_RTOL = 4 * np.finfo(float).eps
_XTOL = 1e-15
_LOG_HUGE = math.log(np.finfo(float).max)
_LOG_TINY = math.log(np.finfo(float).tiny)


def critical_exponent(dim: int = 2) -> float:
    """
    2* = (N+2)/(N-2) for N >= 3 and +inf for N = 2
    """
    return math.inf if dim <= 2 else (dim + 2) / (dim - 2)


class CaseLabel(str, Enum):
    SUBLINEAR = "sublinear"
    TWO_BRANCH = "subcritical_two_branch"
    SUPERCRITICAL = "supercritical"
    RESONANT = "resonant"


@dataclass(frozen=True)
class KirchhoffParams:
    """
    coefficients of -(a + b ||grad u||_2^(2 alpha)) Lap u = u^p in dimension dim
    """
    a: float
    b: float
    alpha: float
    p: float
    dim: int = 2

    def __post_init__(self):
        if self.p == 1:
            raise DomainError("p = 1 is excluded: the reduction exponents 1/(p-1) are undefined")
        bad = self.violations()
        if bad:
            raise ConfigurationError(bad)

    def violations(self):
        two_star = critical_exponent(self.dim)
        out = []
        if not self.a > 0:
            out.append(f"the Kirchhoff problem requires a>0, got a={self.a}")
        if not self.b >= 0:
            out.append(f"the Kirchhoff problem requires b>=0, got b={self.b}")
        if not 0 < self.alpha < (two_star - 1) / 2:
            out.append(f"the Kirchhoff problem requires 0<alpha<(2*-1)/2, got alpha={self.alpha}")
        if not 0 < self.p < two_star:
            out.append(f"the Kirchhoff problem requires 0<p<2*, got p={self.p}")
        return out

    @property
    def gamma(self) -> float:
        return 2 * self.alpha + 1 - self.p

    def with_(self, **kwargs) -> "KirchhoffParams":
        return replace(self, **kwargs)

    def to_dict(self):
        return {**asdict(self), "gamma": self.gamma}


def _check(y, S):
    if not y > 0:
        raise DomainError(f"the branch equation is defined for y>0 only, got y={y}")
    if not S > 0:
        raise DomainError(f"S must be > 0, got S={S}")


def eval_f(y: float, params: KirchhoffParams, S: float) -> float:
    _check(y, S)
    y = np.float64(y)
    return float(np.power(y, (params.p - 1) / 2) - params.b * S * np.power(y, params.alpha) - params.a * S)


def eval_fprime(y: float, params: KirchhoffParams, S: float) -> float:
    _check(y, S)
    y = np.float64(y)
    p, alpha = params.p, params.alpha
    return float(np.power(y, alpha - 1)
                 * ((p - 1) / 2 * np.power(y, -params.gamma / 2) - alpha * params.b * S))


def eval_fsecond(y: float, params: KirchhoffParams, S: float) -> float:
    _check(y, S)
    y = np.float64(y)
    p, alpha = params.p, params.alpha
    return float(np.power(y, alpha - 2)
                 * ((p - 1) * (p - 3) / 4 * np.power(y, -params.gamma / 2)
                    - alpha * (alpha - 1) * params.b * S))


def is_resonant(params: KirchhoffParams, eq_tol: float = EQ_TOL) -> bool:
    return abs(params.gamma) <= eq_tol * (2 * params.alpha + 1)


def critical_point(params: KirchhoffParams, S: float, eq_tol: float = EQ_TOL) -> Optional[float]:
    """
    unique zero y0 = ((p-1)/(2 alpha b S))^(2/gamma) of f'; None for 0<p<1, b=0 or p=2 alpha+1
    """
    if params.p < 1 or params.b == 0 or is_resonant(params, eq_tol):
        return None
    return float(np.power((params.p - 1) / (2 * params.alpha * params.b * S), 2 / params.gamma))


def extremum_value(params: KirchhoffParams, S: float, eq_tol: float = EQ_TOL) -> Optional[float]:
    """
    closed form of f(y0): the maximum of f for 1<p<2 alpha+1, the minimum for p>2 alpha+1
    """
    if critical_point(params, S, eq_tol) is None:
        return None
    p, alpha, gamma = params.p, params.alpha, params.gamma
    log_term = (math.log(abs(gamma))
                + ((p - 1) * math.log(p - 1) - 2 * alpha * math.log(2 * alpha)) / gamma
                + (1 - p) / gamma * math.log(params.b * S))
    magnitude = math.exp(log_term) if log_term < _LOG_HUGE else math.inf
    return math.copysign(magnitude, gamma) - params.a * S


@dataclass
class RegimeReport:
    case_label: CaseLabel
    predicted_count: int
    params: KirchhoffParams
    S: float
    threshold_lhs: Optional[float] = None
    threshold_rhs: Optional[float] = None
    y0: Optional[float] = None
    tangent: bool = False
    roots: List[float] = field(default_factory=list)

    def to_row(self):
        """
        one row of the bifurcation-diagram export
        """
        roots = list(self.roots) + [math.nan] * (2 - len(self.roots))
        return {"a": self.params.a, "b": self.params.b, "alpha": self.params.alpha, "p": self.params.p,
                "S": self.S, "case": self.case_label.value,
                "y0": math.nan if self.y0 is None else self.y0,
                "root1": roots[0], "root2": roots[1]}

    def to_dict(self):
        return {"case": self.case_label.value,
                "predicted_count": self.predicted_count,
                "params": self.params.to_dict(),
                "S": self.S,
                "threshold_lhs": self.threshold_lhs,
                "threshold_rhs": self.threshold_rhs,
                "y0": self.y0,
                "tangent": self.tangent,
                "roots": list(self.roots)}


def classify_regime(params: KirchhoffParams, S: float, eq_tol: float = EQ_TOL) -> RegimeReport:
    """
    case label and predicted number of positive roots of f, without computing them
    :param params: KirchhoffParams
    :param S: the constant ||grad v||_2^(p-1) of the ground state
    :param eq_tol: relative tolerance deciding the threshold equality and the resonance p = 2 alpha + 1
    :return: RegimeReport with empty roots
    """
    if not S > 0:
        raise DomainError(f"S must be > 0, got S={S}")
    p, a, b, alpha = params.p, params.a, params.b, params.alpha

    if p < 1:
        return RegimeReport(CaseLabel.SUBLINEAR, 1, params, S)

    if is_resonant(params, eq_tol):
        return RegimeReport(CaseLabel.RESONANT, 1 if b * S < 1 else 0, params, S)

    y0 = critical_point(params, S, eq_tol)

    if p > 2 * alpha + 1:
        return RegimeReport(CaseLabel.SUPERCRITICAL, 1, params, S, y0=y0)

    gamma = params.gamma
    log_rhs = (math.log(gamma) + ((p - 1) * math.log(p - 1) - 2 * alpha * math.log(2 * alpha * S)) / gamma)
    rhs = math.exp(log_rhs) if log_rhs < 700 else math.inf
    if b == 0:
        # pure semilinear limit: f increases from -aS to +inf
        return RegimeReport(CaseLabel.TWO_BRANCH, 1, params, S, threshold_lhs=0.0, threshold_rhs=rhs)

    log_lhs = math.log(a) + (p - 1) / gamma * math.log(b)
    lhs = math.exp(log_lhs) if log_lhs < 700 else math.inf
    if abs(log_lhs - log_rhs) <= eq_tol:
        count, tangent = 1, True
    elif log_lhs < log_rhs:
        count, tangent = 2, False
    else:
        count, tangent = 0, False
    return RegimeReport(CaseLabel.TWO_BRANCH, count, params, S, threshold_lhs=lhs, threshold_rhs=rhs,
                        y0=y0, tangent=tangent)


def _log_balance(x: float, params: KirchhoffParams, S: float) -> float:
    """
    log y^((p-1)/2) - log(b S y^alpha + a S) at y = e^x: same sign as f(y), finite for every finite x
    """
    loss = math.log(params.a * S)
    if params.b > 0:
        loss = float(np.logaddexp(math.log(params.b * S) + params.alpha * x, loss))
    return (params.p - 1) / 2 * x - loss


def scaled_residual(y: float, params: KirchhoffParams, S: float) -> float:
    """
    |f(y)| in units of max(a S, 1, y^((p-1)/2)), the root residual test; evaluated through logarithms
    """
    _check(y, S)
    x = math.log(y)
    power = math.log(params.b * S) + params.alpha * x if params.b > 0 else -math.inf
    terms = np.array([(params.p - 1) / 2 * x, power, math.log(params.a * S)])
    log_scale = max(terms[0], terms[2], 0.0)
    with np.errstate(over="ignore"):
        gain, loss, const = np.exp(terms - log_scale)
    return float(abs(gain - loss - const))


def _expand(fcn, start, step, want_positive):
    """
    shift the log-abscissa start by step until sign(fcn) matches want_positive
    """
    x = start
    for _ in range(BRACKET_CAP):
        val = fcn(x)
        if not math.isfinite(val):
            raise BracketError(f"non-finite branch balance {val} at y=exp({x:.6g})")
        if (val > 0) == want_positive and val != 0:
            return x
        x += step
    raise BracketError(f"no sign change found after {BRACKET_CAP} bracket expansions from y=exp({start:.6g})")


def _refine(fcn, lo, hi, params, S, root_tol):
    try:
        x = bisect(fcn, lo, hi, xtol=_XTOL, rtol=_RTOL, maxiter=5000)
    except ValueError as err:
        raise BracketError(f"bracket [exp({lo:.6g}), exp({hi:.6g})] does not hold a sign change: {err}")
    if not _LOG_TINY < x < _LOG_HUGE:
        raise BracketError(f"root y=exp({x:.6g}) is outside the float64 range")
    y = math.exp(x)
    residual = scaled_residual(y, params, S)
    if not residual <= root_tol:
        raise BranchInconsistencyError(f"bisection root y={y} leaves a scaled residual {residual:.3e}")
    return y


def _log_critical_point(params: KirchhoffParams, S: float) -> float:
    return 2 / params.gamma * math.log((params.p - 1) / (2 * params.alpha * params.b * S))


def find_roots(params: KirchhoffParams, S: float, root_tol: float = DEFAULT_ROOT_TOL,
               eq_tol: float = EQ_TOL) -> RegimeReport:
    """
    all positive roots of f, bisected in log y on brackets seeded from a priori bounds of each case
    :param params: KirchhoffParams
    :param S: ground-state constant
    :param root_tol: bound on the scaled residual of each root
    :param eq_tol: see classify_regime
    :return: RegimeReport with sorted roots
    """
    report = classify_regime(params, S, eq_tol)
    fcn = lambda x: _log_balance(x, params, S)
    p, a, b, alpha = params.p, params.a, params.b, params.alpha
    log_aS = math.log(a * S)
    roots = []

    if report.case_label is CaseLabel.SUBLINEAR:
        # the root lies in [min(1, (aS+bS)^(2/(p-1))), (aS)^(2/(p-1))]
        lo = _expand(fcn, min(0.0, 2 * math.log(a * S + b * S) / (p - 1)) - 1, -1.0, want_positive=True)
        hi = _expand(fcn, 2 * log_aS / (p - 1) + 1, 1.0, want_positive=False)
        roots.append(_refine(fcn, lo, hi, params, S, root_tol))

    elif report.case_label is CaseLabel.RESONANT:
        if report.predicted_count == 1:
            roots.append(float(np.power(a * S / (1 - b * S), 1 / alpha)))

    elif b == 0:
        root = 2 * log_aS / (p - 1)
        lo = _expand(fcn, root - 1, -1.0, want_positive=False)
        hi = _expand(fcn, root + 1, 1.0, want_positive=True)
        roots.append(_refine(fcn, lo, hi, params, S, root_tol))

    elif report.case_label is CaseLabel.SUPERCRITICAL:
        x0 = _log_critical_point(params, S)
        if fcn(x0) >= 0:
            raise BranchInconsistencyError(f"f(y0) must be negative above 2 alpha + 1, y0={report.y0}")
        # f > 0 once y^((p-1)/2) exceeds both 2 b S y^alpha and 2 a S
        seed = max(x0, 2 * math.log(2 * b * S) / -params.gamma, 2 * math.log(2 * a * S) / (p - 1)) + 1
        hi = _expand(fcn, seed, 1.0, want_positive=True)
        roots.append(_refine(fcn, x0, hi, params, S, root_tol))

    elif report.tangent:
        warnings.warn(f"threshold equality for {params}: reporting the tangent root y0={report.y0}")
        y0 = report.y0
        residual = scaled_residual(y0, params, S)
        if residual > max(root_tol, eq_tol):
            raise BranchInconsistencyError(f"tangent root y0={y0} leaves a scaled residual {residual:.3e}")
        roots.append(y0)

    elif report.predicted_count == 2:
        x0 = _log_critical_point(params, S)
        if fcn(x0) <= 0:
            raise BranchInconsistencyError(f"two roots predicted but f(y0) <= 0 at y0={report.y0}")
        # f < 0 below (aS)^(2/(p-1)) and above (bS)^(-2/gamma)
        lo = _expand(fcn, min(x0, 2 * log_aS / (p - 1)) - 1, -1.0, want_positive=False)
        hi = _expand(fcn, max(x0, -2 * math.log(b * S) / params.gamma) + 1, 1.0, want_positive=False)
        roots.append(_refine(fcn, lo, x0, params, S, root_tol))
        roots.append(_refine(fcn, x0, hi, params, S, root_tol))

    elif report.y0 is not None and fcn(_log_critical_point(params, S)) > 0:
        raise BranchInconsistencyError(f"no roots predicted but f(y0) > 0 at y0={report.y0}")

    if len(roots) != report.predicted_count:
        raise BranchInconsistencyError(f"found {len(roots)} roots, classification predicts "
                                       f"{report.predicted_count}")
    report.roots = sorted(roots)
    return report


@dataclass
class AsymptoticReport:
    table: pd.DataFrame
    y1_limit: float
    y1_error_monotone: bool
    y2_slope: Optional[float]
    expected_y2_slope: Optional[float]
    y0_increasing: Optional[bool]

    def to_dict(self):
        return {"y1_limit": self.y1_limit,
                "y1_error_monotone": self.y1_error_monotone,
                "y2_slope": self.y2_slope,
                "expected_y2_slope": self.expected_y2_slope,
                "y0_increasing": self.y0_increasing,
                "table": self.table.to_dict(orient="list")}


def asymptotic_b_to_zero(params: KirchhoffParams, S: float, b_sequence: Sequence[float],
                         root_tol: float = DEFAULT_ROOT_TOL) -> AsymptoticReport:
    """
    follow the roots of f along a decreasing sequence of b
    :return: AsymptoticReport; rows outside the two-root zone (case ii) are flagged, not fatal
    """
    if params.p < 1:
        raise DomainError("the b -> 0 limit (aS)^(2/(p-1)) of the lower root needs p > 1")
    y1_limit = float(np.power(params.a * S, 2 / (params.p - 1)))
    rows = []
    for b in sorted(b_sequence, reverse=True):
        report = find_roots(params.with_(b=b), S, root_tol)
        two_branch = report.case_label is CaseLabel.TWO_BRANCH
        flagged = two_branch and len(report.roots) != 2
        y1 = report.roots[0] if report.roots else math.nan
        y2 = report.roots[1] if len(report.roots) == 2 else math.nan
        rows.append({"b": b, "case": report.case_label.value, "count": len(report.roots),
                     "y0": math.nan if report.y0 is None else report.y0,
                     "y1": y1, "y2": y2, "y1_error": abs(y1 - y1_limit), "flagged": flagged})
    table = pd.DataFrame(rows)

    if table["flagged"].any():
        warnings.warn(f"{int(table['flagged'].sum())} values of b leave the two-root zone and are flagged")

    ok = table[~table["flagged"] & table["y1"].notna()]
    y1_error_monotone = bool(np.all(np.diff(ok["y1_error"].to_numpy()) <= 0))

    y2_slope, expected, y0_increasing = None, None, None
    if params.p < 2 * params.alpha + 1:
        expected = -2 / params.gamma
        two = ok[ok["y2"].notna()]
        if len(two) >= 2:
            y2_slope = float(np.polyfit(np.log(two["b"]), np.log(two["y2"]), 1)[0])
        y0 = table["y0"].dropna().to_numpy()
        y0_increasing = bool(np.all(np.diff(y0) > 0)) if len(y0) >= 2 else None

    return AsymptoticReport(table, y1_limit, y1_error_monotone, y2_slope, expected, y0_increasing)


def bifurcation_table(params: KirchhoffParams, S: float, variable: Optional[str] = None,
                      values: Sequence[float] = (), root_tol: float = DEFAULT_ROOT_TOL) -> pd.DataFrame:
    """
    rows (a, b, alpha, p, S, case, y0, root1, root2) over one swept coefficient
    :param variable: one of a, b, alpha, p, S (None gives a single row)
    """
    if variable is None:
        return pd.DataFrame([find_roots(params, S, root_tol).to_row()])
    if variable not in ("a", "b", "alpha", "p", "S"):
        raise ConfigurationError(f"bifurcation variable must be one of a, b, alpha, p, S; got {variable!r}")
    rows = []
    for value in values:
        if variable == "S":
            rows.append(find_roots(params, value, root_tol).to_row())
        else:
            rows.append(find_roots(params.with_(**{variable: value}), S, root_tol).to_row())
    return pd.DataFrame(rows)
