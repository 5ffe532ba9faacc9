"""
positive solutions of -Lap v = v^p with zero Dirichlet data and the constants S(Omega), S = ||grad v||_2^(p-1).

0 < p < 1: the unique solution by monotone iteration from a super- (or sub-) solution.
p > 1: the constrained minimizer of ||grad u||_2^2 / ||u||_(p+1)^2, rescaled into a solution.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import torch

from kirlab.exceptions import (ConfigurationError, ConvergenceError, InconsistentMinimizerError,
                               NonPositiveError, StallError)
from kirlab.grid import DTYPE, Field, Grid, lq_norm, smallest_eigenvalue, solve_poisson

P_GAP = 0.05
P_MAX = 9.0
DEFAULT_TOL = 1e-10
DEFAULT_CG_TOL = 1e-12
ARMIJO_C = 1e-4
MIN_STEP = 1e-12


def signed_power(x: torch.Tensor, p: float) -> torch.Tensor:
    """
    |x|^(p-1) x, finite at x = 0 for every p > 0
    """
    return torch.sign(x) * x.abs() ** p


def l2(grid: Grid, x: torch.Tensor) -> float:
    return float(torch.sqrt(grid.inner(x, x)))


def equation_residual(grid: Grid, v: Field, p: float, scale: float = 1.0) -> float:
    """
    ||-Lap_h v - scale v^p||_2 / ||scale v^p||_2
    """
    rhs = scale * signed_power(v.values, p)
    denom = l2(grid, rhs)
    if denom == 0:
        return math.inf
    return l2(grid, grid.neg_laplacian(v.values) - rhs) / denom


def check_exponent(p: float, p_gap: float = P_GAP, p_max: float = P_MAX):
    bad = []
    if not p > 0:
        bad.append(f"exponent p must be > 0, got {p}")
    if abs(p - 1) < p_gap:
        bad.append(f"exponent p must satisfy |p-1| >= {p_gap}, got {p}")
    if p > p_max:
        bad.append(f"exponent p must be <= {p_max}, got {p}")
    if bad:
        raise ConfigurationError(bad)


@dataclass
class GroundState:
    """
    positive solution v of -Lap_h v = v^p with S_omega = ||grad v||^2 / ||v||_(p+1)^2 and S = ||grad v||^(p-1)
    """
    v: Field
    p: float
    S_omega: float
    S: float
    grad_norm: float
    residual: float = math.nan
    method: str = ""
    iterations: int = 0
    monotone: Optional[bool] = None
    history: List[float] = field(default_factory=list, repr=False)

    @property
    def grid(self) -> Grid:
        return self.v.grid

    @property
    def sup(self) -> float:
        return self.v.sup

    def energy(self) -> float:
        """
        ||v||_(p+1)^(p+1), equal to grad_norm^2 for a solution
        """
        return lq_norm(self.grid, self.v, self.p + 1) ** (self.p + 1)

    def to_dict(self):
        return {"p": self.p,
                "S_omega": self.S_omega,
                "S": self.S,
                "grad_norm": self.grad_norm,
                "sup": self.sup,
                "min": self.v.min,
                "residual": self.residual,
                "method": self.method,
                "iterations": self.iterations,
                "monotone": self.monotone,
                "domain": self.grid.spec.to_dict()}

    def to_frame(self):
        return self.grid.to_frame(self.v, name="v")


def _from_solution(grid: Grid, v: torch.Tensor, p: float, residual: float, method: str, iterations: int,
                   history=None) -> GroundState:
    if v.min() <= 0:
        raise NonPositiveError(f"{method} ground state is not positive at every interior node")
    v = Field(v, grid)
    grad_sq = float(grid.grad_sq(v.values))
    grad_norm = math.sqrt(grad_sq)
    S_omega = grad_sq / lq_norm(grid, v, p + 1) ** 2
    return GroundState(v, p, S_omega, grad_norm ** (p - 1), grad_norm, residual, method, iterations,
                       history=history or [])


def supersolution(grid: Grid, p: float, cg_tol: float = DEFAULT_CG_TOL) -> Field:
    """
    c e with -Lap_h e = 1 and c = (sup e)^(p/(1-p)), so that -Lap_h (c e) >= (c e)^p
    """
    e = solve_poisson(grid, grid.ones(), tol=cg_tol)
    c = e.sup ** (p / (1 - p))
    return e.like(c * e.values)


def subsolution(grid: Grid, p: float, cg_tol: float = DEFAULT_CG_TOL) -> Field:
    """
    eps phi_1 with eps = lam_1^(-1/(1-p)) and sup phi_1 = 1, so that -Lap_h (eps phi_1) <= (eps phi_1)^p
    """
    lam, phi = smallest_eigenvalue(grid, cg_tol=cg_tol)
    return phi.like(lam ** (-1 / (1 - p)) * phi.values)


def solve_sublinear(grid: Grid, p: float, tol: float = DEFAULT_TOL, maxiter: int = 2000,
                    start: str = "supersolution", init: Optional[Field] = None,
                    cg_tol: float = DEFAULT_CG_TOL, writer=None, verbose: bool = False) -> GroundState:
    """
    unique positive solution of -Lap_h v = v^p for 0 < p < 1 by u_(k+1) = (-Lap_h)^(-1) u_k^p
    :param grid: Grid
    :param p: exponent in (0, 1 - P_GAP]
    :param tol: relative residual ||-Lap_h v - v^p||_2 <= tol ||v^p||_2
    :param maxiter: iteration cap
    :param start: "supersolution" (iterates decrease) or "subsolution" (iterates increase)
    :param init: explicit positive start, overrides start (no monotonicity is checked then)
    :param cg_tol: tolerance of the inner Poisson solves
    :param writer: optional SummaryWriter
    :param verbose: print progress
    :return: GroundState
    """
    check_exponent(p)
    if p > 1:
        raise ConfigurationError(f"solve_sublinear needs 0<p<1, got p={p}")

    if init is not None:
        grid.check(init)
        u, direction = init, 0
    elif start == "supersolution":
        u, direction = supersolution(grid, p, cg_tol), -1
    elif start == "subsolution":
        u, direction = subsolution(grid, p, cg_tol), 1
    else:
        raise ConfigurationError(f"start must be 'supersolution' or 'subsolution', got {start!r}")

    slack = max(1e-9, 100 * cg_tol) * u.sup
    monotone = True
    history = []
    residual = math.inf
    for it in range(1, maxiter + 1):
        nxt = solve_poisson(grid, u.like(signed_power(u.values, p)), tol=cg_tol, x0=u)
        if direction and torch.any(direction * (nxt.values - u.values) < -slack):
            monotone = False
        u = nxt
        residual = equation_residual(grid, u, p)
        history.append(residual)
        if writer is not None:
            writer.add_scalar("groundstate/residual", residual, it)
            writer.add_scalar("groundstate/sup", u.sup, it)
        if verbose:
            print(f"sublinear it {it:4d}  residual {residual:.3e}  sup {u.sup:.12g}")
        if residual <= tol:
            break
    else:
        raise ConvergenceError(f"monotone iteration for p={p} did not converge", residual=residual,
                               iterations=maxiter)

    if not monotone:
        warnings.warn(f"monotone iteration from the {start} was not monotone beyond slack {slack:.1e}")
    gs = _from_solution(grid, u.values, p, residual, f"monotone-{start}" if init is None else "monotone-init",
                        it, history)
    gs.monotone = monotone
    return gs


@dataclass
class RayleighResult:
    w: Field
    S_omega: float
    residual: float
    iterations: int
    history: List[float] = field(default_factory=list, repr=False)


def _normalize(grid: Grid, w: torch.Tensor, q: float) -> torch.Tensor:
    return w / torch.sum(grid.weights * w.abs() ** q) ** (1.0 / q)


def minimize_rayleigh(grid: Grid, p: float, tol: float = DEFAULT_TOL, maxiter: int = 5000,
                      init: Optional[Field] = None, cg_tol: float = DEFAULT_CG_TOL,
                      writer=None, verbose: bool = False) -> RayleighResult:
    """
    minimize ||grad w||_2^2 on the sphere ||w||_(p+1) = 1 by projected H^1_0 gradient descent.

    The gradient is g = w - R (-Lap_h)^(-1) w^p with R the current quotient; the trial point
    (w - tau g) / ||w - tau g||_(p+1) is a positive combination of w and (-Lap_h)^(-1) w^p for tau <= 1.
    :param grid: Grid
    :param p: exponent in [1 + P_GAP, P_MAX]
    :param tol: stationarity ||-Lap_h w - R w^p||_2 <= tol ||R w^p||_2
    :param maxiter: iteration cap
    :param init: positive start (default: principal eigenfunction)
    :param cg_tol: tolerance of the inner Poisson solves
    :param writer: optional SummaryWriter
    :param verbose: print progress
    :return: RayleighResult with S_omega = ||grad w||_2^2
    """
    check_exponent(p)
    if p < 1:
        raise ConfigurationError(f"minimize_rayleigh needs p>1, got p={p}")
    q = p + 1

    if init is None:
        _, init = smallest_eigenvalue(grid, cg_tol=cg_tol)
    grid.check(init)
    w = _normalize(grid, init.values, q)
    R = float(grid.grad_sq(w))
    z = None
    history = [R]
    residual = math.inf

    for it in range(1, maxiter + 1):
        wp = signed_power(w, p)
        z = solve_poisson(grid, Field(wp, grid), tol=cg_tol, x0=None if z is None else Field(z, grid)).values
        g = w - R * z
        residual = l2(grid, grid.neg_laplacian(w) - R * wp) / (R * l2(grid, wp))
        if writer is not None:
            writer.add_scalar("rayleigh/quotient", R, it)
            writer.add_scalar("rayleigh/residual", residual, it)
        if verbose:
            print(f"rayleigh it {it:4d}  S_omega {R:.15g}  residual {residual:.3e}")
        if residual <= tol:
            break

        slope = 2 * float(grid.grad_sq(g))
        tau = 1.0
        while True:
            trial = _normalize(grid, w - tau * g, q)
            R_trial = float(grid.grad_sq(trial))
            if R_trial <= R - ARMIJO_C * tau * slope + 10 * torch.finfo(DTYPE).eps * R:
                break
            tau /= 2
            if tau < MIN_STEP:
                raise StallError("rayleigh line search step underflow", residual=residual, iterations=it)
        w, R = trial, R_trial
        history.append(R)
    else:
        raise ConvergenceError(f"rayleigh minimization for p={p} did not converge", residual=residual,
                               iterations=maxiter)

    if w.min() <= 0:
        raise NonPositiveError("rayleigh minimizer is not positive at every interior node")
    return RayleighResult(Field(w, grid), R, residual, it, history)


def normalize_to_solution(w: Field, S_omega: float, p: float, tol: float = DEFAULT_TOL) -> GroundState:
    """
    v = S_omega^(1/(p-1)) w turns the constrained minimizer into a solution of -Lap_h v = v^p,
    with ||grad v||_2^(p-1) = S_omega^((p+1)/2)
    :raises InconsistentMinimizerError: if v does not solve the equation to 10 tol
    """
    if p <= 1:
        raise ConfigurationError(f"normalize_to_solution needs p>1, got p={p}")
    grid = w.grid
    v = Field(S_omega ** (1 / (p - 1)) * w.values, grid)
    residual = equation_residual(grid, v, p)
    if not residual <= 10 * tol:
        raise InconsistentMinimizerError(f"rescaled minimizer leaves residual {residual:.3e} > {10 * tol:.1e}")
    gs = _from_solution(grid, v.values, p, residual, "rayleigh", 0)
    # quotient of v equals S_omega up to rounding; keep the minimizer's value
    gs.S_omega = S_omega
    return gs


def solve_groundstate(grid: Grid, p: float, tol: float = DEFAULT_TOL, cg_tol: float = DEFAULT_CG_TOL,
                      maxiter: Optional[int] = None, writer=None, verbose: bool = False) -> GroundState:
    """
    ground state for any admissible p: monotone iteration below 1, Rayleigh minimization above
    """
    check_exponent(p)
    kwargs = {} if maxiter is None else {"maxiter": maxiter}
    if p < 1:
        return solve_sublinear(grid, p, tol=tol, cg_tol=cg_tol, writer=writer, verbose=verbose, **kwargs)
    result = minimize_rayleigh(grid, p, tol=tol, cg_tol=cg_tol, writer=writer, verbose=verbose, **kwargs)
    gs = normalize_to_solution(result.w, result.S_omega, p, tol=tol)
    gs.iterations = result.iterations
    gs.history = result.history
    return gs
