"""
Kirchhoff solutions -(a + t b ||grad u||_2^(2 alpha)) Lap u = u^p + t h(x, u, grad u):
reconstruction from a ground state and a branch root, residuals, and the homotopy in t
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import torch
import xitorch.optimize

from kirlab.branch import KirchhoffParams, critical_exponent
from kirlab.exceptions import (CollapseError, ConfigurationError, ContinuationError, ConvergenceError,
                               DivergenceError, FixedPointError, IdentityViolationError, NonPositiveError)
from kirlab.grid import Field, Grid, solve_poisson
from kirlab.groundstate import DEFAULT_CG_TOL, GroundState, l2, signed_power

KINDS = ("none", "sublinear", "superlinear")
IDENTITY_TOL = 1e-6
DEFAULT_FP_TOL = 1e-10
DEFAULT_RESIDUAL_TOL = 1e-8
MIN_DAMPING = 1 / 64
COLLAPSE_FLOOR = 1e-10
DIVERGENCE_CEIL = 1e12
MAX_BISECTIONS = 6
MAX_T_STEP = 0.1


@dataclass(frozen=True)
class PerturbationSpec:
    """
    lower order term h(x, s, xi) >= 0 for s > 0:
        sublinear    mu |s|^(q-1) s + |s|^(q1-1) s |xi|^2 / (1 + |xi|^2)
        superlinear  lam s + |s|^(q-1) s |xi|^2 / (1 + |xi|^2)
    lam may be given as lam_fraction of a lambda_1 and resolved against a grid
    """
    kind: str = "none"
    mu: float = 0.0
    lam: Optional[float] = None
    q: Optional[float] = None
    q1: Optional[float] = None
    lam_fraction: Optional[float] = None

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def sublinear(cls, mu: float, q: float, q1: float):
        return cls("sublinear", mu=mu, q=q, q1=q1)

    @classmethod
    def superlinear(cls, q: float, lam: Optional[float] = None, lam_fraction: Optional[float] = None):
        return cls("superlinear", lam=lam, q=q, lam_fraction=lam_fraction)

    def resolve(self, a: float, lam1: float) -> "PerturbationSpec":
        """
        fill lam from lam_fraction * a * lambda_1
        """
        if self.kind != "superlinear" or self.lam_fraction is None:
            return self
        return replace(self, lam=self.lam_fraction * a * lam1)

    def violations(self, params: KirchhoffParams, lam1: Optional[float] = None) -> List[str]:
        """
        every hypothesis on h violated for the exponents in params (empty list if admissible)
        :param lam1: principal eigenvalue of the domain; enables the lam < a lambda_1 check
        """
        out = []
        p = params.p
        if self.kind not in KINDS:
            return [f"perturbation kind must be one of {KINDS}, got {self.kind!r}"]
        if self.kind == "sublinear":
            if not self.mu >= 0:
                out.append(f"(H1) requires mu>=0, got mu={self.mu}")
            if self.q is None or self.q1 is None or not 0 < p < self.q <= self.q1 < 1:
                out.append(f"(H1) requires 0<p<q<=q1<1, got p={p}, q={self.q}, q1={self.q1}")
        elif self.kind == "superlinear":
            if self.q is None or not 1 < self.q < p < critical_exponent(params.dim):
                out.append(f"(H2) requires 1<q<p<2*, got q={self.q}, p={p}")
            lam = self.lam
            if lam is None and self.lam_fraction is None:
                out.append("(H2) requires lam or lam_fraction")
            if lam is None and self.lam_fraction is not None:
                if not 0 <= self.lam_fraction < 1:
                    out.append(f"(H2) requires 0<=lam_fraction<1, got {self.lam_fraction}")
                if lam1 is not None:
                    lam = self.lam_fraction * params.a * lam1
            if lam is not None:
                if not lam >= 0:
                    out.append(f"(H2) requires lam>=0, got lam={lam}")
                if lam1 is not None and not lam < params.a * lam1:
                    out.append(f"(H2) requires lam<a*lambda_1={params.a * lam1:.12g}, got lam={lam}")
        return out

    def check(self, params: KirchhoffParams, lam1: Optional[float] = None):
        bad = self.violations(params, lam1)
        if bad:
            raise ConfigurationError(bad)

    def evaluate(self, u: torch.Tensor, grad_sq: torch.Tensor) -> torch.Tensor:
        """
        h at every node from u and the pointwise |grad u|^2
        """
        if self.kind == "none":
            return torch.zeros_like(u)
        damp = grad_sq / (1 + grad_sq)
        if self.kind == "sublinear":
            return self.mu * signed_power(u, self.q) + signed_power(u, self.q1) * damp
        if self.lam is None:
            raise ConfigurationError("superlinear perturbation used before lam was resolved")
        return self.lam * u + signed_power(u, self.q) * damp

    def hypothesis_limits(self, p: float, ladder: Sequence[float] = tuple(2.0 ** -k for k in range(4, 41, 4)),
                          xi_sq: float = 1.0):
        """
        limits as s -> 0 along a decreasing ladder: h/s^p -> 0 for (H1), h/s -> lam for (H2)
        :return: dict with the sampled ratios and whether they approach the limit monotonically
        """
        s = torch.tensor(list(ladder), dtype=torch.float64)
        h = self.evaluate(s, torch.full_like(s, xi_sq))
        if self.kind == "superlinear":
            gap = (h / s - self.lam).abs()
            name = "h/s - lam"
        else:
            gap = (h / s ** p).abs()
            name = "h/s^p"
        gap = gap.tolist()
        return {"quantity": name, "s": list(ladder), "gap": gap,
                "monotone": all(g1 <= g0 for g0, g1 in zip(gap, gap[1:])),
                "nonnegative": bool(torch.all(h >= 0))}

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "sublinear":
            out.update(mu=self.mu, q=self.q, q1=self.q1)
        elif self.kind == "superlinear":
            out.update(lam=self.lam, q=self.q, lam_fraction=self.lam_fraction)
        return out


@dataclass
class SolutionRecord:
    u: Field
    beta: Optional[float]
    grad_sq: float
    sup_norm: float
    residual_rel: float
    provenance: str
    params: KirchhoffParams
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec.none)
    t: float = 1.0
    iterations: int = 0

    @property
    def min(self) -> float:
        return self.u.min

    def to_dict(self):
        return {"provenance": self.provenance,
                "t": self.t,
                "beta": self.beta,
                "grad_sq": self.grad_sq,
                "sup_norm": self.sup_norm,
                "min": self.min,
                "residual_rel": self.residual_rel,
                "iterations": self.iterations,
                "params": self.params.to_dict(),
                "perturbation": self.perturbation.to_dict()}


def coefficient(grid: Grid, u: torch.Tensor, params: KirchhoffParams, t: float) -> float:
    """
    A(t, u) = a + t b ||grad u||_2^(2 alpha)
    """
    if t == 0 or params.b == 0:
        return params.a
    return params.a + t * params.b * float(grid.grad_sq(u)) ** params.alpha


def kirchhoff_residual(u: Field, params: KirchhoffParams, pert: Optional[PerturbationSpec] = None,
                       t: float = 1.0) -> float:
    """
    ||A(t,u)(-Lap_h u) - u^p - t h||_2 / ||u^p||_2, +inf for u = 0
    """
    grid = u.grid
    pert = pert or PerturbationSpec.none()
    up = signed_power(u.values, params.p)
    denom = l2(grid, up)
    if denom == 0:
        return math.inf
    rhs = up
    if t != 0 and pert.kind != "none":
        rhs = up + t * pert.evaluate(u.values, grid.pointwise_grad_sq(u.values))
    r = coefficient(grid, u.values, params, t) * grid.neg_laplacian(u.values) - rhs
    return l2(grid, r) / denom


def reconstruct(gs: GroundState, beta: float, params: KirchhoffParams, root_index: int = 0,
                identity_tol: float = IDENTITY_TOL) -> SolutionRecord:
    """
    u = (a + b beta^alpha)^(1/(p-1)) v for a root beta of the branch equation with S = gs.S
    :raises IdentityViolationError: if ||grad u||_2^2 differs from beta by more than identity_tol beta
    """
    if gs.p != params.p:
        raise ConfigurationError(f"ground state exponent {gs.p} differs from params.p={params.p}")
    if not beta > 0:
        raise ConfigurationError(f"beta must be > 0, got {beta}")
    c = (params.a + params.b * beta ** params.alpha) ** (1 / (params.p - 1))
    u = gs.v.like(c * gs.v.values)
    grad_sq = float(gs.grid.grad_sq(u.values))
    if abs(grad_sq - beta) > identity_tol * beta:
        raise IdentityViolationError(f"||grad u||^2={grad_sq:.15g} does not match beta={beta:.15g}: "
                                     "S of the branch equation and of the ground state disagree")
    return SolutionRecord(u, beta, grad_sq, u.sup, kirchhoff_residual(u, params), f"reconstructed({root_index})",
                          params, PerturbationSpec.none(), t=1.0)


def recover_groundstate(record: SolutionRecord) -> Field:
    """
    v = eta u with eta = (a + b ||grad u||_2^(2 alpha))^(1/(1-p))
    """
    params = record.params
    eta = (params.a + params.b * record.grad_sq ** params.alpha) ** (1 / (1 - params.p))
    return record.u.like(eta * record.u.values)


def fixed_point_map(grid: Grid, params: KirchhoffParams, pert: PerturbationSpec, t: float,
                    cg_tol: float = DEFAULT_CG_TOL):
    """
    K_t(u) = (-Lap_h)^(-1) [(u^p + t h(u, grad u)) / A(t, u)]
    """
    def K(u: torch.Tensor) -> torch.Tensor:
        rhs = signed_power(u, params.p)
        if t != 0 and pert.kind != "none":
            rhs = rhs + t * pert.evaluate(u, grid.pointwise_grad_sq(u))
        rhs = rhs / coefficient(grid, u, params, t)
        return solve_poisson(grid, Field(rhs, grid), tol=cg_tol, x0=Field(u, grid)).values
    return K


def _guard(u: torch.Tensor, sup0: float, it: int, update: float):
    sup = float(u.abs().max())
    if not math.isfinite(sup) or sup > DIVERGENCE_CEIL * sup0:
        raise DivergenceError("homotopy iterates diverge", residual=update, iterations=it)
    if sup < COLLAPSE_FLOOR * sup0:
        raise CollapseError("homotopy iterates collapse to zero", residual=update, iterations=it)


def _picard(K, u, tol, maxiter, writer, verbose, t):
    sup0 = float(u.abs().max())
    theta = 1.0
    last = math.inf
    for it in range(1, maxiter + 1):
        Ku = K(u)
        update = float((Ku - u).abs().max())
        if update > last:
            theta = max(theta / 2, MIN_DAMPING)
        last = update
        u = u + theta * (Ku - u)
        _guard(u, sup0, it, update)
        if writer is not None:
            writer.add_scalar(f"homotopy/update_t{t:g}", update, it)
            writer.add_scalar(f"homotopy/sup_t{t:g}", float(u.max()), it)
        if verbose and it % 50 == 0:
            print(f"picard t={t:g} it {it:4d}  update {update:.3e}  theta {theta:g}")
        if update <= tol * float(u.abs().max()):
            return u, it
    raise FixedPointError(f"picard iteration at t={t:g} hit the cap of {maxiter}", reason="maxiter",
                          residual=last, iterations=maxiter)


def _broyden(K, u, tol, maxiter, verbose, t):
    sup0 = float(u.abs().max())
    calls = 0

    def counted(x):
        nonlocal calls
        calls += 1
        return K(x)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u = xitorch.optimize.equilibrium(counted, u, method="broyden1", maxiter=maxiter, f_tol=tol * sup0,
                                         verbose=verbose)
    update = float((K(u) - u).abs().max())
    _guard(u, sup0, calls, update)
    if not update <= 10 * tol * float(u.abs().max()):
        raise FixedPointError(f"broyden iteration at t={t:g} did not converge", reason="maxiter",
                              residual=update, iterations=calls)
    return u, calls


def homotopy_step(grid: Grid, params: KirchhoffParams, pert: PerturbationSpec, t: float, init: Field,
                  tol: float = DEFAULT_FP_TOL, method: str = "auto", maxiter: int = 1000,
                  residual_tol: float = DEFAULT_RESIDUAL_TOL, cg_tol: float = DEFAULT_CG_TOL,
                  lam1: Optional[float] = None, writer=None, verbose: bool = False) -> SolutionRecord:
    """
    one positive fixed point of K_t from init
    :param grid: Grid
    :param params: KirchhoffParams
    :param pert: PerturbationSpec (lam resolved)
    :param t: homotopy parameter in [0, 1]
    :param init: positive start; selects the branch when several fixed points exist
    :param tol: stop when the sup-norm update is <= tol sup u
    :param method: "picard" (damped, theta halves on a growing update down to 1/64), "broyden" or
        "auto" (picard for p < 1, broyden for p > 1 where the amplitude mode of K_t is expanding)
    :param maxiter: iteration cap
    :param residual_tol: bound on the relative Kirchhoff residual of the returned state
    :param cg_tol: tolerance of the inner Poisson solves
    :param lam1: principal eigenvalue, enables the lam < a lambda_1 check
    :param writer: optional SummaryWriter
    :param verbose: print progress
    :return: SolutionRecord with provenance homotopy(t); iterations counts picard steps or broyden
        evaluations of K_t
    """
    if not 0 <= t <= 1:
        raise ConfigurationError(f"homotopy parameter must lie in [0, 1], got t={t}")
    pert.check(params, lam1)
    grid.check(init)
    if init.min <= 0:
        raise NonPositiveError("homotopy start must be positive at every interior node")
    if method == "auto":
        method = "picard" if params.p < 1 else "broyden"

    K = fixed_point_map(grid, params, pert, t, cg_tol)
    if method == "picard":
        u, it = _picard(K, init.values, tol, maxiter, writer, verbose, t)
    elif method == "broyden":
        u, it = _broyden(K, init.values, tol, maxiter, verbose, t)
    else:
        raise ConfigurationError(f"homotopy method must be auto, picard or broyden; got {method!r}")

    u = Field(K(u), grid)
    if u.min <= 0:
        raise NonPositiveError(f"fixed point at t={t:g} is not positive at every interior node")
    residual = kirchhoff_residual(u, params, pert, t)
    if not residual <= residual_tol:
        raise FixedPointError(f"fixed point at t={t:g} leaves residual {residual:.3e}", reason="residual",
                              residual=residual, iterations=it)
    if verbose:
        print(f"homotopy t={t:g} ({method}): sup {u.sup:.12g}  residual {residual:.3e}  iterations {it}")
    return SolutionRecord(u, None, float(grid.grad_sq(u.values)), u.sup, residual, f"homotopy({t:g})",
                          params, pert, t=t, iterations=it)


def check_schedule(t_schedule: Sequence[float], max_step: float = MAX_T_STEP):
    ts = list(t_schedule)
    bad = []
    if len(ts) < 2 or ts[0] != 0 or ts[-1] != 1:
        bad.append("t_schedule must start at 0 and end at 1")
    if any(t1 <= t0 for t0, t1 in zip(ts, ts[1:])):
        bad.append("t_schedule must be strictly increasing")
    if any(t1 - t0 > max_step + 1e-12 for t0, t1 in zip(ts, ts[1:])):
        bad.append(f"t_schedule steps must be <= {max_step}")
    if bad:
        raise ConfigurationError(bad)


def uniform_schedule(steps: int = 11) -> List[float]:
    return [k / (steps - 1) for k in range(steps)]


def continuation(grid: Grid, params: KirchhoffParams, pert: PerturbationSpec,
                 t_schedule: Sequence[float] = None, init: Optional[Field] = None,
                 gs: Optional[GroundState] = None, max_bisections: int = MAX_BISECTIONS,
                 verbose: bool = False, **step_kwargs) -> List[SolutionRecord]:
    """
    follow a fixed point of K_t from t = 0 to t = 1, each step warm-started from the previous one
    :param t_schedule: increasing list from 0 to 1 with steps <= 0.1 (default 11 uniform points)
    :param init: start at t = 0 (default a^(1/(p-1)) v from gs)
    :param gs: ground state for the default start
    :param max_bisections: halvings of a failing t-step before giving up
    :param step_kwargs: passed to homotopy_step
    :return: list of SolutionRecord, including any intermediate t inserted by bisection
    :raises ContinuationError: carrying the converged part of the path
    """
    t_schedule = uniform_schedule() if t_schedule is None else list(t_schedule)
    check_schedule(t_schedule)
    if init is None:
        if gs is None:
            raise ConfigurationError("continuation needs init or a ground state")
        init = gs.v.like(params.a ** (1 / (params.p - 1)) * gs.v.values)

    path = []
    u = init
    done = None
    for target in t_schedule:
        goal = target
        halvings = 0
        while True:
            try:
                record = homotopy_step(grid, params, pert, goal, u, verbose=verbose, **step_kwargs)
            except (ConvergenceError, NonPositiveError) as err:
                if done is None or halvings >= max_bisections:
                    raise ContinuationError(f"continuation failed at t={goal:g}: {err}", path) from err
                halvings += 1
                goal = (done + goal) / 2
                if verbose:
                    print(f"continuation: retrying with t={goal:g}")
                continue
            path.append(record)
            u, done = record.u, goal
            if goal == target:
                break
            goal = target
    return path
