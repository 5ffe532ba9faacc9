"""
radial shooting reference for ground states on a disk: v'' + v'/r + |v|^(p-1) v = 0, v'(0) = 0, v(radius) = 0,
integrated with xitorch's fixed-step rk4 and solved for v(0) by bisection
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch
from scipy.optimize import bisect
from xitorch.integrate import solve_ivp

from kirlab.exceptions import BracketError, ConfigurationError, ConvergenceError
from kirlab.grid import DTYPE
from kirlab.groundstate import signed_power

DEFAULT_STEPS = 1024
BRACKET_CAP = 200


def _rhs(r, y, p):
    v, dv = y[0], y[1]
    return torch.stack([dv, -dv / r - signed_power(v, p)])


def _start(v0: float, p: float, r0: float) -> torch.Tensor:
    """
    series of the regular solution at r0: v = v0 - v0^p r^2/4 + p v0^(2p-1) r^4/64
    """
    c2 = v0 ** p / 4
    c4 = p * v0 ** (2 * p - 1) / 64
    return torch.tensor([v0 - c2 * r0 ** 2 + c4 * r0 ** 4, -2 * c2 * r0 + 4 * c4 * r0 ** 3], dtype=DTYPE)


def integrate_profile(v0: float, p: float, radius: float, steps: int = DEFAULT_STEPS):
    """
    :return: (r, v, v') tensors on [0, radius] with steps + 1 nodes
    """
    r = torch.linspace(0.0, radius, steps + 1, dtype=DTYPE)
    ys = solve_ivp(_rhs, r[1:], _start(v0, p, float(r[1])), params=(p,), method="rk4")
    v = torch.cat([torch.tensor([v0], dtype=DTYPE), ys[:, 0]])
    dv = torch.cat([torch.zeros(1, dtype=DTYPE), ys[:, 1]])
    return r, v, dv


@dataclass
class ShootingResult:
    profile: pd.DataFrame
    v0: float
    p: float
    radius: float
    S_omega: float
    S: float
    grad_norm: float
    boundary_value: float

    @property
    def sup(self) -> float:
        return self.v0

    def to_dict(self):
        return {"p": self.p, "radius": self.radius, "v0": self.v0, "S_omega": self.S_omega, "S": self.S,
                "grad_norm": self.grad_norm, "boundary_value": self.boundary_value}


def shooting_oracle(p: float, radius: float = 1.0, tol: float = 1e-10, steps: int = DEFAULT_STEPS,
                    verbose: bool = False) -> ShootingResult:
    """
    positive radial solution on the disk of the given radius
    :param p: exponent, p > 0 and p != 1
    :param radius: disk radius
    :param tol: boundary tolerance |v(radius)| <= tol v(0)
    :param steps: rk4 steps on [0, radius]
    :param verbose: print the bracket and result
    :return: ShootingResult with the (r, v) profile and S_omega, S from trapezoidal quadrature
    """
    if not p > 0 or p == 1:
        raise ConfigurationError(f"shooting needs p>0 and p!=1, got p={p}")
    if radius <= 0:
        raise ConfigurationError(f"disk radius must be > 0, got {radius}")

    def lowest(v0):
        # min of the profile: v(radius) > 0 before the first zero reaches radius, negative after
        return float(integrate_profile(v0, p, radius, steps)[1].min())

    # larger v(0) moves the first zero inward for p > 1 and outward for p < 1
    start = lowest(1.0)
    grow = (start > 0) == (p > 1)
    lo = hi = 1.0
    for _ in range(BRACKET_CAP):
        hi = hi * 2 if grow else hi / 2
        if (lowest(hi) > 0) != (start > 0):
            break
        lo = hi
    else:
        raise BracketError(f"no shooting bracket for p={p} after {BRACKET_CAP} expansions")

    v0 = bisect(lowest, min(lo, hi), max(lo, hi), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    r, v, dv = integrate_profile(v0, p, radius, steps)
    boundary = float(v[-1])
    if abs(boundary) > tol * v0:
        raise ConvergenceError(f"shooting left v(radius)={boundary:.3e} for v(0)={v0:.6g}",
                               residual=abs(boundary) / v0)

    grad_sq = float(2 * math.pi * torch.trapezoid(dv ** 2 * r, r))
    grad_norm = math.sqrt(grad_sq)
    S = grad_norm ** (p - 1)
    S_omega = S ** (2 / (p + 1))
    if verbose:
        print(f"shooting p={p} radius={radius}: v(0)={v0:.12g}  S_omega={S_omega:.12g}  S={S:.12g}")
    profile = pd.DataFrame({"r": r.numpy(), "v": v.numpy()})
    return ShootingResult(profile, float(v0), p, radius, S_omega, S, grad_norm, boundary)
