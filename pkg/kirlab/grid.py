"""
discretized 2-D domains.

A rectangle lives on a uniform Cartesian mesh (interior nodes only, Dirichlet values are implicit zeros),
a disk on its radial reduction r in [0, radius) with a finite-volume stencil. Both carry quadrature weights
chosen so that sum_i w_i (-Lap_h f)_i f_i equals the discrete Dirichlet energy exactly.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import pandas as pd
import torch
import torch.nn.functional as F
import xitorch as xt

from kirlab.exceptions import ConfigurationError, ConvergenceError, DimensionError, NonPositiveError

DTYPE = torch.float64
MIN_RESOLUTION = 16
DEFAULT_CG_TOL = 1e-10
SHAPES = ("rectangle", "disk")


@dataclass(frozen=True)
class DomainSpec:
    """
    description of a domain and its resolution
    (cells per side for a rectangle, radial points for a disk)
    """
    shape: str
    resolution: int
    width: float = 1.0
    height: float = 1.0
    radius: float = 1.0

    @classmethod
    def rectangle(cls, width: float = 1.0, height: float = 1.0, resolution: int = 64):
        return cls("rectangle", int(resolution), width=float(width), height=float(height))

    @classmethod
    def disk(cls, radius: float = 1.0, resolution: int = 256):
        return cls("disk", int(resolution), radius=float(radius))

    def violations(self):
        """
        :return: list of str, one per violated invariant (empty if the domain is valid)
        """
        out = []
        if self.shape not in SHAPES:
            out.append(f"domain shape must be one of {SHAPES}, got {self.shape!r}")
        if self.resolution < MIN_RESOLUTION:
            out.append(f"domain resolution must be >= {MIN_RESOLUTION}, got {self.resolution}")
        if self.shape == "rectangle" and (self.width <= 0 or self.height <= 0):
            out.append("rectangle width and height must be > 0")
        if self.shape == "disk" and self.radius <= 0:
            out.append("disk radius must be > 0")
        return out

    def to_dict(self):
        if self.shape == "disk":
            return {"shape": self.shape, "radius": self.radius, "resolution": self.resolution}
        return {"shape": self.shape, "width": self.width, "height": self.height, "resolution": self.resolution}


@dataclass(frozen=True)
class Field:
    """
    real grid function on the interior nodes of a grid (boundary values are zero)
    """
    values: torch.Tensor
    grid: "Grid" = field(repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.values.shape) != (self.grid.size,):
            raise DimensionError(f"field of shape {tuple(self.values.shape)} does not match "
                                 f"grid with {self.grid.size} interior nodes")

    def like(self, values: torch.Tensor) -> "Field":
        return Field(values, self.grid)

    @property
    def sup(self) -> float:
        return float(self.values.abs().max())

    @property
    def min(self) -> float:
        return float(self.values.min())

    def __len__(self):
        return self.grid.size


class DirichletLaplacian(xt.LinearOperator):
    def __init__(self, grid: "Grid"):
        """
        the discrete -Lap_h with zero Dirichlet data as a xitorch LinearOperator.
        On the radial reduction the operator is self-adjoint for the weighted inner product only.
        """
        super().__init__(shape=(grid.size, grid.size), is_hermitian=not grid.is_radial,
                         dtype=DTYPE, device=torch.device("cpu"))
        self.grid = grid

    def _mv(self, x: torch.Tensor) -> torch.Tensor:
        return self.grid.neg_laplacian(x)

    def _getparamnames(self, prefix: str = ""):
        return []


class Grid:
    def __init__(self, spec: DomainSpec):
        """
        nodes, mesh spacing and quadrature weights of a discretized domain.
        :param spec: validated DomainSpec
        """
        self.spec = spec
        n = spec.resolution

        if spec.shape == "rectangle":
            hx, hy = spec.width / n, spec.height / n
            self.h = (hx, hy)
            self.shape = (n - 1, n - 1)
            x = torch.arange(1, n, dtype=DTYPE) * hx
            y = torch.arange(1, n, dtype=DTYPE) * hy
            X, Y = torch.meshgrid(x, y, indexing="ij")
            self.coords = (X.reshape(-1), Y.reshape(-1))
            self.weights = torch.full((self.size,), hx * hy, dtype=DTYPE)
        else:
            dr = spec.radius / n
            self.h = (dr,)
            self.shape = (n,)
            r = torch.arange(n, dtype=DTYPE) * dr
            self.coords = (r,)
            # annulus areas around each node, a disk of radius dr/2 at the origin
            w = 2 * math.pi * r * dr
            w[0] = math.pi * dr ** 2 / 4
            self.weights = w
            self._r_half = (torch.arange(n, dtype=DTYPE) + 0.5) * dr
            self._r_half_minus = torch.cat([torch.zeros(1, dtype=DTYPE), self._r_half[:-1]])

        self.laplacian = DirichletLaplacian(self)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def is_radial(self) -> bool:
        return self.spec.shape == "disk"

    ####################################################################################################################
    # field construction
    ####################################################################################################################

    def field(self, values) -> Field:
        return Field(torch.as_tensor(values, dtype=DTYPE).reshape(-1), self)

    def zeros(self) -> Field:
        return Field(torch.zeros(self.size, dtype=DTYPE), self)

    def ones(self) -> Field:
        return Field(torch.ones(self.size, dtype=DTYPE), self)

    def from_function(self, fcn: Callable) -> Field:
        """
        sample fcn(x, y) on a rectangle or fcn(r) on a disk at the interior nodes
        """
        return Field(torch.as_tensor(fcn(*self.coords), dtype=DTYPE).reshape(-1), self)

    def check(self, f: Field):
        if f.grid is not self and (f.grid.spec != self.spec or f.grid.size != self.size):
            raise DimensionError(f"field lives on {f.grid.spec}, expected {self.spec}")

    ####################################################################################################################
    # discrete calculus
    ####################################################################################################################

    def inner(self, f: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        return torch.sum(self.weights * f * g, dim=-1)

    def neg_laplacian(self, x: torch.Tensor) -> torch.Tensor:
        """
        -Lap_h applied along the last dimension of x
        """
        if self.is_radial:
            (dr,) = self.h
            zero = torch.zeros(*x.shape[:-1], 1, dtype=x.dtype)
            right = torch.cat([x[..., 1:], zero], dim=-1)
            left = torch.cat([zero, x[..., :-1]], dim=-1)
            flux = self._r_half * (x - right) + self._r_half_minus * (x - left)
            return 2 * math.pi / dr * flux / self.weights

        hx, hy = self.h
        lead = x.shape[:-1]
        u = x.reshape(*lead, *self.shape)
        P = F.pad(u, (1, 1, 1, 1))
        lap = (2 * u - P[..., 2:, 1:-1] - P[..., :-2, 1:-1]) / hx ** 2 \
            + (2 * u - P[..., 1:-1, 2:] - P[..., 1:-1, :-2]) / hy ** 2
        return lap.reshape(*lead, self.size)

    def grad_sq(self, x: torch.Tensor) -> torch.Tensor:
        """
        discrete Dirichlet energy ||grad_h x||_2^2 built from the same edge differences as the stencil
        """
        if self.is_radial:
            (dr,) = self.h
            right = torch.cat([x[1:], torch.zeros(1, dtype=x.dtype)])
            return 2 * math.pi / dr * torch.sum(self._r_half * (x - right) ** 2)

        hx, hy = self.h
        P = F.pad(x.reshape(self.shape), (1, 1, 1, 1))
        dx = P[1:, 1:-1] - P[:-1, 1:-1]
        dy = P[1:-1, 1:] - P[1:-1, :-1]
        return hx * hy * (torch.sum(dx ** 2) / hx ** 2 + torch.sum(dy ** 2) / hy ** 2)

    def pointwise_grad_sq(self, x: torch.Tensor) -> torch.Tensor:
        """
        |grad u|^2 at every interior node from centered differences; nodes next to the boundary
        use the boundary value zero, the origin of a disk uses the symmetry u'(0) = 0
        """
        if self.is_radial:
            (dr,) = self.h
            ext = torch.cat([x[1:2], x, torch.zeros(1, dtype=x.dtype)])
            return ((ext[2:] - ext[:-2]) / (2 * dr)) ** 2

        hx, hy = self.h
        P = F.pad(x.reshape(self.shape), (1, 1, 1, 1))
        gx = (P[2:, 1:-1] - P[:-2, 1:-1]) / (2 * hx)
        gy = (P[1:-1, 2:] - P[1:-1, :-2]) / (2 * hy)
        return (gx ** 2 + gy ** 2).reshape(-1)

    def to_frame(self, f: Field, name: str = "value") -> pd.DataFrame:
        """
        tabular dump of a field with its node coordinates
        """
        self.check(f)
        if self.is_radial:
            data = {"r": self.coords[0].numpy(), name: f.values.numpy()}
        else:
            data = {"x": self.coords[0].numpy(), "y": self.coords[1].numpy(), name: f.values.numpy()}
        return pd.DataFrame(data)

    def __repr__(self):
        return f"Grid(spec={self.spec}, nodes={self.size}, h={self.h})"


def build_domain(spec: DomainSpec) -> Grid:
    """
    :param spec: DomainSpec
    :return: Grid with nodes, spacing and quadrature weights
    """
    bad = spec.violations()
    if bad:
        raise ConfigurationError(bad)
    return Grid(spec)


def apply_laplacian(grid: Grid, f: Field) -> Field:
    grid.check(f)
    return Field(grid.laplacian.mv(f.values), grid)


def default_maxiter(grid: Grid) -> int:
    return int(50 * math.sqrt(grid.size)) + 1000


def _conjugate_gradient(grid: Grid, b: torch.Tensor, tol: float, maxiter: int,
                        x0: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, int]:
    A = grid.laplacian
    bnorm = torch.sqrt(grid.inner(b, b))
    if bnorm == 0:
        return torch.zeros_like(b), 0

    x = torch.zeros_like(b) if x0 is None else x0.clone()
    r = b - A.mv(x)
    p = r.clone()
    rr = grid.inner(r, r)
    if torch.sqrt(rr) <= tol * bnorm:
        return x, 0

    for k in range(1, maxiter + 1):
        Ap = A.mv(p)
        alpha = rr / grid.inner(p, Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = grid.inner(r, r)
        if torch.sqrt(rr_new) <= tol * bnorm:
            return x, k
        p = r + (rr_new / rr) * p
        rr = rr_new

    raise ConvergenceError("conjugate gradient did not converge",
                           residual=float(torch.sqrt(rr) / bnorm), iterations=maxiter)


def solve_poisson(grid: Grid, rhs: Field, tol: float = DEFAULT_CG_TOL, maxiter: Optional[int] = None,
                  x0: Optional[Field] = None) -> Field:
    """
    solve -Lap_h w = rhs with zero Dirichlet data by conjugate gradients in the weighted inner product
    :param grid: Grid
    :param rhs: Field
    :param tol: relative residual tolerance ||-Lap_h w - rhs||_2 <= tol ||rhs||_2
    :param maxiter: iteration cap (default 50 sqrt(nodes) + 1000)
    :param x0: optional starting guess
    :return: Field w
    """
    grid.check(rhs)
    if tol <= 0:
        raise ConfigurationError("cg tolerance must be > 0")
    maxiter = default_maxiter(grid) if maxiter is None else maxiter
    w, _ = _conjugate_gradient(grid, rhs.values, tol, maxiter, None if x0 is None else x0.values)
    return Field(w, grid)


@dataclass(frozen=True)
class Norms:
    l2: float
    lq: float
    q: float
    sup: float
    grad_l2: float


def lq_norm(grid: Grid, f: Field, q: float) -> float:
    if q <= 0:
        raise ConfigurationError(f"norm exponent q must be > 0, got {q}")
    return float(torch.sum(grid.weights * f.values.abs() ** q) ** (1.0 / q))


def norms(grid: Grid, f: Field, q: float = 2.0) -> Norms:
    grid.check(f)
    return Norms(l2=lq_norm(grid, f, 2.0),
                 lq=lq_norm(grid, f, q),
                 q=q,
                 sup=f.sup,
                 grad_l2=float(torch.sqrt(grid.grad_sq(f.values))))


def smallest_eigenvalue(grid: Grid, tol: float = 1e-8, maxiter: int = 500,
                        cg_tol: float = 1e-12) -> Tuple[float, Field]:
    """
    principal Dirichlet eigenpair of -Lap_h by inverse power iteration
    :param grid: Grid
    :param tol: absolute tolerance on ||-Lap_h phi - lam phi||_2 with sup phi = 1
    :param maxiter: maximal number of inverse iterations
    :param cg_tol: tolerance of the inner Poisson solves
    :return: (lam_1, phi_1) with phi_1 > 0 and sup phi_1 = 1
    """
    if tol <= 0:
        raise ConfigurationError("eigenvalue tolerance must be > 0")

    A = grid.laplacian
    phi = torch.ones(grid.size, dtype=DTYPE)
    residual = float("inf")
    cap = default_maxiter(grid)

    for it in range(1, maxiter + 1):
        z, _ = _conjugate_gradient(grid, phi, cg_tol, cap, x0=phi)
        phi = z / z.abs().max()
        Aphi = A.mv(phi)
        lam = grid.inner(phi, Aphi) / grid.inner(phi, phi)
        residual = float(torch.sqrt(grid.inner(Aphi - lam * phi, Aphi - lam * phi)))
        if residual <= tol:
            break
    else:
        raise ConvergenceError("inverse power iteration did not converge", residual=residual, iterations=maxiter)

    if phi.min() <= 0:
        raise NonPositiveError("principal eigenfunction is not positive at every interior node")
    return float(lam), Field(phi, grid)
