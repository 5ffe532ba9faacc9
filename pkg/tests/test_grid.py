import math

import pytest
import torch

from kirlab.exceptions import ConfigurationError, ConvergenceError, DimensionError
from kirlab.grid import (DomainSpec, Field, apply_laplacian, build_domain, norms, smallest_eigenvalue,
                         solve_poisson)


@pytest.fixture(scope="module")
def square():
    return build_domain(DomainSpec.rectangle(1.0, 1.0, 32))


@pytest.fixture(scope="module")
def disk():
    return build_domain(DomainSpec.disk(1.0, 128))


def test_domain_violations():
    with pytest.raises(ConfigurationError) as err:
        build_domain(DomainSpec("triangle", 8))
    assert len(err.value.violations) == 2
    with pytest.raises(ConfigurationError):
        build_domain(DomainSpec.disk(-1.0, 64))
    assert DomainSpec.rectangle(2.0, 1.0, 16).violations() == []


def test_node_counts(square, disk):
    assert square.size == 31 ** 2
    assert disk.size == 128
    assert float(disk.weights.sum()) == pytest.approx(math.pi * (1 - 0.5 / 128) ** 2, rel=1e-12)


@pytest.mark.parametrize("name", ["square", "disk"])
def test_laplacian_is_self_adjoint_and_matches_energy(name, request):
    grid = request.getfixturevalue(name)
    gen = torch.Generator().manual_seed(0)
    x = torch.rand(grid.size, generator=gen, dtype=torch.float64)
    y = torch.rand(grid.size, generator=gen, dtype=torch.float64)
    assert float(grid.inner(grid.neg_laplacian(x), y)) == pytest.approx(float(grid.inner(x, grid.neg_laplacian(y))),
                                                                         rel=1e-12)
    assert float(grid.grad_sq(x)) == pytest.approx(float(grid.inner(grid.neg_laplacian(x), x)), rel=1e-12)


def test_batched_laplacian(square):
    x = torch.rand(3, square.size, dtype=torch.float64)
    batched = square.neg_laplacian(x)
    for k in range(3):
        assert torch.allclose(batched[k], square.neg_laplacian(x[k]))


def test_linear_operator_wraps_stencil(square):
    f = square.from_function(lambda x, y: x * (1 - x) * y * (1 - y))
    assert torch.allclose(apply_laplacian(square, f).values, square.neg_laplacian(f.values))


def test_poisson_second_order():
    errors = []
    for n in (16, 32, 64):
        grid = build_domain(DomainSpec.rectangle(1.0, 1.0, n))
        exact = grid.from_function(lambda x, y: torch.sin(math.pi * x) * torch.sin(math.pi * y))
        w = solve_poisson(grid, exact.like(2 * math.pi ** 2 * exact.values))
        errors.append((w.values - exact.values).abs().max().item())
    for e0, e1 in zip(errors, errors[1:]):
        assert 3.5 <= e0 / e1 <= 4.5


def test_poisson_residual(disk):
    rhs = disk.ones()
    w = solve_poisson(disk, rhs, tol=1e-11)
    r = disk.neg_laplacian(w.values) - rhs.values
    assert math.sqrt(float(disk.inner(r, r))) <= 1e-10 * math.sqrt(float(disk.inner(rhs.values, rhs.values)))
    assert w.min > 0


@pytest.mark.parametrize("name", ["square", "disk"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_poisson_preserves_sign(name, seed, request):
    # nonnegative, partly vanishing data gives a strictly positive discrete solution
    grid = request.getfixturevalue(name)
    gen = torch.Generator().manual_seed(seed)
    data = torch.rand(grid.size, generator=gen, dtype=torch.float64)
    data = data * (torch.rand(grid.size, generator=gen, dtype=torch.float64) > 0.7)
    w = solve_poisson(grid, grid.ones().like(data))
    assert w.min > 0


def test_poisson_cap_raises(square):
    with pytest.raises(ConvergenceError) as err:
        solve_poisson(square, square.ones(), tol=1e-12, maxiter=2)
    assert err.value.iterations == 2


def test_field_shape_checked(square, disk):
    with pytest.raises(DimensionError):
        Field(torch.zeros(5, dtype=torch.float64), square)
    with pytest.raises(DimensionError):
        solve_poisson(square, disk.ones())


def test_eigenvalue_unit_square():
    lam, phi = smallest_eigenvalue(build_domain(DomainSpec.rectangle(1.0, 1.0, 64)))
    assert lam == pytest.approx(2 * math.pi ** 2, rel=1e-2)
    # 5-point stencil: 8 n^2 sin^2(pi / 2n)
    assert lam == pytest.approx(8 * 64 ** 2 * math.sin(math.pi / 128) ** 2, rel=1e-8)
    assert phi.min > 0 and phi.sup == pytest.approx(1.0)


def test_eigenvalue_scales_with_domain():
    lam1, _ = smallest_eigenvalue(build_domain(DomainSpec.rectangle(1.0, 1.0, 32)))
    lam2, _ = smallest_eigenvalue(build_domain(DomainSpec.rectangle(2.0, 2.0, 32)))
    assert lam1 / lam2 == pytest.approx(4.0, rel=1e-7)


def test_eigenvalue_disk():
    lam, phi = smallest_eigenvalue(build_domain(DomainSpec.disk(1.0, 256)))
    # first zero of J0 squared
    assert lam == pytest.approx(2.404825557695773 ** 2, rel=1e-2)
    assert int(torch.argmax(phi.values)) == 0


def test_norms(square):
    f = square.ones()
    out = norms(square, f, q=4.0)
    area = float(square.weights.sum())
    assert out.l2 == pytest.approx(area ** 0.5)
    assert out.lq == pytest.approx(area ** 0.25)
    assert out.sup == 1.0
    assert out.grad_l2 > 0


def test_pointwise_gradient_of_linear_profile():
    grid = build_domain(DomainSpec.rectangle(1.0, 1.0, 16))
    f = grid.from_function(lambda x, y: x)
    g = grid.pointwise_grad_sq(f.values).reshape(grid.shape)
    # interior nodes away from the y-boundary see the exact slope
    assert torch.allclose(g[1:-1, 1:-1], torch.ones_like(g[1:-1, 1:-1]))


def test_to_frame(disk):
    frame = disk.to_frame(disk.ones(), name="v")
    assert list(frame.columns) == ["r", "v"]
    assert len(frame) == disk.size
