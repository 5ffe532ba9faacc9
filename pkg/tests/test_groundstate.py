import pytest
import torch

from kirlab.exceptions import ConfigurationError, InconsistentMinimizerError
from kirlab.grid import DomainSpec, build_domain, smallest_eigenvalue
from kirlab.groundstate import (equation_residual, minimize_rayleigh, normalize_to_solution, solve_groundstate,
                                solve_sublinear)
from kirlab.shooting import shooting_oracle


@pytest.fixture(scope="module")
def square():
    return build_domain(DomainSpec.rectangle(1.0, 1.0, 24))


@pytest.fixture(scope="module")
def disk():
    return build_domain(DomainSpec.disk(1.0, 256))


@pytest.fixture(scope="module")
def disk_p3(disk):
    return solve_groundstate(disk, 3.0)


@pytest.mark.parametrize("p", [1.02, 0.97, 9.5, -0.5])
def test_rejected_exponents(square, p):
    with pytest.raises(ConfigurationError):
        solve_groundstate(square, p)


def test_sublinear_solution(square):
    gs = solve_sublinear(square, 0.5)
    assert gs.v.min > 0
    assert gs.monotone
    assert equation_residual(square, gs.v, 0.5) <= 1e-8
    assert gs.S == pytest.approx(gs.grad_norm ** (0.5 - 1))
    assert gs.S == pytest.approx(gs.S_omega ** 0.75, rel=1e-7)
    assert gs.iterations == len(gs.history)


def test_sublinear_uniqueness(square):
    above = solve_sublinear(square, 0.5, start="supersolution")
    below = solve_sublinear(square, 0.5, start="subsolution")
    assert below.monotone
    assert (above.v.values - below.v.values).abs().max().item() <= 1e-7 * above.sup


def test_sublinear_disk_scaling():
    v1 = solve_sublinear(build_domain(DomainSpec.disk(1.0, 128)), 0.5)
    v2 = solve_sublinear(build_domain(DomainSpec.disk(2.0, 128)), 0.5)
    assert v2.sup / v1.sup == pytest.approx(2 ** 4, rel=1e-6)


def test_sublinear_matches_shooting():
    gs = solve_sublinear(build_domain(DomainSpec.disk(1.0, 256)), 0.5)
    oracle = shooting_oracle(0.5, 1.0)
    assert gs.sup == pytest.approx(oracle.sup, rel=1e-2)
    assert gs.S == pytest.approx(oracle.S, rel=1e-2)


def test_rayleigh_quotient_non_increasing(disk):
    result = minimize_rayleigh(disk, 3.0)
    history = result.history
    assert all(r1 <= r0 * (1 + 1e-12) for r0, r1 in zip(history, history[1:]))
    assert result.w.min > 0
    assert result.residual <= 1e-10


def test_disk_matches_shooting(disk_p3):
    oracle = shooting_oracle(3.0, 1.0)
    assert disk_p3.S_omega == pytest.approx(oracle.S_omega, rel=1e-2)
    assert disk_p3.sup == pytest.approx(oracle.sup, rel=1e-2)


def test_minimizer_identities(disk_p3):
    gs = disk_p3
    assert gs.S == pytest.approx(gs.S_omega ** 2, rel=1e-6)
    assert gs.grad_norm ** 2 == pytest.approx(gs.energy(), rel=1e-8)
    assert gs.residual <= 1e-9
    assert gs.v.min > 0


def test_domain_monotonicity():
    small = solve_groundstate(build_domain(DomainSpec.rectangle(1.0, 1.0, 24)), 3.0)
    large = solve_groundstate(build_domain(DomainSpec.rectangle(2.0, 2.0, 24)), 3.0)
    assert small.S_omega > large.S_omega
    # S(t Omega) = t^(-4/(p+1)) S(Omega) in two dimensions
    assert large.S_omega / small.S_omega == pytest.approx(0.5, rel=1e-6)


def test_normalize_rejects_non_minimizer(square):
    _, phi = smallest_eigenvalue(square)
    w = phi.like(phi.values / torch.sum(square.weights * phi.values ** 4) ** 0.25)
    with pytest.raises(InconsistentMinimizerError):
        normalize_to_solution(w, float(square.grad_sq(w.values)), 3.0)


def test_groundstate_report(square):
    gs = solve_groundstate(square, 2.0)
    out = gs.to_dict()
    assert out["method"] == "rayleigh"
    assert out["domain"]["resolution"] == 24
    frame = gs.to_frame()
    assert list(frame.columns) == ["x", "y", "v"]
