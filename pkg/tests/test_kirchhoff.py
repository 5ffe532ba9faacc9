import math

import pytest
import torch

from kirlab.branch import KirchhoffParams, find_roots
from kirlab.data import sublinear_perturbation
from kirlab.exceptions import (ConfigurationError, ContinuationError, FixedPointError, IdentityViolationError)
from kirlab.grid import DomainSpec, build_domain, smallest_eigenvalue
from kirlab.groundstate import solve_groundstate
from kirlab.kirchhoff import (PerturbationSpec, check_schedule, continuation, homotopy_step, kirchhoff_residual,
                              reconstruct, recover_groundstate, uniform_schedule)

SUBLINEAR = PerturbationSpec.sublinear(**{k: v for k, v in sublinear_perturbation.items() if k != "kind"})


@pytest.fixture(scope="module")
def disk():
    return build_domain(DomainSpec.disk(1.0, 64))


@pytest.fixture(scope="module")
def lam1(disk):
    return smallest_eigenvalue(disk)[0]


@pytest.fixture(scope="module")
def gs_half(disk):
    return solve_groundstate(disk, 0.5)


@pytest.fixture(scope="module")
def gs_two():
    return solve_groundstate(build_domain(DomainSpec.disk(1.0, 128)), 2.0)


def test_reconstruct_two_branches(gs_two):
    params = KirchhoffParams(1 / (64 * gs_two.S ** 2), 1.0, 1.0, 2.0)
    report = find_roots(params, gs_two.S)
    assert len(report.roots) == 2
    for k, beta in enumerate(report.roots):
        record = reconstruct(gs_two, beta, params, root_index=k)
        assert record.grad_sq == pytest.approx(beta, rel=1e-6)
        assert record.residual_rel <= 1e-8
        assert record.provenance == f"reconstructed({k})"
        assert record.min > 0
        v = recover_groundstate(record)
        assert (v.values - gs_two.v.values).abs().max().item() <= 1e-6 * gs_two.sup


def test_reconstruct_with_wrong_constant(gs_two):
    params = KirchhoffParams(1.0, 0.0, 1.0, 2.0)
    beta = find_roots(params, 2 * gs_two.S).roots[0]
    with pytest.raises(IdentityViolationError):
        reconstruct(gs_two, beta, params)
    with pytest.raises(ConfigurationError):
        reconstruct(gs_two, beta, params.with_(p=3.0))


def test_residual_of_zero_is_infinite(disk):
    assert math.isinf(kirchhoff_residual(disk.zeros(), KirchhoffParams(1.0, 1.0, 1.0, 2.0)))


def test_start_ignores_b_and_alpha(disk):
    init = disk.ones()
    runs = [homotopy_step(disk, KirchhoffParams(1.0, b, alpha, 0.5), SUBLINEAR, 0.0, init)
            for b, alpha in ((0.0, 1.0), (3.0, 1.0), (1.0, 2.5))]
    for r in runs[1:]:
        assert torch.equal(r.u.values, runs[0].u.values)


def test_start_is_scaled_groundstate(disk, gs_half):
    params = KirchhoffParams(2.0, 1.0, 1.0, 0.5)
    record = homotopy_step(disk, params, PerturbationSpec.none(), 0.0, disk.ones())
    expected = 2.0 ** (1 / (0.5 - 1)) * gs_half.v.values
    assert (record.u.values - expected).abs().max().item() <= 1e-7 * float(expected.max())
    assert record.provenance == "homotopy(0)"


@pytest.fixture(scope="module")
def square_gs_two():
    grid = build_domain(DomainSpec.rectangle(1.0, 1.0, 32))
    return grid, solve_groundstate(grid, 2.0)


def _from_above(gs, b):
    # amplitude 1/(b S^2) exceeds every fixed point of c -> c^2 / (a + b c^2 S^2)
    return gs.v.like(gs.v.values / (b * gs.S ** 2))


def test_nonexistence_fails_to_converge(square_gs_two):
    grid, gs = square_gs_two
    params = KirchhoffParams(1.0, 8.0, 1.0, 2.0)
    assert find_roots(params, gs.S).roots == []
    with pytest.raises(FixedPointError):
        homotopy_step(grid, params, PerturbationSpec.none(), 1.0, _from_above(gs, 8.0), method="picard")


def test_picard_settles_on_upper_branch_below_threshold(square_gs_two):
    grid, gs = square_gs_two
    params = KirchhoffParams(1 / (64 * gs.S ** 2), 1.0, 1.0, 2.0)
    roots = find_roots(params, gs.S).roots
    assert len(roots) == 2
    record = homotopy_step(grid, params, PerturbationSpec.none(), 1.0, _from_above(gs, 1.0), method="picard")
    assert record.grad_sq == pytest.approx(roots[1], rel=1e-6)
    assert record.residual_rel <= 1e-8


def test_sublinear_continuation(disk, gs_half):
    path = continuation(disk, KirchhoffParams(1.0, 1.0, 1.0, 0.5), SUBLINEAR, gs=gs_half)
    assert [r.t for r in path] == uniform_schedule()
    assert all(r.residual_rel <= 1e-8 and r.min > 0 for r in path)


def test_superlinear_continuation(disk, lam1):
    params = KirchhoffParams(1.0, 1.0, 1.0, 5.0)
    pert = PerturbationSpec.superlinear(q=2.0, lam_fraction=0.5).resolve(params.a, lam1)
    assert pert.lam == pytest.approx(0.5 * lam1)
    path = continuation(disk, params, pert, gs=solve_groundstate(disk, 5.0), lam1=lam1)
    assert path[-1].t == 1.0
    assert path[-1].residual_rel <= 1e-8
    assert path[-1].min > 0
    # broyden reports its own evaluation count, not the cap
    assert all(0 < r.iterations < 1000 for r in path if r.t > 0)


def test_unperturbed_continuation_matches_reconstruction(disk, gs_half):
    params = KirchhoffParams(1.0, 1.0, 1.0, 0.5)
    end = continuation(disk, params, PerturbationSpec.none(), gs=gs_half)[-1]
    ref = reconstruct(gs_half, find_roots(params, gs_half.S).roots[0], params)
    assert (ref.u.values - end.u.values).abs().max().item() <= 1e-6


def test_continuation_error_carries_path():
    grid = build_domain(DomainSpec.rectangle(1.0, 1.0, 24))
    gs = solve_groundstate(grid, 2.0)
    with pytest.raises(ContinuationError) as err:
        continuation(grid, KirchhoffParams(1.0, 1.0, 1.0, 2.0), PerturbationSpec.none(), gs=gs, method="picard")
    # nothing beyond the start can be reached by picard iteration
    assert all(r.t == 0 for r in err.value.path)


@pytest.mark.parametrize("schedule", [[0.0, 0.5, 1.0], [0.1, 0.2, 1.0], [0.0, 0.1, 0.1, 0.2, 1.0], [0.0]])
def test_bad_schedules(schedule):
    with pytest.raises(ConfigurationError):
        check_schedule(schedule)


def test_schedule_defaults():
    ts = uniform_schedule()
    assert len(ts) == 11 and ts[0] == 0 and ts[-1] == 1
    check_schedule(ts)


def test_perturbation_violations(lam1):
    sub = PerturbationSpec.sublinear(mu=1.0, q=0.3, q1=0.8)
    assert any("(H1)" in v for v in sub.violations(KirchhoffParams(1.0, 1.0, 1.0, 0.5)))
    sup = PerturbationSpec.superlinear(q=6.0, lam=1.0)
    assert any("(H2)" in v for v in sup.violations(KirchhoffParams(1.0, 1.0, 1.0, 5.0)))
    big = PerturbationSpec.superlinear(q=2.0, lam=2 * lam1)
    bad = big.violations(KirchhoffParams(1.0, 1.0, 1.0, 5.0), lam1)
    assert len(bad) == 1 and "lambda_1" in bad[0]
    frac = PerturbationSpec.superlinear(q=2.0, lam_fraction=1.2)
    assert any("lam_fraction" in v for v in frac.violations(KirchhoffParams(1.0, 1.0, 1.0, 5.0)))


def test_homotopy_rejects_invalid_perturbation(disk):
    params = KirchhoffParams(1.0, 1.0, 1.0, 0.5)
    with pytest.raises(ConfigurationError):
        homotopy_step(disk, params, PerturbationSpec.sublinear(mu=1.0, q=0.3, q1=0.8), 0.5, disk.ones())
    with pytest.raises(ConfigurationError):
        homotopy_step(disk, params, SUBLINEAR, 1.5, disk.ones())


@pytest.mark.parametrize("pert, p", [(SUBLINEAR, 0.5), (PerturbationSpec.superlinear(q=2.0, lam=3.0), 5.0)])
def test_hypothesis_limits(pert, p):
    limits = pert.hypothesis_limits(p)
    assert limits["monotone"] and limits["nonnegative"]
    assert limits["gap"][-1] < limits["gap"][0] / 10
