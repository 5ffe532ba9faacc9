import pytest

from kirlab.exceptions import ConfigurationError
from kirlab.shooting import integrate_profile, shooting_oracle


@pytest.mark.parametrize("p", [1.0, 0.0, -2.0])
def test_rejected_exponents(p):
    with pytest.raises(ConfigurationError):
        shooting_oracle(p)


def test_rejected_radius():
    with pytest.raises(ConfigurationError):
        shooting_oracle(3.0, radius=0.0)


@pytest.mark.parametrize("p", [0.5, 3.0])
def test_profile_hits_boundary(p):
    result = shooting_oracle(p)
    v = result.profile["v"].to_numpy()
    assert abs(result.boundary_value) <= 1e-10 * result.v0
    assert (v[:-1] > 0).all()
    # radially decreasing
    assert (v[1:] <= v[:-1]).all()
    assert result.S == pytest.approx(result.grad_norm ** (p - 1))


def test_integrate_profile_starts_flat():
    r, v, dv = integrate_profile(2.0, 3.0, 1.0, steps=64)
    assert len(r) == len(v) == len(dv) == 65
    assert float(v[0]) == 2.0 and float(dv[0]) == 0.0
    assert float(dv[1]) < 0


def test_radius_scaling():
    one = shooting_oracle(3.0, radius=1.0)
    two = shooting_oracle(3.0, radius=2.0)
    # S(t Omega) = t^(-4/(p+1)) S(Omega) in two dimensions
    assert two.S_omega / one.S_omega == pytest.approx(0.5, rel=1e-6)
    assert two.v0 / one.v0 == pytest.approx(0.5, rel=1e-6)
