import math

import numpy as np
import pytest

from viterbo.action_profiles import (
    ActionEnergyProfile,
    OneDofSystem,
    action_space_volume,
    from_function,
    harmonic,
    minimal_critical_action,
    profile_build,
    simplex_grid_minimum,
    sublevel_area,
    sublevel_areas,
    viterbo_bound_split,
)
from viterbo.bodies import monte_carlo_volume, quadratic_hamiltonian
from viterbo.errors import InvalidSystemError
from viterbo.quadratic import ellipsoid_capacity


def quadratic_system(a, b, label=""):
    """``a p^2 + b q^2`` as a planar system."""
    return OneDofSystem(quadratic_hamiltonian(np.diag([a, b]), label), label)


def quartic(p, q):
    return 0.5 * p**2 + q**4


def test_sublevel_area_examples():
    assert sublevel_area(harmonic(1.0), 1.0) == pytest.approx(2 * math.pi, rel=1e-12)
    assert sublevel_area(quadratic_system(0.5, 1.0), 1.0) == pytest.approx(math.pi * math.sqrt(2), rel=1e-12)


def test_sublevel_area_quartic_against_monte_carlo():
    sys = from_function(lambda x: quartic(x[..., 0], x[..., 1]), "quartic")
    area = sublevel_area(sys, 1.0)
    vol = monte_carlo_volume(sys.bounded(), 1.0, 400_000, seed=2)
    assert abs(area - vol.value) <= 3 * vol.std_error
    # {p^2/2 + q^4 <= E} scales as E^{1/2 + 1/4}
    assert sublevel_area(sys, 16.0) == pytest.approx(area * 16.0**0.75, rel=1e-8)


def test_sublevel_areas_small_energy_anisotropic():
    sys = from_function(lambda x: 0.5 * x[..., 0] ** 2 + 50.0 * x[..., 1] ** 2 + x[..., 1] ** 4, "stiff")
    E = np.array([1e-6, 1e-3, 1.0])
    areas = sublevel_areas(sys, E)
    # near the minimum the system is harmonic with area 2 pi E / omega, omega = 10
    assert areas[0] == pytest.approx(2 * math.pi * 1e-6 / 10, rel=1e-5)
    assert np.all(np.diff(areas) > 0)


def test_invalid_systems():
    with pytest.raises(InvalidSystemError):
        from_function(lambda x: 1.0 + x[..., 0] ** 2 + x[..., 1] ** 2)
    with pytest.raises(InvalidSystemError):
        from_function(lambda x: x[..., 0] ** 2)
    with pytest.raises(ValueError):
        sublevel_area(harmonic(1.0), -1.0)


def test_profile_linear_for_harmonic():
    w = 1.7
    prof = profile_build(harmonic(w), 2.0)
    A = np.linspace(0.1, prof.A_max, 9)
    np.testing.assert_allclose(prof.energy(A), w * A / (2 * math.pi), rtol=1e-8)
    np.testing.assert_allclose(prof.slope(A), w / (2 * math.pi), rtol=1e-6)


def test_profile_linear_for_homogeneous():
    prof = profile_build(quadratic_system(0.5, 3.0), 1.0)
    A = np.linspace(0.05, prof.A_max, 7)
    ratio = prof.energy(A) / A
    assert np.ptp(ratio) <= 1e-8 * ratio.mean()


def test_profile_rejects_non_monotone():
    with pytest.raises(InvalidSystemError):
        ActionEnergyProfile(np.array([0.0, 1.0, 0.5]), np.array([0.0, 1.0, 2.0]))


@pytest.mark.parametrize("omegas,E", [((1.0, 2.0), 1.0), ((3.0, 1.0, 2.0), 0.7), ((1.0, 1.0), 0.5)])
def test_harmonic_critical_action(omegas, E):
    res = minimal_critical_action([harmonic(w) for w in omegas], E)
    assert res.A_E == pytest.approx(2 * math.pi * E / max(omegas), rel=1e-8)
    if len(set(omegas)) == len(omegas):
        assert res.support == (int(np.argmax(omegas)),)
    n = len(omegas)
    A = np.diag(np.r_[np.array(omegas) / 2, np.array(omegas) / 2])
    assert res.A_E == pytest.approx(ellipsoid_capacity(A, E), rel=1e-8)
    assert n == len(res.per_index_actions)


def test_identical_subsystems_single_face():
    sys = from_function(lambda x: 0.5 * x[..., 0] ** 2 + x[..., 1] ** 4, "quartic")
    E = 1.0
    res = minimal_critical_action([sys, sys], E)
    assert len(res.support) == 1
    assert res.A_E == pytest.approx(sublevel_area(sys, E), rel=1e-7)
    profiles = [profile_build(sys, E)] * 2
    grid, _ = simplex_grid_minimum(profiles, E, 2000)
    assert abs(grid - res.A_E) <= 1e-3


def test_single_subsystem():
    sys = quadratic_system(0.5, 2.0)
    res = minimal_critical_action([sys], 1.5)
    assert res.A_E == pytest.approx(sublevel_area(sys, 1.5), rel=1e-8)


def test_action_space_volume_is_phase_volume():
    profiles = [profile_build(harmonic(w), 1.0) for w in (1.0, 2.0)]
    assert action_space_volume(profiles, 1.0) == pytest.approx(math.pi**2, rel=1e-6)


def test_split_bound_harmonic_pair():
    rep = viterbo_bound_split([harmonic(1.0), harmonic(2.0)], 1.0, samples=400_000)
    assert rep.A_E == pytest.approx(math.pi, rel=1e-8)
    assert rep.volume_lower == pytest.approx(math.pi**2 / 2, rel=1e-8)
    assert abs(rep.volume_mc.value - math.pi**2) <= 3 * rep.volume_mc.std_error
    assert rep.viterbo_ok


def test_split_bound_unit_ball():
    rep = viterbo_bound_split([harmonic(1.0), harmonic(1.0)], 0.5, samples=400_000)
    assert rep.A_E == pytest.approx(math.pi, rel=1e-8)
    assert abs(rep.ratio - 1.0) <= 3 * rep.volume_mc.std_error / rep.volume_mc.value


def test_split_bound_quadratic_pair():
    systems = [quadratic_system(0.5, 1.0), quadratic_system(0.5, 2.0)]
    rep = viterbo_bound_split(systems, 1.0, samples=200_000)
    A = np.diag([0.5, 0.5, 1.0, 2.0])
    assert rep.A_E == pytest.approx(ellipsoid_capacity(A, 1.0), rel=1e-7)
    assert rep.viterbo_ok
