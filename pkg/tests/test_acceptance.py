"""Acceptance criteria 1-9.  Each test prints one ``PASS``/``FAIL`` line;
the lines are repeated in the terminal summary at the end of the run."""

import math
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from viterbo import pl_flow
from viterbo.action_profiles import (
    harmonic,
    minimal_critical_action,
    profile_build,
    simplex_grid_minimum,
)
from viterbo.bodies import (
    ConvexHamiltonian,
    L2SumSpec,
    NormDescriptor,
    l2_sum_hamiltonian,
    l2_sum_volume,
    legendre_2hom,
    legendre_transform,
    monte_carlo_volume,
    norm_power,
    quadratic_hamiltonian,
)
from viterbo.quadratic import (
    ellipsoid_capacity,
    ellipsoid_volume,
    flow_return_time,
    random_positive_form,
    random_symplectic,
    symplectic_frequencies,
    verify_theorem_even_2hom,
)
from viterbo.verify import check_ineq, viterbo_ratio

ONE_CYCLE = 4 * math.asin(3 / 5)


# collected for the terminal summary in conftest.py
CRITERION_LINES: list[str] = []


def report(number, name, ok, detail=""):
    line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
    CRITERION_LINES.append(line)
    print(line)
    assert ok, detail


# -- 1 ---------------------------------------------------------------------


def test_c1_one_cycle_minimal():
    t0 = time.perf_counter()
    orb = pl_flow.one_cycle_minimal()
    re = pl_flow.simulate(orb.start)
    elapsed = time.perf_counter() - t0
    ok = (
        abs(orb.action - ONE_CYCLE) <= 1e-9
        and re.closed
        and abs(re.period - ONE_CYCLE) <= 1e-9
        and orb.action < math.pi
        and orb.action < 2 * math.sqrt(2)
        and elapsed < 1.0
    )
    report(1, "one-cycle action", ok, f"action={orb.action:.12f} period={re.period:.12f} t={elapsed:.2f}s")


# -- 2 ---------------------------------------------------------------------


def test_c2_volume_exactness():
    t0 = time.perf_counter()
    details, ok = [], True
    for n, expected in [(2, 4.0), (3, math.pi)]:
        spec = L2SumSpec.from_norm(NormDescriptor("linf", n))
        exact = l2_sum_volume(spec)
        mc = monte_carlo_volume(l2_sum_hamiltonian(spec), 1.0, 10**7, seed=0)
        z = abs(mc.value - expected) / mc.std_error
        ok &= exact.method == "exact" and abs(exact.value - expected) <= 1e-12 and z <= 3
        details.append(f"n={n} exact={exact.value:.12g} mc={mc.value:.5f}±{mc.std_error:.5f} z={z:.2f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    report(2, "volume exactness", ok, "; ".join(details) + f" t={elapsed:.1f}s")


# -- 3 ---------------------------------------------------------------------


def test_c3_viterbo_ratios():
    t0 = time.perf_counter()
    r2 = viterbo_ratio(4.0, ONE_CYCLE, 2)
    r3 = viterbo_ratio(math.pi, ONE_CYCLE, 3)
    elapsed = time.perf_counter() - t0
    ok = abs(r2 - 1.2074) <= 1e-4 and abs(r3 - 1.105) <= 1e-3 and r2 >= 1 and r3 >= 1 and elapsed < 1
    report(3, "Viterbo ratios", ok, f"n=2 {r2:.6f} n=3 {r3:.6f}")


# -- 4 ---------------------------------------------------------------------


def test_c4_nd_trajectories():
    t0 = time.perf_counter()
    bad = []
    for n in range(2, 9):
        traj = pl_flow.simulate(pl_flow.explicit_nd_start(n))
        expected = 2 * n * math.asin((2 * n - 1) / (n * n + (n - 1) ** 2))
        if not (traj.closed and len(traj.events) == 4 * n and abs(traj.period - expected) <= 1e-9):
            bad.append((n, len(traj.events), traj.period if traj.closed else None, expected))
    elapsed = time.perf_counter() - t0
    report(4, "nD explicit orbits", not bad and elapsed < 5, f"failures={bad} t={elapsed:.2f}s")


# -- 5 ---------------------------------------------------------------------


def test_c5_inequality_chain():
    t0 = time.perf_counter()
    checks = [check_ineq(n) for n in range(1, 1001)]
    elapsed = time.perf_counter() - t0
    failing = [c.n for c in checks if not c.holds]
    c1, c2, c3, c4 = checks[:4]
    spots = (
        c1.equality
        and abs(c1.lhs - math.pi) <= 1e-12
        and abs(c1.rhs - 2 * math.asin(1)) <= 1e-12
        and abs(c2.lhs - 2 * math.sqrt(2)) <= 1e-12
        and abs(c2.rhs - ONE_CYCLE) <= 1e-12
        and abs(c3.lhs - (6 * math.pi) ** (1 / 3)) <= 1e-12
        and abs(c3.rhs - 6 * math.asin(5 / 13)) <= 1e-12
        and abs(c4.lhs - 2.5558) <= 1e-4
        and abs(c4.rhs - 8 * math.asin(7 / 25)) <= 1e-12
        and not any(c.equality for c in checks[1:])
    )
    # the printed decimals for n = 3, 4 (2.3607, 2.2723) do not match the
    # arcsin expressions they stand for; the expressions are what is checked
    ok = not failing and spots and elapsed < 1
    report(
        5,
        "inequality chain",
        ok,
        f"failing={failing[:5]} n3 rhs={c3.rhs:.4f} n4 lhs={c4.lhs:.4f} rhs={c4.rhs:.4f} t={elapsed:.2f}s",
    )


# -- 6 ---------------------------------------------------------------------


def test_c6_ellipsoid_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_time, bad_eq = 0.0, []
    for k in range(100):
        n = 1 + k % 4
        if k % 2 == 0:
            A = random_positive_form(n, rng)
        else:
            # equal frequencies: a symplectic image of a round ball
            S = random_symplectic(n, rng)
            A = S.T @ (rng.uniform(0.3, 3.0) * np.eye(2 * n)) @ S
            A = (A + A.T) / 2
        level = rng.uniform(0.5, 2.0)
        cap = ellipsoid_capacity(A, level)
        rt = flow_return_time(A, level)
        # 2-homogeneous: action of the orbit = level * period
        worst_time = max(worst_time, abs(level * rt.time - cap))
        ratio = viterbo_ratio(ellipsoid_volume(A, level), cap, n)
        w = symplectic_frequencies(A)
        equal = (w[-1] - w[0]) <= 1e-6 * w[-1]
        if ratio < 1 - 1e-9 or (abs(ratio - 1) <= 1e-6) != equal:
            bad_eq.append((k, n, ratio, w.tolist()))
    elapsed = time.perf_counter() - t0
    ok = worst_time <= 1e-8 and not bad_eq and elapsed < 30
    report(6, "ellipsoid oracle", ok, f"max|E*T-c|={worst_time:.2e} bad={bad_eq[:3]} t={elapsed:.1f}s")


# -- 7 ---------------------------------------------------------------------


def quadratic_mixture(rng, d):
    """``V(q) = q.B0 q + sqrt(sum_k (q.B_k q)^2)``: even, 2-homogeneous,
    smooth away from 0 and convex (B_k positive definite)."""
    Bs = []
    for _ in range(3):
        M = rng.standard_normal((d, d))
        Bs.append(M @ M.T / d + 0.2 * np.eye(d))
    w = rng.uniform(0.0, 1.0)

    def evaluate(q):
        forms = np.stack([np.einsum("...i,ij,...j->...", q, B, q) for B in Bs], axis=-1)
        return w * forms[..., 0] + np.sqrt(np.sum(forms[..., 1:] ** 2, axis=-1))

    def grad(q):
        f = np.array([q @ B @ q for B in Bs])
        g = np.array([2 * B @ q for B in Bs])
        r = math.sqrt(f[1] ** 2 + f[2] ** 2)
        return w * g[0] + (f[1] * g[1] + f[2] * g[2]) / r

    return ConvexHamiltonian(evaluate, d, 2.0, True, grad, "mixture")


def test_c7_theorem_even_pipeline():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    bad = []
    for k in range(20):
        d = 2 + k % 2
        V = quadratic_mixture(rng, d)
        rep = verify_theorem_even_2hom(V, boundary_samples=20_000, mc_samples=200_000, seed=k)
        if not (rep.containment_ok and rep.gradient_ok and rep.closure_error <= 1e-8 and rep.viterbo_ok):
            bad.append((k, rep.containment_ok, rep.gradient_ok, rep.closure_error, rep.viterbo_ok))
    elapsed = time.perf_counter() - t0
    report(7, "even 2-homogeneous pipeline", not bad and elapsed < 60, f"bad={bad} t={elapsed:.1f}s")


# -- 8 ---------------------------------------------------------------------


def test_c8_split_pipeline():
    t0 = time.perf_counter()
    systems = [harmonic(1.0), harmonic(2.0)]
    E = 1.0
    crit = minimal_critical_action(systems, E)
    # assembled form in (p1, p2, q1, q2): omega_i (p_i^2 + q_i^2) / 2
    A = np.diag([0.5, 1.0, 0.5, 1.0])
    cap = ellipsoid_capacity(A, E)
    profiles = [profile_build(s, E) for s in systems]
    grid_min, _ = simplex_grid_minimum(profiles, E, resolution=2000)
    # grid spacing in energy is E/2000, the slopes are at most 2 pi
    resolution = 2 * math.pi * E / 2000
    elapsed = time.perf_counter() - t0
    ok = (
        abs(crit.A_E - math.pi) <= 1e-6
        and abs(crit.A_E - cap) <= 1e-6
        and abs(grid_min - crit.A_E) <= resolution
        and elapsed < 30
    )
    report(8, "split pipeline", ok, f"A_E={crit.A_E:.10f} cap={cap:.10f} grid={grid_min:.10f} t={elapsed:.1f}s")


# -- 9 ---------------------------------------------------------------------
# Each suite draws 200 cases; the summary test below is the printed line.

PROPS = settings(max_examples=200, deadline=None, derandomize=True, suppress_health_check=list(HealthCheck))
_counts: dict[str, int] = {}


def _tick(name):
    _counts[name] = _counts.get(name, 0) + 1


def _closed_family():
    orbits = [pl_flow.one_cycle_minimal()]
    orbits += pl_flow.symmetric_planar_orbits(3) + pl_flow.symmetric_planar_orbits(5)
    orbits += [pl_flow.simulate(pl_flow.explicit_nd_start(n)) for n in (3, 4, 5)]
    return orbits


CLOSED = _closed_family()


def _transform(x: pl_flow.PhasePoint, scale, perm_seed, signs):
    n = x.n
    perm = np.random.default_rng(perm_seed).permutation(n)
    s = np.asarray(signs[:n], dtype=float)
    return pl_flow.PhasePoint(scale * s * x.p[perm], scale * s * x.q[perm])


closed_case = st.tuples(
    st.integers(0, len(CLOSED) - 1),
    st.floats(0.0, 1.0),
    st.floats(0.2, 5.0),
    st.integers(0, 10**6),
    st.lists(st.sampled_from([-1.0, 1.0]), min_size=8, max_size=8),
)


def _orbit_from(case):
    i, u, scale, perm_seed, signs = case
    base = CLOSED[i]
    x = base.state_at(u * base.period)
    traj = pl_flow.simulate(_transform(x, scale, perm_seed, signs))
    return base, traj


# generic points: exact ties (|q_i| = |q_j|, p_i = 0) are degenerate starts
# that `simulate` rejects by design, so coordinates come from a seeded normal draw
generic_point = st.tuples(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.1, 3.0)).map(
    lambda c: c[2] * np.random.default_rng(c[1]).standard_normal(2 * c[0])
)


@PROPS
@given(generic_point, st.integers(1, 12))
def test_p_energy_conservation(coords, events):
    x = pl_flow.PhasePoint.from_vector(coords)
    traj = pl_flow.simulate(x, fixed_events=events)
    _, states = traj.sample(16)
    n = x.n
    H = np.sum(np.abs(states[:, :n]), axis=1) ** 2 + np.max(np.abs(states[:, n:]), axis=1) ** 2
    assert np.max(np.abs(H - traj.energy)) <= 1e-10 * max(1.0, traj.energy)
    _tick("energy")


@PROPS
@given(closed_case)
def test_p_action_equals_energy_times_period(case):
    base, traj = _orbit_from(case)
    assert traj.closed
    assert abs(traj.period - base.period) <= 1e-9 * base.period
    action = float(sum(seg.action() for seg in traj.segments))
    assert abs(action - traj.energy * traj.period) <= 1e-8 * action
    _tick("action")


@PROPS
@given(
    st.sampled_from(["quadratic", "linf", "l1", "weighted"]),
    st.floats(0.0, 2 * math.pi),
    st.floats(0.2, 3.0),
    st.integers(0, 10**6),
)
def test_p_legendre_involution(kind, theta, r, seed):
    rng = np.random.default_rng(seed)
    if kind == "quadratic":
        M = rng.standard_normal((2, 2))
        f = quadratic_hamiltonian(M @ M.T + 0.3 * np.eye(2))
    elif kind == "weighted":
        f = norm_power(NormDescriptor("weighted-l2", 2, tuple(rng.uniform(0.3, 3.0, 2))))
    else:
        f = norm_power(NormDescriptor(kind, 2))
    x = r * np.array([math.cos(theta), math.sin(theta)])
    back = legendre_2hom(legendre_transform(f), x)
    assert abs(back - float(f(x))) <= 1e-6 * max(1.0, float(f(x)))
    _tick("legendre")


@PROPS
@given(closed_case.filter(lambda c: CLOSED[c[0]].n == 2))
def test_p_angle_sum_identities(case):
    base, traj = _orbit_from(case)
    ang = pl_flow.angle_sequence(traj)
    r1, r2 = ang.cyclic_residuals()
    assert r1 <= 1e-9 and r2 <= 1e-9
    a, b = ang.alphas, ang.betas
    # summed forms: 2 sum cos a = sum cos b and 2 sum sin b = sum sin a
    assert abs(2 * np.sum(np.cos(a)) - np.sum(np.cos(b))) <= 1e-9 * len(a)
    assert abs(2 * np.sum(np.sin(b)) - np.sum(np.sin(a))) <= 1e-9 * len(a)
    # the action on H = 1 is sum(alpha) - sum(beta)
    assert abs((np.sum(a) - np.sum(b)) - traj.period) <= 1e-9 * traj.period
    _tick("angles")


@PROPS
@given(closed_case)
def test_p_lemma_bound(case):
    base, traj = _orbit_from(case)
    k = traj.cycles
    assert k is not None and k >= 1
    S = traj.action / traj.energy
    assert S >= k - 1e-9
    if traj.n == 2:
        assert pl_flow.lemma_lower_bound(pl_flow.angle_sequence(traj), k).bound_holds
    _tick("lemma")


@PROPS
@given(generic_point, st.floats(0.0, 6.0))
def test_p_flow_odd_symmetry(coords, t):
    x = pl_flow.PhasePoint.from_vector(coords)
    a = pl_flow.flow(x, t).vector()
    b = pl_flow.flow(pl_flow.PhasePoint.from_vector(-np.asarray(coords)), t).vector()
    assert np.max(np.abs(a + b)) <= 1e-9 * max(1.0, np.max(np.abs(a)))
    _tick("odd")


def test_c9_property_suites():
    suites = ["energy", "action", "legendre", "angles", "lemma", "odd"]
    if not all(_counts.get(s, 0) for s in suites):
        pytest.skip("run together with the property tests above")
    counts = {s: _counts.get(s, 0) for s in suites}
    report(9, "property suites", all(v >= 200 for v in counts.values()), f"cases={counts}")
