"""Capacities of Hamiltonians that split into one-degree-of-freedom pieces.

For ``H(p, q) = sum_i H_i(p_i, q_i)`` every closed orbit of a planar piece
is a level curve, its action ``A_i`` is the enclosed area, and ``E_i(A_i)``
is the energy of that curve.  Closed orbits of ``H`` on ``{H = E}`` with all
active pieces sharing one period are the critical points of ``sum A_i`` on
``{sum E_i(A_i) = E}``: equal slopes ``dE_i/dA_i = L`` on the support.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .bodies import ConvexHamiltonian, Volume, direct_sum_hamiltonian, monte_carlo_volume
from .errors import InvalidSystemError, NumericFailure

_R_MAX = 1e8


@dataclass(frozen=True)
class OneDofSystem:
    """A planar Hamiltonian ``h(p, q)`` with a unique minimum 0 at the origin."""

    h: ConvexHamiltonian
    label: str = ""

    def __post_init__(self):
        if self.h.dimension != 2:
            raise InvalidSystemError(f"{self.label or 'system'}: needs a Hamiltonian on R^2")
        if abs(float(self.h(np.zeros(2)))) > 1e-12:
            raise InvalidSystemError(f"{self.label or 'system'}: h(0) must be 0")
        t = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        u = np.column_stack([np.cos(t), np.sin(t)])
        radii = np.geomspace(1e-3, 1e2, 40)
        vals = self.h(radii[:, None, None] * u[None])
        if np.any(~np.isfinite(vals)) or np.any(np.diff(vals, axis=0) <= 0):
            raise InvalidSystemError(f"{self.label or 'system'}: h is not increasing along rays")
        if np.min(vals[-1]) <= 1e-10 * np.max(vals[-1]):
            # a (numerically) flat direction: sublevel sets are unbounded
            raise InvalidSystemError(f"{self.label or 'system'}: h stays near 0 along a ray")

    def radius(self, theta, E, axes=(1.0, 1.0)) -> np.ndarray:
        """Radius ``r`` with ``h(r a_p cos(theta), r a_q sin(theta)) = E``.

        ``theta``, ``E`` and the two entries of ``axes = (a_p, a_q)``
        broadcast against each other; the default axes give the ordinary
        distance to the level curve.
        """
        theta, E, ap, aq = np.broadcast_arrays(
            np.asarray(theta, dtype=float), np.asarray(E, dtype=float), *map(np.asarray, axes)
        )
        u = np.stack([ap * np.cos(theta), aq * np.sin(theta)], axis=-1)
        if self.h.degree > 0:
            return (E / self.h(u)) ** (1.0 / self.h.degree)
        # bracket [hi/2, hi] by doubling or halving, then bisect to rounding
        hi = np.ones(theta.shape)
        for _ in range(200):
            low = self.h(hi[..., None] * u) < E
            if not np.any(low):
                break
            if np.any(hi[low] > _R_MAX):
                raise InvalidSystemError(f"{self.label or 'system'}: sublevel set {{h <= {E.max()}}} looks unbounded")
            hi = np.where(low, 2 * hi, hi)
        lo = hi / 2
        for _ in range(200):
            high = self.h(lo[..., None] * u) >= E
            if not np.any(high):
                break
            hi = np.where(high, lo, hi)
            lo = np.where(high, lo / 2, lo)
        for _ in range(54):
            mid = 0.5 * (lo + hi)
            below = self.h(mid[..., None] * u) < E
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def box(self, E: float, safety: float = 1.02, fan: int = 4096) -> np.ndarray:
        """Half-widths ``(|p|, |q|)`` of a box around ``{h <= E}`` from a dense ray fan."""
        t = np.linspace(0.0, 2 * np.pi, fan, endpoint=False)
        r = self.radius(t, E)
        return safety * np.array([np.max(r * np.abs(np.cos(t))), np.max(r * np.abs(np.sin(t)))])

    def bounded(self) -> ConvexHamiltonian:
        """``h`` with `box` attached, for Monte Carlo volumes of direct sums."""
        h = self.h
        return ConvexHamiltonian(h.evaluate, 2, h.degree, h.is_even, h.grad, self.label or h.label, self.box)


def sublevel_areas(sys: OneDofSystem, energies, rtol: float = 1e-10) -> np.ndarray:
    """Areas of ``{h <= E}`` for several energies in one vectorised quadrature.

    Polar form ``(1/2) int r(theta)^2 dtheta`` with adaptive quadrature in
    ``theta`` (``scipy.integrate.quad_vec``) and a radial bisection for
    ``r``.  Each polar frame is first stretched to the extents of its level
    set so that elongated sets (small energies of anisotropic systems) do
    not produce a spiky integrand.
    """
    E = np.atleast_1d(np.asarray(energies, dtype=float))
    if np.any(E <= 0):
        raise ValueError("energy must be positive")
    if sys.h.degree > 0:
        # homogeneous: one area at E = 1 scales as E^{2/degree}
        return sublevel_areas(_unit(sys), [1.0], rtol)[0] * E ** (2.0 / sys.h.degree)
    fan = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
    r = sys.radius(fan[None, :], E[:, None])
    ap = np.max(r * np.abs(np.cos(fan)), axis=1)
    aq = np.max(r * np.abs(np.sin(fan)), axis=1)
    # in the stretched frame every integral is of order one, so the max-norm error is relative
    val, err = quad_vec(
        lambda t: 0.5 * sys.radius(t, E, (ap, aq)) ** 2, 0.0, 2 * np.pi, epsrel=rtol, norm="max", limit=400
    )
    if not np.all(np.isfinite(val)) or err > 1e-6 * np.min(val):
        raise NumericFailure("sublevel area quadrature did not converge", {"values": val.tolist(), "error": float(err)})
    return val * ap * aq


def _unit(sys: OneDofSystem) -> OneDofSystem:
    """The same system with the homogeneity shortcut switched off."""
    h = sys.h
    return OneDofSystem(ConvexHamiltonian(h.evaluate, 2, 0.0, h.is_even, h.grad, h.label), sys.label)


def sublevel_area(sys: OneDofSystem, E: float, rtol: float = 1e-10) -> float:
    """Area of ``{h <= E}``, i.e. the action of the level curve ``{h = E}``."""
    return float(sublevel_areas(sys, [E], rtol)[0])


@dataclass
class ActionEnergyProfile:
    """Monotone table ``A -> E(A)`` with a shape-preserving cubic interpolant."""

    actions: np.ndarray
    energies: np.ndarray
    label: str = ""
    _E_of_A: PchipInterpolator = field(init=False, repr=False)
    _A_of_E: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        A = np.asarray(self.actions, dtype=float)
        E = np.asarray(self.energies, dtype=float)
        if A[0] != 0.0 or E[0] != 0.0:
            raise InvalidSystemError("profile must start at (0, 0)")
        if np.any(np.diff(A) <= 0) or np.any(np.diff(E) <= 0):
            raise InvalidSystemError(f"{self.label or 'profile'}: E(A) is not strictly increasing")
        self.actions, self.energies = A, E
        self._E_of_A = PchipInterpolator(A, E, extrapolate=False)
        self._A_of_E = PchipInterpolator(E, A, extrapolate=False)

    @property
    def A_max(self) -> float:
        return float(self.actions[-1])

    @property
    def E_max(self) -> float:
        return float(self.energies[-1])

    def energy(self, A):
        return self._E_of_A(A)

    def slope(self, A):
        """``dE/dA``: the orbit frequency divided by ``2 pi``."""
        return self._E_of_A.derivative()(A)

    def action(self, E):
        return self._A_of_E(E)


def profile_build(sys: OneDofSystem, E_max: float, grid_size: int = 128) -> ActionEnergyProfile:
    """Tabulate ``A(E)`` on a log-spaced grid up to ``E_max`` and invert it."""
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    if E_max <= 0:
        raise ValueError("E_max must be positive")
    E = np.geomspace(E_max * 1e-6, E_max, grid_size)
    A = sublevel_areas(sys, E)
    return ActionEnergyProfile(np.r_[0.0, A], np.r_[0.0, E], sys.label)


@dataclass
class CriticalActionResult:
    """Minimal action over the equal-slope critical points on ``{sum E_i = E}``."""

    A_E: float
    support: tuple[int, ...]
    L: float
    per_index_actions: np.ndarray
    energies: np.ndarray
    candidates: list = field(default_factory=list, repr=False)


def _monotone_pieces(slope: np.ndarray, rtol: float = 1e-9):
    """Split a sampled slope curve into constant, increasing and decreasing runs."""
    scale = max(float(np.max(np.abs(slope))), 1e-300)
    d = np.diff(slope)
    kind = np.where(np.abs(d) <= rtol * scale, 0, np.sign(d)).astype(int)
    pieces = []
    start = 0
    for i in range(1, len(kind) + 1):
        if i == len(kind) or kind[i] != kind[start]:
            pieces.append((start, i, int(kind[start])))
            start = i
    return pieces


def _branches(profile: ActionEnergyProfile, samples: int = 2049):
    """Pieces of ``A -> slope(A)`` on which the slope is constant or invertible."""
    A = np.linspace(0.0, profile.A_max, samples)
    s = profile.slope(A)
    out = []
    for i0, i1, kind in _monotone_pieces(s):
        a0, a1 = A[i0], A[i1]
        out.append((kind, a0, a1, float(s[i0]), float(s[i1])))
    return out


def _invert_slope(profile, branch, L):
    kind, a0, a1, s0, s1 = branch
    lo, hi = min(s0, s1), max(s0, s1)
    if not lo <= L <= hi:
        return None
    f = lambda a: float(profile.slope(a)) - L  # noqa: E731
    fa, fb = f(a0), f(a1)
    if fa == 0:
        return a0
    if fb == 0:
        return a1
    if fa * fb > 0:
        return None
    return brentq(f, a0, a1, xtol=1e-14, rtol=1e-14)


def minimal_critical_action(
    systems: list[OneDofSystem],
    E: float,
    *,
    profiles: list[ActionEnergyProfile] | None = None,
    brackets: int = 256,
    grid_size: int = 128,
) -> CriticalActionResult:
    """Smallest ``sum A_i`` over equal-slope critical points of ``{sum E_i(A_i) = E}``.

    Every vertex (one active subsystem carrying all the energy) is critical.
    For larger supports the common slope ``L`` is scanned over ``brackets``
    intervals and each sign change of ``sum E_i(A_i(L)) - E`` is refined by
    ``brentq``.  Subsystems whose slope is constant on a stretch contribute
    a whole flat of critical points; there the energy left over after the
    other members is spread over them, and the action does not depend on
    how.
    """
    n = len(systems)
    if n == 0:
        raise ValueError("need at least one subsystem")
    if E <= 0:
        raise ValueError("energy must be positive")
    profiles = profiles or [profile_build(s, E, grid_size) for s in systems]
    cands = []
    for i, prof in enumerate(profiles):
        A = float(prof.action(E)) if prof.E_max > E else prof.A_max
        acts = np.zeros(n)
        acts[i] = A
        cands.append((A, (i,), float(prof.slope(A)), acts))

    branch_sets = [_branches(p) for p in profiles]
    for size in range(2, n + 1):
        for support in itertools.combinations(range(n), size):
            for combo in itertools.product(*(branch_sets[i] for i in support)):
                cands.extend(_critical_on(profiles, support, combo, E, brackets, n))

    if not cands:
        raise NumericFailure("no critical configuration found", {"E": E, "n": n})
    best = min(cands, key=lambda c: c[0])
    energies = np.array([float(profiles[i].energy(a)) if a > 0 else 0.0 for i, a in enumerate(best[3])])
    return CriticalActionResult(best[0], best[1], best[2], best[3], energies, cands)


def _critical_on(profiles, support, combo, E, brackets, n):
    flat = [k for k, b in zip(support, combo) if b[0] == 0]
    moving = [(k, b) for k, b in zip(support, combo) if b[0] != 0]
    out = []
    if flat:
        slopes = [0.5 * (combo[support.index(k)][3] + combo[support.index(k)][4]) for k in flat]
        L = slopes[0]
        if max(slopes) - min(slopes) > 1e-9 * abs(L):
            return out
        acts = np.zeros(n)
        used = 0.0
        for k, b in moving:
            a = _invert_slope(profiles[k], b, L)
            if a is None or a <= 0:
                return out
            acts[k] = a
            used += float(profiles[k].energy(a))
        rest = E - used
        if rest <= 0:
            return out
        # spread the rest over the flat pieces, staying inside each flat
        room = [(combo[support.index(k)][1], combo[support.index(k)][2]) for k in flat]
        e_lo = sum(float(profiles[k].energy(r[0])) for k, r in zip(flat, room))
        e_hi = sum(float(profiles[k].energy(r[1])) for k, r in zip(flat, room))
        if not e_lo < rest <= e_hi or any(r[0] <= 0 for r in room):
            return out
        total = float(acts.sum()) + rest / L
        acts[flat[0]] = rest / L  # one representative of the flat
        out.append((total, tuple(support), L, acts))
        return out

    lo = max(min(b[3], b[4]) for _, b in moving)
    hi = min(max(b[3], b[4]) for _, b in moving)
    if not lo < hi:
        return out

    def residual(L):
        total = -E
        for k, b in moving:
            a = _invert_slope(profiles[k], b, L)
            if a is None:
                return math.nan
            total += float(profiles[k].energy(a))
        return total

    Ls = np.linspace(lo, hi, brackets + 1)
    rs = np.array([residual(L) for L in Ls])
    for j in range(brackets):
        if not (np.isfinite(rs[j]) and np.isfinite(rs[j + 1])) or rs[j] * rs[j + 1] > 0:
            continue
        L = Ls[j] if rs[j] == 0 else brentq(residual, Ls[j], Ls[j + 1], xtol=1e-14, rtol=1e-12)
        acts = np.zeros(n)
        for k, b in moving:
            acts[k] = _invert_slope(profiles[k], b, L)
        if np.all(acts[list(support)] > 0):
            out.append((float(acts.sum()), tuple(support), float(L), acts))
    return out


def simplex_grid_minimum(profiles: list[ActionEnergyProfile], E: float, resolution: int = 2000) -> tuple[float, np.ndarray]:
    """Brute-force ``min sum A_i(E_i)`` over a grid of the energy simplex, ``n = 2``."""
    if len(profiles) != 2:
        raise ValueError("the grid oracle is for two subsystems")
    e1 = np.linspace(0.0, E, resolution + 1)
    a = profiles[0].action(e1) + profiles[1].action(E - e1)
    j = int(np.nanargmin(a))
    return float(a[j]), np.array([e1[j], E - e1[j]])


def action_space_volume(profiles: list[ActionEnergyProfile], E: float) -> float:
    """``vol{sum E_i(A_i) <= E}`` in action coordinates, ``n = 2``.

    The action-angle map is volume preserving, so this equals the phase
    volume of ``{sum H_i <= E}``.
    """
    if len(profiles) != 2:
        raise ValueError("implemented for two subsystems")
    p1, p2 = profiles
    A1max = float(p1.action(E))

    def inner(a1):
        rest = E - float(p1.energy(a1))
        return float(p2.action(rest)) if rest > 0 else 0.0

    val, _ = quad(inner, 0.0, A1max, epsrel=1e-10, limit=200)
    return val


@dataclass
class SplitViterboReport:
    """``vol{sum H_i <= E}`` against the simplex bound ``A_E^n / n!``."""

    A_E: float
    volume_lower: float
    volume_mc: Volume
    viterbo_ok: bool
    critical: CriticalActionResult

    @property
    def ratio(self) -> float:
        n = len(self.critical.per_index_actions)
        return self.volume_mc.value * math.factorial(n) / self.A_E**n


def viterbo_bound_split(
    systems: list[OneDofSystem],
    E: float,
    *,
    samples: int = 10**6,
    seed: int = 0,
) -> SplitViterboReport:
    """Minimal critical action, the simplex volume bound and a Monte Carlo volume.

    The region ``{sum E_i(A_i) <= E}`` in action space contains the simplex
    with legs ``A_E`` along every axis (by convexity of ``{H <= E}`` its
    image is star-shaped from 0 and the vertices are at least ``A_E``), so
    the phase volume is at least ``A_E^n / n!``.
    """
    crit = minimal_critical_action(systems, E)
    n = len(systems)
    H = direct_sum_hamiltonian([s.bounded() for s in systems])
    vol = monte_carlo_volume(H, E, samples, seed)
    lower = crit.A_E**n / math.factorial(n)
    return SplitViterboReport(crit.A_E, lower, vol, bool(vol.value >= lower - 3 * vol.std_error), crit)


def harmonic(omega: float, label: str | None = None) -> OneDofSystem:
    """``h = omega (p^2 + q^2) / 2``: area ``2 pi E / omega``."""
    w = float(omega)
    h = ConvexHamiltonian(
        lambda x: 0.5 * w * np.sum(np.asarray(x) ** 2, axis=-1),
        2,
        2.0,
        True,
        lambda x: w * np.asarray(x),
        label or f"harmonic({w:g})",
        lambda E: np.full(2, math.sqrt(2 * E / w)),
    )
    return OneDofSystem(h, h.label)


def from_function(f, label: str = "", degree: float = 0.0) -> OneDofSystem:
    """Wrap a vectorised ``f(x)`` with ``x = (p, q)`` as a planar system."""
    return OneDofSystem(ConvexHamiltonian(lambda x: f(np.asarray(x, dtype=float)), 2, degree, False, None, label), label)
