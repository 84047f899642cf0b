"""Exact event-driven flow of ``H(p, q) = ||p||_1^2 + ||q||_inf^2`` on R^{2n}.

Inside a smooth piece of the phase space the motion is linear.  With
``k`` the index of the largest ``|q_j|``, ``s`` the signs of ``p`` and
``sigma = sign(q_k)`` the Hamiltonian equations read::

    dq_i/dt = 2 ||p||_1 s_i,    dp_k/dt = -2 q_k,    dp_j/dt = 0 (j != k)

so the pair ``(P, M) = (||p||_1, |q_k|)`` rotates at angular rate 2 on the
circle ``P^2 + M^2 = E``.  Every coordinate is then an explicit sinusoid
in time, event times are roots of ``a cos 2t + b sin 2t + d`` and the
action over an arc is a closed-form integral.

Indices (``k``, event indices) are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateStartError,
    InconsistencyError,
    RunawayError,
    StratumError,
)

ENERGY_TOL = 1e-10
CLOSURE_TOL = 1e-8
_TIE_TOL = 1e-12
_SIMULTANEOUS = 1e-11
_GUARD_TIME = 10 * math.pi


# --------------------------------------------------------------------------
# state types


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(p, q)`` of R^{2n}."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        q = np.array(self.q, dtype=float).reshape(-1)
        if p.shape != q.shape or p.size == 0:
            raise ValueError("p and q must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("phase point has non-finite entries")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.p.size

    def energy(self) -> float:
        return float(np.sum(np.abs(self.p)) ** 2 + np.max(np.abs(self.q)) ** 2)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.q])

    @classmethod
    def from_vector(cls, x) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(x[:n], x[n:])

    def __neg__(self) -> "PhasePoint":
        return PhasePoint(-self.p, -self.q)

    def distance(self, other: "PhasePoint") -> float:
        """Max-norm distance."""
        return float(max(np.max(np.abs(self.p - other.p)), np.max(np.abs(self.q - other.q))))

    def rotated(self) -> tuple[float, float]:
        """Planar coordinates ``x1 = (q1 - q2)/2``, ``x2 = (q1 + q2)/2`` (n = 2 only).

        In these coordinates ``||q||_inf = |x1| + |x2|``.
        """
        if self.n != 2:
            raise ValueError("rotated coordinates are defined for n = 2")
        q1, q2 = self.q
        return (q1 - q2) / 2.0, (q1 + q2) / 2.0


@dataclass(frozen=True)
class RegionSignature:
    """Smooth piece of H: signs of ``p``, argmax index ``k`` and ``sign(q_k)``."""

    p_signs: tuple[int, ...]
    k: int
    qk_sign: int

    @property
    def c(self) -> int:
        """+1 when ``|q_k|`` grows and ``||p||_1`` shrinks, -1 otherwise."""
        return self.qk_sign * self.p_signs[self.k]


@dataclass(frozen=True)
class TurningEvent:
    """A switch between smooth pieces.

    ``kind`` is ``"p-zero"`` (``indices == (k,)``) or ``"max-tie"``
    (``indices == (k, j)``, the argmax handing over from ``k`` to ``j``).
    """

    time: float
    kind: str
    indices: tuple[int, ...]
    point: PhasePoint


def region_of(x: PhasePoint) -> RegionSignature:
    """Read the smooth piece containing ``x`` directly off its coordinates.

    Zero momenta are recorded with sign 0.  Raises `StratumError` when two or
    more ``|q_j|`` tie for the maximum.
    """
    aq = np.abs(x.q)
    m = aq.max()
    tied = np.flatnonzero(aq >= m - _TIE_TOL * max(1.0, m))
    if tied.size > 1 or m == 0.0:
        idx = tuple(int(i) for i in (tied if m > 0 else range(x.n)))
        raise StratumError(f"max-tie between |q_j| for j in {idx}", idx)
    k = int(tied[0])
    return RegionSignature(_p_signs(x), k, int(np.sign(x.q[k])))


def _p_signs(x: PhasePoint) -> tuple[int, ...]:
    # momenta within round-off of zero count as zero (e.g. points read off an arc end)
    small = _TIE_TOL * max(1.0, math.sqrt(x.energy()))
    return tuple(0 if abs(v) <= small else int(np.sign(v)) for v in x.p)


def vector_field(x: PhasePoint) -> np.ndarray:
    """Hamiltonian velocity ``(dp/dt, dq/dt)`` with the raw sign convention (sign 0 -> 0)."""
    r = region_of(x)
    P = float(np.sum(np.abs(x.p)))
    qdot = 2.0 * P * np.sign(x.p)
    pdot = np.zeros(x.n)
    pdot[r.k] = -2.0 * x.q[r.k]
    return np.concatenate([pdot, qdot])


def resolve_region(x: PhasePoint) -> RegionSignature:
    """Region the forward flow enters from ``x``, resolving strata by look-ahead.

    A two-way max-tie hands the argmax to the index whose ``|q_j|`` grows
    faster; a zero ``p_k`` takes the sign of ``dp_k/dt = -2 q_k``.
    """
    P = float(np.sum(np.abs(x.p)))
    try:
        r = region_of(x)
        signs, k, sigma = list(r.p_signs), r.k, r.qk_sign
    except StratumError as err:
        if len(err.indices) != 2 or np.max(np.abs(x.q)) == 0.0:
            raise DegenerateStartError(f"multi-way max-tie at {err.indices}") from err
        signs = list(_p_signs(x))
        rates = {j: np.sign(x.q[j]) * signs[j] for j in err.indices}
        i, j = err.indices
        if rates[i] == rates[j] or P == 0.0:
            raise DegenerateStartError(f"tie between {i} and {j} persists (sliding)") from err
        k = i if rates[i] > rates[j] else j
        sigma = int(np.sign(x.q[k]))
    if signs[k] == 0:
        signs[k] = -sigma
    return RegionSignature(tuple(signs), k, sigma)


# --------------------------------------------------------------------------
# closed-form arcs


@dataclass(frozen=True)
class Segment:
    """Motion inside one region from ``start`` for ``duration``."""

    start: PhasePoint
    region: RegionSignature
    duration: float

    @property
    def _pmc(self) -> tuple[float, float, int]:
        s = np.array(self.region.p_signs, dtype=float)
        P0 = float(s @ self.start.p)
        M0 = self.region.qk_sign * float(self.start.q[self.region.k])
        return P0, M0, self.region.c

    def state_at(self, t) -> PhasePoint:
        P0, M0, c = self._pmc
        s = np.array(self.region.p_signs, dtype=float)
        k = self.region.k
        P = P0 * math.cos(2 * t) - c * M0 * math.sin(2 * t)
        G = P0 * math.sin(2 * t) + c * M0 * (math.cos(2 * t) - 1.0)
        p = self.start.p.copy()
        p[k] = self.start.p[k] + s[k] * (P - P0)
        q = self.start.q + s * G
        return PhasePoint(p, q)

    def states(self, times) -> np.ndarray:
        """Rows ``(p, q)`` at each time, vectorised."""
        times = np.asarray(times, dtype=float)
        P0, M0, c = self._pmc
        s = np.array(self.region.p_signs, dtype=float)
        k = self.region.k
        cos2, sin2 = np.cos(2 * times), np.sin(2 * times)
        P = P0 * cos2 - c * M0 * sin2
        G = P0 * sin2 + c * M0 * (cos2 - 1.0)
        p = np.tile(self.start.p, (times.size, 1))
        p[:, k] = self.start.p[k] + s[k] * (P - P0)
        q = self.start.q[None, :] + G[:, None] * s[None, :]
        return np.hstack([p, q])

    def action(self, t: float | None = None) -> float:
        """Exact integral of ``sum p_i dq_i`` over ``[0, t]`` (default: whole arc).

        Along an arc ``sum p_i dq_i/dt = 2 ||p||_1^2``.
        """
        t = self.duration if t is None else t
        P0, M0, c = self._pmc
        s4 = math.sin(4 * t)
        return 2.0 * (
            P0 * P0 * (t / 2 + s4 / 8)
            + M0 * M0 * (t / 2 - s4 / 8)
            - c * P0 * M0 * math.sin(2 * t) ** 2 / 2
        )

    def time_of(self, x: PhasePoint) -> float | None:
        """Time in ``[0, duration]`` at which the arc passes through ``x`` (or None)."""
        P0, M0, c = self._pmc
        s = np.array(self.region.p_signs, dtype=float)
        Px = float(s @ x.p)
        Mx = self.region.qk_sign * float(x.q[self.region.k])
        dtheta = math.atan2(Mx, Px) - math.atan2(M0, P0)
        t = (c * dtheta / 2.0) % math.pi
        for cand in (t, t - math.pi):
            if -1e-9 <= cand <= self.duration + 1e-9:
                return min(max(cand, 0.0), self.duration)
        return None


def _first_downcrossing(a: float, b: float, d: float) -> float | None:
    """First ``t > 0`` where ``a cos 2t + b sin 2t + d`` crosses zero downwards.

    Tangential contacts (grazing) are not crossings.
    """
    R = math.hypot(a, b)
    if R <= 1e-300:
        return None
    r = -d / R
    if r >= 1.0 or r <= -1.0 + 1e-13:
        return None
    psi = math.acos(r)
    phi = math.atan2(b, a)
    t = ((phi + psi) / 2.0) % math.pi
    if t < 1e-14:
        # crossing exactly at the start counts only if the function is
        # actually leaving the admissible side, which a valid region forbids
        t += math.pi
    return t


def _refine(f, t0: float) -> float:
    """Bracketed root refinement around a closed-form candidate."""
    for delta in (1e-6, 1e-9):
        lo, hi = max(t0 - delta, 0.0), t0 + delta
        flo, fhi = f(lo), f(hi)
        if flo > 0.0 > fhi:
            return brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return t0


def _next_event(x: PhasePoint, region: RegionSignature):
    """Locate the first turning event from ``x`` inside ``region``."""
    n = x.n
    seg = Segment(x, region, 0.0)
    P0, M0, c = seg._pmc
    s = region.p_signs
    k = region.k
    candidates = []

    a, b, d = P0, -c * M0, s[k] * x.p[k] - P0
    t = _first_downcrossing(a, b, d)
    if t is not None:
        candidates.append((t, "p-zero", (k,), (a, b, d)))

    for j in range(n):
        if j == k:
            continue
        for eta in (1, -1):
            a = M0 - eta * s[j] * c * M0
            b = c * P0 - eta * s[j] * P0
            d = -eta * x.q[j] + eta * s[j] * c * M0
            t = _first_downcrossing(a, b, d)
            if t is not None:
                candidates.append((t, "max-tie", (k, j), (a, b, d)))

    if not candidates or min(cand[0] for cand in candidates) > _GUARD_TIME:
        raise RunawayError(f"no turning event within {_GUARD_TIME:.3f} from {x}")

    refined = []
    for t, kind, idx, (a, b, d) in candidates:
        f = lambda u, a=a, b=b, d=d: a * math.cos(2 * u) + b * math.sin(2 * u) + d
        refined.append((_refine(f, t), kind, idx))
    refined.sort(key=lambda item: item[0])
    t_star, kind, idx = refined[0]
    simultaneous = [r for r in refined[1:] if r[0] - t_star <= _SIMULTANEOUS * max(1.0, t_star)]
    if simultaneous:
        raise DegenerateStartError(
            f"simultaneous events {[(kind, idx)] + [(r[1], r[2]) for r in simultaneous]}"
        )
    return t_star, kind, idx


def _advance(x: PhasePoint, region: RegionSignature):
    """One arc: returns (segment, event, next region)."""
    t_star, kind, idx = _next_event(x, region)
    seg = Segment(x, region, t_star)
    end = seg.state_at(t_star)
    p, q = end.p.copy(), end.q.copy()
    signs = list(region.p_signs)
    k, sigma = region.k, region.qk_sign
    if kind == "p-zero":
        p[k] = 0.0
        if abs(q[k]) <= 1e-14:
            raise DegenerateStartError("p-zero event with vanishing q_k (grazing)")
        signs[k] = -sigma
        new_region = RegionSignature(tuple(signs), k, sigma)
    else:
        j = idx[1]
        m = abs(q[k])
        eta = 1 if q[j] >= 0 else -1
        q[j] = eta * m
        if signs[j] == 0 or eta * signs[j] <= region.c:
            raise DegenerateStartError(f"max-tie {k}->{j} without transversal hand-over")
        new_region = RegionSignature(tuple(signs), j, eta)
    point = PhasePoint(p, q)
    return seg, TurningEvent(t_star, kind, idx, point), new_region


def advance_segment(x: PhasePoint, energy: float | None = None):
    """Propagate ``x`` to the next turning event.

    Returns ``(event, point)`` with ``event.time`` the duration of the arc.
    """
    _check_surface(x, energy)
    _, event, _ = _advance(x, resolve_region(x))
    return event, event.point


def _check_surface(x: PhasePoint, energy: float | None):
    if energy is not None and abs(x.energy() - energy) > ENERGY_TOL * max(1.0, energy):
        raise ValueError(f"point not on energy surface H = {energy}: H = {x.energy()!r}")


# --------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Chain of arcs starting at ``start``; open unless proven closed."""

    start: PhasePoint
    energy: float
    segments: list[Segment] = field(default_factory=list)
    events: list[TurningEvent] = field(default_factory=list)

    closed = False

    @property
    def n(self) -> int:
        return self.start.n

    @property
    def elapsed(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def state_at(self, t: float) -> PhasePoint:
        if t < 0:
            raise ValueError("negative time")
        acc = 0.0
        for seg in self.segments:
            if t <= acc + seg.duration:
                return seg.state_at(t - acc)
            acc += seg.duration
        raise ValueError(f"time {t} beyond the simulated range {acc}")

    def sample(self, per_segment: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Dense samples: times and rows ``(p, q)``, ``per_segment`` points per arc."""
        ts, rows, acc = [], [], 0.0
        for seg in self.segments:
            local = np.linspace(0.0, seg.duration, per_segment, endpoint=False)
            ts.append(acc + local)
            rows.append(seg.states(local))
            acc += seg.duration
        ts.append(np.array([acc]))
        rows.append(self.segments[-1].states([self.segments[-1].duration]))
        return np.concatenate(ts), np.vstack(rows)


@dataclass
class ClosedTrajectory(Trajectory):
    """A trajectory that returned to ``start`` after ``period``."""

    period: float = 0.0

    closed = True

    @property
    def action(self) -> float:
        return trajectory_action(self)

    @property
    def cycles(self) -> int | None:
        """``events / 4n``; None for orbits whose event count is not a multiple of 4n."""
        per = 4 * self.n
        m = len(self.events)
        return m // per if m % per == 0 and m > 0 else None


def simulate(
    start: PhasePoint,
    *,
    max_events: int = 10_000,
    fixed_events: int | None = None,
    closure_tol: float = CLOSURE_TOL,
) -> Trajectory:
    """Chain exact arcs from ``start``.

    With ``fixed_events=m`` exactly ``m`` events are generated and an open
    `Trajectory` is returned.  Otherwise the flow runs until it passes
    through ``start`` again (after at least one event), returning a
    `ClosedTrajectory`, or until ``max_events`` is exhausted, returning an
    open `Trajectory`.
    """
    if start.n < 2:
        raise DegenerateStartError("n = 1 has no max-tie structure; use forth_and_back(1)")
    energy = start.energy()
    if energy <= 0:
        raise DegenerateStartError("start at the origin")
    region = resolve_region(start)
    traj = Trajectory(start, energy)
    x = start
    limit = fixed_events if fixed_events is not None else max_events
    while len(traj.events) < limit:
        seg, event, next_region = _advance(x, region)
        if fixed_events is None and traj.events:
            t_close = seg.time_of(start)
            if t_close is not None and t_close > 0:
                if seg.state_at(t_close).distance(start) <= closure_tol * max(1.0, math.sqrt(energy)):
                    return _close(traj, seg, event, t_close)
        traj.segments.append(seg)
        traj.events.append(_shift(event, traj.elapsed))
        x, region = event.point, next_region
    return traj


def _shift(event: TurningEvent, t_end: float) -> TurningEvent:
    return TurningEvent(t_end, event.kind, event.indices, event.point)


def _close(traj: Trajectory, seg: Segment, event: TurningEvent, t_close: float) -> ClosedTrajectory:
    segments = list(traj.segments)
    events = list(traj.events)
    at_event = abs(t_close - seg.duration) <= 1e-12 * max(1.0, seg.duration)
    if at_event:
        segments.append(seg)
        events.append(_shift(event, traj.elapsed + seg.duration))
        period = traj.elapsed + seg.duration
    else:
        segments.append(Segment(seg.start, seg.region, t_close))
        period = traj.elapsed + t_close
    return ClosedTrajectory(traj.start, traj.energy, segments, events, period=period)


def flow(x: PhasePoint, t: float) -> PhasePoint:
    """Time-``t`` flow map (``t >= 0``)."""
    if t < 0:
        raise ValueError("flow is only propagated forward in time")
    region = resolve_region(x)
    while True:
        t_star, _, _ = _next_event(x, region)
        if t <= t_star:
            return Segment(x, region, t_star).state_at(t)
        _, event, region = _advance(x, region)
        t -= event.time
        x = event.point


def trajectory_action(traj: Trajectory) -> float:
    """``int sum p_i dq_i`` over a closed trajectory, integrated arc by arc."""
    if not traj.closed:
        raise ValueError("action is defined for closed trajectories")
    action = float(sum(seg.action() for seg in traj.segments))
    period = traj.period
    if abs(action - traj.energy * period) > 1e-8 * abs(action):
        raise InconsistencyError(
            f"action {action!r} differs from energy*period {traj.energy * period!r}"
        )
    return action


# --------------------------------------------------------------------------
# explicit trajectories


def explicit_nd_start(n: int) -> PhasePoint:
    """Start point of the explicit closed orbit with ``4n`` turning events on ``H = 1``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    r = math.sqrt(n * n + (n - 1) ** 2)
    q = np.array([(n - 2 * i) / r for i in range(n)])
    p = np.full(n, 1.0 / r)
    p[0] = 0.0
    return PhasePoint(p, q)


def nd_period_formula(n: int) -> float:
    """Period (= action on ``H = 1``) of the explicit orbit: ``2n arcsin((2n-1)/(n^2+(n-1)^2))``."""
    if n < 1:
        raise ValueError("n must be positive")
    return 2 * n * math.asin((2 * n - 1) / (n * n + (n - 1) ** 2))


def recurrence_step(a_prev: float, a_cur: float) -> float:
    """Next turning value ``sqrt(1 - a_cur^2) - a_prev``; negative means inadmissible."""
    if not (0.0 <= a_prev <= 1.0 and 0.0 <= a_cur <= 1.0):
        raise ValueError("turning values must lie in [0, 1]")
    return math.sqrt(1.0 - a_cur * a_cur) - a_prev


def planar_start(a1: float, a2: float) -> PhasePoint:
    """Planar start ``(p1, p2, x1, x2) = (0, a1, x1, a2)`` on ``H = 1``.

    ``a1 = |p2|`` and ``a2 = |x2|`` are the first two turning values; ``x1``
    follows from ``(|p1| + |p2|)^2 + (|x1| + |x2|)^2 = 1``.
    """
    x1 = recurrence_step(a2, a1)
    if x1 <= 0:
        raise ValueError(f"inadmissible turning values ({a1}, {a2})")
    return PhasePoint([0.0, a1], [x1 + a2, a2 - x1])


def one_cycle_minimal() -> ClosedTrajectory:
    """The planar closed orbit whose turning values all equal ``1/sqrt(5)``.

    The value is the fixed point of the turning recurrence, found by root
    finding rather than hard-coded; the orbit is then simulated.
    """
    a = brentq(lambda v: recurrence_step(v, v) - v, 0.0, 1.0, xtol=1e-16)
    traj = simulate(planar_start(a, a), max_events=8)
    if not traj.closed or len(traj.events) != 8:
        raise InconsistencyError("one-cycle orbit did not close after 8 events")
    angles = angle_sequence(traj)
    expected = float(np.sum(angles.alphas) - np.sum(angles.betas))
    if abs(traj.period - expected) > 1e-9:
        raise InconsistencyError(f"period {traj.period!r} vs angle sum {expected!r}")
    return traj


def forth_and_back(n: int, index: int = 0, energy: float = 1.0) -> ClosedTrajectory:
    """Straight-line oscillation along ``q_index``, built in closed form.

    The orbit lives on a stratum (all other coordinates vanish) that the
    generic simulator rejects, so its four arcs are assembled directly:
    ``q_i = sqrt(E) sin 2t``, ``p_i = sqrt(E) cos 2t``.
    """
    if not 0 <= index < n:
        raise ValueError("index out of range")
    r = math.sqrt(energy)
    start = PhasePoint(np.eye(n)[index] * r, np.zeros(n))
    segments, events, t = [], [], 0.0
    corners = [(0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)]
    x = start
    for i, (pc, qc) in enumerate(corners):
        p = np.zeros(n)
        q = np.zeros(n)
        p[index], q[index] = pc * r, qc * r
        end = PhasePoint(p, q)
        if x.q[index] != 0:
            sig = int(np.sign(x.q[index]))
        else:
            sig = int(np.sign(end.q[index]))
        signs = [0] * n
        signs[index] = int(np.sign(x.p[index])) or int(-sig)
        seg = Segment(x, RegionSignature(tuple(signs), index, sig), math.pi / 4)
        t += math.pi / 4
        kind = "p-zero" if pc == 0 else "max-tie"
        segments.append(seg)
        events.append(TurningEvent(t, kind, (index,), end))
        x = end
    return ClosedTrajectory(start, energy, segments, events, period=math.pi)


# --------------------------------------------------------------------------
# turning angles


@dataclass(frozen=True)
class AngleSequence:
    """Turning angles: ``sin(alpha_i)`` is ``||q||_inf`` at p-zero events,
    ``sin(beta_i)`` the common value of the tied ``|q_j|`` at max-tie events,
    both on the normalised surface ``H = 1``.  The cyclic order is
    ``alpha_1, beta_1, alpha_2, beta_2, ...``.
    """

    alphas: np.ndarray
    betas: np.ndarray
    degenerate: bool = False

    def segment_pairs(self) -> list[tuple[float, float]]:
        """``(alpha, beta)`` of every arc in order; each arc lasts ``(alpha - beta)/2``."""
        out = []
        m = len(self.alphas)
        for i in range(m):
            out.append((self.alphas[i], self.betas[i]))
            out.append((self.alphas[(i + 1) % m], self.betas[i]))
        return out

    def cyclic_residuals(self) -> tuple[float, float]:
        """Max residuals of ``cos a_i + cos a_{i+1} = cos b_i`` and
        ``sin b_{i-1} + sin b_i = sin a_i`` (planar orbits)."""
        a, b = self.alphas, self.betas
        r1 = np.cos(a) + np.cos(np.roll(a, -1)) - np.cos(b)
        r2 = np.sin(np.roll(b, 1)) + np.sin(b) - np.sin(a)
        return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))

    def turning_values(self) -> np.ndarray:
        """Interleaved ``a_1, a_2, ... = cos alpha_1, sin beta_1, cos alpha_2, ...``."""
        out = np.empty(2 * len(self.alphas))
        out[0::2] = np.cos(self.alphas)
        out[1::2] = np.sin(self.betas)
        return out


def angle_sequence(traj: ClosedTrajectory, tol: float = 1e-9) -> AngleSequence:
    """Extract turning angles from a closed trajectory's events.

    Requires events that alternate p-zero / max-tie.  For planar orbits the
    surface relation ``(|p1| + |p2|)^2 + (|x1| + |x2|)^2 = 1`` is re-checked at
    every turning point.
    """
    if not traj.closed:
        raise ValueError("angle sequence needs a closed trajectory")
    if not traj.events or traj.events[0].kind not in ("p-zero", "max-tie"):
        return AngleSequence(np.array([]), np.array([]), degenerate=True)
    if traj.start.n >= 2 and all(ev.indices == traj.events[0].indices[:1] for ev in traj.events):
        return AngleSequence(np.array([]), np.array([]), degenerate=True)
    events = list(traj.events)
    kinds = [ev.kind for ev in events]
    if any(kinds[i] == kinds[(i + 1) % len(kinds)] for i in range(len(kinds))):
        raise ValueError("events do not alternate p-zero / max-tie")
    first = kinds.index("p-zero")
    events = events[first:] + events[:first]
    scale = math.sqrt(traj.energy)
    alphas, betas = [], []
    for ev in events:
        x = ev.point
        P = float(np.sum(np.abs(x.p))) / scale
        M = float(np.max(np.abs(x.q))) / scale
        if abs(P * P + M * M - 1.0) > tol:
            raise InconsistencyError(f"turning point off the surface: {P**2 + M**2!r}")
        if x.n == 2:
            x1, x2 = x.rotated()
            if abs((P) ** 2 + ((abs(x1) + abs(x2)) / scale) ** 2 - 1.0) > tol:
                raise InconsistencyError("planar surface relation violated")
        angle = math.asin(min(M, 1.0))
        (alphas if ev.kind == "p-zero" else betas).append(angle)
    return AngleSequence(np.array(alphas), np.array(betas))


@dataclass(frozen=True)
class LemmaReport:
    """Numeric content of the cycle lemma for one closed orbit."""

    S: float
    cycles: int
    two_S: float
    chord_bound: float
    mixed_sum: float
    half_count: float
    sum_identity_residuals: tuple[float, float]
    bound_holds: bool


def lemma_lower_bound(angles: AngleSequence, k: int, tol: float = 1e-9) -> LemmaReport:
    """Check ``2S >= sum cos a + 1/2 sum sin a >= N/2`` and ``S >= k``.

    ``S = sum(alpha) - sum(beta)`` is the action on ``H = 1`` and ``N`` the
    number of alphas (``4k`` for a ``k``-cycle planar orbit).  The chord
    bound replaces each arc's angle difference by the difference of cosines
    (odd arcs) or sines (even arcs).
    """
    a, b = np.asarray(angles.alphas), np.asarray(angles.betas)
    S = float(np.sum(a) - np.sum(b))
    chord = 0.0
    for i, (al, be) in enumerate(angles.segment_pairs()):
        chord += (math.cos(be) - math.cos(al)) if i % 2 == 0 else (math.sin(al) - math.sin(be))
    mixed = float(np.sum(np.cos(a)) + 0.5 * np.sum(np.sin(a)))
    half = len(a) / 2.0
    r_cos = abs(2 * np.sum(np.cos(a)) - np.sum(np.cos(b)))
    r_sin = abs(2 * np.sum(np.sin(b)) - np.sum(np.sin(a)))
    holds = (
        2 * S >= chord - tol
        and abs(chord - mixed) <= max(tol, 10 * max(r_cos, r_sin))
        and mixed >= half - tol
        and S >= k - tol
    )
    return LemmaReport(S, k, 2 * S, chord, mixed, half, (float(r_cos), float(r_sin)), bool(holds))


def minimal_action_case_analysis(max_cycles: int = 3) -> dict:
    """Re-run the numeric case analysis behind the planar minimal action.

    Centrally symmetric candidates have an odd number of cycles: one cycle
    gives the orbit of `one_cycle_minimal`, three or more cycles are bounded
    below by the cycle lemma, and the straight-line oscillation has action pi.
    """
    one = one_cycle_minimal()
    candidates = {
        "one_cycle": one.action,
        f"lemma_bound_{max_cycles}_cycles": float(max_cycles),
        "forth_and_back": forth_and_back(2).action,
    }
    best = min(candidates, key=candidates.get)
    return {"candidates": candidates, "minimum": candidates[best], "argmin": best}


def _turning_orbit(a: float, b: float, steps: int) -> tuple[float, float] | None:
    for _ in range(steps):
        if not (0.0 <= b <= 1.0):
            return None
        a, b = b, math.sqrt(1.0 - b * b) - a
    return (a, b) if 0.0 <= b <= 1.0 else None


def symmetric_planar_orbits(cycles: int, grid: int = 2000) -> list[ClosedTrajectory]:
    """Closed planar orbits with ``cycles`` cycles, found as reversible
    periodic points of the turning recurrence.

    The recurrence is reversed by swapping consecutive values, so symmetric
    periodic sequences start on ``a_1 = a_2`` or on ``a_2 = sqrt(1 - a_1^2)/2``.
    Each line is scanned for sign changes of the ``8 * cycles``-step residual,
    roots are refined and every candidate is confirmed by simulation.
    """
    steps = 8 * cycles
    lines = {
        "diagonal": lambda x: (x, x),
        "mirror": lambda x: (x, math.sqrt(1.0 - x * x) / 2.0),
    }
    fixed = 1.0 / math.sqrt(5.0)
    found: list[ClosedTrajectory] = []
    for make in lines.values():

        def residual(x, make=make):
            a, b = make(x)
            out = _turning_orbit(a, b, steps)
            return np.nan if out is None else out[1] - b

        xs = np.linspace(1e-3, 1.0 - 1e-3, grid)
        vals = np.array([residual(x) for x in xs])
        for i in range(grid - 1):
            lo, hi = vals[i], vals[i + 1]
            if not (np.isfinite(lo) and np.isfinite(hi)) or np.sign(lo) == np.sign(hi):
                continue
            if abs(vals[i] - vals[i + 1]) > 0.5:
                continue
            x = brentq(residual, xs[i], xs[i + 1], xtol=1e-16)
            a, b = make(x)
            if abs(a - fixed) < 1e-6 and abs(b - fixed) < 1e-6:
                continue
            try:
                traj = simulate(planar_start(a, b), max_events=steps)
            except (ValueError, RuntimeError):
                continue
            if traj.closed and len(traj.events) == steps:
                if all(abs(traj.period - other.period) > 1e-9 for other in found):
                    found.append(traj)
    return found
