"""Linear Hamiltonian dynamics and the two ellipsoid-sandwich theorems.

Conventions: phase vectors are ``x = (p, q)``, ``J = [[0, -I], [I, 0]]``
and ``H(x) = x . A x`` generates ``x' = J grad H = 2 J A x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import brentq, linprog

from .bodies import (
    ConvexHamiltonian,
    Volume,
    monte_carlo_volume,
    quadratic_hamiltonian,
    sandwich_constant,
    split_hamiltonian,
    tightest_quadratic_bound,
)
from .errors import NonsmoothPointError, NumericFailure


@dataclass(frozen=True)
class SymplecticStructure:
    """The standard structure ``sum dp_i ^ dq_i`` on R^{2n}."""

    n: int

    @property
    def J(self) -> np.ndarray:
        n = self.n
        J = np.zeros((2 * n, 2 * n))
        J[:n, n:] = -np.eye(n)
        J[n:, :n] = np.eye(n)
        return J

    def is_symplectic(self, S, tol: float = 1e-10) -> bool:
        S = np.asarray(S, dtype=float)
        return bool(np.allclose(S.T @ self.J @ S, self.J, atol=tol))


@dataclass(frozen=True)
class QuadraticForm:
    """A symmetric positive-definite matrix ``A`` read as ``H(x) = x . A x``."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
            raise ValueError(f"need a square matrix of even size, got shape {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("matrix is not symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise ValueError("matrix is not positive definite") from exc
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.dim // 2

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.matrix, x)

    def flow_matrix(self) -> np.ndarray:
        return 2.0 * SymplecticStructure(self.n).J @ self.matrix

    def hamiltonian(self) -> ConvexHamiltonian:
        return quadratic_hamiltonian(self.matrix)

    @classmethod
    def block(cls, P, Q) -> "QuadraticForm":
        """``x . A x = p . P p + q . Q q``."""
        P, Q = np.atleast_2d(P), np.atleast_2d(Q)
        n = P.shape[0]
        A = np.zeros((2 * n, 2 * n))
        A[:n, :n] = P
        A[n:, n:] = Q
        return cls(A)


def _as_form(A) -> QuadraticForm:
    return A if isinstance(A, QuadraticForm) else QuadraticForm(A)


def symplectic_frequencies(A) -> np.ndarray:
    """The ``n`` frequencies of ``x' = 2 J A x``, ascending, with multiplicity.

    Raises ``ValueError`` if any eigenvalue has a real part above
    ``1e-8 * ||2 J A||``.
    """
    A = _as_form(A)
    M = A.flow_matrix()
    ev = np.linalg.eigvals(M)
    if np.max(np.abs(ev.real)) > 1e-8 * np.linalg.norm(M, 2):
        raise ValueError(f"flow spectrum is not imaginary: {ev}")
    w = np.sort(ev.imag[ev.imag > 0])
    if w.size != A.n:
        # repeated eigenvalues can leave tiny imaginary parts on the wrong side
        w = np.sort(np.abs(ev.imag))[1::2]
    return w


def ellipsoid_capacity(A, level: float = 1.0) -> float:
    """Smallest action on ``{x . A x = level}``: ``level * 2 pi / max(omega)``."""
    if level <= 0:
        raise ValueError("level must be positive")
    return level * 2.0 * math.pi / float(symplectic_frequencies(A)[-1])


def ellipsoid_volume(A, level: float = 1.0) -> float:
    """``vol{x . A x <= level} = pi^n level^n / (n! sqrt(det A))``."""
    A = _as_form(A)
    n = A.n
    sign, logdet = np.linalg.slogdet(A.matrix)
    return math.exp(n * math.log(math.pi * level) - math.lgamma(n + 1) - 0.5 * logdet)


@dataclass(frozen=True)
class ReturnTime:
    """Measured first return of the linear flow on the fastest eigenplane."""

    time: float
    closure_error: float
    start: np.ndarray


def flow_return_time(A, level: float = 1.0, horizon_periods: float = 1.25) -> ReturnTime:
    """First return time of ``x' = 2 J A x`` from a point of the ``omega_max`` plane.

    The flow is evaluated by the matrix exponential; the return is located as
    the first sign change from - to + of ``<x'(t), x(t) - x0>`` whose
    distance to ``x0`` is small, refined by ``brentq``.  The search window
    runs to ``horizon_periods`` times the longest period so that a wrong
    eigenplane would show up as a wrong time, not a missing one.
    """
    A = _as_form(A)
    M = A.flow_matrix()
    ev, vecs = np.linalg.eig(M)
    i = int(np.argmax(ev.imag))
    x0 = vecs[:, i].real
    if np.linalg.norm(x0) < 1e-8:
        x0 = vecs[:, i].imag
    x0 = x0 * math.sqrt(level / float(A(x0)))
    omega = symplectic_frequencies(A)
    horizon = horizon_periods * 2 * math.pi / omega[0]
    scale = float(np.linalg.norm(x0))

    def state(t):
        return expm(M * t) @ x0

    def g(t):
        x = state(t)
        return float(np.dot(M @ x, x - x0))

    ts = np.linspace(0.0, horizon, 4097)[1:]
    gs = np.array([g(t) for t in ts])
    for k in range(len(ts) - 1):
        if gs[k] < 0 <= gs[k + 1]:
            t = brentq(g, ts[k], ts[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            err = float(np.max(np.abs(state(t) - x0)))
            if err < 1e-3 * scale:
                return ReturnTime(t, err, x0)
    raise NumericFailure("no return within the horizon", {"horizon": horizon})


# --------------------------------------------------------------------------
# theorem checks


def _kink_size(f: ConvexHamiltonian, x: np.ndarray) -> float:
    """Largest gap between one-sided coordinate derivatives of ``f`` at ``x``."""
    h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
    f0 = float(f(x))
    gap = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fwd = (float(f(x + e)) - f0) / h
        bwd = (f0 - float(f(x - e))) / h
        gap = max(gap, abs(fwd - bwd))
    return gap


def _boundary_points(A: np.ndarray, level: float, count: int, seed: int) -> np.ndarray:
    """Points of ``{x . A x = level}`` from Gaussian directions (gauge-normalised)."""
    g = np.random.Generator(np.random.Philox(key=seed)).standard_normal((count, A.shape[0]))
    return g * np.sqrt(level / np.einsum("ij,jk,ik->i", g, A, g))[:, None]


def _close_orbit(H: ConvexHamiltonian, x0: np.ndarray, period: float) -> float:
    n = H.dimension // 2

    def rhs(_, x):
        g = H.gradient(x)
        return np.concatenate([-g[n:], g[:n]])

    # finite-difference gradients are only good to ~1e-10, so do not ask for more
    rtol = 1e-13 if H.grad is not None else 1e-9
    sol = solve_ivp(rhs, (0.0, period), x0, method="DOP853", rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise NumericFailure("orbit integration failed", {"message": sol.message})
    return float(np.max(np.abs(sol.y[:, -1] - x0)))


@dataclass
class EvenTheoremReport:
    """Checks of the inscribed-ellipsoid argument for ``|p|^2/2 + V(q) <= 1``."""

    alpha: float
    q0: np.ndarray
    capacity: float
    volume_lower_bound: float
    volume: Volume
    containment_ok: bool
    gradient_ok: bool
    nonsmooth_maximizer: bool
    closure_error: float
    shared_characteristic_ok: bool
    viterbo_ok: bool
    witness: np.ndarray | None = None

    @property
    def ratio(self) -> float:
        n = self.q0.size
        return self.volume.value * math.factorial(n) / self.capacity**n

    @property
    def ok(self) -> bool:
        return self.containment_ok and self.shared_characteristic_ok and self.viterbo_ok


def verify_theorem_even_2hom(
    V: ConvexHamiltonian,
    *,
    boundary_samples: int = 10**5,
    mc_samples: int = 10**6,
    seed: int = 0,
    margin: float = 1e-9,
    closure_tol: float = 1e-8,
) -> EvenTheoremReport:
    """Run the inscribed-ellipsoid argument for ``H = |p|^2/2 + V(q)`` at level 1.

    With ``alpha = max V(u)`` over unit ``u`` attained at ``q0``, the
    ellipsoid ``X' = {|p|^2/2 + alpha |q|^2 <= 1}`` must lie in ``X`` and
    share with it the closed orbit in the plane spanned by ``(0, q0)`` and
    ``(q0, 0)``.  Each step is checked numerically; failures are reported
    with a witness rather than raised.
    """
    n = V.dimension
    alpha, q0 = tightest_quadratic_bound(V)
    q0 = q0 / np.linalg.norm(q0)
    T = quadratic_hamiltonian(0.5 * np.eye(n), "|p|^2/2")
    H = split_hamiltonian(T, V)
    Aprime = np.diag(np.r_[np.full(n, 0.5), np.full(n, alpha)])

    pts = _boundary_points(Aprime, 1.0, boundary_samples, seed)
    excess = H(pts) - 1.0
    worst = int(np.argmax(excess))
    containment_ok = bool(excess[worst] <= margin)
    witness = None if containment_ok else pts[worst]

    # derivatives of H and H' on the critical plane
    nonsmooth = False
    gradient_ok = True
    for theta in np.linspace(0.0, 2 * np.pi, 17)[:-1]:
        q = math.cos(theta) / math.sqrt(alpha) * q0
        if np.linalg.norm(q) < 1e-12:
            continue
        if _kink_size(V, q) > 1e-3 * (1.0 + 2 * alpha * np.linalg.norm(q)):
            nonsmooth = True
            gradient_ok = False
            witness = witness if witness is not None else np.r_[math.sqrt(2) * math.sin(theta) * q0, q]
            continue
        try:
            gv = V.gradient(q)
        except NonsmoothPointError:
            nonsmooth = True
            gradient_ok = False
            continue
        if np.max(np.abs(gv - 2 * alpha * q)) > 1e-6 * (1.0 + np.max(np.abs(gv))):
            gradient_ok = False
            if witness is None:
                witness = np.r_[math.sqrt(2) * math.sin(theta) * q0, q]

    x0 = np.r_[np.zeros(n), q0 / math.sqrt(alpha)]
    period = 2 * math.pi / math.sqrt(2 * alpha)
    try:
        closure = _close_orbit(H, x0, period)
    except NonsmoothPointError:
        closure = math.inf
    shared = gradient_ok and closure <= closure_tol

    capacity = ellipsoid_capacity(Aprime, 1.0)
    lower = ellipsoid_volume(Aprime, 1.0)
    vol = monte_carlo_volume(H, 1.0, mc_samples, seed)
    viterbo_ok = vol.value >= capacity**n / math.factorial(n) - 3 * vol.std_error
    return EvenTheoremReport(
        alpha, q0, capacity, lower, vol, containment_ok, gradient_ok, nonsmooth,
        closure, shared, bool(viterbo_ok), witness,
    )


def find_sandwich_form(directions: np.ndarray, upper: np.ndarray, lower: np.ndarray) -> np.ndarray | None:
    """A symmetric ``B`` with ``lower <= u . B u <= upper`` on every direction, or None.

    The constraints are linear in the entries of ``B``; the LP maximises a
    common fraction ``s`` of the gap ``upper - lower`` kept free on both
    sides, so the answer sits in the middle of the feasible band.
    """
    U = np.asarray(directions, dtype=float)
    n = U.shape[1]
    iu = np.triu_indices(n)
    # u . B u = sum_{i<=j} c_ij B_ij u_i u_j with c = 1 on the diagonal, 2 off it
    coef = np.where(iu[0] == iu[1], 1.0, 2.0)
    F = U[:, iu[0]] * U[:, iu[1]] * coef
    gap = np.maximum(upper - lower, 0.0)
    m = F.shape[1]
    # variables (b, s); maximise s
    A_ub = np.vstack([np.c_[F, gap], np.c_[-F, gap]])
    b_ub = np.r_[upper, -lower]
    res = linprog(
        np.r_[np.zeros(m), -1.0],
        A_ub=A_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * m + [(0.0, 0.5)],
        method="highs",
    )
    if res.status != 0:
        return None
    B = np.zeros((n, n))
    B[iu] = res.x[:m]
    B = B + B.T - np.diag(np.diag(B))
    try:
        np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        return None
    return B


@dataclass
class SandwichTheoremReport:
    """Outcome of the ``T^L >= Q >= C V`` argument for ``{T + V <= E}``."""

    C: float
    Q: np.ndarray | None
    holds: bool
    capacity: float | None
    volume: Volume | None
    containment_ok: bool = False
    characteristic_ok: bool = False
    viterbo_ok: bool = False
    q0: np.ndarray | None = None
    message: str = ""

    @property
    def ratio(self) -> float | None:
        if self.volume is None or self.capacity is None:
            return None
        n = self.q0.size
        return self.volume.value * math.factorial(n) / self.capacity**n


def verify_theorem_sandwich(
    T: ConvexHamiltonian,
    V: ConvexHamiltonian,
    Q=None,
    *,
    energy: float = 1.0,
    directions: int = 10_000,
    boundary_samples: int = 10**5,
    mc_samples: int = 10**6,
    seed: int = 0,
    tol: float = 1e-9,
) -> SandwichTheoremReport:
    """Check the sandwich argument for ``X = {T(p) + V(q) <= energy}``.

    ``C`` is the largest constant with ``T^L >= C V``.  Without a
    caller-supplied ``Q`` (a symmetric matrix, ``Q(q) = q . Q q``) an LP over
    all symmetric matrices looks for one between ``T^L`` and ``C V`` on the
    sampled directions; finding none gives ``holds = False``, which says
    the hypothesis fails, not the conclusion.

    With ``Q = L^{-T} L^{-1} / 2`` the symplectic map
    ``(p, q) = (a L^{-T} p~, L q~ / a)``, ``a^4 = 1/C``, turns ``X`` into
    ``{T~ + V~ <= energy sqrt(C)}`` with ``T~ <= |p~|^2/2`` and
    ``V~ <= |q~|^2/2``, so the capacity is ``2 pi energy sqrt(C)``.  The
    inscribed ball and the shared circle are checked in those coordinates.
    """
    n = T.dimension
    C, q0, U, TL = sandwich_constant(T, V, directions)
    VU = V(U)
    if Q is None:
        B = find_sandwich_form(U, TL, C * VU)
        if B is None:
            return SandwichTheoremReport(C, None, False, None, None, q0=q0, message="no quadratic form fits between T^L and C V")
    else:
        B = np.array(Q, dtype=float)
        QU = np.einsum("ij,jk,ik->i", U, B, U)
        scale = np.maximum(1.0, np.abs(TL))
        if np.min((TL - QU) / scale) < -tol or np.min((QU - C * VU) / scale) < -tol:
            return SandwichTheoremReport(C, B, False, None, None, q0=q0, message="supplied Q is not between T^L and C V")

    # normalising coordinates
    R = np.linalg.cholesky(2.0 * B)  # 2B = R R^T, so Q(L q~) = |q~|^2/2 for L = R^{-T}
    L = np.linalg.inv(R.T)
    a = C ** -0.25
    Phi = np.zeros((2 * n, 2 * n))
    Phi[:n, :n] = a * R  # L^{-T} = R
    Phi[n:, n:] = L / a
    level = energy * math.sqrt(C)
    H = split_hamiltonian(T, V)

    def Hn(y):
        return H(np.asarray(y) @ Phi.T)

    ball = _boundary_points(np.eye(2 * n) / 2, level, boundary_samples, seed)
    excess = Hn(ball) / level - 1.0
    containment_ok = bool(np.max(excess) <= tol)

    qt = np.linalg.solve(L, q0)
    qt /= np.linalg.norm(qt)
    r = math.sqrt(2 * level)
    angles = np.linspace(0.0, 2 * np.pi, 65)[:-1]
    circle = r * (np.cos(angles)[:, None] * np.r_[np.zeros(n), qt] + np.sin(angles)[:, None] * np.r_[qt, np.zeros(n)])
    on_surface = float(np.max(np.abs(Hn(circle) / level - 1.0)))
    Hs = ConvexHamiltonian(Hn, 2 * n, 2.0, True, lambda y: Phi.T @ H.gradient(Phi @ y))
    grad_err = 0.0
    for y in circle[::4]:
        grad_err = max(grad_err, float(np.max(np.abs(Hs.gradient(y) - y))) / r)
    characteristic_ok = on_surface <= 1e-6 and grad_err <= 1e-5
    # the ball's circle has period 2 pi under |y|^2/2
    if characteristic_ok:
        characteristic_ok = _close_orbit(Hs, circle[0], 2 * math.pi) <= 1e-6 * r

    capacity = 2 * math.pi * level
    vol = monte_carlo_volume(H, energy, mc_samples, seed)
    viterbo_ok = vol.value >= capacity**n / math.factorial(n) - 3 * vol.std_error
    return SandwichTheoremReport(
        C, B, containment_ok and characteristic_ok, capacity, vol,
        containment_ok, characteristic_ok, bool(viterbo_ok), q0,
        "" if containment_ok and characteristic_ok else "sandwich found but the inscribed-ball checks failed",
    )


def random_positive_form(n: int, rng: np.random.Generator, spread: float = 3.0) -> np.ndarray:
    """A random positive-definite ``2n x 2n`` matrix with eigenvalues in ``[1/spread, spread]``."""
    Qm, _ = np.linalg.qr(rng.standard_normal((2 * n, 2 * n)))
    lam = np.exp(rng.uniform(-math.log(spread), math.log(spread), 2 * n))
    A = Qm @ np.diag(lam) @ Qm.T
    return (A + A.T) / 2


def random_symplectic(n: int, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """``expm(J S)`` for a random symmetric ``S``: a symplectic matrix."""
    S = rng.standard_normal((2 * n, 2 * n)) * scale
    S = (S + S.T) / 2
    return expm(SymplecticStructure(n).J @ S)


def legendre_quadratic(B) -> np.ndarray:
    """Matrix of the Legendre transform of ``q . B q``: ``B^{-1} / 4``."""
    return np.linalg.inv(np.asarray(B, dtype=float)) / 4.0
