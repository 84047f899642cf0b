"""Hamiltonians, norms and the volumes of their sublevel sets.

Everything here is vectorised over the last axis: a Hamiltonian on R^d
evaluates arrays of shape ``(..., d)`` to shape ``(...)``.  Phase-space
vectors are ordered ``(p_1, ..., p_n, q_1, ..., q_n)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import NonsmoothPointError, NumericFailure
from .sphere import maximize_on_sphere, sphere_points

_KIND_ALIASES = {
    "l1": "l1",
    "ell-1": "l1",
    "ell1": "l1",
    "l2": "l2",
    "ell-2": "l2",
    "ell2": "l2",
    "euclidean": "l2",
    "linf": "linf",
    "l-inf": "linf",
    "ell-infinity": "linf",
    "ell-inf": "linf",
    "max": "linf",
    "weighted-l2": "weighted-l2",
    "weighted-ell-2": "weighted-l2",
    "custom": "custom",
}


class Volume(NamedTuple):
    """A volume with its provenance; ``std_error`` is 0 for closed forms."""

    value: float
    std_error: float = 0.0
    method: str = "exact"

    def __float__(self) -> float:
        return float(self.value)


# --------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormDescriptor:
    """A symmetric norm on R^dimension.

    ``weighted-l2`` is ``sqrt(sum w_i x_i^2)``; ``custom`` wraps a vectorised
    evaluator (its dual and ball volume are computed numerically).
    """

    kind: str
    dimension: int
    weights: tuple[float, ...] | None = None
    evaluator: Callable | None = None

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if int(self.dimension) < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "dimension", int(self.dimension))
        if kind == "weighted-l2":
            if self.weights is None or len(self.weights) != self.dimension:
                raise ValueError("weighted-l2 needs one weight per coordinate")
            w = tuple(float(v) for v in self.weights)
            if min(w) <= 0:
                raise ValueError("weights must be positive")
            object.__setattr__(self, "weights", w)
        if kind == "custom" and self.evaluator is None:
            raise ValueError("custom norm needs an evaluator")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "l1":
            return np.sum(np.abs(x), axis=-1)
        if self.kind == "l2":
            return np.sqrt(np.sum(x * x, axis=-1))
        if self.kind == "linf":
            return np.max(np.abs(x), axis=-1)
        if self.kind == "weighted-l2":
            return np.sqrt(np.sum(np.asarray(self.weights) * x * x, axis=-1))
        return np.asarray(self.evaluator(x), dtype=float)

    def gradient(self, x) -> np.ndarray:
        """Gradient at a single nonzero point; `NonsmoothPointError` on kinks."""
        x = np.asarray(x, dtype=float)
        nx = float(self(x))
        if nx == 0.0:
            raise NonsmoothPointError("norm is not differentiable at the origin")
        if self.kind == "l1":
            if np.any(x == 0.0):
                raise NonsmoothPointError(f"l1 norm has a kink at {x} (zero coordinate)")
            return np.sign(x)
        if self.kind == "linf":
            a = np.abs(x)
            top = np.flatnonzero(a >= a.max() * (1 - 1e-12))
            if top.size > 1:
                raise NonsmoothPointError(f"l_inf norm has a kink at {x} (tie {tuple(top)})")
            g = np.zeros_like(x)
            g[top[0]] = np.sign(x[top[0]])
            return g
        if self.kind == "l2":
            return x / nx
        if self.kind == "weighted-l2":
            return np.asarray(self.weights) * x / nx
        return _central_difference(self, x)

    def dual(self) -> "NormDescriptor":
        """The dual norm ``||p||_* = max <p, x> / ||x||``."""
        if self.kind == "l1":
            return NormDescriptor("linf", self.dimension)
        if self.kind == "linf":
            return NormDescriptor("l1", self.dimension)
        if self.kind == "l2":
            return self
        if self.kind == "weighted-l2":
            return NormDescriptor("weighted-l2", self.dimension, tuple(1.0 / w for w in self.weights))

        def support(p, base=self):
            p = np.asarray(p, dtype=float)
            flat = p.reshape(-1, base.dimension)
            vals, _ = maximize_on_sphere(
                lambda U: np.einsum("bd,bmd->bm", flat, U) / base(U), base.dimension, flat.shape[0]
            )
            return np.maximum(vals, 0.0).reshape(p.shape[:-1])

        return NormDescriptor("custom", self.dimension, evaluator=support)

    def axis_extent(self) -> np.ndarray:
        """``max x_i`` over the unit ball, per coordinate (= dual norm of ``e_i``)."""
        if self.kind in ("l1", "l2", "linf"):
            return np.ones(self.dimension)
        if self.kind == "weighted-l2":
            return 1.0 / np.sqrt(np.asarray(self.weights))
        return self.dual()(np.eye(self.dimension))


def norm_ball_volume(norm: NormDescriptor, m: int | None = None, *, samples: int = 10**6, seed: int = 0) -> Volume:
    """Volume of the unit ball ``{||x|| <= 1}`` in R^m.

    Closed forms for ``l1`` (``2^m/m!``), ``linf`` (``2^m``), ``l2``
    (``pi^{m/2}/Gamma(m/2+1)``) and ``weighted-l2`` (scaled Euclidean ball);
    hit-or-miss Monte Carlo for custom norms.
    """
    m = norm.dimension if m is None else int(m)
    if m < 1:
        raise ValueError("dimension must be positive")
    if m != norm.dimension:
        raise ValueError(f"norm lives on R^{norm.dimension}, not R^{m}")
    if norm.kind == "l1":
        return Volume(2.0**m / math.factorial(m))
    if norm.kind == "linf":
        return Volume(2.0**m)
    euclid = math.pi ** (m / 2) / math.gamma(m / 2 + 1)
    if norm.kind == "l2":
        return Volume(euclid)
    if norm.kind == "weighted-l2":
        return Volume(euclid / math.sqrt(math.prod(norm.weights)))
    return monte_carlo_volume(norm_power(norm, 1.0), 1.0, samples, seed)


def gamma_binomial(n: float, k: float) -> float:
    """``Gamma(n+1) / (Gamma(k+1) Gamma(n-k+1))`` for real ``n >= k >= 0``."""
    if n < 0 or k < 0:
        raise ValueError("gamma_binomial needs non-negative arguments")
    if k > n:
        raise ValueError("gamma_binomial needs k <= n")
    if n < 170:
        return math.gamma(n + 1) / (math.gamma(k + 1) * math.gamma(n - k + 1))
    return math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))


@dataclass(frozen=True)
class L2SumSpec:
    """The body ``{||p||_*^2 + ||q||^2 <= 1}`` built from ``norm`` (on q) and its dual (on p)."""

    norm: NormDescriptor
    dual_norm: NormDescriptor

    def __post_init__(self):
        if self.norm.dimension != self.dual_norm.dimension:
            raise ValueError("norm and dual norm must live on the same R^n")

    @classmethod
    def from_norm(cls, norm: NormDescriptor) -> "L2SumSpec":
        return cls(norm, norm.dual())

    @property
    def n(self) -> int:
        return self.norm.dimension

    def duality_gap(self, count: int = 64, seed: int = 0) -> float:
        """``max |sup_q <p, q> / (||p||_* ||q||) - 1|`` over ``count`` directions ``p``.

        The supremum over ``q`` runs through `maximize_on_sphere`, so the gap
        is at rounding level in the plane and for smooth norms; polyhedral
        norms in three or more dimensions resolve it only to about 1e-3.
        """
        P = sphere_points(self.n, count, seed)
        vals, _ = maximize_on_sphere(
            lambda U: np.einsum("bd,bmd->bm", P, U) / self.norm(U), self.n, P.shape[0]
        )
        return float(np.max(np.abs(vals / self.dual_norm(P) - 1.0)))


def l2_sum_volume(spec: L2SumSpec) -> Volume:
    """``vol(K_*) vol(K) / binom(n, n/2)`` with the Gamma-extended binomial."""
    n = spec.n
    vk = norm_ball_volume(spec.norm, n)
    vd = norm_ball_volume(spec.dual_norm, n)
    value = vk.value * vd.value / gamma_binomial(n, n / 2)
    if vk.method == "exact" and vd.method == "exact":
        return Volume(value)
    rel = math.hypot(vk.std_error / vk.value, vd.std_error / vd.value)
    return Volume(value, value * rel, "monte-carlo")


# --------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class ConvexHamiltonian:
    """A proper convex function on R^dimension with optional analytic gradient.

    ``box(level)`` (optional) returns per-axis half-widths of a box known to
    contain ``{H <= level}``; ``box_exact`` says whether that box is tight
    enough that no enlargement check is needed.
    """

    evaluate: Callable
    dimension: int
    degree: float = 2.0
    is_even: bool = True
    grad: Callable | None = None
    label: str = ""
    box: Callable | None = None

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float))

    def gradient(self, x) -> np.ndarray:
        """Analytic gradient where provided, central differences otherwise."""
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return _central_difference(self, x)

    def pullback(self, M, label: str | None = None) -> "ConvexHamiltonian":
        """``x -> H(M x)`` for an invertible matrix ``M``."""
        M = np.asarray(M, dtype=float)
        Minv = np.linalg.inv(M)
        base = self

        def box(level):
            w = base.box(level) if base.box is not None else support_widths(base, level)
            # |x_i| = |(M^{-1} y)_i| <= sum_j |M^{-1}_ij| w_j
            return np.abs(Minv) @ w

        return ConvexHamiltonian(
            lambda x: base(x @ M.T),
            self.dimension,
            self.degree,
            self.is_even,
            (lambda x: M.T @ base.gradient(M @ x)),
            label or f"{self.label}∘M",
            box,
        )

    def scaled(self, c: float) -> "ConvexHamiltonian":
        base = self
        c = float(c)
        return ConvexHamiltonian(
            lambda x: c * base(x),
            self.dimension,
            self.degree,
            self.is_even,
            lambda x: c * base.gradient(x),
            f"{c:g}*{self.label}",
            None if base.box is None else (lambda level: base.box(level / c)),
        )


def _central_difference(f, x: np.ndarray) -> np.ndarray:
    h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (float(f(x + e)) - float(f(x - e))) / (2 * h)
    return g


def quadratic_hamiltonian(A, label: str = "quadratic") -> ConvexHamiltonian:
    """``H(x) = x . A x`` for a symmetric positive-definite ``A``."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    np.linalg.cholesky(A)
    Ainv_diag = np.diag(np.linalg.inv(A)).copy()
    return ConvexHamiltonian(
        lambda x: np.einsum("...i,ij,...j->...", x, A, x),
        A.shape[0],
        2.0,
        True,
        lambda x: 2.0 * A @ x,
        label,
        lambda level: np.sqrt(level * Ainv_diag),
    )


def norm_power(norm: NormDescriptor, power: float = 2.0) -> ConvexHamiltonian:
    """``x -> ||x||^power``."""

    def grad(x):
        nx = float(norm(x))
        if nx == 0.0:
            if power > 1:
                return np.zeros_like(x)
            raise NonsmoothPointError("norm is not differentiable at the origin")
        return power * nx ** (power - 1) * norm.gradient(x)

    return ConvexHamiltonian(
        lambda x: norm(x) ** power,
        norm.dimension,
        float(power),
        True,
        grad,
        f"||.||_{norm.kind}^{power:g}",
        lambda level: level ** (1.0 / power) * norm.axis_extent(),
    )


def split_hamiltonian(T: ConvexHamiltonian, V: ConvexHamiltonian, label: str | None = None) -> ConvexHamiltonian:
    """``H(p, q) = T(p) + V(q)`` on R^{2n}."""
    if T.dimension != V.dimension:
        raise ValueError("T and V must act on the same R^n")
    n = T.dimension

    def box(level):
        wt = T.box(level) if T.box is not None else support_widths(T, level)
        wv = V.box(level) if V.box is not None else support_widths(V, level)
        return np.concatenate([wt, wv])

    return ConvexHamiltonian(
        lambda x: T(x[..., :n]) + V(x[..., n:]),
        2 * n,
        T.degree if T.degree == V.degree else 0.0,
        T.is_even and V.is_even,
        lambda x: np.concatenate([T.gradient(x[:n]), V.gradient(x[n:])]),
        label or f"{T.label}(p) + {V.label}(q)",
        box,
    )


def l2_sum_hamiltonian(spec: L2SumSpec) -> ConvexHamiltonian:
    """``||p||_*^2 + ||q||^2``."""
    return split_hamiltonian(
        norm_power(spec.dual_norm),
        norm_power(spec.norm),
        label=f"||p||_{spec.dual_norm.kind}^2 + ||q||_{spec.norm.kind}^2",
    )


def direct_sum_hamiltonian(parts: list[ConvexHamiltonian], label: str | None = None) -> ConvexHamiltonian:
    """``H(p, q) = sum_i H_i(p_i, q_i)`` with each ``H_i`` on the plane ``(p_i, q_i)``."""
    n = len(parts)
    if n == 0 or any(h.dimension != 2 for h in parts):
        raise ValueError("direct sum needs planar summands")

    def evaluate(x):
        total = 0.0
        for i, h in enumerate(parts):
            total = total + h(np.stack([x[..., i], x[..., n + i]], axis=-1))
        return total

    def grad(x):
        g = np.empty_like(x)
        for i, h in enumerate(parts):
            gi = h.gradient(np.array([x[i], x[n + i]]))
            g[i], g[n + i] = gi
        return g

    def box(level):
        w = np.empty(2 * n)
        for i, h in enumerate(parts):
            wi = h.box(level) if h.box is not None else support_widths(h, level)
            w[i], w[n + i] = wi
        return w

    degrees = {h.degree for h in parts}
    return ConvexHamiltonian(
        evaluate,
        2 * n,
        degrees.pop() if len(degrees) == 1 else 0.0,
        all(h.is_even for h in parts),
        grad,
        label or " + ".join(h.label for h in parts),
        box,
    )


def support_widths(h: ConvexHamiltonian, level: float, safety: float = 1.05) -> np.ndarray:
    """Per-axis half-widths of ``{h <= level}`` for a homogeneous ``h``.

    Along the ray ``t u`` the boundary sits at ``t = (level/h(u))^{1/degree}``,
    so the extent in axis ``i`` is the maximum of ``u_i (level/h(u))^{1/degree}``
    over unit ``u``.  The direction search approaches the maximum from below,
    hence the ``safety`` factor.
    """
    if h.degree <= 0:
        raise ValueError(f"{h.label or 'Hamiltonian'} is not homogeneous; supply a box")
    d = h.dimension
    m = h.degree
    axes = np.eye(d)

    def fun(U):
        return np.einsum("bd,bmd->bm", axes, U) * (level / h(U)) ** (1.0 / m)

    vals, _ = maximize_on_sphere(fun, d, d)
    return safety * vals


# --------------------------------------------------------------------------
# Monte Carlo


_CHUNK = 1 << 16


def _chunk_hits(h, level, widths, seed, index, size):
    gen = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, index, 0]))
    x = (2.0 * gen.random((size, widths.size)) - 1.0) * widths
    inside = h(x) <= level
    reach = float(np.max(np.abs(x[inside]) / widths)) if np.any(inside) else 0.0
    return int(np.count_nonzero(inside)), reach


def monte_carlo_volume(
    h: ConvexHamiltonian,
    level: float,
    samples: int,
    seed: int = 0,
    *,
    workers: int = 1,
) -> Volume:
    """Hit-or-miss estimate of ``vol{h <= level}`` with its standard error.

    Samples are drawn in fixed chunks of 2^16 points, chunk ``i`` from a
    Philox stream keyed by ``seed`` at counter ``i``, so the result depends
    only on ``(seed, samples)`` and not on ``workers``.  When the bounding
    box comes from the direction search rather than a closed form, a hit
    within 1% of the box face triggers a restart with a larger box.
    """
    samples = int(samples)
    if samples <= 0:
        raise ValueError("samples must be positive")
    if level <= 0:
        raise ValueError("level must be positive")
    exact_box = h.box is not None
    widths = np.asarray(h.box(level) if exact_box else support_widths(h, level), dtype=float)
    for _ in range(8):
        sizes = [min(_CHUNK, samples - s) for s in range(0, samples, _CHUNK)]
        jobs = [(h, level, widths, seed, i, size) for i, size in enumerate(sizes)]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda a: _chunk_hits(*a), jobs))
        else:
            results = [_chunk_hits(*a) for a in jobs]
        hits = sum(r[0] for r in results)
        reach = max(r[1] for r in results)
        if exact_box or reach < 0.99:
            break
        widths = widths * 1.25
    else:
        raise NumericFailure("bounding box kept growing", {"widths": widths.tolist()})
    box = float(np.prod(2.0 * widths))
    frac = hits / samples
    return Volume(box * frac, box * math.sqrt(frac * (1.0 - frac) / samples), "monte-carlo")


# --------------------------------------------------------------------------
# Legendre transforms and quadratic bounds


def legendre_2hom(f: ConvexHamiltonian, p) -> np.ndarray | float:
    """Legendre transform ``sup_q <p, q> - f(q)`` of a 2-homogeneous ``f``.

    On the ray ``q = t u`` the supremum over ``t >= 0`` is
    ``max(<p, u>, 0)^2 / (4 f(u))``; the remaining maximum over unit ``u``
    runs through `maximize_on_sphere`.  ``p`` may be a batch ``(..., d)``.
    Exact to ~1e-12 for smooth ``f`` and planar ``f``; piecewise-smooth
    ``f`` in three or more dimensions converge to roughly 1e-3 relative.
    """
    if f.degree != 2:
        raise ValueError("legendre_2hom needs a 2-homogeneous function")
    p = np.asarray(p, dtype=float)
    flat = p.reshape(-1, f.dimension)
    vals, _ = maximize_on_sphere(
        lambda U: np.maximum(np.einsum("bd,bmd->bm", flat, U), 0.0) ** 2 / (4.0 * f(U)),
        f.dimension,
        flat.shape[0],
    )
    out = vals.reshape(p.shape[:-1])
    return float(out) if out.ndim == 0 else out


def legendre_transform(f: ConvexHamiltonian) -> ConvexHamiltonian:
    """`legendre_2hom` wrapped as a Hamiltonian (gradient by differences)."""
    return ConvexHamiltonian(
        lambda p: legendre_2hom(f, p),
        f.dimension,
        2.0,
        f.is_even,
        None,
        f"({f.label})^L",
    )


def tightest_quadratic_bound(V: ConvexHamiltonian) -> tuple[float, np.ndarray]:
    """Smallest ``alpha`` with ``V(q) <= alpha |q|^2``, and a unit ``q0`` attaining it."""
    vals, arg = maximize_on_sphere(lambda U: V(U), V.dimension, 1)
    return float(vals[0]), arg[0]


@dataclass(frozen=True)
class SandwichReport:
    """Outcome of checking ``T^L >= Q >= C V`` on sampled directions."""

    C: float
    q0: np.ndarray
    holds: bool
    upper_slack: float
    lower_slack: float
    witness: np.ndarray | None


def sandwich_constant(T: ConvexHamiltonian, V: ConvexHamiltonian, count: int = 10_000):
    """Largest ``C`` with ``T^L >= C V``, the touching direction ``q0``, and
    the sampled directions with their ``T^L`` values for reuse."""
    n = T.dimension
    U = sphere_points(n, count)
    TL = legendre_2hom(T, U)
    ratio = TL / V(U)

    def neg_ratio(W):
        flat = W.reshape(-1, n)
        return (-legendre_2hom(T, flat) / V(flat)).reshape(W.shape[:-1])

    i = int(np.argmin(ratio))
    # local refinement of the minimum ratio around the best sampled direction
    vals, arg = maximize_on_sphere(neg_ratio, n, 1, coarse=64 if n == 2 else 256, starts=2)
    C = min(float(-vals[0]), float(ratio[i]))
    q0 = arg[0] if -vals[0] <= ratio[i] else U[i]
    return C, q0, U, TL


def sandwich_check(T: ConvexHamiltonian, V: ConvexHamiltonian, Q, count: int = 10_000, tol: float = 1e-9) -> SandwichReport:
    """Check ``T^L >= Q >= C V`` on ``count`` sphere directions.

    ``C`` is the largest constant with ``T^L >= C V`` (the minimum of the
    ratio, attained at ``q0``).  ``Q`` is a Hamiltonian or a symmetric matrix.
    A failed check carries the worst direction as ``witness``.
    """
    if not isinstance(Q, ConvexHamiltonian):
        Q = quadratic_hamiltonian(Q, "Q")
    C, q0, U, TL = sandwich_constant(T, V, count)
    Qv = Q(U)
    CV = C * V(U)
    scale = np.maximum(1.0, np.abs(TL))
    upper = (TL - Qv) / scale
    lower = (Qv - CV) / scale
    worst = np.minimum(upper, lower)
    j = int(np.argmin(worst))
    holds = bool(worst[j] >= -tol)
    return SandwichReport(C, q0, holds, float(upper.min()), float(lower.min()), None if holds else U[j])
