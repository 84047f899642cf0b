"""Direction sampling and maximisation over the unit sphere.

Every optimisation over directions in the package (Legendre transforms of
2-homogeneous functions, tightest quadratic bounds, support widths of
sublevel sets) goes through `maximize_on_sphere`: a coarse sphere grid
followed by a local derivative-free search around the best few points
(golden section on the circle, an adaptive tangent-plane pattern search
above).  No gradient steps because the objectives are often only
piecewise smooth (``l1`` and ``l_inf`` gauges).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import NumericFailure

_GOLDEN = (1 + 5**0.5) / 2


def sphere_points(d: int, count: int, seed: int = 0) -> np.ndarray:
    """Roughly uniform unit vectors in R^d, shape ``(count, d)``.

    Equally spaced angles for d = 2, a Fibonacci lattice for d = 3 and
    normalised Gaussians (fixed seed) above.
    """
    if d < 1 or count < 1:
        raise ValueError("need d >= 1 and count >= 1")
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if d == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        r = np.sqrt(1 - z * z)
        phi = 2 * np.pi * i / _GOLDEN
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    g = np.random.Generator(np.random.Philox(key=seed)).standard_normal((count, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _tangent_bases(u: np.ndarray) -> np.ndarray:
    """Orthonormal bases of the tangent spaces at unit vectors ``u`` (N, d) -> (N, d-1, d)."""
    N, d = u.shape
    sign = np.where(u[:, 0] >= 0, 1.0, -1.0)
    v = u.copy()
    v[:, 0] += sign
    H = np.eye(d)[None] - 2 * v[:, :, None] * v[:, None, :] / np.sum(v * v, axis=1)[:, None, None]
    # H maps u to -sign*e1, so its remaining columns span u's complement
    return np.transpose(H[:, :, 1:], (0, 2, 1))


def _golden_circle(fun, batch, U, vals, best_idx, tol, max_iter):
    """Vectorised golden-section search on the circle around the best coarse angles."""
    h = 2 * np.pi / U.shape[0]
    theta = np.arctan2(U[best_idx, 1], U[best_idx, 0])
    lo, hi = theta - h, theta + h
    inv = (math.sqrt(5) - 1) / 2

    def at(t):
        return np.asarray(fun(np.stack([np.cos(t), np.sin(t)], axis=-1)), dtype=float)

    a = hi - inv * (hi - lo)
    b = lo + inv * (hi - lo)
    fa, fb = at(a), at(b)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        left = fa >= fb
        # keep [lo, b] where a wins, [a, hi] otherwise
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        new = np.where(left, hi - inv * (hi - lo), lo + inv * (hi - lo))
        fn = at(new)
        b, fb, a, fa = (
            np.where(left, a, new),
            np.where(left, fa, fn),
            np.where(left, new, b),
            np.where(left, fn, fb),
        )
    cand_t = np.concatenate([a, b, theta], axis=1)
    cand_v = np.concatenate([fa, fb, np.take_along_axis(vals, best_idx, axis=1)], axis=1)
    cand_v = np.where(np.isfinite(cand_v), cand_v, -np.inf)
    k = np.argmax(cand_v, axis=1)
    rows = np.arange(batch)
    values = cand_v[rows, k]
    if not np.all(np.isfinite(values)):
        raise NumericFailure("direction search produced non-finite maxima", {"values": values.tolist()})
    t = cand_t[rows, k]
    return _newton_polish(fun, values, np.column_stack([np.cos(t), np.sin(t)]))


def _newton_polish(fun, values, centers, rounds: int = 2):
    """Tangent-plane Newton steps from finite differences, kept only if not worse.

    The derivative-free searches pin down the maximum value to rounding but
    the maximiser only to about its square root; on smooth objectives two
    Newton steps recover the argument as well.  At kinks the step is
    rejected by the value test.
    """
    batch, d = centers.shape
    k = d - 1
    dg, dh = 1e-5, 1e-4
    eye = np.eye(k)
    # stencil: +-dg e_i for the gradient, +-dh e_i and +-dh (e_i + e_j) for the Hessian
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    offs = [dg * eye, -dg * eye, dh * eye, -dh * eye]
    if pairs:
        offs.append(np.array([dh * (eye[i] + eye[j]) for i, j in pairs]))
    offs = np.vstack(offs)
    for _ in range(rounds):
        T = _tangent_bases(centers)
        pts = centers[:, None, :] + np.einsum("gk,nkd->ngd", offs, T)
        pts /= np.linalg.norm(pts, axis=2, keepdims=True)
        fv = np.asarray(fun(pts), dtype=float)
        if not np.all(np.isfinite(fv)):
            return values, centers
        gp, gm, hp, hm = (fv[:, m * k:(m + 1) * k] for m in range(4))
        f0 = values[:, None]
        g = (gp - gm) / (2 * dg)
        H = np.zeros((batch, k, k))
        diag = (hp - 2 * f0 + hm) / dh**2
        H[:, np.arange(k), np.arange(k)] = diag
        for m, (i, j) in enumerate(pairs):
            mixed = (fv[:, 4 * k + m] - hp[:, i] - hp[:, j] + values) / dh**2
            H[:, i, j] = H[:, j, i] = mixed
        try:
            step = -np.linalg.solve(H, g[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            return values, centers
        ok = np.all(np.linalg.eigvalsh(H) < 0, axis=1) & (np.linalg.norm(step, axis=1) < 1e-3)
        if not np.any(ok):
            break
        new = centers + np.einsum("nk,nkd->nd", np.where(ok[:, None], step, 0.0), T)
        new /= np.linalg.norm(new, axis=1, keepdims=True)
        nv = np.asarray(fun(new[:, None, :]), dtype=float)[:, 0]
        better = ok & np.isfinite(nv) & (nv >= values - 4 * np.finfo(float).eps * np.abs(values))
        centers = np.where(better[:, None], new, centers)
        values = np.where(better, np.maximum(nv, values), values)
    return values, centers


def _coarse_count(d: int) -> int:
    return {1: 2, 2: 256, 3: 1024}.get(d, 4096)


def maximize_on_sphere(
    fun,
    d: int,
    batch: int = 1,
    *,
    coarse: int | None = None,
    starts: int = 4,
    tol: float = 1e-12,
    max_iter: int = 2000,
):
    """Maximise ``batch`` independent objectives over the unit sphere of R^d.

    Parameters
    ----------
    fun : callable
        Maps unit vectors of shape ``(batch, m, d)`` to values ``(batch, m)``.
    d : int
        Ambient dimension.
    batch : int
        Number of independent objectives evaluated together.
    coarse : int, optional
        Size of the initial sphere grid.
    starts : int
        Best coarse points refined per objective.
    tol : float
        Final bracket width (circle) or search radius (higher d).
    max_iter : int
        Cap on grid-search rounds.

    Returns
    -------
    values : ndarray, shape (batch,)
    argmax : ndarray, shape (batch, d)
    """
    coarse = coarse or _coarse_count(d)
    U = sphere_points(d, coarse)
    vals = np.asarray(fun(np.broadcast_to(U, (batch,) + U.shape)), dtype=float)
    if vals.shape != (batch, U.shape[0]):
        raise ValueError(f"objective returned shape {vals.shape}, expected {(batch, U.shape[0])}")
    if d == 1:
        i = np.argmax(vals, axis=1)
        return vals[np.arange(batch), i], U[i]
    starts = min(starts, U.shape[0])
    best_idx = np.argsort(-np.where(np.isfinite(vals), vals, -np.inf), axis=1)[:, :starts]
    if d == 2:
        return _golden_circle(fun, batch, U, vals, best_idx, tol, max_iter)
    centers = U[best_idx].reshape(batch * starts, d)
    center_vals = np.take_along_axis(vals, best_idx, axis=1).reshape(batch * starts)

    grid = np.array(list(itertools.product(np.linspace(-1, 1, 5), repeat=d - 1)))
    n_random = 24 * (d - 1)
    r0 = 2.5 * (4 * math.pi / U.shape[0]) ** (1.0 / (d - 1)) if d <= 3 else 0.6
    radius = np.full(batch * starts, r0)
    rng = np.random.Generator(np.random.Philox(key=12345))
    for _ in range(max_iter):
        active = radius > tol
        if not np.any(active):
            break
        T = _tangent_bases(centers)
        # fresh random directions keep kink ridges from trapping the search
        g = rng.standard_normal((n_random, d - 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        g *= rng.uniform(0.05, 1.0, size=(n_random, 1))
        offsets = np.vstack([grid if d <= 3 else grid[:1], g])
        step = np.einsum("gk,nkd->ngd", offsets, T) * radius[:, None, None]
        cand = centers[:, None, :] + step
        cand /= np.linalg.norm(cand, axis=2, keepdims=True)
        cv = np.asarray(fun(cand.reshape(batch, starts * len(offsets), d)), dtype=float)
        cv = cv.reshape(batch * starts, len(offsets))
        cv = np.where(np.isfinite(cv), cv, -np.inf)
        j = np.argmax(cv, axis=1)
        rows = np.arange(cv.shape[0])
        improved = active & (cv[rows, j] > center_vals)
        centers = np.where(improved[:, None], cand[rows, j], centers)
        center_vals = np.where(improved, cv[rows, j], center_vals)
        radius = np.where(~active, radius, np.where(improved, np.minimum(radius * 1.5, r0), radius * 0.5))
    center_vals = center_vals.reshape(batch, starts)
    centers = centers.reshape(batch, starts, d)
    k = np.argmax(center_vals, axis=1)
    values = center_vals[np.arange(batch), k]
    if not np.all(np.isfinite(values)):
        raise NumericFailure(
            "direction search produced non-finite maxima",
            {"values": values.tolist(), "coarse": coarse, "starts": starts},
        )
    return _newton_polish(fun, values, centers[np.arange(batch), k])
