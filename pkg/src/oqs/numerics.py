"""Numerical kernels shared by the physics modules.

Polynomial roots (Aberth-Ehrlich), two-dimensional Newton iteration,
vectorised adaptive Gauss-Kronrod quadrature, the Bessel function J1 and a
dense eigensolver with residual checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import (
    DomainError,
    NoConvergence,
    SingularJacobian,
    ZeroPolynomial,
)

Array = np.ndarray


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 100

    def __post_init__(self) -> None:
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be non-negative")
        if self.abs_tol + self.rel_tol <= 0:
            raise DomainError("abs_tol + rel_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")


DEFAULT_TOL = Tolerance()


# ---------------------------------------------------------------------------
# polynomial roots


def _horner(c: Array, z: Array) -> tuple[Array, Array]:
    """Value and derivative of a polynomial (highest degree first)."""
    p = np.full_like(z, c[0])
    dp = np.zeros_like(z)
    for ck in c[1:]:
        dp = dp * z + p
        p = p * z + ck
    return p, dp


def poly_roots(coeffs: Sequence[complex], tol: Tolerance = DEFAULT_TOL) -> list[complex]:
    """All roots of ``c[0] z^d + ... + c[d]`` by Aberth-Ehrlich iteration.

    Coefficients are ordered from the highest degree down. Leading zeros are
    stripped; trailing zeros give exact roots at the origin. Starting points
    sit on a circle of Cauchy-bound radius with a fixed angular offset, so the
    output is reproducible.
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim != 1 or c.size == 0:
        raise ZeroPolynomial("empty coefficient list")
    scale = np.max(np.abs(c))
    if not np.isfinite(scale):
        raise DomainError("non-finite coefficient")
    if scale == 0.0:
        raise ZeroPolynomial("all coefficients vanish")
    nz = np.flatnonzero(np.abs(c) > 0.0)
    c = c[nz[0]:] / scale
    n_zero = c.size - 1 - (np.flatnonzero(np.abs(c) > 0.0)[-1])
    if n_zero:
        c = c[: c.size - n_zero]
    deg = c.size - 1
    if deg + n_zero < 1:
        raise DomainError("degree must be at least one")
    roots = [0j] * n_zero
    if deg == 0:
        return roots
    c = c / c[0]
    if deg == 1:
        return [complex(-c[1])] + roots

    radius = 1.0 + np.max(np.abs(c[1:]))
    # a tighter starting radius: the unique positive root of the Cauchy polynomial
    cauchy = np.concatenate(([1.0], -np.abs(c[1:])))
    lo, hi = 0.0, radius
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.polyval(cauchy, mid) > 0:
            hi = mid
        else:
            lo = mid
    radius = hi
    angles = 2.0 * np.pi * np.arange(deg) / deg + 0.4
    z = radius * np.exp(1j * angles)

    abs_c = np.abs(c)
    done = np.zeros(deg, dtype=bool)
    for _ in range(tol.max_iter * 5):
        p, dp = _horner(c, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            w = ratio / (1.0 - ratio * s)
        w = np.where(np.isfinite(w), w, 0.0)
        w[done] = 0.0
        z = z - w
        bound, _ = _horner(abs_c.astype(complex), np.abs(z).astype(complex))
        small = np.abs(w) <= 4 * np.finfo(float).eps * np.maximum(np.abs(z), 1e-300)
        backward = np.abs(p) <= 8 * np.finfo(float).eps * bound.real
        done |= small | backward
        if done.all():
            break
    else:
        raise NoConvergence(f"Aberth iteration did not converge (degree {deg})")

    # Newton polish and backward-error check
    for _ in range(3):
        p, dp = _horner(c, z)
        step = np.where(np.abs(dp) > 0, p / np.where(dp == 0, 1, dp), 0.0)
        z = z - step
    p, _ = _horner(c, z)
    bound, _ = _horner(abs_c.astype(complex), np.abs(z).astype(complex))
    if np.any(np.abs(p) > max(tol.abs_tol, 1e3 * np.finfo(float).eps) * bound.real):
        raise NoConvergence("polynomial residual above tolerance")
    order = np.lexsort((z.imag, z.real))
    return [complex(v) for v in z[order]] + roots


# ---------------------------------------------------------------------------
# two-dimensional Newton


Vec2 = tuple[float, float]


def _fd_jacobian(f: Callable[[float, float], Vec2], x: float, y: float) -> Array:
    hx = 1e-7 * max(1.0, abs(x))
    hy = 1e-7 * max(1.0, abs(y))
    fxp, fxm = np.asarray(f(x + hx, y)), np.asarray(f(x - hx, y))
    fyp, fym = np.asarray(f(x, y + hy)), np.asarray(f(x, y - hy))
    return np.column_stack(((fxp - fxm) / (2 * hx), (fyp - fym) / (2 * hy)))


def newton2d(
    f: Callable[[float, float], Vec2],
    seed: Vec2,
    jac: Callable[[float, float], Array] | None = None,
    tol: Tolerance = DEFAULT_TOL,
) -> Vec2:
    """Solve f(x, y) = 0 by damped Newton iteration.

    ``jac`` returns the 2x2 Jacobian; central differences are used when it is
    omitted. Convergence means max-norm residual at most ``tol.abs_tol``.
    """
    x, y = float(seed[0]), float(seed[1])
    r = np.asarray(f(x, y), dtype=float)
    if not np.all(np.isfinite(r)):
        raise NoConvergence("non-finite residual at seed")
    for _ in range(tol.max_iter):
        if np.max(np.abs(r)) <= tol.abs_tol:
            return float(x), float(y)
        J = np.asarray(jac(x, y) if jac is not None else _fd_jacobian(f, x, y), dtype=float)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if not np.isfinite(det) or abs(det) <= 1e-14 * max(np.max(np.abs(J)) ** 2, 1e-300):
            raise SingularJacobian(f"singular Jacobian at ({x:.6g}, {y:.6g})")
        dx, dy = np.linalg.solve(J, -r)
        norm0 = np.max(np.abs(r))
        step = 1.0
        for _ in range(30):
            xn, yn = x + step * dx, y + step * dy
            rn = np.asarray(f(xn, yn), dtype=float)
            if np.all(np.isfinite(rn)) and np.max(np.abs(rn)) < norm0:
                break
            step *= 0.5
        else:
            raise NoConvergence(f"line search failed at ({x:.6g}, {y:.6g})")
        if abs(xn - x) + abs(yn - y) == 0.0:
            break
        x, y, r = xn, yn, rn
    if np.max(np.abs(r)) <= tol.abs_tol:
        return float(x), float(y)
    raise NoConvergence(f"Newton residual {np.max(np.abs(r)):.3e} after {tol.max_iter} steps")


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod (7/15)

_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate((-_XK[:-1], _XK[::-1]))
_WK15 = np.concatenate((_WK[:-1], _WK[::-1]))
_WG7 = np.zeros(15)
_WG7[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate((_WG[:-1], _WG[::-1]))


def _gk_panels(f: Callable[[Array], Array], lo: Array, hi: Array) -> tuple[Array, Array]:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()))
    fx = fx.reshape(x.shape + fx.shape[1:])
    wk = np.tensordot(_WK15, np.moveaxis(fx, 1, 0), axes=1)
    wg = np.tensordot(_WG7, np.moveaxis(fx, 1, 0), axes=1)
    shape = (-1,) + (1,) * (wk.ndim - 1)
    k = wk * half.reshape(shape)
    err = np.abs(k - wg * half.reshape(shape))
    if err.ndim > 1:
        err = err.reshape(err.shape[0], -1).max(axis=1)
    return k, err


def quad_adaptive(
    f: Callable[[Array], Array],
    a: float,
    b: float,
    tol: Tolerance = DEFAULT_TOL,
    panels: int = 1,
    max_panels: int = 200_000,
) -> complex | Array:
    """Globally adaptive Gauss-Kronrod 7/15 quadrature.

    ``f`` is called with a 1-D array of abscissae and must return an array
    whose first axis matches it; trailing axes give vector-valued integrals
    that share one subdivision. The error indicator |K15 - G7| summed over
    panels is driven below ``abs_tol + rel_tol * max|result|``.
    """
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise DomainError("quadrature needs finite a < b")
    edges = np.linspace(a, b, max(1, int(panels)) + 1)
    lo, hi = edges[:-1], edges[1:]
    vals, errs = _gk_panels(f, lo, hi)
    for _ in range(10_000):
        total = vals.sum(axis=0)
        err_total = errs.sum()
        target = tol.abs_tol + tol.rel_tol * float(np.max(np.abs(total)))
        if err_total <= target:
            return total if np.ndim(total) else complex(total) if np.iscomplexobj(total) else float(total)
        if lo.size >= max_panels:
            break
        # bisect the panels carrying the largest errors (at least half the total)
        order = np.argsort(errs)[::-1]
        cum = np.cumsum(errs[order])
        n_split = int(np.searchsorted(cum, 0.5 * err_total)) + 1
        split = order[:n_split]
        keep = np.ones(lo.size, dtype=bool)
        keep[split] = False
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate((lo[split], mid))
        new_hi = np.concatenate((mid, hi[split]))
        nv, ne = _gk_panels(f, new_lo, new_hi)
        lo = np.concatenate((lo[keep], new_lo))
        hi = np.concatenate((hi[keep], new_hi))
        vals = np.concatenate((vals[keep], nv))
        errs = np.concatenate((errs[keep], ne))
    raise NoConvergence(f"quadrature budget exhausted, error estimate {errs.sum():.3e}")


# ---------------------------------------------------------------------------
# Bessel J1

BESSEL_MAX_ARG = 1e6


def bessel_j1(x: float | Array) -> float | Array:
    """J1(x) for |x| <= 1e6 (vectorised)."""
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(np.abs(xa) > BESSEL_MAX_ARG):
        raise DomainError("bessel_j1 argument outside |x| <= 1e6")
    out = special.j1(xa)
    return float(out) if out.ndim == 0 else out


def j1_over_x(x: float | Array) -> float | Array:
    """J1(x)/x with the removable singularity at 0 filled in (limit 1/2)."""
    xa = np.asarray(x, dtype=float)
    out = np.empty_like(xa)
    small = np.abs(xa) < 1e-4
    xs = xa[small]
    out[small] = 0.5 - xs * xs / 16.0 + xs**4 / 384.0
    xl = xa[~small]
    out[~small] = bessel_j1(xl) / xl if xl.size else xl
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# dense eigenproblem

EIG_MAX_DIM = 4096


def eig_dense(M: Array, hermitian: bool = False) -> tuple[Array, Array]:
    """Eigenvalues and column eigenvectors of a square matrix.

    Each pair is checked against ||Mv - mu v|| <= 1e-9 ||M|| ||v||.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("eig_dense needs a square matrix")
    n = M.shape[0]
    if n > EIG_MAX_DIM:
        raise DomainError(f"dimension {n} above {EIG_MAX_DIM}")
    if not np.all(np.isfinite(M)):
        raise DomainError("non-finite matrix entry")
    try:
        if hermitian:
            mu, V = np.linalg.eigh(M)
        else:
            mu, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    norm = np.linalg.norm(M, 2) if n else 0.0
    res = np.linalg.norm(M @ V - V * mu[None, :], axis=0)
    if np.any(res > 1e-9 * max(norm, 1e-300) * np.linalg.norm(V, axis=0)):
        raise NoConvergence("eigenpair residual above tolerance")
    return mu, V
