"""Triple-delta potential on the line: scattering, Siegert poles, exceptional point.

The potential is ``-V0 delta(x) + V1 [delta(x + ell) + delta(x - ell)]``.
Everything is dimensionless with hbar^2/(2m) = ell = 1, so that

* alpha0 = v0 ell and alpha1 = v1 ell with v = m V / hbar^2,
* a pole K = xi + i eta has energy E = K^2,
* the group velocity of a plane wave is 2 Re K.

Positive ``alpha0`` makes the central delta attractive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError,
    EmptyBox,
    NoConvergence,
    SingularJacobian,
    TrackingLost,
    WrongKind,
)
from .numerics import DEFAULT_TOL, Tolerance, newton2d, quad_adaptive
from .states import Kind, Parity, Pole

AXIS_TOL = 1e-9
DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class ContinuumModel:
    alpha0: float
    alpha1: float
    ell: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha1 > 0:
            raise DomainError("alpha1 must be positive")
        if not self.ell > 0:
            raise DomainError("ell must be positive")


@dataclass(frozen=True)
class TransferMatrix:
    t11: complex
    t12: complex
    t21: complex
    t22: complex

    def as_array(self) -> np.ndarray:
        return np.array([[self.t11, self.t12], [self.t21, self.t22]])

    @property
    def det(self) -> complex:
        return self.t11 * self.t22 - self.t12 * self.t21


@dataclass(frozen=True)
class SearchBox:
    """Rectangle ``0 < xi <= xi_max``, ``eta_min <= eta <= eta_max`` and its scan grid."""

    xi_max: float = 20.0
    eta_min: float = -3.0
    eta_max: float = 0.0
    n_xi: int = 400
    n_eta: int = 120

    def __post_init__(self) -> None:
        if not (self.xi_max > 0 and self.eta_min < self.eta_max):
            raise DomainError("empty search box")
        if self.n_xi < 3 or self.n_eta < 3:
            raise DomainError("grid needs at least 3 cells per axis")


# ---------------------------------------------------------------------------
# scattering


def _interface(k: complex, x0: float, v: float) -> tuple[np.ndarray, np.ndarray]:
    """Matching matrices at a delta of strength ``v`` (jump psi'+ - psi'- = 2 v psi)."""
    ep, em = np.exp(1j * k * x0), np.exp(-1j * k * x0)
    left = np.array([[ep, em], [(1j * k + v) * ep, (-1j * k + v) * em]])
    right = np.array([[ep, em], [(1j * k - v) * ep, (-1j * k - v) * em]])
    return left, right


def transfer_matrix(model: ContinuumModel, k: complex) -> TransferMatrix:
    """Matrix T with (A, B) = T (C, D) between the far-left and far-right amplitudes.

    Built from the three matching conditions; T11 is the inverse transmission
    amplitude.
    """
    k = complex(k)
    if k == 0:
        raise DomainError("transfer matrix undefined at k = 0")
    v0, v1 = model.alpha0, model.alpha1
    # the central delta is attractive for v0 > 0: jump is -2 v0 psi
    T = np.eye(2, dtype=complex)
    for x0, v in ((-1.0, v1), (0.0, -v0), (1.0, v1)):
        left, right = _interface(k, x0, v)
        T = T @ np.linalg.solve(left, right)
    return TransferMatrix(*T.ravel())


def t11_closed(model: ContinuumModel, k: complex) -> complex:
    """Closed form of T11 after multiplying out the three matching matrices."""
    k = complex(k)
    if k == 0:
        raise DomainError("T11 undefined at k = 0")
    v0, v1 = model.alpha0, model.alpha1
    ik = 1j * k
    e2 = np.exp(2j * k)
    return complex(
        1j / k**3
        * ((ik - v1) ** 2 * (ik + v0) + 2 * v0 * v1 * (ik - v1) * e2 - v1**2 * (ik - v0) * e2 * e2)
    )


def transmission(model: ContinuumModel, k: float) -> float:
    if not k > 0:
        raise DomainError("transmission needs k > 0")
    return float(1.0 / abs(transfer_matrix(model, k).t11) ** 2)


def perfect_transmission_points(alpha1: float, count: int = 3) -> list[float]:
    """First ``count`` positive roots of xi cot(2 xi) + alpha1 = 0 (symmetric barriers)."""
    f = lambda x: x * np.cos(2 * x) + alpha1 * np.sin(2 * x)  # noqa: E731
    roots: list[float] = []
    grid = np.linspace(1e-3, 1.0, 200)
    lo = 0.0
    while len(roots) < count:
        xs = lo + np.pi * grid
        vals = f(xs)
        for i in np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:])):
            roots.append(brentq(f, xs[i], xs[i + 1], xtol=1e-15))
        lo += np.pi * grid[-1]
    return sorted(roots)[:count]


# ---------------------------------------------------------------------------
# pole equations (K = xi + i eta, ell = 1)


def even_function(model: ContinuumModel, K: complex, deriv: int = 0) -> complex:
    """(iK - a0) e^{2iK} + (iK + a0)(1 - iK/a1) or one of its first three derivatives."""
    a0, a1 = model.alpha0, model.alpha1
    e = np.exp(2j * K)
    if deriv == 0:
        return (1j * K - a0) * e + (1j * K + a0) * (1 - 1j * K / a1)
    if deriv == 1:
        return 1j * e + 2j * (1j * K - a0) * e + 1j * (1 - 1j * K / a1) - 1j / a1 * (1j * K + a0)
    if deriv == 2:
        return -4 * e - 4 * (1j * K - a0) * e + 2 / a1
    if deriv == 3:
        return -12j * e - 8j * (1j * K - a0) * e
    raise ValueError(deriv)


def odd_function(model: ContinuumModel, K: complex, deriv: int = 0) -> complex:
    """e^{2iK} - (1 - iK/a1); independent of the central delta."""
    a1 = model.alpha1
    e = np.exp(2j * K)
    return (e - (1 - 1j * K / a1), 2j * e + 1j / a1, -4 * e, -8j * e)[deriv]


def symmetric_function(model: ContinuumModel, K: complex, parity: Parity, deriv: int = 0) -> complex:
    """e^{2iK} +/- (1 - iK/a1) for the central delta switched off (+ is even)."""
    if parity is Parity.ODD:
        return odd_function(model, K, deriv)
    a1 = model.alpha1
    e = np.exp(2j * K)
    return (e + (1 - 1j * K / a1), 2j * e - 1j / a1, -4 * e, -8j * e)[deriv]


def _deflated(fn, model: ContinuumModel, K: complex) -> tuple[complex, complex]:
    """F(K)/K and its derivative when K = 0 is a spurious root of F, else F itself."""
    if abs(fn(model, 0j)) > 1e-13:
        return fn(model, K), fn(model, K, 1)
    if abs(K) < 1e-4:
        d1, d2, d3 = (fn(model, 0j, n) for n in (1, 2, 3))
        return d1 + d2 * K / 2 + d3 * K * K / 6, d2 / 2 + d3 * K / 3
    F, dF = fn(model, K), fn(model, K, 1)
    return F / K, (dF * K - F) / (K * K)


def _scale(model: ContinuumModel, K: complex) -> float:
    """Magnitude of the terms in the pole equation, used to scale residuals."""
    return float(
        (abs(K) + abs(model.alpha0) + 1.0) * (abs(np.exp(2j * K)) + 1.0 + abs(K) / model.alpha1)
    )


def _refine(fn, model: ContinuumModel, seed: complex, tol: Tolerance) -> complex:
    def f(x: float, y: float) -> tuple[float, float]:
        h, _ = _deflated(fn, model, complex(x, y))
        return h.real, h.imag

    def jac(x: float, y: float) -> np.ndarray:
        _, d = _deflated(fn, model, complex(x, y))
        return np.array([[d.real, -d.imag], [d.imag, d.real]])

    scaled = Tolerance(tol.abs_tol * _scale(model, seed) / max(abs(seed), 1.0), tol.rel_tol, tol.max_iter)
    with np.errstate(over="ignore", invalid="ignore"):
        x, y = newton2d(f, (seed.real, seed.imag), jac, scaled)
        K = complex(x, y)
        for _ in range(2):  # polish below the stopping threshold
            h, d = _deflated(fn, model, K)
            if d == 0 or not np.isfinite(h):
                break
            K = K - h / d
    return complex(K)


def classify(K: complex) -> Kind:
    if abs(K.real) <= AXIS_TOL:
        return Kind.BOUND if K.imag > 0 else Kind.ANTI_BOUND
    if K.imag < 0:
        return Kind.RESONANT if K.real > 0 else Kind.ANTI_RESONANT
    raise DomainError(f"K = {K} off the axis in the upper half plane")


def _pole(K: complex, parity: Parity, model: ContinuumModel) -> Pole:
    K = complex(K)
    if abs(K.real) <= AXIS_TOL:
        K = complex(0.0, K.imag)
    return Pole(K=K, E=K * K, kind=classify(K), parity=parity, ell=model.ell)


def _dedup(values: list[complex]) -> list[complex]:
    out: list[complex] = []
    for v in values:
        if all(abs(v - w) > DEDUP_TOL for w in out):
            out.append(v)
    return out


def _with_partners(values: list[complex]) -> list[complex]:
    """Add the time-reversal partner -K* of every off-axis pole."""
    out = list(values)
    for v in values:
        if abs(v.real) > AXIS_TOL:
            out.append(complex(-v.real, v.imag))
    return _dedup(out)


def _in_box(K: complex, box: SearchBox, slack: float = 1e-9) -> bool:
    return (
        K.real > AXIS_TOL
        and K.real <= box.xi_max + slack
        and box.eta_min - slack <= K.imag <= box.eta_max + slack
    )


def _grid(box: SearchBox) -> tuple[np.ndarray, np.ndarray]:
    xi = np.linspace(0.0, box.xi_max, box.n_xi + 1)
    eta = np.linspace(box.eta_min, box.eta_max, box.n_eta + 1)
    return xi, eta


def _crossing_seeds(values: np.ndarray, xi: np.ndarray, eta: np.ndarray) -> list[complex]:
    """Cell centres where both Re and Im of ``values`` (on nodes) change sign."""
    seeds = []
    for part in (values.real, values.imag):
        s = np.sign(part)
        corners = np.stack((s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]))
        seeds.append(corners.max(axis=0) != corners.min(axis=0))
    both = seeds[0] & seeds[1]
    i, j = np.nonzero(both)
    xc = 0.5 * (xi[i] + xi[i + 1])
    yc = 0.5 * (eta[j] + eta[j + 1])
    return [complex(a, b) for a, b in zip(xc, yc)]


def _minimum_seeds(values: np.ndarray, xi: np.ndarray, eta: np.ndarray) -> list[complex]:
    """Local minima of log|values| over 3x3 neighbourhoods on cell centres."""
    with np.errstate(divide="ignore"):
        f = np.log(np.abs(values))
    padded = np.pad(f, 1, constant_values=np.inf)
    neigh = np.stack([
        padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
        for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)
    ])
    mask = f <= neigh.min(axis=0)
    i, j = np.nonzero(mask)
    return [complex(xi[a], eta[b]) for a, b in zip(i, j)]


def _refine_all(fn, model, seeds, box, tol) -> tuple[list[complex], int]:
    found, failed = [], 0
    for s in seeds:
        try:
            K = _refine(fn, model, s, tol)
        except (NoConvergence, SingularJacobian):
            failed += 1
            continue
        if _in_box(K, box):
            found.append(K)
    return _dedup(found), failed


def density_function(model: ContinuumModel, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """log|even-parity pole equation| on a grid; poles show up as -infinity spots."""
    K = xi[:, None] + 1j * eta[None, :]
    with np.errstate(divide="ignore"):
        return np.log(np.abs(even_function(model, K)))


def _axis_roots(fn, model: ContinuumModel, lo: float, hi: float, n: int = 4000) -> list[complex]:
    """Roots on the imaginary axis of the deflated equation, by sign change and Brent."""
    def q(eta: float) -> float:
        h, _ = _deflated(fn, model, 1j * eta)
        return (h * 1j).real if abs((h * 1j).real) >= abs(h.real) else h.real

    etas = np.linspace(lo, hi, n + 1)
    vals = np.array([q(e) for e in etas])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        eta = brentq(q, etas[i], etas[i + 1], xtol=1e-15)
        # a sign change across a singularity is not a root
        if abs(fn(model, 1j * eta)) <= 1e-8 * _scale(model, 1j * eta):
            roots.append(1j * eta)
    roots.extend(1j * etas[i] for i in np.flatnonzero(vals == 0.0))
    return roots


@dataclass
class PoleSearch:
    """Poles found in a search, plus the number of Newton seeds that failed."""

    poles: list[Pole]
    failed_seeds: int = 0


def poles_symmetric(
    model: ContinuumModel,
    box: SearchBox = SearchBox(),
    tol: Tolerance = DEFAULT_TOL,
    mirror: bool = True,
) -> list[Pole]:
    """Poles of the barrier pair without central delta, from crossings of the
    zero curves of the real and imaginary parts of the pole equation."""
    if model.alpha0 != 0:
        raise DomainError("poles_symmetric requires alpha0 = 0")
    return _search(model, box, tol, mirror, symmetric=True).poles


def poles_general(
    model: ContinuumModel,
    box: SearchBox = SearchBox(),
    tol: Tolerance = DEFAULT_TOL,
    mirror: bool = True,
) -> list[Pole]:
    """Even poles from minima of the density function, odd poles from the
    alpha0-independent branch; imaginary-axis poles by a separate 1-D scan."""
    return _search(model, box, tol, mirror, symmetric=False).poles


def _search(model, box, tol, mirror, symmetric) -> PoleSearch:
    xi, eta = _grid(box)
    poles: list[Pole] = []
    failed = 0
    for parity in (Parity.EVEN, Parity.ODD):
        if symmetric:
            fn = lambda m, K, d=0, p=parity: symmetric_function(m, K, p, d)  # noqa: E731
            Kn = xi[:, None] + 1j * eta[None, :]
            seeds = _crossing_seeds(fn(model, Kn), xi, eta)
        else:
            fn = even_function if parity is Parity.EVEN else odd_function
            xc = 0.5 * (xi[:-1] + xi[1:])
            yc = 0.5 * (eta[:-1] + eta[1:])
            Kc = xc[:, None] + 1j * yc[None, :]
            seeds = _minimum_seeds(fn(model, Kc) / Kc, xc, yc)
        found, nf = _refine_all(fn, model, seeds, box, tol)
        failed += nf
        axis_hi = max(box.eta_max, abs(model.alpha0) + 2.0)
        found += [K for K in _axis_roots(fn, model, box.eta_min, axis_hi) if abs(K) > DEDUP_TOL]
        if mirror:
            found = _with_partners(found)
        poles += [_pole(K, parity, model) for K in _dedup(found)]
    if not poles:
        raise EmptyBox("no poles in the search box")
    poles.sort(key=Pole.sort_key)
    return PoleSearch(poles, failed)


# ---------------------------------------------------------------------------
# exceptional point of the even pair


@dataclass
class EPResult:
    alpha1: float
    alpha0_star: float
    eta_star: float
    trajectory: list[tuple[float, list[Pole]]] = field(default_factory=list)


def _ep_system(alpha1: float, a0: float, eta: float):
    m = ContinuumModel(a0, alpha1)
    K = 1j * eta
    g0, g1, g2 = (even_function(m, K, d) for d in (0, 1, 2))
    e = np.exp(2j * K)
    g_a = -e + (1 - 1j * K / alpha1)
    g1_a = -2j * e - 1j / alpha1
    # on the imaginary axis g is real and g' is imaginary
    F = np.array([g0.real, g1.imag])
    J = np.array([[g_a.real, (1j * g1).real], [g1_a.imag, (1j * g2).imag]])
    return F, J


def exceptional_point(alpha1: float, seed: tuple[float, float], tol: Tolerance = DEFAULT_TOL) -> tuple[float, float]:
    """(alpha0*, eta*) where the even resonant/anti-resonant pair coalesces on the
    imaginary axis: the pole equation and its K-derivative vanish together."""
    f = lambda a, e: tuple(_ep_system(alpha1, a, e)[0])  # noqa: E731
    jac = lambda a, e: _ep_system(alpha1, a, e)[1]  # noqa: E731
    return newton2d(f, seed, jac, Tolerance(min(tol.abs_tol, 1e-14), tol.rel_tol, tol.max_iter))


def _leading_even_resonance(model: ContinuumModel) -> complex:
    box = SearchBox(xi_max=6.0, eta_min=-3.0, eta_max=0.0, n_xi=120, n_eta=60)
    xc = np.linspace(0, box.xi_max, box.n_xi + 1)
    yc = np.linspace(box.eta_min, box.eta_max, box.n_eta + 1)
    xc, yc = 0.5 * (xc[:-1] + xc[1:]), 0.5 * (yc[:-1] + yc[1:])
    Kc = xc[:, None] + 1j * yc[None, :]
    seeds = _minimum_seeds(even_function(model, Kc) / Kc, xc, yc)
    found, _ = _refine_all(even_function, model, seeds, box, DEFAULT_TOL)
    if not found:
        raise TrackingLost("no even resonance to start the trajectory")
    return min(found, key=lambda K: K.real)


def ep_trajectory(
    alpha1: float,
    alpha0_range: tuple[float, float] = (0.0, 1.5),
    steps: int = 151,
    tol: Tolerance = DEFAULT_TOL,
) -> EPResult:
    """Follow the even resonant/anti-resonant pair nearest the imaginary axis
    as alpha0 increases, through its collision into two axis poles.

    Each step is seeded by the previous solution; a failed step is retried
    with the increment halved, at most 12 times. The collision point is
    located by Newton's method on the double-root conditions and used to seed
    the two axis poles on the far side.
    """
    a_lo, a_hi = map(float, alpha0_range)
    if not a_hi > a_lo or steps < 2:
        raise DomainError("need an increasing alpha0 range and steps >= 2")
    grid = np.linspace(a_lo, a_hi, steps)

    K = _leading_even_resonance(ContinuumModel(a_lo, alpha1))
    ep: tuple[float, float] | None = None
    axis: list[complex] | None = None  # the two axis poles once past the collision
    rows: list[tuple[float, list[Pole]]] = []

    def advance(a_new: float) -> list[complex]:
        m = ContinuumModel(a_new, alpha1)
        if axis is None and ep is not None and a_new > ep[0]:
            seeds = _puiseux_seeds(alpha1, ep, a_new)
        else:
            seeds = [K] if axis is None else axis
        new = [_refine(even_function, m, s, tol) for s in seeds]
        if any(abs(n - s) > 0.25 for n, s in zip(new, seeds)):
            raise TrackingLost("continuation jumped to another pole")
        if len(new) == 1 and new[0].real <= AXIS_TOL:
            raise TrackingLost("resonance reached the imaginary axis")
        if len(new) == 2 and abs(new[0] - new[1]) < DEDUP_TOL:
            raise TrackingLost("axis poles merged")
        return new

    a_cur = a_lo
    for a_target in grid:
        while a_cur < a_target:
            da = a_target - a_cur
            for _ in range(13):
                try:
                    new = advance(a_cur + da)
                    break
                except (NoConvergence, SingularJacobian, TrackingLost):
                    if ep is None and K.real < 0.2:
                        # close to the collision: locate it, then jump across
                        ep = exceptional_point(alpha1, (a_cur, K.imag), tol)
                        continue
                    da *= 0.5
            else:
                raise TrackingLost(f"continuation failed near alpha0 = {a_cur:.6g}")
            a_cur += da
            if len(new) == 1:
                K = new[0]
            else:
                axis = new
        m = ContinuumModel(a_cur, alpha1)
        Ks = [K, complex(-K.real, K.imag)] if axis is None else axis
        rows.append((a_cur, sorted((_pole(k, Parity.EVEN, m) for k in Ks), key=lambda p: (-p.K.real, -p.K.imag))))
    if ep is None:
        # the range stopped short of the collision; locate it from the last point
        ep = exceptional_point(alpha1, (a_cur, K.imag), tol)
    return EPResult(alpha1, ep[0], ep[1], rows)


def _puiseux_seeds(alpha1: float, ep: tuple[float, float], a_new: float) -> list[complex]:
    """Square-root split of the double root just past the collision."""
    a0, eta = ep
    m = ContinuumModel(a0, alpha1)
    K = 1j * eta
    g_a = (-np.exp(2j * K) + (1 - 1j * K / alpha1))
    g_kk = even_function(m, K, 2)
    d = np.sqrt(complex(-2 * g_a * (a_new - a0) / g_kk))
    return [K + d, K - d]


# ---------------------------------------------------------------------------
# probability in an expanding window


def _eigenfunction_coefficients(pole: Pole, model: ContinuumModel) -> tuple[complex, complex]:
    """Inner amplitudes (F, G) on 0 < x < 1 for the outer amplitude C = 1."""
    K = pole.K
    if pole.parity is Parity.ODD:
        r = -1.0 + 0j
    else:
        r = (1j * K + model.alpha0) / (1j * K - model.alpha0)
    F = np.exp(1j * K) / (np.exp(1j * K) + r * np.exp(-1j * K))
    return complex(F), complex(r * F)


def eigenfunction(pole: Pole, model: ContinuumModel, x: np.ndarray) -> np.ndarray:
    """Siegert eigenfunction, normalised to psi = exp(iK|x|) outside the barriers."""
    x = np.asarray(x, dtype=float)
    F, G = _eigenfunction_coefficients(pole, model)
    ax = np.abs(x)
    inner = F * np.exp(1j * pole.K * ax) + G * np.exp(-1j * pole.K * ax)
    if pole.parity is Parity.ODD:
        inner = inner * np.sign(x)
        outer = np.sign(x) * np.exp(1j * pole.K * ax)
    else:
        outer = np.exp(1j * pole.K * ax)
    return np.where(ax <= 1.0, inner, outer)


def conserved_probability(
    pole: Pole,
    model: ContinuumModel,
    t: float,
    quad_tol: Tolerance = Tolerance(1e-15, 1e-14),
    window: float | None = None,
) -> float:
    """Integral of |Psi(x, t)|^2 over |x| < L(t), L(t) = 2 Re(K) t + 1.

    The window edge moves with the wave's velocity, so the exponential decay
    inside is balanced by the exponential growth of the outgoing tail. Passing
    ``window`` freezes L instead.
    """
    if pole.kind is not Kind.RESONANT:
        raise WrongKind("conserved_probability needs a resonant pole")
    if t < 0:
        raise DomainError("t must be non-negative")
    K, E = pole.K, pole.E
    F, G = _eigenfunction_coefficients(pole, model)

    def dens(x: np.ndarray) -> np.ndarray:
        return np.abs(F * np.exp(1j * K * x) + G * np.exp(-1j * K * x)) ** 2

    inner = 2.0 * quad_adaptive(dens, 0.0, 1.0, quad_tol, panels=4)
    L = 2.0 * K.real * t + 1.0 if window is None else float(window)
    kappa = K.imag
    if L < 1.0:
        raise DomainError("window must extend beyond the barriers")
    # closed form of 2 int_1^L exp(-2 kappa x) dx
    outer = 2.0 * (np.exp(-2 * kappa * L) - np.exp(-2 * kappa)) / (-2 * kappa)
    return float(np.exp(2 * E.imag * t) * (inner + outer))
