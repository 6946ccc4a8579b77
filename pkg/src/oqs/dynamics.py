"""Survival dynamics of an initial state on the system sites.

Units are hbar = 1; the lead hopping W and lattice constant a are taken from
the model (the defaults W = a = 1 are used throughout the tests).

The survival amplitude <psi0| exp(-iHt) |psi0> is split over the 2N discrete
states of the quadratic eigenvalue problem,

    A(t) = sum_n c_n(t),
    c_n(t) = w_n (1/(pi i)) int_{-pi}^{pi} exp(2iWt cos u) sin u / (exp(-iu) - 1/lambda_n) du,

with weight w_n = (psi0^dagger psi_n)(psi_n^T psi0) (plain transpose on the
right: the left eigenvector is the transpose of the right one). For a real
initial vector this is (psi0^T psi_n)^2. States inside the unit circle
(bound states) also pick up the residue w_n (1 - lambda_n^2) exp(-iE_n t).

The same amplitude for a resonant, anti-resonant or anti-bound state can be
written with the Bessel kernel,

    c_n(t) = w_n exp(-iE_n t) [1 - i lambda_n int_0^t exp(iE_n s) J1(2Ws)/s ds].

An independent check is exact propagation on a long closed chain: each lead
is cut after M sites, the chain is diagonalised once, and the amplitude is
summed over its eigenvalues. Cutting the lead is harmless while the light
cone 2W|t| stays inside the chain.
"""

from __future__ import annotations

import csv
import functools
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, LightConeViolation, TooFewPeaks, WrongKind
from .feshbach import OpenLattice
from .numerics import Tolerance, bessel_j1, j1_over_x, quad_adaptive
from .qep import QepSpectrum
from .states import Kind, Pole

K_INTEGRAL_TOL = Tolerance(abs_tol=1e-10, rel_tol=0.0)
BESSEL_TOL = Tolerance(abs_tol=1e-12, rel_tol=0.0)
MAX_TIME = 1e4


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("OQS_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items: list) -> list:
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def initial_state(vector: Sequence[complex]) -> np.ndarray:
    v = np.asarray(vector, dtype=complex)
    nrm = np.linalg.norm(v)
    if v.ndim != 1 or nrm == 0:
        raise DomainError("initial state must be a non-zero vector")
    return v / nrm


def pole_weights(spec: QepSpectrum, psi0: np.ndarray) -> np.ndarray:
    """w_n = (psi0^dagger psi_n)(psi_n^T psi0) for every discrete state."""
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (spec.model.n_sites,):
        raise DomainError("initial state has the wrong length")
    U = spec.vectors
    return (psi0.conj() @ U) * (U.T @ psi0)


def _times(t) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(~np.isfinite(arr)) or np.any(np.abs(arr) > MAX_TIME):
        raise DomainError(f"times must satisfy |t| <= {MAX_TIME:g}")
    return arr, scalar


def _active(spec: QepSpectrum, w: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.abs(w) > 1e-15)


# ---------------------------------------------------------------------------
# pole-resolved amplitudes


def _k_chunk(mus: np.ndarray, times: np.ndarray, W: float, tol: Tolerance) -> np.ndarray:
    tmax = float(np.max(np.abs(times))) if times.size else 0.0
    panels = max(16, int(np.ceil(2.0 * W * tmax)))

    def f(u: np.ndarray) -> np.ndarray:
        osc = np.exp(2j * W * np.cos(u)[:, None] * times[None, :])          # (n_u, T)
        pole = np.sin(u)[:, None] / (np.exp(-1j * u)[:, None] - mus[None, :])  # (n_u, P)
        return pole[:, :, None] * osc[:, None, :]

    val = quad_adaptive(f, -np.pi, np.pi, tol, panels=panels)
    return np.asarray(val).reshape(mus.size, times.size) / (np.pi * 1j)


def survival_k_integral(
    spec: QepSpectrum,
    psi0: np.ndarray,
    t,
    quad_tol: Tolerance = K_INTEGRAL_TOL,
) -> np.ndarray:
    """c_n(t) for every discrete state, shape (2N,) for scalar t or (2N, T)."""
    times, scalar = _times(t)
    w = pole_weights(spec, psi0)
    idx = _active(spec, w)
    out = np.zeros((len(spec.pairs), times.size), dtype=complex)
    if idx.size:
        lams = spec.lambdas[idx]
        if np.any(np.abs(np.abs(lams) - 1.0) < 1e-9):
            raise DomainError("a contributing state sits on the unit circle")
        order = np.argsort(np.abs(times), kind="stable")
        chunks = [order[i:i + 48] for i in range(0, order.size, 48)]
        vals = _pmap(lambda c: _k_chunk(1.0 / lams, times[c], spec.model.W, quad_tol), chunks)
        chi = np.empty((idx.size, times.size), dtype=complex)
        for c, v in zip(chunks, vals):
            chi[:, c] = v
        for j, n in enumerate(idx):
            pair = spec.pairs[n]
            if abs(pair.lam) < 1.0:
                # residue of a bound state enclosed by the deformed contour
                chi[j] += (1.0 - pair.lam**2) * np.exp(-1j * pair.E * times)
            out[n] = w[n] * chi[j]
    return out[:, 0] if scalar else out


def _kernel(W: float):
    return lambda s: 2.0 * W * j1_over_x(2.0 * W * s)  # J1(2Ws)/s


def _bessel_forward(E: complex, lam: complex, taus: np.ndarray, W: float, tol: Tolerance) -> np.ndarray:
    """exp(-iE t) - i lam F(t), F(t) = int_0^t exp(iE(s - t)) J1(2Ws)/s ds, for Im E <= 0.

    The kernel exp(iE(s - t)) never grows, so F is carried from one time to
    the next without cancellation.
    """
    k = _kernel(W)
    out = np.empty(taus.size, dtype=complex)
    F, prev = 0j, 0.0
    for i, tau in enumerate(taus):
        if tau > prev:
            piece = quad_adaptive(lambda s: np.exp(1j * E * (s - tau)) * k(s), prev, tau, tol,
                                  panels=max(1, int(np.ceil((tau - prev) * 2 * W))))
            F = np.exp(-1j * E * (tau - prev)) * F + piece
            prev = tau
        out[i] = np.exp(-1j * E * tau) - 1j * lam * F
    return out


def _bessel_tail(E: complex, lam: complex, taus: np.ndarray, W: float, tol: Tolerance) -> np.ndarray:
    """The same amplitude for Im E > 0, from G(t) = int_t^inf exp(iE(s - t)) J1(2Ws)/s ds.

    int_0^inf exp(iEs) J1(2Ws)/s ds = (sqrt(4W^2 - E^2) + iE)/(2W), and at a
    pole i lam times this is exactly one, so the amplitude reduces to i lam G(t)
    with no exponentially large cancellation.
    """
    k = _kernel(W)
    rest = 1.0 - 1j * lam * (np.sqrt(4 * W * W - E * E + 0j) + 1j * E) / (2 * W)
    if abs(rest) > 1e-8:
        raise DomainError("state is not a pole of this lead; Bessel tail form does not apply")
    out = np.empty(taus.size, dtype=complex)
    top = float(taus[-1])
    span = 40.0 / E.imag  # exp(-40) of the tail is left out
    G = quad_adaptive(lambda s: np.exp(1j * E * (s - top)) * k(s), top, top + span, tol,
                      panels=max(1, int(np.ceil(span * 2 * W))))
    nxt = top
    for i in range(taus.size - 1, -1, -1):
        tau = taus[i]
        if tau < nxt:
            piece = quad_adaptive(lambda s: np.exp(1j * E * (s - tau)) * k(s), tau, nxt, tol,
                                  panels=max(1, int(np.ceil((nxt - tau) * 2 * W))))
            G = piece + np.exp(1j * E * (nxt - tau)) * G
            nxt = tau
        out[i] = 1j * lam * G
    return out


def _bessel_amplitudes(E: complex, lam: complex, times: np.ndarray, W: float, tol: Tolerance) -> np.ndarray:
    """exp(-iEt)(1 - i lam int_0^t exp(iEs) J1(2Ws)/s ds) for all times.

    The kernel is even in s, so t < 0 is the t > 0 problem with E and lam
    negated. Each half then uses whichever direction keeps the integrand bounded.
    """
    out = np.ones(times.size, dtype=complex)
    for sign in (1.0, -1.0):
        sel = np.flatnonzero(sign * times > 0)
        if not sel.size:
            continue
        sel = sel[np.argsort(sign * times[sel])]
        Es, ls = sign * E, sign * lam
        fn = _bessel_tail if Es.imag > 0 else _bessel_forward
        out[sel] = fn(Es, ls, sign * times[sel], W, tol)
    return out


def survival_bessel(spec: QepSpectrum, psi0: np.ndarray, t, quad_tol: Tolerance = BESSEL_TOL) -> np.ndarray:
    """c_n(t) from the Bessel-kernel representation (no bound states allowed)."""
    times, scalar = _times(t)
    w = pole_weights(spec, psi0)
    idx = _active(spec, w)
    out = np.zeros((len(spec.pairs), times.size), dtype=complex)
    for n in idx:
        if spec.pairs[n].pole.kind in (Kind.BOUND, Kind.SCATTERING_EDGE):
            raise WrongKind("Bessel representation needs resonant, anti-resonant or anti-bound states")
    for n in idx:
        pair = spec.pairs[n]
        out[n] = w[n] * _bessel_amplitudes(complex(pair.E), complex(pair.lam), times, spec.model.W, quad_tol)
    return out[:, 0] if scalar else out


# ---------------------------------------------------------------------------
# brute-force propagation on a truncated chain


@dataclass(frozen=True, eq=False)
class ChainSpectrum:
    energies: np.ndarray   # eigenvalues of the closed chain
    system_rows: np.ndarray  # eigenvector components on the system sites, (N, n)
    M: int


def _chain_arrays(model: OpenLattice, M: int) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None, np.ndarray]:
    """Either (diag, offdiag) of a tridiagonal ordering or a dense matrix, plus system indices."""
    N, W = model.n_sites, model.W
    H = W * model.h_sys
    tri = np.allclose(np.triu(H, 2), 0.0) and len(model.leads) <= 2
    sites = sorted(l.site for l in model.leads)
    ends_ok = (len(sites) == 0 or (sites[0] in (0, N - 1) and sites[-1] in (0, N - 1))) and not (
        N == 1 and len(sites) > 1)
    if tri and ends_ok:
        left = [l for l in model.leads if l.site == 0]
        right = [l for l in model.leads if l.site == N - 1 and not (N == 1 and left)]
        nl = M if left else 0
        nr = M if right else 0
        d = np.concatenate((np.zeros(nl), np.diag(H), np.zeros(nr)))
        e = np.concatenate((
            np.full(max(nl - 1, 0), -W),
            [-left[0].w1] if left else [],
            np.diag(H, 1),
            [-right[0].w1] if right else [],
            np.full(max(nr - 1, 0), -W),
        ))
        return d, e, None, np.arange(nl, nl + N)
    n = N + M * len(model.leads)
    full = np.zeros((n, n))
    full[:N, :N] = H
    for k, l in enumerate(model.leads):
        start = N + k * M
        full[l.site, start] = full[start, l.site] = -l.w1
        idx = np.arange(start, start + M - 1)
        full[idx, idx + 1] = full[idx + 1, idx] = -W
    return None, None, full, np.arange(N)


@functools.lru_cache(maxsize=4)
def _chain_spectrum_cached(key: tuple, M: int, model_ref: "_Ref") -> ChainSpectrum:
    model = model_ref.model
    d, e, full, sys_idx = _chain_arrays(model, M)
    if full is None:
        ev, V = scipy.linalg.eigh_tridiagonal(d, e)
    else:
        ev, V = scipy.linalg.eigh(full)
    return ChainSpectrum(ev, np.ascontiguousarray(V[sys_idx, :]), M)


class _Ref:
    """Carries the model through the cache without taking part in the key."""

    def __init__(self, model: OpenLattice):
        self.model = model

    def __hash__(self) -> int:
        return 0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _Ref)


def chain_spectrum(model: OpenLattice, M: int) -> ChainSpectrum:
    """Diagonalise the closed chain once; repeated calls reuse the result."""
    if M < 3:
        raise DomainError("M must be at least 3")
    return _chain_spectrum_cached(model.key(), int(M), _Ref(model))


def oracle_amplitude_minus_one(model: OpenLattice, psi0: np.ndarray, t, M: int) -> np.ndarray:
    """<psi0|exp(-iHt)|psi0> - 1 on the closed chain, without cancellation at small t."""
    times, scalar = _times(t)
    if times.size and 2.0 * model.W * np.max(np.abs(times)) >= M - 2:
        raise LightConeViolation(f"M = {M} too small for |t| = {np.max(np.abs(times)):g}")
    psi0 = initial_state(psi0)
    cs = chain_spectrum(model, M)
    p = np.abs(psi0.conj() @ cs.system_rows) ** 2
    p = p / p.sum()
    out = np.empty(times.size, dtype=complex)
    for i0 in range(0, times.size, 256):
        tt = times[i0:i0 + 256]
        out[i0:i0 + 256] = p @ np.expm1(-1j * cs.energies[:, None] * tt[None, :])
    return out[0] if scalar else out


def oracle_survival(model: OpenLattice, psi0: np.ndarray, t, M: int, complement: bool = False):
    """|<psi0|exp(-iHt)|psi0>|^2 by exact diagonalisation of the closed chain.

    With ``complement=True`` returns 1 - P accurately (useful at short times).
    """
    d = oracle_amplitude_minus_one(model, psi0, t, M)
    loss = -2.0 * np.real(d) - np.abs(d) ** 2
    return loss if complement else 1.0 - loss


# ---------------------------------------------------------------------------
# asymptotics


def _chain_matrix(model: OpenLattice, M: int) -> tuple[np.ndarray, np.ndarray]:
    d, e, full, sys_idx = _chain_arrays(model, M)
    if full is None:
        full = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    return full, sys_idx


def short_time_expansion(model: OpenLattice, psi0: np.ndarray) -> float:
    """gamma^2 = <H^2> - <H>^2, so that P(t) = 1 - gamma^2 t^2 + O(t^4)."""
    psi0 = initial_state(psi0)
    H, sys_idx = _chain_matrix(model, 3)
    v = np.zeros(H.shape[0], dtype=complex)
    v[sys_idx] = psi0
    Hv = H @ v
    m1 = np.vdot(v, Hv).real
    m2 = np.vdot(Hv, Hv).real
    return float(m2 - m1 * m1)


def t_zero_estimate(pole: Pole, a: float = 1.0) -> complex:
    """(2 K a - pi)/E for a resonant state: minus the complex time at which the
    short-time approximation of the resonant amplitude vanishes."""
    if pole.kind is not Kind.RESONANT:
        raise WrongKind("t_zero_estimate needs a resonant state")
    return complex((2.0 * pole.K * a - np.pi) / pole.E)


def short_time_bracket(pole: Pole, t, W: float = 1.0) -> np.ndarray:
    """1 - (W lambda/E)(exp(iEt) - 1): the resonant amplitude with J1(x) ~ x/2."""
    lam = pole.lam if pole.lam is not None else np.exp(1j * pole.K)
    t = np.asarray(t, dtype=float)
    return 1.0 - (W * lam / pole.E) * (np.exp(1j * pole.E * t) - 1.0)


@dataclass
class TailFit:
    slope: float
    intercept: float
    curvature: float  # change of the local log-log slope across the window
    n_peaks: int
    rejected: bool


def envelope_peaks(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Indices of strict 3-point local maxima."""
    v = np.asarray(values)
    return np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1


def long_time_tail(
    times: np.ndarray,
    p_surv: np.ndarray,
    window: tuple[float, float],
    min_peaks: int = 8,
    max_curvature: float = 1.0,
) -> TailFit:
    """Least-squares slope of log(peak values) against log t inside ``window``.

    A quadratic fit in log t measures how much the local slope drifts over
    the window; drift above ``max_curvature`` marks the fit as rejected,
    since a power law has none.
    """
    times = np.asarray(times, dtype=float)
    p = np.asarray(p_surv, dtype=float)
    sel = (times >= window[0]) & (times <= window[1])
    t, v = times[sel], p[sel]
    pk = envelope_peaks(t, v)
    pk = pk[v[pk] > 0]
    if pk.size < max(min_peaks, 5):
        raise TooFewPeaks(f"{pk.size} envelope points in window {window}")
    x, y = np.log(t[pk]), np.log(v[pk])
    slope, intercept = np.polyfit(x, y, 1)
    c2 = np.polyfit(x, y, 2)[0]
    curvature = float(2.0 * c2 * (x.max() - x.min()))
    return TailFit(float(slope), float(intercept), curvature, int(pk.size), abs(curvature) > max_curvature)


def memory_kernel(t: float, W: float = 1.0, a: float = 1.0) -> float:
    """int_{-pi/a}^{pi/a} sin^2(ka) exp(2iWt cos(ka)) dk = (pi/(W a)) J1(2Wt)/t.

    The lead returns amplitude to the system through this kernel. For a lead
    with linear dispersion the same integral collapses to a delta function in
    t, which is the memoryless (Markovian) limit.
    """
    if t == 0:
        raise DomainError("use memory_kernel_at_zero for t = 0")
    return float(np.pi / (W * a) * bessel_j1(2.0 * W * t) / t)


def memory_kernel_at_zero(a: float = 1.0) -> float:
    return float(np.pi / a)


def zeno_product(gamma2: float, T: float, N: int) -> float:
    """(1 - gamma^2 T^2 / N^2)^N: survival after N equally spaced measurements."""
    if N < 1:
        raise DomainError("N must be at least 1")
    base = 1.0 - gamma2 * T * T / (N * N)
    if base <= 0:
        raise DomainError("measurement interval too long for the quadratic law")
    return float(np.exp(N * np.log1p(-gamma2 * T * T / (N * N))))


# ---------------------------------------------------------------------------
# time series


@dataclass
class SurvivalSeries:
    times: np.ndarray
    poles: list[Pole]
    c: np.ndarray  # (n_poles, T)
    p_oracle: np.ndarray | None = None
    labels: list[int] = field(default_factory=list)

    @property
    def total(self) -> np.ndarray:
        return self.c.sum(axis=0)

    @property
    def p_surv(self) -> np.ndarray:
        return np.abs(self.total) ** 2

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        head = ["t"]
        for k in range(len(self.poles)):
            head += [f"Re_c{k + 1}", f"Im_c{k + 1}"]
        head.append("P_surv")
        if self.p_oracle is not None:
            head.append("P_oracle")
        wr.writerow(head)
        ps = self.p_surv
        for i, t in enumerate(self.times):
            row = [f"{t:.17g}"]
            for k in range(len(self.poles)):
                row += [f"{self.c[k, i].real:.17g}", f"{self.c[k, i].imag:.17g}"]
            row.append(f"{ps[i]:.17g}")
            if self.p_oracle is not None:
                row.append(f"{self.p_oracle[i]:.17g}")
            wr.writerow(row)
        return buf.getvalue()


def survival_series(
    spec: QepSpectrum,
    psi0: np.ndarray,
    times: Sequence[float],
    method: str = "k",
    oracle_M: int | None = None,
    quad_tol: Tolerance | None = None,
) -> SurvivalSeries:
    psi0 = initial_state(psi0)
    times = np.asarray(times, dtype=float)
    if method == "k":
        c = survival_k_integral(spec, psi0, times, quad_tol or K_INTEGRAL_TOL)
    elif method == "bessel":
        c = survival_bessel(spec, psi0, times, quad_tol or BESSEL_TOL)
    else:
        raise DomainError(f"unknown method {method!r}")
    c = np.atleast_2d(c.T).T if c.ndim == 1 else c
    p_or = None if oracle_M is None else oracle_survival(spec.model, psi0, times, oracle_M)
    return SurvivalSeries(times, [p.pole for p in spec.pairs], c, p_or)
