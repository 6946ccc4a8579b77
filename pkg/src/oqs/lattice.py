"""Tight-binding dimer between two semi-infinite leads.

Lead sites have hopping -W. The two system sites carry on-site energy V0,
are coupled to each other by -W1 and to the leads by -W1. Dimensionless
parameters are v0 = V0/W, w1 = W1/W and theta = 1 - w1^2. A discrete state
is labelled by lambda = exp(iKa), with E = -W(lambda + 1/lambda).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCoupling, DomainError
from .states import Kind, Parity, Pole

REAL_TOL = 1e-12


@dataclass(frozen=True)
class DimerModel:
    v0: float
    w1: float
    W: float = 1.0
    a: float = 1.0

    def __post_init__(self) -> None:
        if not self.w1 > 0:
            raise DomainError("w1 must be positive")
        if not (self.W > 0 and self.a > 0):
            raise DomainError("W and a must be positive")

    @property
    def theta(self) -> float:
        return 1.0 - self.w1 * self.w1


def lattice_dispersion(lam: complex, W: float = 1.0, a: float = 1.0) -> tuple[complex, complex]:
    """Wave number (first Brillouin zone) and energy for lambda = exp(iKa)."""
    lam = complex(lam)
    if lam == 0:
        raise DomainError("lambda = 0 has no wave number")
    K = -1j * np.log(lam) / a
    if K.real <= -np.pi / a:  # principal log gives Re K in [-pi/a, pi/a]; keep the right edge
        K += 2 * np.pi / a
    return complex(K), complex(-W * (lam + 1.0 / lam))


def classify_lambda(lam: complex) -> Kind:
    r = abs(lam)
    if abs(lam.imag) <= REAL_TOL * max(r, 1.0):
        if abs(r - 1.0) <= REAL_TOL:
            return Kind.SCATTERING_EDGE
        return Kind.BOUND if r < 1.0 else Kind.ANTI_BOUND
    if r < 1.0 - 1e-9:
        raise DomainError(f"lambda = {lam} inside the unit circle off the real axis")
    if r <= 1.0 + 1e-9:
        # on the unit circle: a state decoupled from the leads, embedded in the band
        return Kind.BOUND
    return Kind.RESONANT if lam.imag > 0 else Kind.ANTI_RESONANT


def lattice_pole(lam: complex, W: float = 1.0, a: float = 1.0, parity: Parity = Parity.NONE) -> Pole:
    lam = complex(lam)
    if abs(lam.imag) <= REAL_TOL * max(abs(lam), 1.0):
        lam = complex(lam.real, 0.0)
    K, E = lattice_dispersion(lam, W, a)
    return Pole(K=K, E=E, kind=classify_lambda(lam), parity=parity, lam=lam)


def lattice_transfer_t11(model: DimerModel, lam: complex) -> complex:
    """T11 as a function of lambda; its zeros are the discrete states."""
    lam = complex(lam)
    if lam == 0 or abs(lam * lam - 1) == 0:
        raise DomainError("T11 undefined at lambda in {0, 1, -1}")
    th, v0, w1 = model.theta, model.v0, model.w1
    return ((th * lam**2 + (v0 + w1) * lam + 1) * (th * lam**2 + (v0 - w1) * lam + 1)
            / (w1**3 * (lam**2 - 1)))


def lattice_transmission(model: DimerModel, k: float) -> float:
    """Transmission probability at real wave number k (0 < k a < pi)."""
    lam = np.exp(1j * k * model.a)
    return float(1.0 / abs(lattice_transfer_t11(model, lam)) ** 2)


def _quadratic_roots(A: float, B: float, C: float) -> tuple[complex, complex]:
    """Roots of A x^2 + B x + C without cancellation."""
    disc = np.sqrt(complex(B * B - 4 * A * C))
    s = 1.0 if (np.conj(B) * disc).real >= 0 else -1.0
    q = -0.5 * (B + s * disc)
    if q == 0:
        return 0j, 0j
    return complex(q / A), complex(C / q)


def dimer_poles(model: DimerModel) -> list[Pole]:
    """The four discrete states: two even (theta l^2 + (v0 - w1) l + 1 = 0) and
    two odd (theta l^2 + (v0 + w1) l + 1 = 0)."""
    th = model.theta
    if abs(th) <= 1e-12:
        raise DegenerateCoupling("theta = 1 - w1^2 vanishes: transparent contact")
    poles = []
    for parity, b in ((Parity.EVEN, model.v0 - model.w1), (Parity.ODD, model.v0 + model.w1)):
        for lam in _quadratic_roots(th, b, 1.0):
            poles.append(lattice_pole(lam, model.W, model.a, parity))
    poles.sort(key=lambda p: (p.sort_key()[:2], p.lam.real))
    return poles


@dataclass
class SweepRow:
    v0: float
    poles: list[Pole]
    collisions: list[tuple[int, int]] = field(default_factory=list)


def pole_sweep(template: DimerModel, v0_range: tuple[float, float], steps: int) -> list[SweepRow]:
    """Dimer poles along a v0 sweep, with labels kept continuous by nearest-lambda matching.

    Pairs closer than 1e-6 in lambda are flagged; they mark the square-root
    branch points where a resonant pair turns into two real solutions.
    """
    if steps < 2:
        raise DomainError("steps must be at least 2")
    rows: list[SweepRow] = []
    prev: list[Pole] | None = None
    for v0 in np.linspace(v0_range[0], v0_range[1], steps):
        m = DimerModel(float(v0), template.w1, template.W, template.a)
        poles = dimer_poles(m)
        if prev is not None:
            lam_prev = np.array([p.lam for p in prev])
            best = min(
                itertools.permutations(range(4)),
                key=lambda perm: sum(abs(poles[j].lam - lam_prev[i]) for i, j in enumerate(perm)),
            )
            poles = [poles[j] for j in best]
        coll = [(i, j) for i, j in itertools.combinations(range(4), 2)
                if abs(poles[i].lam - poles[j].lam) < 1e-6]
        rows.append(SweepRow(float(v0), poles, coll))
        prev = poles
    return rows
