"""Effective Hamiltonian of a finite block coupled to semi-infinite leads.

Projecting out the leads leaves an energy-dependent, non-Hermitian operator
on the system sites,

    H_eff(lambda) = W h_sys + Sigma(lambda),

where each lead-attached site s picks up Sigma_s = -(W1_s^2 / W) lambda
(retarded branch, outgoing waves) or lambda^{-1} (advanced branch). Energies
and K are tied to lambda by E = -W(lambda + 1/lambda), lambda = exp(iKa).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from .continuum import ContinuumModel
from .errors import BadGrid, DomainError, SingularTruncation
from .lattice import DimerModel


class Branch(str, Enum):
    RETARDED = "Retarded"
    ADVANCED = "Advanced"


@dataclass(frozen=True)
class Lead:
    site: int
    w1: float  # coupling to the first lead site, in energy units


@dataclass(frozen=True, eq=False)
class OpenLattice:
    """System block ``h_sys`` (in units of W) with single-channel leads.

    At most one lead per site; every lead has hopping W.
    """

    h_sys: np.ndarray
    leads: tuple[Lead, ...]
    W: float = 1.0
    a: float = 1.0

    def __post_init__(self) -> None:
        h = np.array(self.h_sys, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] == 0:
            raise DomainError("h_sys must be a non-empty square matrix")
        if not np.all(np.isfinite(h)):
            raise DomainError("h_sys has non-finite entries")
        if np.max(np.abs(h - h.T)) > 1e-12:
            raise DomainError("h_sys must be symmetric")
        object.__setattr__(self, "h_sys", h)
        leads = tuple(Lead(int(l.site), float(l.w1)) for l in self.leads)
        sites = [l.site for l in leads]
        if len(set(sites)) != len(sites):
            raise DomainError("at most one lead per site")
        if any(not 0 <= s < h.shape[0] for s in sites):
            raise DomainError("lead site out of range")
        if not (self.W > 0 and self.a > 0):
            raise DomainError("W and a must be positive")
        object.__setattr__(self, "leads", leads)

    @property
    def n_sites(self) -> int:
        return self.h_sys.shape[0]

    @property
    def theta(self) -> np.ndarray:
        th = np.eye(self.n_sites)
        for l in self.leads:
            th[l.site, l.site] -= (l.w1 / self.W) ** 2
        return th

    def key(self) -> tuple:
        return (self.h_sys.tobytes(), self.h_sys.shape, self.leads, self.W, self.a)

    def to_json(self) -> dict[str, Any]:
        return {
            "n_sites": self.n_sites,
            "h_sys": self.h_sys.tolist(),
            "leads": [{"site": l.site, "w1": l.w1} for l in self.leads],
            "W": self.W,
            "a": self.a,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any] | str) -> "OpenLattice":
        if isinstance(data, str):
            data = json.loads(data)
        h = np.asarray(data["h_sys"], dtype=float)
        if h.shape != (data["n_sites"], data["n_sites"]):
            raise DomainError("n_sites does not match h_sys")
        leads = tuple(Lead(d["site"], d["w1"]) for d in data.get("leads", []))
        return cls(h, leads, float(data.get("W", 1.0)), float(data.get("a", 1.0)))


def dimer_lattice(model: DimerModel) -> OpenLattice:
    """The two-site system with a lead on each site."""
    h = np.array([[model.v0, -model.w1], [-model.w1, model.v0]])
    w1 = model.w1 * model.W
    return OpenLattice(h, (Lead(0, w1), Lead(1, w1)), model.W, model.a)


def self_energy(w1: float, W: float, lam: complex, branch: Branch = Branch.RETARDED) -> complex:
    lam = complex(lam)
    if lam == 0:
        raise DomainError("lambda = 0")
    p = lam if branch is Branch.RETARDED else 1.0 / lam
    return -(w1 * w1 / W) * p


def effective_hamiltonian(model: OpenLattice, lam: complex, branch: Branch = Branch.RETARDED) -> np.ndarray:
    H = model.W * model.h_sys.astype(complex)
    for l in model.leads:
        H[l.site, l.site] += self_energy(l.w1, model.W, lam, branch)
    return H


def energy_of(lam: complex, W: float) -> complex:
    lam = complex(lam)
    if lam == 0:
        raise DomainError("lambda = 0")
    return -W * (lam + 1.0 / lam)


def pole_determinant(model: OpenLattice, lam: complex) -> complex:
    """det(H_eff(lambda) - E(lambda)); zero at every discrete state."""
    E = energy_of(lam, model.W)
    return complex(np.linalg.det(effective_hamiltonian(model, lam) - E * np.eye(model.n_sites)))


# ---------------------------------------------------------------------------
# lead Green's function


def lead_green_truncated(E: complex, W: float, M: int) -> complex:
    """Surface element of (E - H_lead)^{-1} for a lead cut after M sites.

    Continued fraction G1 = 1/E, Gm = 1/(E - W^2 G_{m-1}).
    """
    if M < 2:
        raise DomainError("M must be at least 2")
    E = complex(E)
    if E == 0:
        raise SingularTruncation("first denominator vanishes")
    G = 1.0 / E
    W2 = W * W
    for _ in range(M - 1):
        d = E - W2 * G
        if abs(d) <= 1e-300 or abs(d) <= 1e-15 * (abs(E) + W2 * abs(G)):
            raise SingularTruncation("continued-fraction denominator vanishes")
        G = 1.0 / d
    return complex(G)


def lead_lambda(E: complex, W: float, branch: Branch = Branch.RETARDED) -> complex:
    """lambda = exp(iKa) solving E = -W(lambda + 1/lambda) on the requested branch.

    Retarded: the root decaying into the lead (|lambda| < 1) for Im E > 0,
    continued to Im E < 0; in the band (real E) the root with Im lambda > 0.
    Advanced is its reciprocal.
    """
    E = complex(E)
    disc = np.sqrt(E * E - 4 * W * W + 0j)
    r1 = (-E + disc) / (2 * W)
    r2 = (-E - disc) / (2 * W)
    inner, outer = (r1, r2) if abs(r1) <= abs(r2) else (r2, r1)
    if E.imag > 0:
        lam = inner
    elif E.imag < 0:
        lam = outer
    elif abs(E.real) < 2 * W:
        lam = r1 if r1.imag > 0 else r2
    else:
        lam = inner
    return complex(lam if branch is Branch.RETARDED else 1.0 / lam)


def lead_green_closed(E: complex, W: float, branch: Branch = Branch.RETARDED) -> complex:
    """Semi-infinite lead surface Green's function, -lambda/W = -exp(+-iKa)/W."""
    return -lead_lambda(E, W, branch) / W


# ---------------------------------------------------------------------------
# discretised continuum


@dataclass(frozen=True)
class DiscretizedContinuum:
    lattice: OpenLattice
    shift: float  # Schrodinger energy = lattice energy + shift
    n_per_ell: int


def discretize_continuum(model: ContinuumModel, a: float) -> DiscretizedContinuum:
    """Finite-difference version of the triple-delta problem.

    Sites x_n = n a for |n| <= ell/a, hbar^2/(2m) = 1 so W = 1/a^2. A delta of
    weight s becomes an on-site term s/a. The free continuum outside is a lead
    with hopping W attached to each boundary site by W1 = W. Energies are
    measured from the band centre 2W, i.e. h_sys = (H - 2W)/W.
    """
    ell = 1.0
    ratio = ell / a
    n = int(round(ratio))
    if abs(ratio - n) > 1e-9 * max(ratio, 1.0) or n < 1:
        raise BadGrid("ell/a must be a positive integer")
    if n < 4:
        raise BadGrid("a must not exceed ell/4")
    a = ell / n
    W = 1.0 / a**2
    N = 2 * n + 1
    onsite = np.zeros(N)
    # V = -2 alpha0 delta(x) + 2 alpha1 [delta(x+1) + delta(x-1)] with hbar^2/2m = 1
    onsite[n] += -2.0 * model.alpha0 / a
    onsite[0] += 2.0 * model.alpha1 / a
    onsite[-1] += 2.0 * model.alpha1 / a
    h = np.diag(onsite / W) - np.eye(N, k=1) - np.eye(N, k=-1)
    lat = OpenLattice(h, (Lead(0, W), Lead(N - 1, W)), W, a)
    return DiscretizedContinuum(lat, 2.0 * W, n)


def discretized_pole_near(model: ContinuumModel, a: float, target: complex) -> complex:
    """K of the discretised state closest to ``target`` (lambda = exp(iKa))."""
    from .qep import qep_eigenvalues  # qep imports this module

    lat = discretize_continuum(model, a).lattice
    lams = qep_eigenvalues(lat)
    Ks = -1j * np.log(lams) / lat.a
    return complex(Ks[np.argmin(np.abs(Ks - target))])


def convergence_order(spacings: list[float], errors: list[float]) -> float:
    """Least-squares slope of log(error) against log(a)."""
    if len(spacings) < 2 or len(spacings) != len(errors):
        raise DomainError("need at least two matching spacings and errors")
    if min(errors) <= 0:
        raise DomainError("errors must be positive")
    return float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])
