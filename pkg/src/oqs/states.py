"""Discrete eigenstate records shared by the continuum and lattice models."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Kind(str, Enum):
    BOUND = "Bound"
    ANTI_BOUND = "AntiBound"
    RESONANT = "Resonant"
    ANTI_RESONANT = "AntiResonant"
    SCATTERING_EDGE = "ScatteringEdge"


class Parity(str, Enum):
    EVEN = "Even"
    ODD = "Odd"
    NONE = "None"


_KIND_ORDER = {Kind.RESONANT: 0, Kind.ANTI_RESONANT: 1, Kind.BOUND: 2, Kind.ANTI_BOUND: 3,
               Kind.SCATTERING_EDGE: 4}
_PARITY_ORDER = {Parity.EVEN: 0, Parity.ODD: 1, Parity.NONE: 2}


@dataclass(frozen=True)
class Pole:
    """One discrete eigenstate.

    ``K`` is the eigen-wave-number and ``E`` the eigenvalue. For lattice poles
    ``lam`` holds the Bloch factor exp(iKa); for continuum poles it is None and
    ``xi_eta`` gives the dimensionless K*ell.
    """

    K: complex
    E: complex
    kind: Kind
    parity: Parity = Parity.NONE
    lam: complex | None = None
    ell: float = 1.0

    @property
    def xi_eta(self) -> complex:
        return self.K * self.ell

    def sort_key(self) -> tuple:
        return (_PARITY_ORDER[self.parity], _KIND_ORDER[self.kind], abs(self.K.real), self.K.imag)

    def as_dict(self) -> dict:
        out = {
            "K": [self.K.real, self.K.imag],
            "E": [self.E.real, self.E.imag],
            "kind": self.kind.value,
            "parity": self.parity.value,
        }
        if self.lam is not None:
            out["lambda"] = [self.lam.real, self.lam.imag]
        return out
