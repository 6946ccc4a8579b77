"""Quadratic eigenvalue problem for the discrete states of an open lattice.

The states solve [Theta lambda^2 + H_sys lambda + I] psi = 0 (H_sys in units
of W). With Psi = (psi, lambda psi) this becomes the symmetric pencil

    A Psi = lambda B Psi,  A = [[0, I], [I, H_sys]],  B = [[I, 0], [0, -Theta]].

Both blocks are symmetric, so left eigenvectors are plain transposes and the
2N right vectors can be normalised to Psi_m^T B Psi_n = delta_mn. The upper
blocks then satisfy sum_n psi_n psi_n^T = I.

A is always invertible (A^{-1} = [[-H, I], [I, 0]]), so we diagonalise
A^{-1} B, whose eigenvalues are 1/lambda. A singular Theta shows up as zero
eigenvalues (lambda at infinity) instead of breaking the reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoupling, DegenerateSpectrum, DomainError, PoleHit
from .feshbach import OpenLattice, effective_hamiltonian, energy_of
from .lattice import lattice_pole
from .numerics import eig_dense
from .states import Parity, Pole


@dataclass(frozen=True)
class Pencil:
    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class QepPair:
    lam: complex
    psi: np.ndarray
    pole: Pole

    @property
    def K(self) -> complex:
        return self.pole.K

    @property
    def E(self) -> complex:
        return self.pole.E


@dataclass(frozen=True)
class QepSpectrum:
    model: OpenLattice
    pairs: tuple[QepPair, ...]

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    @property
    def vectors(self) -> np.ndarray:
        """N x 2N matrix whose columns are the normalised psi_n."""
        return np.column_stack([p.psi for p in self.pairs])

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "pairs": [
                {**p.pole.as_dict(), "psi": [[z.real, z.imag] for z in p.psi]}
                for p in self.pairs
            ],
        }


def pencil(model: OpenLattice) -> Pencil:
    N = model.n_sites
    I, Z = np.eye(N), np.zeros((N, N))
    A = np.block([[Z, I], [I, model.h_sys]])
    B = np.block([[I, Z], [Z, -model.theta]])
    return Pencil(A, B)


def _companion(model: OpenLattice) -> np.ndarray:
    """A^{-1} B = [[-H, -Theta], [I, 0]]; its eigenvalues are 1/lambda."""
    N = model.n_sites
    return np.block([[-model.h_sys, -model.theta], [np.eye(N), np.zeros((N, N))]])


def _deflate_zero(C: np.ndarray, rtol: float = 1e-11) -> np.ndarray:
    """Restrict C to a complement of its generalised null space.

    A singular Theta gives mu = 0 with Jordan blocks that can be long (a
    boundary site with no potential and W1 = W is indistinguishable from the
    lead). Rounding splits such a block into a ring of spurious eigenvalues of
    radius eps^(1/size), so the null space of C^k is removed first. It is
    invariant under C, which makes the projected matrix exact for the
    remaining eigenvalues.
    """
    n = C.shape[0]
    P = np.eye(n)
    nullity, keep = 0, np.eye(n)
    for _ in range(n):
        P = P @ C
        _, s, Vh = np.linalg.svd(P)
        r = int(np.sum(s > rtol * max(s[0], 1.0)))
        if n - r == nullity:
            break
        nullity, keep = n - r, Vh[:r].conj().T
    if nullity == 0:
        return C
    return keep.conj().T @ C @ keep


def qep_eigenvalues(model: OpenLattice) -> np.ndarray:
    """All finite lambda, also for singular Theta (infinite ones dropped)."""
    C = _deflate_zero(_companion(model))
    if C.size == 0:
        return np.zeros(0, dtype=complex)
    mu, _ = eig_dense(C)
    return 1.0 / mu


def _parity(model: OpenLattice, psi: np.ndarray) -> Parity:
    J = np.eye(model.n_sites)[::-1]
    if not (np.allclose(J @ model.h_sys @ J, model.h_sys, atol=1e-12)
            and np.allclose(J @ model.theta @ J, model.theta, atol=1e-12)):
        return Parity.NONE
    s = psi @ (J @ psi) / (psi @ psi)
    if abs(s - 1) < 1e-6:
        return Parity.EVEN
    if abs(s + 1) < 1e-6:
        return Parity.ODD
    return Parity.NONE


def qep_solve(model: OpenLattice) -> QepSpectrum:
    """All 2N discrete states with biorthonormal right vectors."""
    theta = model.theta
    if np.linalg.cond(theta) > 1e10:
        raise DegenerateCoupling("Theta is singular: some lead couples with W1 = W")
    N = model.n_sites
    mu, V = eig_dense(_companion(model))
    lam = 1.0 / mu
    gaps = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(2 * N, np.inf))
    # rounding splits a double root by about sqrt(eps), so look well above that
    if np.min(gaps) < 1e-6 * max(1.0, np.max(np.abs(lam))):
        raise DegenerateSpectrum("coalescing eigenvalues; use the exceptional-point tracker")

    H = model.h_sys
    pairs = []
    for n in range(2 * N):
        upper, lower = V[:N, n], V[N:, n]
        # eigenvector of A^{-1}B is (psi, lambda psi) up to scale; take the better-conditioned half
        psi = upper if np.linalg.norm(upper) >= np.linalg.norm(lower) else lower
        l = lam[n]
        # one step of inverse iteration on the quadratic tightens the vector
        Q = theta * l * l + H * l + np.eye(N)
        try:
            psi2 = np.linalg.solve(Q + 1e-14 * np.linalg.norm(Q) * np.eye(N), psi)
            if np.all(np.isfinite(psi2)):
                psi = psi2
        except np.linalg.LinAlgError:
            pass
        norm2 = psi @ psi - l * l * (psi @ (theta @ psi))
        if abs(norm2) < 1e-14 * np.linalg.norm(psi) ** 2 * max(1.0, abs(l) ** 2):
            raise DegenerateSpectrum("self-orthogonal eigenvector (exceptional point)")
        psi = psi.astype(complex) / np.sqrt(complex(norm2))
        k = np.argmax(np.abs(psi))
        ang = np.angle(psi[k])
        if not (-np.pi / 2 < ang <= np.pi / 2):
            psi = -psi
        pole = lattice_pole(l, model.W, model.a, _parity(model, psi))
        pairs.append(QepPair(complex(l), psi, pole))
    pairs.sort(key=lambda p: (p.pole.sort_key()[:2], p.lam.real, p.lam.imag))
    return QepSpectrum(model, tuple(pairs))


def qep_residual(spec: QepSpectrum) -> float:
    """max_n ||(Theta l^2 + H l + I) psi_n||."""
    H, th, N = spec.model.h_sys, spec.model.theta, spec.model.n_sites
    return max(
        float(np.linalg.norm((th * p.lam**2 + H * p.lam + np.eye(N)) @ p.psi)) for p in spec.pairs
    )


def completeness_check(spec: QepSpectrum, pairs: list[int] | None = None) -> float:
    """Frobenius norm of sum_n psi_n psi_n^T - I (plain transpose)."""
    U = spec.vectors
    if pairs is not None:
        U = U[:, pairs]
    return float(np.linalg.norm(U @ U.T - np.eye(spec.model.n_sites)))


def _big_vectors(spec: QepSpectrum) -> np.ndarray:
    U = spec.vectors
    return np.vstack((U, U * spec.lambdas[None, :]))


def orthogonality_check(spec: QepSpectrum, conjugate: bool = False) -> tuple[float, float]:
    """Largest deviations of Psi^T A Psi from diag(lambda) and of Psi^T B Psi from I.

    ``conjugate=True`` uses the Hermitian adjoint instead of the transpose,
    which is the wrong pairing for this non-Hermitian problem.
    """
    P = _big_vectors(spec)
    L = P.conj().T if conjugate else P.T
    pen = pencil(spec.model)
    dA = np.max(np.abs(L @ pen.A @ P - np.diag(spec.lambdas)))
    dB = np.max(np.abs(L @ pen.B @ P - np.eye(P.shape[1])))
    return float(dA), float(dB)


def resolvent_expansion(spec: QepSpectrum, lam: complex) -> np.ndarray:
    """(E - H_eff)^{-1} on the system from the discrete states alone:
    (1/W) sum_n psi_n psi_n^T / (1/lambda_n - 1/lambda)."""
    lam = complex(lam)
    if lam == 0:
        raise DomainError("lambda = 0")
    ls = spec.lambdas
    if np.min(np.abs(ls - lam)) < 1e-10:
        raise PoleHit("lambda coincides with an eigenvalue")
    U = spec.vectors
    w = 1.0 / (1.0 / ls - 1.0 / lam)
    return (U * w[None, :]) @ U.T / spec.model.W


def resolvent_direct(model: OpenLattice, lam: complex) -> np.ndarray:
    E = energy_of(lam, model.W)
    return np.linalg.inv(E * np.eye(model.n_sites) - effective_hamiltonian(model, lam))


def qep_matrix(model: OpenLattice, lam: complex) -> np.ndarray:
    return model.theta * lam * lam + model.h_sys * lam + np.eye(model.n_sites)
