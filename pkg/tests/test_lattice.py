import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oqs.errors import DegenerateCoupling, DomainError
from oqs.feshbach import dimer_lattice, pole_determinant
from oqs.lattice import (
    DimerModel,
    classify_lambda,
    dimer_poles,
    lattice_dispersion,
    lattice_transfer_t11,
    lattice_transmission,
    pole_sweep,
)
from oqs.states import Kind, Parity

S11 = np.sqrt(11.0)


def test_dispersion_band_edges():
    K, E = lattice_dispersion(1.0)
    assert K == 0 and E == -2
    K, E = lattice_dispersion(-1.0)
    assert abs(K - np.pi) < 1e-15 and abs(E - 2) < 1e-15


def test_dispersion_reference_dimer():
    K, E = lattice_dispersion((1 + 1j * S11) / 3)
    assert abs(K - (1.277953555066321 - 0.14384103622589j)) < 1e-12
    assert abs(E - (-7 - 1j * S11) / 12) < 1e-15


def test_dispersion_zero():
    with pytest.raises(DomainError):
        lattice_dispersion(0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 20), st.floats(-np.pi + 1e-6, np.pi))
def test_dispersion_brillouin_zone(r, phi):
    lam = r * np.exp(1j * phi)
    K, E = lattice_dispersion(lam, 1.3, 0.7)
    assert -np.pi / 0.7 < K.real <= np.pi / 0.7 + 1e-12
    assert abs(np.exp(1j * K * 0.7) - lam) < 1e-12 * max(1, r)
    assert abs(E + 1.3 * (lam + 1 / lam)) < 1e-12 * max(r, 1 / r)


def test_reference_dimer_poles():
    poles = dimer_poles(DimerModel(0.0, 0.5))
    want = [
        ((1 + 1j * S11) / 3, Kind.RESONANT, Parity.EVEN),
        ((1 - 1j * S11) / 3, Kind.ANTI_RESONANT, Parity.EVEN),
        ((-1 + 1j * S11) / 3, Kind.RESONANT, Parity.ODD),
        ((-1 - 1j * S11) / 3, Kind.ANTI_RESONANT, Parity.ODD),
    ]
    for p, (lam, kind, par) in zip(poles, want):
        assert abs(p.lam - lam) < 1e-15 and p.kind is kind and p.parity is par
    assert abs(poles[0].E - (-7 - 1j * S11) / 12) < 1e-15


def test_t11_vanishes_at_reference_pole():
    m = DimerModel(0.0, 0.5)
    assert abs(lattice_transfer_t11(m, (1 + 1j * S11) / 3)) < 1e-14


def test_transparent_contact():
    m = DimerModel(0.0, 1.0)
    for k in np.linspace(0.01, np.pi - 0.01, 100):
        assert abs(abs(lattice_transfer_t11(m, np.exp(1j * k))) - 1) < 1e-12
        assert abs(lattice_transmission(m, k) - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-4, 4), st.floats(0.05, 0.99), st.floats(0.01, np.pi - 0.01))
def test_transmission_is_a_probability(v0, w1, k):
    assert 0 <= lattice_transmission(DimerModel(v0, w1), k) <= 1 + 1e-10


def test_t11_domain():
    with pytest.raises(DomainError):
        lattice_transfer_t11(DimerModel(0, 0.5), 1.0)


def test_deep_well_all_bound_or_antibound():
    poles = dimer_poles(DimerModel(-3.0, 0.5))
    assert all(p.lam.imag == 0 and p.lam.real > 0 for p in poles)
    assert {p.kind for p in poles} == {Kind.BOUND, Kind.ANTI_BOUND}
    assert all(p.E.real < 0 for p in poles)


def test_high_barrier_zone_edge():
    poles = dimer_poles(DimerModel(3.0, 0.5))
    assert all(p.lam.real < 0 and p.lam.imag == 0 for p in poles)
    assert all(abs(p.K.real - np.pi) < 1e-12 and p.E.real > 0 for p in poles)


def test_degenerate_coupling():
    with pytest.raises(DegenerateCoupling):
        dimer_poles(DimerModel(0.0, 1.0))


@settings(max_examples=60, deadline=None)
@given(st.floats(-4, 4), st.floats(0.05, 1.5).filter(lambda w: abs(w - 1) > 1e-3))
def test_poles_zero_effective_determinant(v0, w1):
    model = dimer_lattice(DimerModel(v0, w1))
    for p in dimer_poles(DimerModel(v0, w1)):
        assert abs(pole_determinant(model, p.lam)) < 1e-10 * max(1, abs(p.lam) ** 2, abs(1 / p.lam) ** 2)


@settings(max_examples=60, deadline=None)
@given(st.floats(-4, 4), st.floats(0.05, 0.95))
def test_conjugation_and_sublattice_symmetry(v0, w1):
    lams = np.array([p.lam for p in dimer_poles(DimerModel(v0, w1))])
    flipped = np.array([p.lam for p in dimer_poles(DimerModel(-v0, w1))])
    for lam in lams:
        assert np.min(np.abs(lams - np.conj(lam))) < 1e-10 * max(1, abs(lam))
        assert np.min(np.abs(flipped + lam)) < 1e-10 * max(1, abs(lam))


def test_classify_lambda():
    assert classify_lambda(0.5 + 0j) is Kind.BOUND
    assert classify_lambda(2.0 + 0j) is Kind.ANTI_BOUND
    assert classify_lambda(1.0 + 0j) is Kind.SCATTERING_EDGE
    assert classify_lambda(1 + 1j) is Kind.RESONANT
    assert classify_lambda(1 - 1j) is Kind.ANTI_RESONANT
    with pytest.raises(DomainError):
        classify_lambda(0.3 + 0.3j)


@pytest.fixture(scope="module")
def sweep():
    return pole_sweep(DimerModel(0.0, 0.5), (-3.0, 3.0), 601)


def test_sweep_resonant_window(sweep):
    theta = 0.75
    for row in sweep:
        for p in row.poles:
            b = row.v0 - 0.5 if p.parity is Parity.EVEN else row.v0 + 0.5
            complex_pair = abs(b) < 2 * np.sqrt(theta) - 1e-9
            assert (abs(p.lam.imag) > 0) == complex_pair


def test_sweep_resonant_arc(sweep):
    for row in sweep:
        for p in row.poles:
            if p.kind in (Kind.RESONANT, Kind.ANTI_RESONANT):
                assert abs(abs(p.lam) - 0.75**-0.5) < 1e-12
                assert abs(p.K.imag - 0.5 * np.log(0.75)) < 1e-12


def test_sweep_continuity(sweep):
    for a, b in zip(sweep, sweep[1:]):
        jumps = [abs(p.lam - q.lam) for p, q in zip(a.poles, b.poles)]
        assert max(jumps) < 0.5


def test_sweep_flags_branch_points():
    # the even pair collides where v0 - w1 = -2 sqrt(theta)
    v0 = 0.5 - 2 * np.sqrt(0.75)
    rows = pole_sweep(DimerModel(0.0, 0.5), (v0, v0 + 0.1), 3)
    assert rows[0].collisions and not rows[-1].collisions


def test_sweep_needs_two_steps():
    with pytest.raises(DomainError):
        pole_sweep(DimerModel(0.0, 0.5), (0, 1), 1)
