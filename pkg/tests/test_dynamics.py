import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import j1

from oqs.errors import DomainError, LightConeViolation, TooFewPeaks, WrongKind
from oqs.feshbach import dimer_lattice
from oqs.lattice import DimerModel
from oqs.qep import qep_solve
from oqs.dynamics import (
    initial_state,
    long_time_tail,
    memory_kernel,
    memory_kernel_at_zero,
    oracle_survival,
    pole_weights,
    short_time_bracket,
    short_time_expansion,
    survival_bessel,
    survival_k_integral,
    survival_series,
    t_zero_estimate,
    zeno_product,
)
from oqs.states import Kind, Parity

T0 = 1.0107864594868907 + 0.01425506287594097j


def even_pair(spec):
    """Indices of the resonant and anti-resonant even states."""
    res = next(i for i, p in enumerate(spec.pairs) if p.pole.kind is Kind.RESONANT and p.pole.parity is Parity.EVEN)
    anti = next(i for i, p in enumerate(spec.pairs)
                if p.pole.kind is Kind.ANTI_RESONANT and p.pole.parity is Parity.EVEN)
    return res, anti


@pytest.fixture(scope="module")
def amps(dimer_spec, psi_even):
    t = np.linspace(-20, 20, 81)
    return t, survival_k_integral(dimer_spec, psi_even, t)


# pole expansion of the amplitude


def test_odd_states_do_not_contribute(dimer_spec, psi_even, amps):
    _, c = amps
    for i, p in enumerate(dimer_spec.pairs):
        if p.pole.parity is Parity.ODD:
            assert np.max(np.abs(c[i])) == 0


def test_amplitude_is_one_at_t0(dimer_spec, psi_even):
    assert abs(survival_k_integral(dimer_spec, psi_even, 0.0).sum() - 1) < 1e-12


def test_weights_sum_to_one(dimer_spec, psi_even):
    # completeness makes the pole weights a resolution of <psi0|psi0>
    assert abs(pole_weights(dimer_spec, psi_even).sum() - 1) < 1e-13


def test_k_integral_matches_oracle(dimer_spec, psi_even):
    t = np.array([-5.0, -2.0, 0.7, 2.0, 5.0])
    p = np.abs(survival_k_integral(dimer_spec, psi_even, t).sum(axis=0)) ** 2
    assert np.max(np.abs(p - oracle_survival(dimer_spec.model, psi_even, t, 4000))) < 1e-10


def test_survival_even_in_time(amps):
    t, c = amps
    p = np.abs(c.sum(axis=0)) ** 2
    assert np.max(np.abs(p - p[::-1])) < 1e-12


def test_oracle_independent_of_chain_length(dimer, psi_even):
    a = oracle_survival(dimer, psi_even, 5.0, 2000)
    b = oracle_survival(dimer, psi_even, 5.0, 4000)
    assert abs(a - b) < 1e-10


def test_light_cone(dimer, psi_even):
    with pytest.raises(LightConeViolation):
        oracle_survival(dimer, psi_even, 50.0, 100)


def test_bessel_matches_k_integral(dimer_spec, psi_even):
    t = np.linspace(-10, 10, 41)
    a = survival_bessel(dimer_spec, psi_even, t)
    b = survival_k_integral(dimer_spec, psi_even, t)
    assert np.max(np.abs(a - b)) < 1e-8


def test_bessel_rejects_bound_states(psi_even):
    spec = qep_solve(dimer_lattice(DimerModel(-3.0, 0.5)))
    assert any(p.pole.kind is Kind.BOUND for p in spec.pairs)
    with pytest.raises(WrongKind):
        survival_bessel(spec, psi_even, 1.0)


def test_bound_state_residue(psi_even):
    spec = qep_solve(dimer_lattice(DimerModel(-3.0, 0.5)))
    t = np.array([0.5, 3.0, 12.0])
    p = np.abs(survival_k_integral(spec, psi_even, t).sum(axis=0)) ** 2
    assert np.max(np.abs(p - oracle_survival(spec.model, psi_even, t, 2000))) < 1e-10


def test_hermitian_weights_give_wrong_dynamics(dimer_spec, psi_even):
    # negative control: |psi0^dagger psi_n|^2 instead of the transpose pairing
    t = np.array([1.0, 3.0])
    good = survival_k_integral(dimer_spec, psi_even, t)
    w_good = pole_weights(dimer_spec, psi_even)
    w_bad = np.abs(dimer_spec.vectors.conj().T @ psi_even) ** 2
    scale = np.divide(w_bad, w_good, out=np.zeros_like(w_good), where=np.abs(w_good) > 0)
    bad = (good * scale[:, None]).sum(axis=0)
    want = oracle_survival(dimer_spec.model, psi_even, t, 2000)
    assert np.max(np.abs(np.abs(bad) ** 2 - want)) > 1e-2


def test_complex_initial_state(dimer_spec):
    psi = initial_state([1.0, 0.3 + 0.4j])
    t = np.array([0.5, 2.0])
    p = np.abs(survival_k_integral(dimer_spec, psi, t).sum(axis=0)) ** 2
    assert np.max(np.abs(p - oracle_survival(dimer_spec.model, psi, t, 2000))) < 1e-10


def test_input_validation(dimer_spec, psi_even):
    with pytest.raises(DomainError):
        initial_state([0.0, 0.0])
    with pytest.raises(DomainError):
        pole_weights(dimer_spec, np.ones(3))
    with pytest.raises(DomainError):
        survival_k_integral(dimer_spec, psi_even, 2e4)


# short times


def test_short_time_variance(dimer, psi_even):
    assert abs(short_time_expansion(dimer, psi_even) - 0.25) < 1e-14
    shifted = dimer_lattice(DimerModel(0.7, 0.5))
    # a uniform on-site shift changes <H> but not the variance
    assert abs(short_time_expansion(shifted, psi_even) - 0.25) < 1e-14
    # a single site couples to its partner and to its lead, both with w1
    assert abs(short_time_expansion(dimer, [1.0, 0.0]) - 0.5) < 1e-14


def test_short_time_value(dimer, psi_even):
    p = oracle_survival(dimer, psi_even, 0.1, 200)
    assert abs(p - (1 - 0.25 * 0.01)) < 5e-4


def test_short_time_quartic_deviation(dimer, psi_even):
    t = np.geomspace(1e-3, 1e-1, 25)
    loss = oracle_survival(dimer, psi_even, t, 200, complement=True)
    dev = np.abs(loss - 0.25 * t**2)
    slope = np.polyfit(np.log(t), np.log(dev), 1)[0]
    assert abs(slope - 4) < 0.3


def test_t_zero(dimer_spec):
    res, _ = even_pair(dimer_spec)
    t0 = t_zero_estimate(dimer_spec.pairs[res].pole)
    assert abs(t0 - T0) < 1e-12
    assert abs(t0 - (1.01079 + 0.0142551j)) < 1e-4


def test_t_zero_needs_resonance(dimer_spec):
    _, anti = even_pair(dimer_spec)
    with pytest.raises(WrongKind):
        t_zero_estimate(dimer_spec.pairs[anti].pole)


@pytest.mark.parametrize("w1", [0.2, 0.3, 0.5])
def test_bracket_minimum_near_minus_t0(w1):
    spec = qep_solve(dimer_lattice(DimerModel(0.0, w1)))
    res, _ = even_pair(spec)
    pole = spec.pairs[res].pole
    t0 = t_zero_estimate(pole)
    t = np.linspace(-3, 0, 30001)
    tmin = t[np.argmin(np.abs(short_time_bracket(pole, t)))]
    assert abs(tmin + t0.real) < 0.02 * t0.real


def test_t_zero_nearly_real_for_weak_coupling():
    ratios = []
    for w1 in (0.2, 0.3, 0.5):
        spec = qep_solve(dimer_lattice(DimerModel(0.0, w1)))
        t0 = t_zero_estimate(spec.pairs[even_pair(spec)[0]].pole)
        ratios.append(t0.imag / t0.real)
    assert 0 < ratios[0] < ratios[1] < ratios[2] < 0.02


# long times


@pytest.fixture(scope="module")
def tail_series(dimer_spec, psi_even):
    t = np.linspace(30, 200, 3401)
    return t, survival_bessel(dimer_spec, psi_even, t)


def test_power_law_tail(tail_series):
    t, c = tail_series
    fit = long_time_tail(t, np.abs(c.sum(axis=0)) ** 2, (40, 200))
    assert abs(fit.slope + 3) < 0.5 and not fit.rejected


def test_tail_oracle_agreement(dimer_spec, psi_even):
    t = np.array([60.0, 120.0])
    p = np.abs(survival_bessel(dimer_spec, psi_even, t).sum(axis=0)) ** 2
    assert np.max(np.abs(p - oracle_survival(dimer_spec.model, psi_even, t, 600))) < 1e-10


def test_exponential_is_rejected():
    t = np.linspace(40, 200, 4001)
    p = np.exp(-0.05 * t) * (1 + 0.5 * np.cos(2 * t))
    assert long_time_tail(t, p, (40, 200)).rejected


def test_too_few_peaks():
    t = np.linspace(40, 200, 100)
    with pytest.raises(TooFewPeaks):
        long_time_tail(t, t**-3.0, (40, 200))


def test_resonant_dominates_after_t0(dimer_spec, amps):
    t, c = amps
    res, anti = even_pair(dimer_spec)
    sel = (t > T0.real) & (t < 22.0)
    assert np.all(np.abs(c[res, sel]) > np.abs(c[anti, sel]))
    sel = (t < -T0.real) & (t > -22.0)
    assert np.all(np.abs(c[anti, sel]) > np.abs(c[res, sel]))


def test_pair_envelopes_comparable(dimer_spec, tail_series):
    # the pointwise ratio oscillates for ever; its envelope over a quarter period stays near one
    t, c = tail_series
    res, anti = even_pair(dimer_spec)
    w = int(round((np.pi / 2) / (t[1] - t[0])))
    a, b = np.abs(c[res]) ** 2, np.abs(c[anti]) ** 2
    env = np.array([a[i:i + w].max() / b[i:i + w].max() for i in range(0, t.size - w, w // 4)])
    assert np.all((env > 0.5) & (env < 2.0))


# memory kernel and Zeno


@pytest.mark.parametrize("t", [0.5, 1.0, 5.0])
def test_memory_kernel_quadrature(t):
    re = quad(lambda k: np.sin(k) ** 2 * np.cos(2 * t * np.cos(k)), -np.pi, np.pi, epsabs=1e-13, limit=200)[0]
    im = quad(lambda k: np.sin(k) ** 2 * np.sin(2 * t * np.cos(k)), -np.pi, np.pi, epsabs=1e-13, limit=200)[0]
    assert abs(im) < 1e-12
    assert abs(memory_kernel(t) - re) < 1e-10
    assert abs(memory_kernel(t) - np.pi * j1(2 * t) / t) < 1e-12


def test_memory_kernel_limit():
    assert abs(memory_kernel(1e-7) - memory_kernel_at_zero()) < 1e-10
    with pytest.raises(DomainError):
        memory_kernel(0.0)


def test_zeno_bound_and_monotone():
    ps = [zeno_product(1.0, 1.0, N) for N in range(10, 201)]
    assert all(1 - p <= 1.0 / N for p, N in zip(ps, range(10, 201)))
    assert all(b > a for a, b in zip(ps, ps[1:]))
    assert abs(zeno_product(1.0, 1.0, 10**6) - 1) < 2e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3.0), st.integers(10, 500))
def test_zeno_bound_property(g, N):
    T = 1.0 / g
    assert 1 - zeno_product(g * g, T, N) <= g * g * T * T / N + 1e-15


def test_zeno_validation():
    with pytest.raises(DomainError):
        zeno_product(1.0, 1.0, 0)
    with pytest.raises(DomainError):
        zeno_product(4.0, 1.0, 1)


# series output


def test_series_csv(dimer_spec, psi_even):
    s = survival_series(dimer_spec, psi_even, [0.0, 1.0, 2.0], oracle_M=100)
    lines = s.to_csv().splitlines()
    assert lines[0].split(",") == ["t", "Re_c1", "Im_c1", "Re_c2", "Im_c2", "Re_c3", "Im_c3",
                                   "Re_c4", "Im_c4", "P_surv", "P_oracle"]
    assert len(lines) == 4
    row = [float(x) for x in lines[2].split(",")]
    assert abs(row[-1] - row[-2]) < 1e-10
    assert s.to_csv() == survival_series(dimer_spec, psi_even, [0.0, 1.0, 2.0], oracle_M=100).to_csv()


def test_series_unknown_method(dimer_spec, psi_even):
    with pytest.raises(DomainError):
        survival_series(dimer_spec, psi_even, [1.0], method="chebyshev")


def test_bessel_per_state_at_long_times(dimer_spec, psi_even):
    # each pole amplitude on its own, where exp(|Im E| t) reaches e^55
    t = np.array([-200.0, -60.0, 60.0, 200.0])
    a = survival_bessel(dimer_spec, psi_even, t)
    b = survival_k_integral(dimer_spec, psi_even, t)
    assert np.max(np.abs(a - b)) < 1e-10
