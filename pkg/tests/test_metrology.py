import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _sim import qfi, spectral
from sshqfi.dynamics import AmplitudeTrace, SpectralData, TimeGrid
from sshqfi.errors import DomainError, NoBoundStateError, RangeError
from sshqfi.lattice import band_edges
from sshqfi.metrology import (
    QfiTrace,
    diagnose,
    late_time_average,
    numerical_bound_state,
    orderings_consistent,
    qfi_trace,
    reduced_state,
    retention_time,
    same_ordering,
    spectral_window_average,
    useful_window,
    window_kernel,
)

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    # {g, e} ordering with the excited level as +1
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


def synthetic(fn, t_end=100.0, dt=0.05):
    grid = TimeGrid.from_spacing(t_end, dt)
    return QfiTrace(grid, fn(grid.samples))


def bloch_from_matrix(rho):
    return np.array([np.trace(rho @ SIGMA[c]).real for c in "xyz"])


def test_qfi_trace_pointwise():
    grid = TimeGrid(0.0, 1.0, 2)
    u = np.array([1.0, 0.0, 0.8823529 * np.exp(0.3j)])
    f = qfi_trace(AmplitudeTrace(grid, u)).f
    np.testing.assert_allclose(f, [1.0, 0.0, 0.7785467], atol=1e-7)


@pytest.mark.parametrize(
    "u, phi, r, q",
    [(1.0, 0.0, (1, 0, 0), 1.0), (0.0, 0.3, (0, 0, -1), 0.0), (0.6j, np.pi / 2, (-0.6, 0, -0.64), 0.36)],
)
def test_reduced_state_examples(u, phi, r, q):
    s = reduced_state(u, phi)
    np.testing.assert_allclose(s.bloch, r, atol=1e-15)
    assert s.qfi == pytest.approx(q, abs=1e-15)
    np.testing.assert_allclose(bloch_from_matrix(s.density_matrix), r, atol=1e-15)


def test_bloch_derivative_brute_force():
    u, phi, h = 0.37 - 0.52j, 1.1, 1e-6
    plus = bloch_from_matrix(reduced_state(u, phi + h).density_matrix)
    minus = bloch_from_matrix(reduced_state(u, phi - h).density_matrix)
    fd = (plus - minus) / (2 * h)
    s = reduced_state(u, phi)
    np.testing.assert_allclose(s.bloch_derivative, fd, atol=1e-9)
    assert fd @ fd == pytest.approx(abs(u) ** 2, abs=1e-9)
    assert s.optimal_angle == pytest.approx(np.angle(u) + phi)


def test_density_matrix_is_state():
    rho = reduced_state(0.4 + 0.3j, 0.7).density_matrix
    assert np.trace(rho).real == pytest.approx(1.0)
    np.testing.assert_allclose(rho, rho.conj().T)
    assert np.linalg.eigvalsh(rho).min() >= -1e-15


@given(
    r=st.floats(0, 1),
    arg=st.floats(-math.pi, math.pi),
    phi=st.floats(-10, 10),
)
@settings(max_examples=200, deadline=None)
def test_reduced_state_identities(r, arg, phi):
    u = r * complex(math.cos(arg), math.sin(arg))
    s = reduced_state(u, phi)
    p = abs(u) ** 2
    assert abs(s.qfi - p) < 1e-12
    assert abs(s.norm2 - (1 - p + p * p)) < 1e-12
    assert abs(np.dot(s.bloch, s.bloch_derivative)) < 1e-12


def test_reduced_state_rejects_supernormal():
    with pytest.raises(DomainError):
        reduced_state(1.01, 0.0)


def test_late_time_average_constant_and_interpolated():
    f = synthetic(lambda t: np.full_like(t, 0.37))
    assert late_time_average(f, 40, 100) == pytest.approx(0.37, abs=1e-15)
    lin = synthetic(lambda t: t / 100)
    # off-grid endpoints handled exactly for a linear signal
    assert late_time_average(lin, 12.345, 67.891) == pytest.approx((12.345 + 67.891) / 200, abs=1e-13)


def test_late_time_average_range():
    f = synthetic(lambda t: np.ones_like(t), t_end=50.0)
    with pytest.raises(RangeError):
        late_time_average(f, 40, 100)


def test_retention_time_exponential():
    f = synthetic(lambda t: np.exp(-t), dt=0.01)
    ret = retention_time(f, 0.2, 100)
    assert not ret.capped
    assert ret.time == pytest.approx(math.log(5), abs=1e-4)


def test_retention_time_capped():
    ret = retention_time(synthetic(np.ones_like), 0.2, 100)
    assert ret.capped and ret.time == 100
    with pytest.raises(DomainError):
        retention_time(synthetic(np.ones_like), 1.5, 100)
    with pytest.raises(RangeError):
        retention_time(synthetic(np.ones_like), 0.2, 200)


def test_useful_window_linear_and_periodic():
    lin = synthetic(lambda t: 1 - t / 100)
    assert useful_window(lin, 0.4, 20, 100) == pytest.approx(40.0, abs=1e-10)
    wave = synthetic(lambda t: 0.5 + 0.5 * np.cos(2 * np.pi * t / 10), dt=0.01)
    assert useful_window(wave, 0.5, 20, 100) == pytest.approx(40.0, abs=1e-3)
    assert useful_window(synthetic(np.ones_like), 0.4, 20, 100) == 80.0
    assert useful_window(synthetic(np.zeros_like), 0.4, 20, 100) == 0.0


def test_useful_window_range():
    with pytest.raises(RangeError):
        useful_window(synthetic(np.ones_like, t_end=50), 0.4, 20, 100)


def test_window_kernel_limits():
    assert window_kernel(0.0, 40, 100) == 1.0
    x = 0.37
    expected = (math.sin(x * 100) - math.sin(x * 40)) / (x * 60)
    assert window_kernel(x, 40, 100) == pytest.approx(expected)


def test_spectral_window_average_matches_sampling():
    for delta in (0.0, 0.57, 0.8):
        direct = late_time_average(qfi(0.3, 0.4, delta, 100), 40, 100)
        kernel = spectral_window_average(spectral(0.3, 0.4, delta, 100), 40, 100)
        assert kernel == pytest.approx(direct, abs=2e-5)
    trivial = SpectralData([0.0, 1.0], [0.5, 0.5])
    k = window_kernel(1.0, 10, 20)
    assert spectral_window_average(trivial, 10, 20) == pytest.approx(0.5 + 0.5 * k)


def test_numerical_bound_state_decoupled():
    info, outer = numerical_bound_state(spectral(0.3, 0.0, 0.0, 20), band_edges(1.0, 0.3))
    assert info.z_bs == pytest.approx(1.0, abs=1e-12)
    assert info.omega_bs == pytest.approx(0.0, abs=1e-12)
    assert info.delta_edge == pytest.approx(0.6, abs=1e-12)
    assert outer == pytest.approx(0.0, abs=1e-20)


def test_numerical_bound_state_resonant_l220():
    info, outer = numerical_bound_state(spectral(0.3, 0.4, 0.0, 220), band_edges(1.0, 0.3))
    assert info.z_bs == pytest.approx(0.88235, abs=1e-3)
    assert 0 < outer < 0.01


def test_numerical_bound_state_gapless():
    with pytest.raises(NoBoundStateError):
        numerical_bound_state(spectral(0.0, 0.4, 0.0, 50), band_edges(1.0, 0.0))


def test_numerical_bound_state_sums_multiple_in_gap_states():
    spec = SpectralData([-1.0, -0.1, 0.05, 0.3, 2.5], [0.1, 0.2, 0.4, 0.05, 0.25])
    info, outer = numerical_bound_state(spec, band_edges(1.0, 0.3))
    assert info.z_bs == pytest.approx(0.65)
    assert info.omega_bs == 0.05
    assert info.delta_edge == pytest.approx(0.55)
    assert outer == 0.25


def test_diagnostics_bounds():
    f = qfi(0.3, 0.4, 0.57, 100)
    rep = diagnose(f)
    assert 0 <= rep.w_eta <= rep.T - rep.t_cut
    window = (f.t >= 40) & (f.t <= 100)
    assert f.f[window].min() <= rep.f_bar <= f.f[window].max()
    assert 0 <= rep.t_eta <= rep.T


def test_same_ordering_ties_and_reversals():
    assert same_ordering([3, 2, 1], [30, 20, 10])
    assert same_ordering([100, 100, 5], [100, 80, 5])
    assert not same_ordering([1, 2], [2, 1])
    assert orderings_consistent([[1.0], [2.0]])
    assert not orderings_consistent([[1, 2, 3], [1, 2, 3], [3, 2, 1]])
