import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qhdlab import (
    CommensurabilityError, LatticeGrid, MadelungPair, MonadScale, UnwrapAmbiguous,
    ValidationError, WaveField, gaussian_wavefield, phase_gradient, plane_wave, to_madelung,
    to_wavefield,
)


def test_wavefield_requires_normalization():
    g = LatticeGrid.uniform(1, 1, 16, 1.0)
    with pytest.raises(ValidationError):
        WaveField(g, 2 * np.ones(16))
    psi = WaveField.normalized(g, np.ones(16))
    assert abs(psi.norm() - 1) < 1e-14
    with pytest.raises(ValueError):
        psi.values[0] = 0  # frozen
    with pytest.raises(ValidationError):
        WaveField.normalized(g, np.zeros(16))
    with pytest.raises(ValidationError):
        WaveField.normalized(g, np.ones(8))


def test_madelung_pair_validation():
    g = LatticeGrid.uniform(1, 1, 16, 1.0)
    with pytest.raises(ValidationError):
        MadelungPair(g, -np.ones(16), np.zeros(16))
    with pytest.raises(ValidationError):
        MadelungPair(g, np.ones(16) * 2, np.zeros(16))
    pair = MadelungPair.normalized(g, np.ones(16), np.zeros(16))
    assert not pair.flags.any()


def test_monad_scale():
    s = MonadScale(N=1000, mu=2e-3, eta=1e-3, n_particles=2)
    assert np.isclose(s.mass, 2.0) and np.isclose(s.hbar, 1.0)
    assert np.isclose(s.total_mass, 4.0) and s.total_monads == 2000
    assert np.isclose(s.c_monad, -1e-6 / 8e-3)
    with pytest.raises(ValidationError):
        MonadScale(0, 1, 1)


@settings(max_examples=25, deadline=None)
@given(width=st.floats(0.5, 1.5), k=st.floats(-3, 3), x0=st.floats(-1, 1),
       hbar=st.floats(0.5, 2.0))
def test_madelung_round_trip(width, k, x0, hbar):
    g = LatticeGrid.uniform(1, 1, 64, 12.0)
    psi = gaussian_wavefield(g, width, x0, k, hbar=hbar, images=2)
    pair = to_madelung(psi)
    back = to_wavefield(pair, hbar)
    # floored points borrow a neighbour's phase, so only resolved points round-trip
    good = ~pair.flags
    assert np.max(np.abs(back.values - psi.values)[good]) < 1e-12


def test_unwrap_gives_continuous_phase_2d():
    g = LatticeGrid.uniform(2, 1, 32, 2 * np.pi)
    x, y = g.coord(0), g.coord(1)
    S_true = 3 * x - 2 * y + 0.5 * np.sin(x + y)
    psi = WaveField.normalized(g, np.exp(1j * S_true))
    pair = to_madelung(psi)
    d = pair.phase - S_true
    assert np.ptp(d) < 1e-12 and abs(d.flat[0] / (2 * np.pi) - round(d.flat[0] / (2 * np.pi))) < 1e-12
    for a, slope in ((0, 3.0), (1, -2.0)):
        expect = slope + 0.5 * np.cos(x + y)
        assert np.allclose(phase_gradient(pair.phase, g, a, 1.0), expect, atol=1e-10)


def test_unwrap_ambiguous_on_node_crossing():
    g = LatticeGrid.uniform(1, 1, 64, 2 * np.pi)
    x = g.axis_coords(0)
    # sign change of a real amplitude resolved on both sides: pi jump
    values = np.sin(x) + 0.0j
    values[np.abs(values) < 0.2] = 0.3 * np.sign(values[np.abs(values) < 0.2].real + 1e-30)
    with pytest.raises(UnwrapAmbiguous):
        to_madelung(WaveField.normalized(g, values))


def test_floored_points_are_flagged():
    g = LatticeGrid.uniform(1, 1, 64, 40.0)
    psi = gaussian_wavefield(g, 1.0)
    pair = to_madelung(psi)
    assert pair.flags.any() and not pair.flags[32]
    assert np.all(np.isfinite(pair.phase))


def test_unknown_unwrap_policy():
    g = LatticeGrid.uniform(1, 1, 16, 1.0)
    with pytest.raises(ValidationError):
        to_madelung(plane_wave(g, 0.0), "magic")


def test_plane_wave_commensurability():
    g = LatticeGrid.uniform(1, 1, 16, 2 * np.pi)
    psi = plane_wave(g, 3.0)
    assert np.allclose(np.abs(psi.values) ** 2, 1 / (2 * np.pi))
    with pytest.raises(CommensurabilityError):
        plane_wave(g, 2.5)
    with pytest.raises(CommensurabilityError):
        plane_wave(g, 8.0)


def test_gaussian_density_moments():
    g = LatticeGrid.uniform(1, 1, 256, 24.0)
    psi = gaussian_wavefield(g, 1.3, 0.4, 2.0)
    x = g.axis_coords(0)
    rho = psi.density
    mean = g.integrate(x * rho)
    var = g.integrate((x - mean) ** 2 * rho)
    assert abs(mean - 0.4) < 1e-10 and abs(var - 1.69) < 1e-9
