import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qhdlab import GridError, LatticeGrid
from qhdlab.grid import (
    RealSpectral, exponential_filter, fft_workers, fourier_filter, spectral_gradient,
    spectral_gradients, spectral_laplacian, spectral_second, two_thirds_mask,
)


@pytest.mark.parametrize("kw", [
    dict(n_particles=0, dims_per_particle=1, points=(), lengths=()),
    dict(n_particles=1, dims_per_particle=4, points=(8,) * 4, lengths=(1.0,) * 4),
    dict(n_particles=1, dims_per_particle=1, points=(9,), lengths=(1.0,)),
    dict(n_particles=1, dims_per_particle=1, points=(6,), lengths=(1.0,)),
    dict(n_particles=1, dims_per_particle=1, points=(16,), lengths=(-1.0,)),
    dict(n_particles=2, dims_per_particle=1, points=(16,), lengths=(1.0,)),
    dict(n_particles=5, dims_per_particle=1, points=(8,) * 5, lengths=(1.0,) * 5),
])
def test_grid_validation(kw):
    with pytest.raises(GridError):
        LatticeGrid(**kw)


def test_large_rank_opt_in():
    g = LatticeGrid.uniform(5, 1, 8, 1.0, allow_large=True)
    assert g.rank == 5


def test_layout_and_coords():
    g = LatticeGrid(2, 2, (8, 10, 12, 14), (1.0, 2.0, 3.0, 4.0))
    assert g.rank == 4 and g.shape == (8, 10, 12, 14)
    assert g.block_axes(0) == (0, 1) and g.block_axes(1) == (2, 3)
    x = g.axis_coords(1)
    assert x[0] == -1.0 and np.isclose(x[1] - x[0], 0.2)
    assert g.coord(2).shape == (1, 1, 12, 1)
    assert np.isclose(g.volume, 24.0)
    assert g.refined().points == (16, 20, 24, 28)


def test_integrate_is_exact_for_trig_polynomials():
    g = LatticeGrid.uniform(1, 1, 16, 2 * np.pi)
    x = g.axis_coords(0)
    assert abs(g.integrate(np.cos(3 * x) ** 2) - np.pi) < 1e-13


def test_nyquist_handling():
    g = LatticeGrid.uniform(1, 1, 16, 2 * np.pi)
    x = g.axis_coords(0)
    nyq = np.cos(8 * x)
    # first derivative drops the Nyquist mode, second derivative keeps it
    assert np.max(np.abs(spectral_gradient(nyq, g, 0))) < 1e-12
    assert np.allclose(spectral_laplacian(nyq, g), -64 * nyq, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(1, 7), phase=st.floats(0, 6.28), length=st.floats(0.5, 20.0))
def test_derivatives_exact_on_resolved_modes(m, phase, length):
    g = LatticeGrid.uniform(1, 1, 16, length)
    k = 2 * np.pi * m / length
    x = g.axis_coords(0)
    f = np.sin(k * x + phase)
    assert np.allclose(spectral_gradient(f, g, 0), k * np.cos(k * x + phase), atol=1e-10 * k)
    assert np.allclose(spectral_laplacian(f, g), -k * k * f, atol=1e-10 * k * k)


def test_mixed_second_and_gradients_2d():
    g = LatticeGrid.uniform(2, 1, 16, 2 * np.pi)
    x, y = g.coord(0), g.coord(1)
    f = np.sin(2 * x) * np.cos(3 * y)
    assert np.allclose(spectral_second(f, g, 0, 1), -6 * np.cos(2 * x) * np.sin(3 * y), atol=1e-11)
    gx, gy = spectral_gradients(f, g)
    assert np.allclose(gx, 2 * np.cos(2 * x) * np.cos(3 * y), atol=1e-11)
    assert np.allclose(gy, -3 * np.sin(2 * x) * np.sin(3 * y), atol=1e-11)
    # block Laplacian acts on one particle only
    assert np.allclose(spectral_laplacian(f, g, particle=1), -9 * f, atol=1e-10)


def test_complex_input_stays_complex():
    g = LatticeGrid.uniform(1, 1, 16, 2 * np.pi)
    x = g.axis_coords(0)
    f = np.exp(2j * x)
    assert np.allclose(spectral_gradient(f, g, 0), 2j * f)


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_real_spectral_matches_generic(rank):
    g = LatticeGrid(rank, 1, (16, 12, 8)[:rank], (2.0, 3.0, 4.0)[:rank])
    rng = np.random.default_rng(rank)
    f = rng.normal(size=g.shape)
    rs = RealSpectral(g)
    assert np.allclose(rs.laplacian(f), spectral_laplacian(f, g), atol=1e-10)
    for a, comp in enumerate(rs.gradient(f)):
        assert np.allclose(comp, spectral_gradient(f, g, a), atol=1e-10)
    comps = [rng.normal(size=g.shape) for _ in range(rank)]
    div = sum(spectral_gradient(c, g, a) for a, c in enumerate(comps))
    assert np.allclose(rs.divergence(comps), div, atol=1e-10)


def test_filters():
    g = LatticeGrid.uniform(1, 1, 24, 2 * np.pi)
    x = g.axis_coords(0)
    mask = two_thirds_mask(g)
    assert np.allclose(fourier_filter(np.cos(3 * x), g, mask), np.cos(3 * x))
    assert np.max(np.abs(fourier_filter(np.cos(9 * x), g, mask))) < 1e-12
    filt = exponential_filter(g)
    assert filt[0] == 1.0 and filt[12] < 1e-15


def test_fft_workers(monkeypatch):
    monkeypatch.setenv("QHD_THREADS", "3")
    assert fft_workers() == 3
    monkeypatch.setenv("QHD_THREADS", "0")
    assert fft_workers() == -1
    monkeypatch.delenv("QHD_THREADS")
    assert fft_workers() == -1
