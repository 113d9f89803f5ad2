"""Shared grids, corpora, and independent quadrature oracles."""

import numpy as np
import pytest
from scipy.integrate import quad

from mellin_edge.mellin import CutoffFunction, HalfLineFunction, LogGrid
from mellin_edge.symbols import MeromorphicSymbol

# dt = ln2/96 keeps lambda in {2, 4} grid-aligned (log 2 = 96 dt)
DT = np.log(2.0) / 96.0


def make_grid(t_min, n_points):
    return LogGrid(t_min, t_min + n_points * DT, n_points)


@pytest.fixture(scope="session")
def grid_short():
    """t in [-15, 14.6): compactly supported data around r = 1."""
    return make_grid(-15.0, 4096)


@pytest.fixture(scope="session")
def grid_deep():
    """t in [-50, 9.2): room for slow r^{-p} tails at r -> 0."""
    return make_grid(-50.0, 8192)


@pytest.fixture(scope="session")
def grid_green():
    """t in [-30, 206.6): long right end for slow pole-to-line decay
    rates of weight-shift outputs."""
    return make_grid(-30.0, 32768)


def bump(grid, a=1.0, b=3.0, amplitude=1.0):
    r = grid.r
    vals = np.zeros(grid.n_points)
    mid = (r > a) & (r < b)
    x = (r[mid] - a) / (b - a)
    vals[mid] = amplitude * np.exp(-1.0 / (x * (1.0 - x)) + 4.0)
    return HalfLineFunction(grid, vals + 0j)


def bump_callable(a=1.0, b=3.0, amplitude=1.0):
    def f(r):
        if not (a < r < b):
            return 0.0
        x = (r - a) / (b - a)
        return amplitude * np.exp(-1.0 / (x * (1.0 - x)) + 4.0)
    return f


def random_bump_field(grid, rng, n_bumps=3):
    r = grid.r
    vals = np.zeros(grid.n_points)
    for _ in range(n_bumps):
        c = rng.uniform(0.8, 3.0)
        w = rng.uniform(0.3, 0.8)
        amp = rng.uniform(0.5, 2.0)
        a, b = c - w, c + w
        mid = (r > a) & (r < b)
        x = (r[mid] - a) / (b - a)
        vals[mid] += amp * np.exp(-1.0 / (x * (1.0 - x)) + 4.0)
    return HalfLineFunction(grid, vals + 0j)


def simple_pole(p, scale=1.0):
    """f(z) = scale / (z - p), constant in y."""
    return MeromorphicSymbol([np.array([scale])],
                             [np.array([-p]), np.array([1.0])])


def double_pole(p, scale=1.0):
    """f(z) = scale / (z - p)^2."""
    return MeromorphicSymbol([np.array([scale])],
                             [np.array([p * p]), np.array([-2.0 * p]),
                              np.array([1.0])])


def quad_mellin(f, z, a, b, derivative=0, epsabs=1e-12, epsrel=1e-12):
    """Independent adaptive-quadrature Mellin transform of a real-valued
    compactly supported function: int_a^b r^{z-1} log^d r f(r) dr."""
    z = complex(z)

    def integrand_re(r):
        return (r ** (z.real - 1) * np.cos(z.imag * np.log(r))
                * np.log(r) ** derivative * f(r))

    def integrand_im(r):
        return (r ** (z.real - 1) * np.sin(z.imag * np.log(r))
                * np.log(r) ** derivative * f(r))

    re, _ = quad(integrand_re, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
    im, _ = quad(integrand_im, a, b, epsabs=epsabs, epsrel=epsrel, limit=200)
    return complex(re, im)
