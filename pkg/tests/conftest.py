import numpy as np
import pytest

from quadvesd.spectral import SampleSpectrum, sample_spectrum


def random_spectrum(rng, p=None, n=None, ref=None):
    """Spectrum of a small Gaussian sample with heterogeneous column scales."""
    p = int(rng.integers(2, 9)) if p is None else p
    n = int(rng.integers(3, 17)) if n is None else n
    scales = rng.uniform(0.5, 3.0, size=p)
    X = rng.standard_normal((n, p)) * np.sqrt(scales)
    a = rng.standard_normal(p) if ref is None else ref
    return sample_spectrum(X, a), X, a


def companion(spec: SampleSpectrum, z):
    """Direct evaluation of -(1 - p/n)/z + (p/n) m_n(z) over all p eigenvalues."""
    z = np.asarray(z, dtype=complex)
    m = np.mean(1.0 / (spec.lambdas[:, None] - z[None, :]), axis=0)
    return -(1.0 - spec.cn) / z + spec.cn * m


def s_direct(spec: SampleSpectrum, z):
    z = np.asarray(z, dtype=complex)
    return np.sum(spec.weights[:, None] / (spec.lambdas[:, None] - z[None, :]), axis=0)


def global_contour(spec: SampleSpectrum, f, points=8192):
    """(1/2 pi i) of the integral of f over a circle enclosing every finite pole.

    Centred at lambda_1/2 with radius 0.75 * lambda_1 + margin, so that 0,
    all eigenvalues and all zeros of the companion transform lie inside.
    """
    top = float(spec.lambdas[0])
    centre = 0.5 * top
    radius = 0.5 * top + 0.25 * top + 1.0
    theta = 2 * np.pi * np.arange(points) / points
    dz = radius * np.exp(1j * theta)
    z = centre + dz
    return complex(np.mean(f(z) * dz))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
