"""
Gaussian random fields by spectral filtering of white noise on the unit torus.
"""

import logging

import numpy as np

from .config import defaults
from .dataclasses import GridSpec, GrfSpec, RandomFieldParams
from .errors import ConfigError, SizeError
from .tensor_core.field import Field, as_field

logger = logging.getLogger(__name__)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _next_power_of_two(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def _check_square_pow2(x: np.ndarray) -> None:
    if x.ndim < 2 or x.shape[-1] != x.shape[-2] or not _is_power_of_two(x.shape[-1]):
        raise SizeError(f"spectral transforms need a square power-of-two grid, got {x.shape}")


def fft2(x) -> np.ndarray:
    """Unitary 2D DFT over the two trailing axes."""
    x = np.asarray(x)
    _check_square_pow2(x)
    return np.fft.fft2(x, norm="ortho")


def ifft2(x) -> np.ndarray:
    x = np.asarray(x)
    _check_square_pow2(x)
    return np.fft.ifft2(x, norm="ortho")


def make_generator(seed: int) -> np.random.Generator:
    if defaults.PRNG_NAME != "PCG64":
        raise ConfigError(f"unsupported PRNG {defaults.PRNG_NAME}", "seeds.prng")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(base: int, *keys: int) -> int:
    """Stable 64-bit seed for the stream identified by `keys` under `base`."""
    sequence = np.random.SeedSequence([base, *keys])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def covariance_spectrum(spec: GrfSpec) -> np.ndarray:
    """λ_m = amplitude·(|2π m / length|² + shift)^(-exponent) for the integer frequencies of the grid."""
    m = np.fft.fftfreq(spec.n, d=1.0 / spec.n) / spec.length
    k_sq = (2.0 * np.pi) ** 2 * (m[:, None] ** 2 + m[None, :] ** 2)
    return spec.amplitude * (k_sq + spec.shift) ** (-spec.exponent)


def sample_grf(spec: GrfSpec) -> Field:
    """
    One n×n draw of the random field on a torus of side `length`.

    Computes ifft2(√λ·fft2(ξ)) for white noise ξ and multiplies it by the inverse mesh
    width n / length. With the unitary transforms the unscaled draw has per-point variance
    Σλ / n², so the factor restores the continuum variance Σλ / length² and the field does
    not change its amplitude with the resolution.
    """
    if not _is_power_of_two(spec.n):
        raise SizeError(f"random-field grids must be a power of two, got {spec.n}")
    noise = make_generator(spec.seed).standard_normal((spec.n, spec.n))
    filtered = np.sqrt(covariance_spectrum(spec)) * fft2(noise)
    return as_field((spec.n / spec.length) * ifft2(filtered).real)


def mean_project(f) -> Field:
    f = np.asarray(f, dtype=np.float64)
    return as_field(f - f.mean())


def walled_sampling_size(n: int) -> int:
    """Power-of-two torus size used for an n-node walled grid."""
    return _next_power_of_two(2 * (n - 1))


def sample_field(params: RandomFieldParams, grid: GridSpec, seed: int) -> Field:
    """
    n×n field for `grid`.

    Wall-bounded grids sample a torus of N ≥ 2(n-1) points with the grid's own mesh width,
    so its side is N·Δ, and keep the leading n×n block. The block covers the unit square
    with the unit-square covariance, and opposite walls are not periodic images.
    """
    if grid.is_periodic:
        return sample_grf(params.spec(grid.n, seed))
    size = walled_sampling_size(grid.n)
    block = sample_grf(params.spec(size, seed, length=size * grid.delta))[: grid.n, : grid.n]
    return as_field(block)
