"""One-dimensional lattice primitives.

All n-dimensional signals in this package live on the product lattice
``(step*Z)^n``, so every operation here acts element-wise. The nearest-point
quantizer breaks ties toward minus infinity, which makes the fundamental cell
the half-open interval ``(-step/2, step/2]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

#: Normalized second moment of every one-dimensional lattice.
SCALAR_G = 1.0 / 12.0
#: Limit of G for lattices that are good for quantization.
GOOD_LATTICE_G = 1.0 / (2.0 * math.pi * math.e)


class LatticeError(ValueError):
    """Invalid lattice argument (non-finite input, non-positive step or power)."""


def _check_finite(x):
    if np.ndim(x) == 0:
        if not math.isfinite(float(x)):
            raise LatticeError(f"non-finite input {x!r}")
    elif not np.all(np.isfinite(x)):
        raise LatticeError("non-finite value in input array")


@dataclass(frozen=True)
class ScalarLattice:
    """The lattice ``step * Z``."""

    step: float

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise LatticeError(f"lattice step must be positive and finite, got {self.step!r}")

    @property
    def second_moment(self) -> float:
        return self.step * self.step / 12.0

    def scaled(self, factor: float) -> "ScalarLattice":
        return ScalarLattice(self.step * factor)

    def quantize(self, x):
        return quantize(self, x)

    def mod(self, x):
        return mod_lattice(self, x)


def quantize(lattice: ScalarLattice, x):
    """Nearest lattice point to ``x`` (scalar or array); ties go to the smaller point."""
    _check_finite(x)
    if np.ndim(x) == 0:
        step = lattice.step
        return step * math.ceil(float(x) / step - 0.5)
    return kernels.quantize(x, lattice.step)


def mod_lattice(lattice: ScalarLattice, x):
    """``x - quantize(lattice, x)``; lands in ``(-step/2, step/2]``."""
    _check_finite(x)
    if np.ndim(x) == 0:
        step = lattice.step
        x = float(x)
        return x - step * math.ceil(x / step - 0.5)
    return kernels.mod(x, lattice.step)


def second_moment(lattice: ScalarLattice) -> float:
    return lattice.second_moment


def lattice_for_power(target_power: float) -> ScalarLattice:
    """Lattice whose uniform cell distribution has second moment ``target_power``."""
    if not (math.isfinite(target_power) and target_power > 0):
        raise LatticeError(f"target power must be positive, got {target_power!r}")
    return ScalarLattice(math.sqrt(12.0 * target_power))


def normalized_second_moment(lattice: ScalarLattice) -> float:
    # sigma^2 / V^(2/n) with n = 1 and V = step
    return lattice.second_moment / (lattice.step * lattice.step)


def penalty_bits_for_g(g: float) -> float:
    return 0.5 * math.log2(2.0 * math.pi * math.e * g)


def shaping_penalty_bits(lattice: ScalarLattice | None = None) -> float:
    """Rate lost to the cell shape: ``0.5*log2(2*pi*e*G)`` bits per dimension."""
    g = SCALAR_G if lattice is None else normalized_second_moment(lattice)
    return penalty_bits_for_g(g)


def entropy_uniform_cell(lattice: ScalarLattice) -> float:
    """Differential entropy (bits) of a uniform draw over the fundamental cell."""
    return math.log2(lattice.step)


def sample_dither(lattice: ScalarLattice, rng: np.random.Generator, size=None):
    """Uniform draw over the fundamental cell ``(-step/2, step/2]``."""
    u = rng.random(size)
    return lattice.step * (0.5 - u)


def is_scaled_copy(coarse: ScalarLattice, fine: ScalarLattice, factor: float,
                   rtol: float = 1e-12) -> bool:
    """True when ``fine == factor * coarse``, so ``factor*Q_coarse(x)`` lies in ``fine``."""
    if factor <= 0:
        raise LatticeError(f"scale factor must be positive, got {factor!r}")
    target = coarse.step * factor
    return abs(target - fine.step) <= rtol * fine.step
