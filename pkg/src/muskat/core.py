"""Domain types and Fourier utilities for periodic interface profiles.

The spatial domain is the torus [-pi, pi) sampled at ``n`` equispaced nodes.
Spectral differentiation and half-grid interpolation are realized as circular
convolutions with the exact Fourier weights, written in differenced form
``out[i] = sum_r c[r] * (f[i-r] - f[i])``.  Compared with an FFT round trip
this keeps three things exact in floating point: constants are annihilated
(or reproduced) exactly, flat interfaces stay flat, and shifting the samples
by a whole number of nodes commutes bitwise with every operator built on
top.  For band-limited data the weights are spectrally exact, so accuracy
matches FFT differentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit, prange

TWO_PI = 2.0 * math.pi


class TouchingRiskError(RuntimeError):
    """Interface came within the guard distance of the permeability line."""


class BlowupDetectedError(RuntimeError):
    """Time stepper produced non-finite samples."""


class StabilityRegimeError(ValueError):
    """Condition checkers require the gravitationally stable sign rho- - rho+ > 0."""


class DecayGuaranteeError(ValueError):
    """No guaranteed decay rate: the smallness margin is not positive."""


@njit(cache=True, parallel=True)
def _apply_differenced(f, coef, add_identity):
    # out[i] = (f[i] if add_identity) + sum_{r=1}^{n-1} coef[r] * (f[i-r] - f[i])
    # Fixed relative-offset order keeps the result bit-identical under
    # whole-node shifts of f and independent of the thread count.
    n = f.shape[0]
    out = np.empty(n)
    for i in prange(n):
        fi = f[i]
        acc = 0.0
        for r in range(1, n):
            acc += coef[r] * (f[(i - r + n) % n] - fi)
        if add_identity:
            acc += fi
        out[i] = acc
    return out


def _symbol_kernel(symbol: np.ndarray, n: int) -> np.ndarray:
    """Real-space weights of a Fourier multiplier given on rfft indices."""
    return np.fft.irfft(symbol, n)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on [-pi, pi) with an even number of nodes."""

    n: int

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 16:
            raise ValueError(f"grid size must be even and >= 16, got {self.n}")

    @property
    def dx(self) -> float:
        return TWO_PI / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        """x_j = -pi + j dx, j = 0..n-1."""
        return -math.pi + self.dx * np.arange(self.n)

    @cached_property
    def half_nodes(self) -> np.ndarray:
        """Offset points beta_j = -pi + (j + 1/2) dx; they never hit 0 or +-pi."""
        return -math.pi + self.dx * (np.arange(self.n) + 0.5)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer modes {-n/2+1, ..., n/2} carried by the grid."""
        return np.arange(-self.n // 2 + 1, self.n // 2 + 1)

    # --- spectral operators -------------------------------------------------
    # rfft layout k = 0..n/2.  The Nyquist coefficient of every
    # derivative-like operator is zeroed (real-signal convention for even n).

    @cached_property
    def _rfft_k(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1, dtype=np.float64)

    @cached_property
    def dissipation_symbol(self) -> np.ndarray:
        """k^2 multiplier of -d^2/dx^2 with the Nyquist entry zeroed."""
        k2 = self._rfft_k**2
        k2[-1] = 0.0
        return k2

    @cached_property
    def _coef_d1(self) -> np.ndarray:
        sym = 1j * self._rfft_k
        sym[-1] = 0.0
        c = _symbol_kernel(sym, self.n)
        # enforce the exact antisymmetry c[n-r] = -c[r] of the weights
        c[0] = 0.0
        c[self.n // 2] = 0.0
        for r in range(1, self.n // 2):
            a = 0.5 * (c[r] - c[self.n - r])
            c[r] = a
            c[self.n - r] = -a
        return c

    @cached_property
    def _coef_d2(self) -> np.ndarray:
        sym = (-self._rfft_k**2).astype(np.complex128)
        sym[-1] = 0.0
        c = _symbol_kernel(sym, self.n)
        for r in range(1, self.n // 2):
            a = 0.5 * (c[r] + c[self.n - r])
            c[r] = a
            c[self.n - r] = a
        return c

    @cached_property
    def _coef_half(self) -> np.ndarray:
        # interpolation to x + dx/2; the Nyquist basis function vanishes there
        sym = np.exp(0.5j * self.dx * self._rfft_k)
        sym[-1] = 0.0
        return _symbol_kernel(sym, self.n)

    @cached_property
    def _coef_half_d1(self) -> np.ndarray:
        sym = 1j * self._rfft_k * np.exp(0.5j * self.dx * self._rfft_k)
        sym[-1] = 0.0
        return _symbol_kernel(sym, self.n)

    def differentiate(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        if order == 1:
            coef = self._coef_d1
        elif order == 2:
            coef = self._coef_d2
        else:
            raise ValueError(f"derivative order must be 1 or 2, got {order}")
        return _apply_differenced(self._as_samples(f), coef, False)

    def interpolate_half(self, f: np.ndarray) -> np.ndarray:
        """Band-limited samples of f at the half-offset points."""
        return _apply_differenced(self._as_samples(f), self._coef_half, True)

    def differentiate_half(self, f: np.ndarray) -> np.ndarray:
        """Band-limited samples of df/dx at the half-offset points."""
        return _apply_differenced(self._as_samples(f), self._coef_half_d1, False)

    def _as_samples(self, f) -> np.ndarray:
        f = np.ascontiguousarray(f, dtype=np.float64)
        if f.shape != (self.n,):
            raise ValueError(f"expected {self.n} samples, got shape {f.shape}")
        return f


@dataclass(frozen=True, eq=False)
class InterfaceState:
    """Samples of the interface height f(x, t) on a grid, plus the time stamp.

    Samples must be finite.  Positivity (min f > 0) is *not* enforced here:
    losing it is a detected event that the stepper reports, not a silent
    failure mode.
    """

    grid: TorusGrid
    f: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        f = np.array(self.f, dtype=np.float64)
        if f.shape != (self.grid.n,):
            raise ValueError(
                f"state has {f.shape} samples for a grid of {self.grid.n} nodes"
            )
        if not np.all(np.isfinite(f)):
            raise ValueError("interface samples must be finite")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "t", float(self.t))

    @property
    def min_f(self) -> float:
        return float(self.f.min())

    @property
    def max_f(self) -> float:
        return float(self.f.max())

    @property
    def is_positive(self) -> bool:
        return self.min_f > 0.0


@dataclass(frozen=True)
class PhysicalParams:
    """Permeabilities, densities and the depth of the permeability jump.

    Derived constants:
      K = (kappa+ - kappa-) / (kappa+ + kappa-)   permeability contrast,
      R = kappa+ (rho- - rho+)                    gravity/mobility scale,
      A = R K / (2 pi)                            amplitude of the second
                                                  vorticity sheet.
    """

    kappa_plus: float
    kappa_minus: float
    rho_plus: float
    rho_minus: float
    h2: float

    def __post_init__(self):
        if self.kappa_plus <= 0 or self.kappa_minus <= 0:
            raise ValueError("permeabilities must be strictly positive")
        if self.h2 <= 0:
            raise ValueError("permeability-line depth h2 must be strictly positive")
        assert abs(self.K) < 1.0

    @property
    def K(self) -> float:
        return (self.kappa_plus - self.kappa_minus) / (self.kappa_plus + self.kappa_minus)

    @property
    def R(self) -> float:
        return self.kappa_plus * (self.rho_minus - self.rho_plus)

    @property
    def A(self) -> float:
        return self.R * self.K / TWO_PI

    @property
    def rt_stable(self) -> bool:
        """True when the heavier fluid sits below (R > 0)."""
        return self.R > 0.0


_FORMULATIONS = ("nondivergence", "divergence")
_STEPPERS = ("auto", "rk4", "ifrk4")


@dataclass(frozen=True)
class SolverConfig:
    """Time-integration settings for :func:`muskat.stepper.run`."""

    t_end: float
    dt: float | str = "auto"
    epsilon: float = 0.0
    mollify_eps: float = 0.0
    cfl_safety: float = 0.5
    output_every: int = 1
    quadrature_oversample: int = 8
    formulation: str = "nondivergence"
    stepper: str = "auto"

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ValueError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        elif not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.epsilon < 0 or self.mollify_eps < 0:
            raise ValueError("viscosity and mollifier times must be >= 0")
        if self.output_every < 1:
            raise ValueError("output_every must be a positive integer")
        if self.quadrature_oversample < 1:
            raise ValueError("quadrature_oversample must be >= 1")
        if self.formulation not in _FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.stepper not in _STEPPERS:
            raise ValueError(f"unknown stepper {self.stepper!r}")


# --- basic functionals ------------------------------------------------------


def spectral_derivative(state: InterfaceState, order: int = 1) -> np.ndarray:
    """Fourier derivative of the interface samples (order 1 or 2).

    Exact (to rounding) on trigonometric polynomials of degree < n/2; the
    Nyquist coefficient is zeroed.
    """
    return state.grid.differentiate(state.f, order)


def mean(state: InterfaceState) -> float:
    """Grid mean (1/2pi) int f dx, exact trapezoid on the periodic grid."""
    return float(state.f.mean())


def heat_mollify(state: InterfaceState, eps_m: float) -> InterfaceState:
    """Smooth the profile with the periodic heat kernel at time ``eps_m``.

    Fourier coefficient k of the output is exp(-k^2 eps_m) times that of the
    input, so the mean is unchanged and the sup-norm cannot grow.
    ``eps_m = 0`` returns the state untouched.
    """
    if eps_m < 0:
        raise ValueError("mollifier time must be >= 0")
    if eps_m == 0.0:
        return state
    grid = state.grid
    coeff = np.fft.rfft(state.f)
    damp = np.exp(-eps_m * grid._rfft_k**2)
    return InterfaceState(grid, np.fft.irfft(coeff * damp, grid.n), state.t)


def sup_norm(samples: np.ndarray) -> float:
    """Grid sup-norm max_j |v_j|."""
    return float(np.max(np.abs(np.asarray(samples))))


def osc(samples: np.ndarray) -> tuple[float, float]:
    """Grid extrema (max, min) of the samples.

    These are extrema over the nodes, not of the underlying continuum
    profile; for smooth profiles they converge spectrally.
    """
    v = np.asarray(samples)
    return float(v.max()), float(v.min())


def l2_norm(samples: np.ndarray, dx: float) -> float:
    """Periodic-trapezoid L2 norm sqrt(dx sum v_j^2)."""
    v = np.asarray(samples, dtype=np.float64)
    return math.sqrt(dx * float(np.dot(v, v)))
