"""Contour-equation right-hand sides and the second vorticity amplitude.

The interface height f on the torus evolves under a nonlocal equation with
two contributions: a principal-value kernel coupling the slope at x to the
slope everywhere else, and a layer potential driven by the vorticity sheet
``w2`` generated on the flat permeability line y = -h2.  Both contributions
are evaluated here in two equivalent forms:

* ``rhs_nondivergence`` - direct kernel form

      df/dt = (R/4pi) PV int  sin(b) (f'(x) - f'(x-b))
                              / (cosh(f(x) - f(x-b)) - cos(b)) db
            + (1/4pi)    int (f'(x) sinh(f(x)+h2) + sin(x-b)) w2(b)
                              / (cosh(f(x)+h2) - cos(x-b)) db

* ``rhs_divergence`` - d/dx of an arctan potential plus a log potential,
  which conserves the grid mean to rounding.

The first kernel has a removable singularity at b = 0; it is integrated on
the half-offset grid b_j = -pi + (j+1/2) dx so the 0/0 node is never touched,
with f(x - b_j) obtained by band-limited interpolation.  All remaining
integrands are smooth and use plain node-aligned trapezoid sums, which are
spectrally accurate for periodic integrands.

Every quadrature loop runs over relative node offsets in a fixed order, so
results are bit-reproducible at any thread count and commute bitwise with
whole-node translations of f.  Cost is O(n^2) per evaluation with the outer
node loop parallelized.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit, prange

from .core import (
    TWO_PI,
    InterfaceState,
    PhysicalParams,
    TorusGrid,
    TouchingRiskError,
)

#: evaluations abort when min f + h2 drops below this fraction of h2
TOUCH_GUARD_FRACTION = 1e-3

FOUR_PI = 2.0 * TWO_PI


@dataclass(frozen=True)
class RhsEvaluation:
    """One right-hand-side evaluation: df/dt samples plus bookkeeping."""

    dfdt: np.ndarray
    formulation: str
    wall_time: float


@lru_cache(maxsize=16)
def _angle_tables(n: int):
    """Trig tables on node offsets r*dx and half offsets beta_j.

    Built with exact symmetry (sin odd, cos even) so that odd integrands
    cancel pairwise instead of leaving rounding residue.
    """
    dx = TWO_PI / n
    sin_r = np.empty(n)
    cos_r = np.empty(n)
    sin_r[0], cos_r[0] = 0.0, 1.0
    for r in range(1, n // 2):
        s, c = math.sin(r * dx), math.cos(r * dx)
        sin_r[r], sin_r[n - r] = s, -s
        cos_r[r], cos_r[n - r] = c, c
    sin_r[n // 2], cos_r[n // 2] = 0.0, -1.0

    sin_b = np.empty(n)
    cos_b = np.empty(n)
    tan_half_b = np.empty(n)
    for j in range(n // 2):
        beta = (j + 0.5) * dx - math.pi  # negative half
        sin_b[j], sin_b[n - 1 - j] = math.sin(beta), -math.sin(beta)
        cos_b[j], cos_b[n - 1 - j] = math.cos(beta), math.cos(beta)
        tan_half_b[j], tan_half_b[n - 1 - j] = math.tan(0.5 * beta), -math.tan(0.5 * beta)
    return sin_r, cos_r, sin_b, cos_b, tan_half_b


def _require_clear_of_line(f: np.ndarray, h2: float) -> None:
    fmin = float(np.min(f))
    if fmin + h2 < TOUCH_GUARD_FRACTION * h2:
        raise TouchingRiskError(
            f"interface approaches the permeability line: min f = {fmin:.6g} "
            f"with h2 = {h2:.6g} (guard at min f + h2 >= {TOUCH_GUARD_FRACTION:g}*h2)"
        )


# --- numba inner loops -------------------------------------------------------
# Index bookkeeping: for node x_i and half offset beta_j one has
# x_i - beta_j = -pi + (m + 1/2) dx with m = (i - j - 1 + n/2) mod n, so the
# values of f at x_i - beta_j live on the single half-offset grid.


@njit(cache=True, parallel=True)
def _slope_kernel(f, df, f_half, df_half, sin_b, cos_b):
    n = f.shape[0]
    half = n // 2
    out = np.empty(n)
    for i in prange(n):
        fi = f[i]
        dfi = df[i]
        acc = 0.0
        for j in range(n):
            m = (i - j - 1 + half + n) % n
            acc += sin_b[j] * (dfi - df_half[m]) / (math.cosh(fi - f_half[m]) - cos_b[j])
        out[i] = acc
    return out


@njit(cache=True, parallel=True)
def _vorticity_reduced_kernel(f, h2, sin_r, cos_r):
    n = f.shape[0]
    out = np.empty(n)
    for i in prange(n):
        acc = 0.0
        for r in range(n):
            g = (i - r + n) % n
            acc += sin_r[r] / (math.cosh(h2 + f[g]) - cos_r[r])
        out[i] = acc
    return out


@njit(cache=True, parallel=True)
def _vorticity_full_kernel(f, df, h2, cos_r):
    n = f.shape[0]
    out = np.empty(n)
    for i in prange(n):
        acc = 0.0
        for r in range(n):
            g = (i - r + n) % n
            fg = h2 + f[g]
            acc += math.sinh(fg) * df[g] / (math.cosh(fg) - cos_r[r])
        out[i] = acc
    return out


@njit(cache=True, parallel=True)
def _sheet_kernel(f, df, w2, h2, sin_r, cos_r):
    n = f.shape[0]
    out = np.empty(n)
    for i in prange(n):
        ci = math.cosh(f[i] + h2)
        si = math.sinh(f[i] + h2)
        dfi = df[i]
        acc = 0.0
        for r in range(n):
            g = (i - r + n) % n
            acc += (dfi * si + sin_r[r]) * w2[g] / (ci - cos_r[r])
        out[i] = acc
    return out


@njit(cache=True, parallel=True)
def _arctan_potential_kernel(f, f_half, tan_half_b):
    n = f.shape[0]
    half = n // 2
    out = np.empty(n)
    for i in prange(n):
        fi = f[i]
        acc = 0.0
        for j in range(n):
            m = (i - j - 1 + half + n) % n
            acc += math.atan(math.tanh(0.5 * (fi - f_half[m])) / tan_half_b[j])
        out[i] = acc
    return out


@njit(cache=True, parallel=True)
def _log_potential_kernel(f, w2, h2, cos_r):
    n = f.shape[0]
    out = np.empty(n)
    for i in prange(n):
        ci = math.cosh(f[i] + h2)
        acc = 0.0
        for r in range(n):
            g = (i - r + n) % n
            acc += math.log(ci - cos_r[r]) * w2[g]
        out[i] = acc
    return out


# --- quadrature and vorticity -------------------------------------------------


def pv_quadrature_offset(kernel_samples_at_half_grid: np.ndarray) -> float:
    """Periodic trapezoid sum dx * sum(samples) on the half-offset grid.

    The integrand must be supplied at beta_j = -pi + (j+1/2) dx, so the
    (removable) singularity of principal-value kernels at beta = 0 is never
    evaluated.  For smooth periodic integrands the sum is spectrally
    accurate.
    """
    v = np.asarray(kernel_samples_at_half_grid, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-d array of integrand samples")
    bad = np.nonzero(~np.isfinite(v))[0]
    if bad.size:
        raise ValueError(f"non-finite integrand sample at half-grid node {bad[0]}")
    return float(TWO_PI / v.size * np.sum(v))


def vorticity_full(state: InterfaceState, params: PhysicalParams) -> np.ndarray:
    """Vorticity sheet amplitude w2 on the permeability line, slope form.

    w2(b) = A int sinh(h2 + f(g)) f'(g) / (cosh(h2 + f(g)) - cos(b - g)) dg,
    evaluated at the grid nodes.  The denominator stays above cosh(h2) - 1
    whenever f > 0, so the node-aligned trapezoid rule applies.
    """
    _require_clear_of_line(state.f, params.h2)
    grid = state.grid
    df = grid.differentiate(state.f, 1)
    _, cos_r, *_ = _angle_tables(grid.n)
    raw = _vorticity_full_kernel(state.f, df, params.h2, cos_r)
    return params.A * grid.dx * raw


def vorticity_reduced(state: InterfaceState, params: PhysicalParams) -> np.ndarray:
    """Vorticity sheet amplitude in the derivative-free (zero-order) form.

    w2(b) = A int sin(b - g) / (cosh(h2 + f(g)) - cos(b - g)) dg.  Equals
    :func:`vorticity_full` because the two integrands differ by a total
    derivative of log(cosh(h2 + f(g)) - cos(b - g)) in g, which integrates
    to zero over the torus.  Preferred inside RHS evaluations: one fewer
    differentiation of f.
    """
    _require_clear_of_line(state.f, params.h2)
    grid = state.grid
    sin_r, cos_r, *_ = _angle_tables(grid.n)
    raw = _vorticity_reduced_kernel(state.f, params.h2, sin_r, cos_r)
    return params.A * grid.dx * raw


def _vorticity_reduced_array(f: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    sin_r, cos_r, *_ = _angle_tables(grid.n)
    return params.A * grid.dx * _vorticity_reduced_kernel(f, params.h2, sin_r, cos_r)


# --- right-hand sides ----------------------------------------------------------


def _rhs_nondivergence_array(f: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    _require_clear_of_line(f, params.h2)
    sin_r, cos_r, sin_b, cos_b, _ = _angle_tables(grid.n)
    df = grid.differentiate(f, 1)
    f_half = grid.interpolate_half(f)
    df_half = grid.differentiate_half(f)
    w2 = params.A * grid.dx * _vorticity_reduced_kernel(f, params.h2, sin_r, cos_r)
    slope_term = _slope_kernel(f, df, f_half, df_half, sin_b, cos_b)
    sheet_term = _sheet_kernel(f, df, w2, params.h2, sin_r, cos_r)
    return grid.dx / FOUR_PI * (params.R * slope_term + sheet_term)


def _potentials_array(f: np.ndarray, grid: TorusGrid, params: PhysicalParams):
    _require_clear_of_line(f, params.h2)
    sin_r, cos_r, _, _, tan_half_b = _angle_tables(grid.n)
    f_half = grid.interpolate_half(f)
    w2 = params.A * grid.dx * _vorticity_reduced_kernel(f, params.h2, sin_r, cos_r)
    u = grid.dx * _arctan_potential_kernel(f, f_half, tan_half_b)
    v = grid.dx * _log_potential_kernel(f, w2, params.h2, cos_r)
    return u, v


def _rhs_divergence_array(f: np.ndarray, grid: TorusGrid, params: PhysicalParams) -> np.ndarray:
    u, v = _potentials_array(f, grid, params)
    potential = (params.R / TWO_PI) * u + v / FOUR_PI
    return grid.differentiate(potential, 1)


def rhs_array(f: np.ndarray, grid: TorusGrid, params: PhysicalParams, formulation: str) -> np.ndarray:
    """Raw df/dt samples without the dataclass wrapper (stepper fast path)."""
    if formulation == "nondivergence":
        return _rhs_nondivergence_array(f, grid, params)
    if formulation == "divergence":
        return _rhs_divergence_array(f, grid, params)
    raise ValueError(f"unknown formulation {formulation!r}")


def rhs_nondivergence(state: InterfaceState, params: PhysicalParams) -> RhsEvaluation:
    """Right-hand side in the direct kernel form."""
    tic = time.perf_counter()
    dfdt = _rhs_nondivergence_array(state.f, state.grid, params)
    return RhsEvaluation(dfdt, "nondivergence", time.perf_counter() - tic)


def rhs_divergence(state: InterfaceState, params: PhysicalParams) -> RhsEvaluation:
    """Right-hand side as the spatial derivative of the two potentials.

    df/dt = d/dx [ (R/2pi) U + (1/4pi) V ] with

        U(x) = PV int arctan( tanh((f(x) - f(x-b))/2) / tan(b/2) ) db,
        V(x) =    int log( cosh(f(x) + h2) - cos(x-b) ) w2(b) db.

    The prefactor R/2pi on U is the one consistent with the direct kernel
    form; the grid mean of the output vanishes to rounding because the
    spectral derivative of a periodic function has zero mean.
    """
    tic = time.perf_counter()
    dfdt = _rhs_divergence_array(state.f, state.grid, params)
    return RhsEvaluation(dfdt, "divergence", time.perf_counter() - tic)


def rhs_regularized(state: InterfaceState, params: PhysicalParams, epsilon: float) -> RhsEvaluation:
    """Direct kernel form plus the viscous term epsilon * d^2 f / dx^2."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    tic = time.perf_counter()
    dfdt = _rhs_nondivergence_array(state.f, state.grid, params)
    if epsilon > 0:
        dfdt = dfdt + epsilon * state.grid.differentiate(state.f, 2)
    return RhsEvaluation(dfdt, "regularized", time.perf_counter() - tic)


def divergence_potentials(state: InterfaceState, params: PhysicalParams):
    """Potential pair (U, V) of the divergence form, without prefactors.

    Shared by :func:`rhs_divergence` and the weak-formulation residual.
    """
    return _potentials_array(state.f, state.grid, params)
