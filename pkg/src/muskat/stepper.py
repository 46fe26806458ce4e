"""Time integration of the (optionally viscous) contour equation.

Two explicit steppers are provided: classical RK4 in physical space and an
integrating-factor RK4 that treats the viscous term exp(-eps k^2 t) exactly
in Fourier space, removing its step-size restriction.  ``run`` assembles a
trajectory with per-record diagnostics and never raises on mathematical
failures; it returns a tagged termination instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, kernels
from .core import (
    BlowupDetectedError,
    InterfaceState,
    PhysicalParams,
    SolverConfig,
    TorusGrid,
    TouchingRiskError,
    heat_mollify,
    spectral_derivative,
    sup_norm,
)

#: RK4 absolute-stability extent on the negative real axis
_RK4_REAL_AXIS = 2.8

_MAX_STEPS = 20_000_000


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded states and diagnostics of one integration."""

    states: list[InterfaceState]
    records: list["diagnostics.DiagnosticsRecord"]
    config: SolverConfig
    params: PhysicalParams
    termination: str

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def series(self, name: str) -> np.ndarray:
        """Column of the diagnostics records, e.g. series('osc')."""
        return np.array([getattr(r, name) for r in self.records])

    @property
    def final_state(self) -> InterfaceState:
        return self.states[-1]


def _checked_state(grid: TorusGrid, f: np.ndarray, t: float) -> InterfaceState:
    if not np.all(np.isfinite(f)):
        raise BlowupDetectedError(f"non-finite interface samples at t = {t:.6g}")
    return InterfaceState(grid, f, t)


def step_rk4(
    state: InterfaceState,
    params: PhysicalParams,
    dt: float,
    epsilon: float = 0.0,
    formulation: str = "nondivergence",
) -> InterfaceState:
    """One classical 4-stage explicit step of the regularized equation."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid

    def rate(f):
        out = kernels.rhs_array(f, grid, params, formulation)
        if epsilon > 0:
            out = out + epsilon * grid.differentiate(f, 2)
        return out

    f0 = state.f
    k1 = rate(f0)
    k2 = rate(f0 + 0.5 * dt * k1)
    k3 = rate(f0 + 0.5 * dt * k2)
    k4 = rate(f0 + dt * k3)
    f1 = f0 + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return _checked_state(grid, f1, state.t + dt)


def step_ifrk4(
    state: InterfaceState,
    params: PhysicalParams,
    dt: float,
    epsilon: float = 0.0,
    formulation: str = "nondivergence",
) -> InterfaceState:
    """Integrating-factor RK4: exact viscous propagator, RK4 on the rest.

    With epsilon = 0 the propagators collapse to 1 and the scheme reduces to
    :func:`step_rk4` up to FFT round-off; the purely viscous part is
    integrated exactly for any dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    grid = state.grid
    n = grid.n
    lam = -epsilon * grid.dissipation_symbol
    e_half = np.exp(0.5 * dt * lam)
    e_full = np.exp(dt * lam)

    def rate_hat(u_hat):
        f = np.fft.irfft(u_hat, n)
        return np.fft.rfft(kernels.rhs_array(f, grid, params, formulation))

    v = np.fft.rfft(state.f)
    a = rate_hat(v)
    b = rate_hat(e_half * (v + 0.5 * dt * a))
    c = rate_hat(e_half * v + 0.5 * dt * b)
    d = rate_hat(e_full * v + dt * e_half * c)
    v1 = e_full * v + (dt / 6.0) * (e_full * a + 2.0 * e_half * (b + c) + d)
    return _checked_state(grid, np.fft.irfft(v1, n), state.t + dt)


def select_dt(
    state: InterfaceState,
    params: PhysicalParams,
    grid: TorusGrid | None = None,
    cfl_safety: float = 0.5,
    *,
    epsilon: float = 0.0,
    stepper: str = "rk4",
) -> float:
    """Transport-limited step dt = cfl * dx / v_max.

    v_max is a coarse bound on the kernel magnitudes,
    (|R|/2)(1 + ||f'||_inf) + |A| 2pi sinh(||f||_inf + h2)/(cosh h2 - 1)^2.
    For epsilon > 0 with the plain RK4 stepper the viscous restriction
    dt <= cfl * 2.8 / (eps k_max^2) is enforced as well; the integrating
    factor stepper has no viscous limit.
    """
    grid = grid or state.grid
    lip = sup_norm(spectral_derivative(state, 1))
    fsup = sup_norm(state.f)
    ch = math.cosh(params.h2) - 1.0
    v_max = 0.5 * abs(params.R) * (1.0 + lip)
    v_max += abs(params.A) * 2.0 * math.pi * math.sinh(fsup + params.h2) / ch**2
    dt = cfl_safety * grid.dx / max(v_max, 1e-12)
    if epsilon > 0 and stepper == "rk4":
        k_max = grid.n // 2
        dt = min(dt, cfl_safety * _RK4_REAL_AXIS / (epsilon * k_max**2))
    return dt


def _resolve_steps(config: SolverConfig, dt0: float):
    """Uniform steps of dt when dt divides t_end, else a short final step."""
    ratio = config.t_end / dt0
    n_round = int(round(ratio))
    if n_round >= 1 and abs(ratio - n_round) <= 1e-8 * max(1.0, ratio):
        return dt0, n_round, None
    n_full = int(math.floor(ratio))
    last = config.t_end - n_full * dt0
    return dt0, n_full, (last if last > 1e-12 * dt0 else None)


def run(initial: InterfaceState, params: PhysicalParams, config: SolverConfig) -> Trajectory:
    """Integrate the interface from ``initial`` to ``config.t_end``.

    The initial profile is mollified with the heat kernel at time
    ``config.mollify_eps`` before stepping.  Diagnostics are recorded at
    t = 0, every ``config.output_every`` steps, and at the final time.
    Mathematical failures terminate the trajectory early with a tag
    (touching_risk, blowup_detected) instead of raising.
    """
    if not initial.is_positive:
        raise ValueError(
            f"initial interface must satisfy min f > 0, got min f = {initial.min_f:.6g}"
        )
    if not params.rt_stable:
        warnings.warn(
            "rho- - rho+ <= 0: outside the gravitationally stable regime, "
            "decay certificates do not apply",
            stacklevel=2,
        )

    state = heat_mollify(initial, config.mollify_eps)
    grid = state.grid
    stepper_kind = config.stepper
    if stepper_kind == "auto":
        stepper_kind = "ifrk4" if config.epsilon > 0 else "rk4"
    step = step_ifrk4 if stepper_kind == "ifrk4" else step_rk4

    if config.dt == "auto":
        dt0 = select_dt(
            state,
            params,
            grid,
            config.cfl_safety,
            epsilon=config.epsilon,
            stepper=stepper_kind,
        )
        dt0 = min(dt0, config.t_end)
    else:
        dt0 = float(config.dt)
    dt, n_full, last_dt = _resolve_steps(config, dt0)
    total = n_full + (1 if last_dt else 0)
    if total > _MAX_STEPS:
        raise ValueError(f"time step {dt:.3g} requires {total} steps; refusing")

    states = [state]
    records = [diagnostics.record(state)]
    termination = "completed"
    for k in range(1, total + 1):
        step_dt = last_dt if (last_dt and k == total) else dt
        try:
            state = step(state, params, step_dt, config.epsilon, config.formulation)
        except TouchingRiskError:
            termination = "touching_risk"
            break
        except BlowupDetectedError:
            termination = "blowup_detected"
            break
        hit_line = state.min_f + params.h2 <= kernels.TOUCH_GUARD_FRACTION * params.h2
        if state.min_f <= 0.0 or hit_line:
            states.append(state)
            records.append(diagnostics.record(state))
            termination = "touching_risk"
            break
        if k % config.output_every == 0 or k == total:
            states.append(state)
            records.append(diagnostics.record(state))
    return Trajectory(states, records, config, params, termination)
