"""Steppers, flow integrators, and run diagnostics.

All updates live in the dual space: the state carries z, the primal point
x = grad_h_conj(z) is recomputed after every update (and at every
integrator stage), and auxiliary state xi only exists for the
higher-order variant.  Trajectories are recorded as RunRecords with
per-sample diagnostics: target residual ||T(x) - x||, natural residual,
and the Bregman value against a reference point when one is known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, FlowDivergenceError
from .geometry import MirrorGeometry, bregman
from .problems import VIProblem, natural_residual
from .targets import TargetSpec, resolve_target

Vector = np.ndarray

DEFAULT_STOP_RESIDUAL = 1e-8
CONVERGED = "converged"
BUDGET = "budget_exhausted"


@dataclass(eq=False)
class SolverState:
    """Dual state z, its primal image x = grad_h_conj(z), counters, and
    the optional auxiliary state of the higher-order variant."""

    step_index: int
    time: float
    z: Vector
    x: Vector
    xi: Optional[Vector] = None


def initial_state(geometry: MirrorGeometry, x0=None) -> SolverState:
    """State at z0 = grad_h(x0); default x0 is the domain's analytic
    center (uniform on the simplex, box midpoint, origin on the whole
    space)."""
    x0 = geometry.domain.center() if x0 is None else np.asarray(x0, dtype=float)
    z0 = geometry.grad_h(x0)
    return SolverState(0, 0.0, z0, geometry.grad_h_conj(z0))


def state_from_dual(geometry: MirrorGeometry, z0) -> SolverState:
    """State at an explicitly chosen dual point (needed when grad_h has no
    closed form, e.g. synthesized ensemble geometries)."""
    z0 = np.asarray(z0, dtype=float)
    return SolverState(0, 0.0, z0.copy(), geometry.grad_h_conj(z0))


def dual_rate(spec: TargetSpec, x: Vector, tx: Vector) -> Vector:
    """alpha * (S(T(x)) - S(x)) - beta * Phi(x)."""
    x = np.asarray(x, dtype=float)
    rate = np.zeros_like(x)
    if spec.alpha != 0.0:
        if spec.dual_gap is not None:
            rate = spec.alpha * spec.dual_gap(x, tx)
        else:
            rate = spec.alpha * (spec.S(tx) - spec.S(x))
    if spec.beta != 0.0:
        rate = rate - spec.beta * spec.Phi(x)
    return rate


def step_discrete(geometry: MirrorGeometry, spec: TargetSpec,
                  state: SolverState) -> SolverState:
    """One discrete step: accumulate the dual rate into z, pull x back
    through the mirror map.  Step size is absorbed into alpha/beta."""
    tx = resolve_target(spec, spec.feasible_set, state.x)
    z1 = state.z + dual_rate(spec, state.x, tx)
    return SolverState(state.step_index + 1, state.time + 1.0,
                       z1, geometry.grad_h_conj(z1), state.xi)


def step_calibrated_dmd(geometry: MirrorGeometry, spec: TargetSpec,
                        state: SolverState, gamma: float, dt: float) -> SolverState:
    """One Euler step of the discounted dual update z' = gamma*(S(T(x)) - z).

    Valid for design tuples where alpha*S + beta*Phi collapses to grad_h
    (both calibrated cases); at equilibrium z = S(T(x)), which under case 1
    forces T(x) = x, i.e. the equilibrium is a true solution.
    """
    tx = resolve_target(spec, spec.feasible_set, state.x)
    z1 = state.z + dt * gamma * (spec.S(tx) - state.z)
    return SolverState(state.step_index + 1, state.time + dt,
                       z1, geometry.grad_h_conj(z1), state.xi)


def step_vanilla_dmd(geometry: MirrorGeometry, problem: VIProblem,
                     state: SolverState, gamma: float, dt: float) -> SolverState:
    """Uncalibrated discounted update z' = gamma*(-F(x) - z); its
    equilibria solve z = -F(x) with x = grad_h_conj(z), which generally is
    NOT a solution of the inequality.  Ships as a baseline."""
    z1 = state.z + dt * gamma * (-problem.F(state.x) - state.z)
    return SolverState(state.step_index + 1, state.time + dt,
                       z1, geometry.grad_h_conj(z1), state.xi)


def step_higher_order(geometry: MirrorGeometry, spec: TargetSpec,
                      state: SolverState, gamma1: float, gamma2: float,
                      dt: float) -> SolverState:
    """One Euler step of the second-order variant:

        z'  = alpha*(S(T(x)) - S(x)) - beta*Phi(x) - gamma1*(x - xi)
        xi' = gamma2*(x - xi)

    xi defaults to x0.  At equilibrium x = xi and the first-order
    stationarity conditions hold simultaneously.  Setting alpha = 0
    recovers the second-order mirror descent baseline, which needs
    interior solutions; with the target correction the restriction
    disappears.
    """
    if gamma1 <= 0.0 or gamma2 <= 0.0:
        raise ConfigurationError("gamma1 and gamma2 must be positive")
    xi = state.x.copy() if state.xi is None else state.xi
    tx = resolve_target(spec, spec.feasible_set, state.x)
    zdot = dual_rate(spec, state.x, tx) - gamma1 * (state.x - xi)
    z1 = state.z + dt * zdot
    xi1 = xi + dt * gamma2 * (state.x - xi)
    return SolverState(state.step_index + 1, state.time + dt,
                       z1, geometry.grad_h_conj(z1), xi1)


# ---------------------------------------------------------------------------
# Run records
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RunRecord:
    """Sampled trajectory plus aligned per-sample diagnostics."""

    steps: Vector
    times: Vector
    states: Vector                  # (n_samples, dim)
    target_residuals: Vector        # NaN where no target map applies
    natural_residuals: Vector       # NaN when no problem was supplied
    lyapunov: Optional[Vector]      # None when no reference point is known
    descent_margins: Optional[Vector]  # relaxed descent values vs the reference
    termination: str
    mode: str                       # "discrete" | "euler" | "rk4"
    dt: float
    final_state: SolverState


class _Recorder:
    def __init__(self, geometry, spec, problem, reference):
        self.geometry = geometry
        self.spec = spec
        self.problem = problem
        self.reference = None if reference is None else np.asarray(reference, dtype=float)
        self.steps = []
        self.times = []
        self.states = []
        self.target_res = []
        self.natural_res = []
        has_reference = self.reference is not None
        self.lyapunov = [] if has_reference else None
        self.margins = [] if has_reference and spec is not None else None
        self.last_step = -1

    def push(self, state: SolverState, tx: Optional[Vector]):
        if state.step_index == self.last_step:
            return
        self.last_step = state.step_index
        self.steps.append(state.step_index)
        self.times.append(state.time)
        self.states.append(state.x.copy())
        self.target_res.append(
            float(np.linalg.norm(tx - state.x)) if tx is not None else math.nan)
        if self.problem is not None:
            point = state.x
            if self.spec is not None and self.spec.shadow is not None:
                point = self.spec.shadow(state.x)
            self.natural_res.append(natural_residual(self.problem, point))
        else:
            self.natural_res.append(math.nan)
        if self.lyapunov is not None:
            self.lyapunov.append(bregman(self.geometry, self.reference, state.x))
        if self.margins is not None:
            self.margins.append(
                math.nan if tx is None else
                _margin_from_target(self.spec, state.x, tx, self.reference))

    def finish(self, termination, mode, dt, final_state) -> RunRecord:
        return RunRecord(
            steps=np.asarray(self.steps, dtype=int),
            times=np.asarray(self.times, dtype=float),
            states=np.asarray(self.states, dtype=float),
            target_residuals=np.asarray(self.target_res, dtype=float),
            natural_residuals=np.asarray(self.natural_res, dtype=float),
            lyapunov=None if self.lyapunov is None else np.asarray(self.lyapunov, dtype=float),
            descent_margins=None if self.margins is None else np.asarray(self.margins, dtype=float),
            termination=termination,
            mode=mode,
            dt=dt,
            final_state=final_state,
        )


def _stationarity(spec, problem, state, tx):
    """Residual driving the stopping rule: ||T(x) - x|| when the target
    mechanism is active; the natural residual for the alpha = 0 baseline
    (whose target residual is vacuously zero)."""
    if spec.alpha > 0.0:
        return float(np.linalg.norm(tx - state.x))
    if problem is None:
        return math.inf
    return natural_residual(problem, state.x)


def run_discrete(geometry: MirrorGeometry, spec: TargetSpec,
                 problem: Optional[VIProblem] = None, x0=None,
                 n_steps: int = 1000,
                 stop_residual: float = DEFAULT_STOP_RESIDUAL,
                 stride: int = 1, reference=None,
                 state: Optional[SolverState] = None) -> RunRecord:
    """Drive step_discrete for up to n_steps, stopping early once the
    stationarity residual falls below stop_residual."""
    if state is None:
        state = initial_state(geometry, x0)
    rec = _Recorder(geometry, spec, problem, reference)
    tx = resolve_target(spec, spec.feasible_set, state.x)
    rec.push(state, tx)
    termination = BUDGET
    for _ in range(n_steps):
        if _stationarity(spec, problem, state, tx) <= stop_residual:
            termination = CONVERGED
            break
        z1 = state.z + dual_rate(spec, state.x, tx)
        state = SolverState(state.step_index + 1, state.time + 1.0,
                            z1, geometry.grad_h_conj(z1), state.xi)
        tx = resolve_target(spec, spec.feasible_set, state.x)
        if state.step_index % stride == 0:
            rec.push(state, tx)
    rec.push(state, tx)
    return rec.finish(termination, "discrete", 1.0, state)


class _NonFinite(Exception):
    pass


def _check_finite(state):
    if not (np.all(np.isfinite(state.z)) and np.all(np.isfinite(state.x))):
        raise _NonFinite


def _flow_once(geometry, spec, state0, integrator, dt, t_end, problem,
               reference, stop_residual, stride):
    state = state0
    rec = _Recorder(geometry, spec, problem, reference)

    def rate_at(z):
        x = geometry.grad_h_conj(z)
        tx = resolve_target(spec, spec.feasible_set, x)
        return dual_rate(spec, x, tx), tx

    n_steps = max(0, int(round(t_end / dt)))
    tx = resolve_target(spec, spec.feasible_set, state.x)
    rec.push(state, tx)
    termination = BUDGET
    for _ in range(n_steps):
        if _stationarity(spec, problem, state, tx) <= stop_residual:
            termination = CONVERGED
            break
        if integrator == "euler":
            k1 = dual_rate(spec, state.x, tx)
            z1 = state.z + dt * k1
        else:  # rk4; x is recomputed through the mirror map at every stage
            k1 = dual_rate(spec, state.x, tx)
            k2, _ = rate_at(state.z + 0.5 * dt * k1)
            k3, _ = rate_at(state.z + 0.5 * dt * k2)
            k4, _ = rate_at(state.z + dt * k3)
            z1 = state.z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        state = SolverState(state.step_index + 1, state.time + dt,
                            z1, geometry.grad_h_conj(z1), state.xi)
        _check_finite(state)
        tx = resolve_target(spec, spec.feasible_set, state.x)
        if state.step_index % stride == 0:
            rec.push(state, tx)
    rec.push(state, tx)
    return rec.finish(termination, integrator, dt, state)


def flow(geometry: MirrorGeometry, spec: TargetSpec,
         state: Optional[SolverState] = None, integrator: str = "euler",
         dt: float = 1e-2, t_end: float = 10.0,
         problem: Optional[VIProblem] = None, x0=None, reference=None,
         stop_residual: float = DEFAULT_STOP_RESIDUAL, stride: int = 10,
         max_halvings: int = 8) -> RunRecord:
    """Integrate z' = alpha*(S o T - S)(x) - beta*Phi(x), x = grad_h_conj(z).

    Non-finite states trigger automatic halving of dt (up to max_halvings)
    before giving up with a diagnostic.
    """
    if integrator not in ("euler", "rk4"):
        raise ConfigurationError("integrator must be 'euler' or 'rk4'")
    if dt <= 0.0:
        raise ConfigurationError("dt must be positive")
    if state is None:
        state = initial_state(geometry, x0)
    for _ in range(max_halvings + 1):
        try:
            return _flow_once(geometry, spec, state, integrator, dt, t_end,
                              problem, reference, stop_residual, stride)
        except _NonFinite:
            dt *= 0.5
    raise FlowDivergenceError(
        f"trajectory stayed non-finite down to dt = {dt:g}; "
        "the dynamics appear to diverge")


def _run_stepper(geometry, spec, problem, stepper, stationarity, state,
                 dt, t_end, stop_residual, stride, reference, mode):
    rec = _Recorder(geometry, spec, problem, reference)
    tx = (resolve_target(spec, spec.feasible_set, state.x)
          if spec is not None else None)
    rec.push(state, tx)
    termination = BUDGET
    n_steps = max(0, int(round(t_end / dt)))
    for _ in range(n_steps):
        if stationarity(state, tx) <= stop_residual:
            termination = CONVERGED
            break
        state = stepper(state)
        _check_finite(state)
        tx = (resolve_target(spec, spec.feasible_set, state.x)
              if spec is not None else None)
        if state.step_index % stride == 0:
            rec.push(state, tx)
    rec.push(state, tx)
    return rec.finish(termination, mode, dt, state)


def run_dmd(geometry: MirrorGeometry, spec: TargetSpec, gamma: float = 1.0,
            dt: float = 1e-2, t_end: float = 50.0,
            problem: Optional[VIProblem] = None, x0=None, reference=None,
            stop_residual: float = DEFAULT_STOP_RESIDUAL,
            stride: int = 10) -> RunRecord:
    """Calibrated discounted flow; stops on the dual mismatch
    ||S(T(x)) - z||, which vanishes exactly at equilibrium."""
    state = initial_state(geometry, x0)

    def stepper(st):
        return step_calibrated_dmd(geometry, spec, st, gamma, dt)

    def stationarity(st, tx):
        return float(np.linalg.norm(spec.S(tx) - st.z))

    return _run_stepper(geometry, spec, problem, stepper, stationarity,
                        state, dt, t_end, stop_residual, stride, reference,
                        "euler")


def run_vanilla_dmd(geometry: MirrorGeometry, problem: VIProblem,
                    gamma: float = 1.0, dt: float = 1e-2, t_end: float = 50.0,
                    x0=None, reference=None,
                    stop_residual: float = DEFAULT_STOP_RESIDUAL,
                    stride: int = 10) -> RunRecord:
    """Uncalibrated discounted flow baseline; stops on ||-F(x) - z||."""
    state = initial_state(geometry, x0)

    def stepper(st):
        return step_vanilla_dmd(geometry, problem, st, gamma, dt)

    def stationarity(st, tx):
        return float(np.linalg.norm(-problem.F(st.x) - st.z))

    return _run_stepper(geometry, None, problem, stepper, stationarity,
                        state, dt, t_end, stop_residual, stride, reference,
                        "euler")


def run_higher_order(geometry: MirrorGeometry, spec: TargetSpec,
                     gamma1: float = 1.0, gamma2: float = 1.0,
                     dt: float = 1e-2, t_end: float = 100.0,
                     problem: Optional[VIProblem] = None, x0=None,
                     reference=None,
                     stop_residual: float = DEFAULT_STOP_RESIDUAL,
                     stride: int = 10) -> RunRecord:
    """Second-order flow; stationarity combines the target residual with
    the auxiliary gap ||x - xi||, both of which vanish at equilibrium."""
    state = initial_state(geometry, x0)
    state.xi = state.x.copy()

    def stepper(st):
        return step_higher_order(geometry, spec, st, gamma1, gamma2, dt)

    def stationarity(st, tx):
        gap = float(np.linalg.norm(st.x - st.xi)) if st.xi is not None else 0.0
        return max(float(np.linalg.norm(tx - st.x)), gap)

    return _run_stepper(geometry, spec, problem, stepper, stationarity,
                        state, dt, t_end, stop_residual, stride, reference,
                        "euler")


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass
class LyapunovReport:
    """Bregman values along a run, indices of band-exceeding increases,
    the band itself, and the running integral of the dissipation bound
    alpha * sigma * ||T(x) - x||^2 for comparison with the total decrease."""

    values: Vector
    violations: list
    band: float
    dissipation_running: Vector
    dissipation_integral: float
    total_decrease: float


def violation_band(record: RunRecord) -> float:
    """Tolerated per-sample increase: discretization admits bounded
    overshoot, so the band scales with the integrator's local error."""
    if record.mode == "discrete":
        return 1e-9
    if record.mode == "euler":
        return max(1e-9, 10.0 * record.dt ** 2)
    return max(1e-9, 10.0 * record.dt ** 4)


def lyapunov_series(record: RunRecord, geometry: MirrorGeometry, reference,
                    spec: Optional[TargetSpec] = None) -> LyapunovReport:
    """Bregman distance from the reference along the samples, with every
    index where it increases beyond the integrator band flagged."""
    reference = np.asarray(reference, dtype=float)
    values = np.array([bregman(geometry, reference, x) for x in record.states])
    band = violation_band(record)
    diffs = np.diff(values)
    violations = [int(i) for i in np.nonzero(diffs > band)[0]]
    running = np.zeros_like(values)
    if spec is not None and record.states.shape[0] > 1:
        rates = spec.alpha * spec.sigma * record.target_residuals ** 2
        if np.all(np.isfinite(rates)):
            widths = np.diff(record.times)
            running[1:] = np.cumsum(0.5 * (rates[1:] + rates[:-1]) * widths)
    return LyapunovReport(values=values, violations=violations, band=band,
                          dissipation_running=running,
                          dissipation_integral=float(running[-1]),
                          total_decrease=float(values[0] - values[-1]))


def _margin_from_target(spec, x, tx, x_bar) -> float:
    gap = tx - x
    value = spec.alpha * (spec.sigma * float(np.dot(gap, gap))
                          + float(np.dot(spec.phi_at_target(x, tx), tx - x_bar)))
    if spec.beta != 0.0:
        value += spec.beta * float(np.dot(spec.Phi(x), x - x_bar))
    return value


def relaxed_condition_value(spec: TargetSpec, x, x_bar) -> float:
    """Descent margin at x against the reference x_bar:

        alpha * (sigma * ||T(x)-x||^2 + <Phi(T(x)), T(x) - x_bar>)
          + beta * <Phi(x), x - x_bar>.

    Positive values certify the relaxed descent condition at x even when
    no point is perfectly stable for Phi.  Norms are Euclidean.
    """
    x = np.asarray(x, dtype=float)
    x_bar = np.asarray(x_bar, dtype=float)
    tx = resolve_target(spec, spec.feasible_set, x)
    return _margin_from_target(spec, x, tx, x_bar)


def primal_vector_field(geometry: MirrorGeometry, spec: TargetSpec, x) -> Vector:
    """dx/dt at x: the dual rate pushed through the mirror map's Jacobian.

    Only available for geometries with a smooth conjugate (whole-space
    quadratics, entropy).  For the entropy geometry the Jacobian
    annihilates constant dual shifts, which is what makes simplex flows
    insensitive to normalization constants in the dual update.
    """
    if geometry.conj_jacobian is None:
        raise ConfigurationError(
            f"geometry {geometry.name!r} has no closed-form mirror-map Jacobian")
    x = np.asarray(x, dtype=float)
    tx = resolve_target(spec, spec.feasible_set, x)
    return geometry.conj_jacobian(x) @ dual_rate(spec, x, tx)
