"""Time integration of the reduced model and the descriptor reference."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import ModelError, ParameterError
from .linear import DescriptorSystem, ReducedSystem


@dataclass
class SimState:
    """Dynamic plant state.

    ``load`` is the connected secure load per load bus (absolute, pu) and
    ``attack`` the vulnerable-load injection on top of it. The model input is
    ``load - nominal + attack``.
    """

    delta: np.ndarray
    omega: np.ndarray
    load: np.ndarray
    nominal: np.ndarray
    attack: np.ndarray
    setpoints: np.ndarray
    time: float = 0.0
    theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lag: np.ndarray = field(default_factory=lambda: np.zeros(0))   # governor/turbine states

    @classmethod
    def initial(cls, red: ReducedSystem, nominal_load: np.ndarray) -> "SimState":
        g, l = red.n_gen, red.n_load
        nominal = np.asarray(nominal_load, float).copy()
        return cls(np.zeros(g), np.zeros(g), nominal.copy(), nominal, np.zeros(l), np.zeros(g),
                   0.0, np.zeros(l), np.zeros(2 * red.n_lag))

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.delta, self.omega, self.lag])

    def set_x(self, x: np.ndarray) -> None:
        g = len(self.delta)
        self.delta, self.omega, self.lag = x[:g].copy(), x[g:2 * g].copy(), x[2 * g:].copy()

    @property
    def load_dev(self) -> np.ndarray:
        return self.load - self.nominal + self.attack

    def copy(self) -> "SimState":
        return replace(self, delta=self.delta.copy(), omega=self.omega.copy(), load=self.load.copy(),
                       attack=self.attack.copy(), setpoints=self.setpoints.copy(),
                       theta=self.theta.copy(), lag=self.lag.copy())


def rk4(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: SimState, sys: ReducedSystem, inputs=None, dt: float = 0.01) -> SimState:
    """Advance the reduced model by one classical RK4 step.

    ``inputs`` is the load-deviation vector held over the step; when omitted
    it is taken from the state. A callable ``inputs(x)`` is evaluated at every
    stage, which models an agent sensing the plant continuously.
    """
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    g = sys.n_gen
    u_gen = sys.B_gen @ state.setpoints
    if callable(inputs):
        def f(x):
            return sys.A @ x + sys.B @ inputs(x) + u_gen
        u_last = None
    else:
        u = state.load_dev if inputs is None else np.asarray(inputs, float)
        if not np.all(np.isfinite(u)):
            raise ParameterError("non-finite load input")
        drive = sys.B @ u + u_gen

        def f(x):
            return sys.A @ x + drive
        u_last = u
    with np.errstate(over="ignore", invalid="ignore"):
        x = rk4(f, state.x, dt)
    new = state.copy()
    new.set_x(x)
    new.time = state.time + dt
    if not np.all(np.isfinite(x)):
        raise DivergenceError(new.time)
    if u_last is not None:
        new.theta = sys.theta(new.delta, u_last)
    return new


class DivergenceError(ModelError):
    def __init__(self, time: float):
        self.time = time
        super().__init__(f"state became non-finite at t={time:.3f} s")


class Stepper:
    """Precomputed RK4 propagator for a fixed step.

    For a linear system with inputs held over the step, classical RK4 is
    exactly ``x+ = Phi x + Gamma u``; precomputing both keeps long co-simulation
    runs cheap without changing the scheme.
    """

    def __init__(self, sys: ReducedSystem, dt: float, A: np.ndarray | None = None):
        if not dt > 0:
            raise ParameterError("dt must be > 0")
        self.sys = sys
        self.dt = dt
        A = sys.A if A is None else A
        n = A.shape[0]
        hA = dt * A
        hA2 = hA @ hA
        hA3 = hA2 @ hA
        self.Phi = np.eye(n) + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
        S = dt * (np.eye(n) + hA / 2 + hA2 / 6 + hA3 / 24)
        self.G_load = S @ sys.B
        self.G_gen = S @ sys.B_gen

    def advance(self, x: np.ndarray, load_dev: np.ndarray, setpoints: np.ndarray) -> np.ndarray:
        return self.Phi @ x + self.G_load @ load_dev + self.G_gen @ setpoints


def simulate_reduced(sys: ReducedSystem, x0, load_dev: Callable[[float], np.ndarray], t_end: float,
                     dt: float = 0.01, A: np.ndarray | None = None):
    """Integrate with RK4 under a time-varying load profile; returns (t, X)."""
    stepper = Stepper(sys, dt, A)
    n = int(round(t_end / dt))
    X = np.empty((n + 1, len(x0)))
    X[0] = x0
    zero_sp = np.zeros(sys.n_gen)
    for k in range(n):
        X[k + 1] = stepper.advance(X[k], load_dev(k * dt), zero_sp)
    return np.arange(n + 1) * dt, X


def simulate_descriptor(desc: DescriptorSystem, delta0, omega0, load_dev: Callable[[float], np.ndarray],
                        t_eval: np.ndarray, rtol: float = 1e-11, atol: float = 1e-13):
    """Reference solution of the descriptor model as an index-1 DAE.

    The algebraic load-angle row is solved with a fresh linear solve at each
    right-hand-side evaluation, and the differential rows are integrated by an
    adaptive high-order method. Returns ``(delta, theta, omega)`` arrays over
    ``t_eval``.
    """
    d_s, t_s, w_s = desc.blocks()
    A = desc.A
    A_th = A[t_s, t_s]
    M = desc.M

    def theta_of(delta, t):
        return np.linalg.solve(A_th, -A[t_s, d_s] @ delta - load_dev(t))

    def rhs(t, y):
        g = desc.n_gen
        delta, omega = y[:g], y[g:]
        theta = theta_of(delta, t)
        # -M w' = A_wd delta + A_wt theta + A_ww omega
        w_dot = -(A[w_s, d_s] @ delta + A[w_s, t_s] @ theta + A[w_s, w_s] @ omega) / M
        return np.concatenate([omega, w_dot])

    y0 = np.concatenate([delta0, omega0])
    sol = solve_ivp(rhs, (t_eval[0], t_eval[-1]), y0, method="DOP853", t_eval=t_eval,
                    rtol=rtol, atol=atol)
    g = desc.n_gen
    delta = sol.y[:g].T
    omega = sol.y[g:].T
    theta = np.array([theta_of(d, t) for d, t in zip(delta, t_eval)])
    return delta, theta, omega
