"""Differentiable one-step motion models: kinematic bicycle for vehicles,
unicycle for pedestrians, plus the Gaussian state transition and its log
density.

The `*_step_t` functions operate on tape Tensors (any matching shapes, so a
whole agent batch steps at once); the AgentState wrappers are conveniences
for scalar use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tape as T
from .core import Action, AgentState, ContractError, InvalidInputError, normalize_angle

DEFAULT_SIGMA = (0.02, 0.02, 0.01, 0.05)  # x, y, phi, v


@dataclass(frozen=True)
class BicycleParams:
    lf: float  # center to front axle, m
    lr: float  # center to rear axle, m
    dt: float  # s
    max_steer: float = math.pi / 4.0
    max_accel: float = 5.0

    def __post_init__(self):
        if self.lf <= 0 or self.lr <= 0 or self.dt <= 0:
            raise InvalidInputError("lf, lr, dt must be positive")
        if not 0 < self.max_steer < math.pi / 2.0:
            raise InvalidInputError("max_steer must lie in (0, pi/2)")

    @classmethod
    def for_length(cls, length: float, dt: float, **kw) -> "BicycleParams":
        # no axle geometry in the data; put both axles half a length out
        return cls(lf=length / 2.0, lr=length / 2.0, dt=dt, **kw)


@dataclass(frozen=True)
class UnicycleParams:
    dt: float
    max_omega: float = 2.0
    max_accel: float = 2.5

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidInputError("dt must be positive")


def bicycle_step_t(x, y, phi, v, a1, a2, p: BicycleParams):
    """Kinematic bicycle update on Tensors; returns (x', y', phi', v')."""
    a1 = T.clamp(T.as_tensor(a1), -p.max_accel, p.max_accel)
    a2 = T.clamp(T.as_tensor(a2), -p.max_steer, p.max_steer)
    beta = T.atan(T.mul(T.tan(a2), p.lr / (p.lf + p.lr)))
    heading = T.add(T.as_tensor(phi), beta)
    x2 = T.add(x, T.mul(T.mul(v, T.cos(heading)), p.dt))
    y2 = T.add(y, T.mul(T.mul(v, T.sin(heading)), p.dt))
    phi2 = T.wrap_angle(T.add(phi, T.mul(T.mul(T.div(v, p.lr), T.sin(beta)), p.dt)))
    v2 = T.add(v, T.mul(a1, p.dt))
    return x2, y2, phi2, v2


def unicycle_step_t(x, y, phi, v, a1, a2, p: UnicycleParams):
    """Unicycle update on Tensors; a2 is angular velocity."""
    a1 = T.clamp(T.as_tensor(a1), -p.max_accel, p.max_accel)
    a2 = T.clamp(T.as_tensor(a2), -p.max_omega, p.max_omega)
    x2 = T.add(x, T.mul(T.mul(v, T.cos(T.as_tensor(phi))), p.dt))
    y2 = T.add(y, T.mul(T.mul(v, T.sin(T.as_tensor(phi))), p.dt))
    phi2 = T.wrap_angle(T.add(phi, T.mul(a2, p.dt)))
    v2 = T.add(v, T.mul(a1, p.dt))
    return x2, y2, phi2, v2


def _step_states(step_t, s: AgentState, a: Action, p) -> AgentState:
    if not all(map(math.isfinite, (s.x, s.y, s.phi, s.v, a.a1, a.a2))):
        raise InvalidInputError("state and action must be finite")
    parts = step_t(*(T.Tensor(c) for c in (s.x, s.y, s.phi, s.v, a.a1, a.a2)), p)
    return AgentState(*(float(t.data) for t in parts))


def bicycle_step(s: AgentState, a: Action, p: BicycleParams) -> AgentState:
    """Mean next state under the kinematic bicycle model."""
    return _step_states(bicycle_step_t, s, a, p)


def unicycle_step(s: AgentState, a: Action, p: UnicycleParams) -> AgentState:
    return _step_states(unicycle_step_t, s, a, p)


def step_fn_for_kind(kind) -> object:
    from .core import AgentKind

    return bicycle_step_t if kind == AgentKind.VEHICLE else unicycle_step_t


def gaussian_transition_t(x, y, phi, v, sigma, noise):
    """Reparameterized draw around a kinematic mean.

    sigma: 4 per-component stds; noise: array (..., 4) of standard-normal
    draws matching the component shapes. Differentiable w.r.t. the mean.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (4,):
        raise ContractError("sigma must have 4 components (x, y, phi, v)")
    if np.any(sigma < 0):
        raise InvalidInputError("sigma must be nonnegative")
    noise = np.asarray(noise, dtype=float)
    x2 = T.add(x, sigma[0] * noise[..., 0])
    y2 = T.add(y, sigma[1] * noise[..., 1])
    phi2 = T.wrap_angle(T.add(phi, sigma[2] * noise[..., 2]))
    v2 = T.add(v, sigma[3] * noise[..., 3])
    return x2, y2, phi2, v2


def gaussian_transition(mean: AgentState, sigma, noise) -> AgentState:
    noise = np.asarray(noise, dtype=float).reshape(4)
    parts = gaussian_transition_t(
        *(T.Tensor(c) for c in (mean.x, mean.y, mean.phi, mean.v)), sigma, noise
    )
    return AgentState(*(float(t.data) for t in parts))


def state_log_density_t(x, y, phi, v, mx, my, mphi, mv, sigma) -> T.Tensor:
    """Diagonal-Gaussian log density of states around a mean, summed over the
    batch. The heading residual is angle-wrapped to avoid 2*pi jumps."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (4,):
        raise ContractError("sigma must have 4 components")
    if np.any(sigma <= 0):
        raise ContractError("sigma must be strictly positive for the density")
    n = max(T.as_tensor(x).size, 1)
    zx = T.div(T.sub(x, mx), sigma[0])
    zy = T.div(T.sub(y, my), sigma[1])
    zp = T.div(T.wrap_angle(T.sub(phi, mphi)), sigma[2])
    zv = T.div(T.sub(v, mv), sigma[3])
    quad = T.mul(
        T.add(T.add(T.tsum(T.mul(zx, zx)), T.tsum(T.mul(zy, zy))),
              T.add(T.tsum(T.mul(zp, zp)), T.tsum(T.mul(zv, zv)))),
        -0.5,
    )
    log_norm = n * float(np.sum(np.log(sigma * math.sqrt(2.0 * math.pi))))
    return T.sub(quad, log_norm)


def gaussian_state_log_density(s_next: AgentState, mean: AgentState, sigma) -> float:
    """Log density of s_next under N(mean, diag(sigma^2)) over (x, y, phi, v)."""
    out = state_log_density_t(
        T.Tensor(s_next.x), T.Tensor(s_next.y), T.Tensor(s_next.phi), T.Tensor(s_next.v),
        T.Tensor(mean.x), T.Tensor(mean.y), T.Tensor(mean.phi), T.Tensor(mean.v),
        sigma,
    )
    return float(out.data)


def inverse_bicycle_actions(states_t: np.ndarray, states_next: np.ndarray,
                            p: BicycleParams) -> np.ndarray:
    """Recover (a1, a2) that map each row of states_t onto states_next under
    the bicycle model. Rows are (x, y, phi, v); heading is trusted over
    position when the two disagree. Returns (N, 2)."""
    states_t = np.atleast_2d(np.asarray(states_t, float))
    states_next = np.atleast_2d(np.asarray(states_next, float))
    a1 = (states_next[:, 3] - states_t[:, 3]) / p.dt
    dphi = normalize_angle(states_next[:, 2] - states_t[:, 2])
    v = states_t[:, 3]
    safe_v = np.where(np.abs(v) < 1e-8, 1.0, v)
    sin_beta = np.clip(dphi * p.lr / (safe_v * p.dt), -1.0, 1.0)
    beta = np.arcsin(sin_beta)
    a2 = np.arctan(np.tan(beta) * (p.lf + p.lr) / p.lr)
    a2 = np.where(np.abs(v) < 1e-8, 0.0, a2)
    a1 = np.clip(a1, -p.max_accel, p.max_accel)
    a2 = np.clip(a2, -p.max_steer, p.max_steer)
    return np.stack([a1, a2], axis=1)


def inverse_unicycle_actions(states_t: np.ndarray, states_next: np.ndarray,
                             p: UnicycleParams) -> np.ndarray:
    states_t = np.atleast_2d(np.asarray(states_t, float))
    states_next = np.atleast_2d(np.asarray(states_next, float))
    a1 = np.clip((states_next[:, 3] - states_t[:, 3]) / p.dt, -p.max_accel, p.max_accel)
    a2 = np.clip(
        normalize_angle(states_next[:, 2] - states_t[:, 2]) / p.dt,
        -p.max_omega, p.max_omega,
    )
    return np.stack([a1, a2], axis=1)
