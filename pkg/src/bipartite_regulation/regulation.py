"""Chain-of-integrator followers and the certainty-equivalence control law.

Agent i is ``x_1' = x_2, ..., x_r' = f_i(x, v) + u_i`` with output y_i = x_1.
Its input is computed from the local estimate eta_i only:

    u_i = sum_{s=1}^{r+1} phi_i beta_s X_s(phi_i eta_i)
          - f_i(x_i, phi_i eta_i) - sum_{s=1}^{r} beta_s x_si

with beta_{r+1} = 1 and X_1 = g, X_{s+1} = (dX_s/dv) a(v).
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exosystem import sample_points

FD_STEP = 1e-5
FD_RTOL = 1e-4
NESTED_FD_STEP = 1e-3
MAX_NUMERIC_ORDER = 4


class AnalyticMapMismatch(ValueError):
    pass


class ExcessiveOrder(ValueError):
    pass


def pendulum(x, v):
    """Damped pendulum nonlinearity -2 sin(x_1) - x_2."""
    return -2.0 * np.sin(x[..., 0]) - x[..., 1]


def no_nonlinearity(x, v):
    return np.zeros(np.shape(x)[:-1])


NONLINEARITIES = {"pendulum": pendulum, "none": no_nonlinearity}


@dataclass(frozen=True)
class RegulatedAgent:
    """One follower.  ``nonlinearity(x, v)`` must broadcast over leading axes."""

    order: int
    nonlinearity: Callable
    phi: float
    state: np.ndarray

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        x = np.array(self.state, dtype=float)
        if x.shape != (self.order,):
            raise ValueError(f"state must have length {self.order}")
        if self.phi not in (1, -1):
            raise ValueError("phi must be +1 or -1")
        object.__setattr__(self, "state", x)
        object.__setattr__(self, "phi", float(self.phi))


@dataclass(frozen=True)
class ControllerGains:
    beta: np.ndarray
    a_matrix: np.ndarray
    b_vector: np.ndarray

    @property
    def order(self):
        return len(self.beta)

    @property
    def beta_full(self):
        """beta_1..beta_r followed by beta_{r+1} = 1."""
        return np.append(self.beta, 1.0)

    def __post_init__(self):
        for name in ("beta", "a_matrix", "b_vector"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_weights", tuple(float(b) for b in self.beta) + (1.0,))


def companion(beta):
    beta = np.asarray(beta, dtype=float)
    r = beta.size
    a = np.zeros((r, r))
    a[:-1, 1:] = np.eye(r - 1)
    a[-1, :] = -beta
    b = np.zeros(r)
    b[-1] = 1.0
    return a, b


def gains_from_beta(beta):
    beta = np.asarray(beta, dtype=float)
    a, b = companion(beta)
    return ControllerGains(beta, a, b)


def choose_gains(r, poles):
    """Place the companion-form closed loop at ``poles``.

    beta_s are the coefficients of prod(s - p_k) = s^r + beta_r s^{r-1} + ... + beta_1.
    """
    poles = np.asarray(poles, dtype=complex)
    if poles.shape != (r,):
        raise ValueError(f"need exactly {r} poles, got {poles.size}")
    if np.any(poles.real >= 0):
        raise ValueError("all poles must have negative real part")
    if not _conjugate_closed(poles):
        raise ValueError("poles must be closed under complex conjugation")
    coeffs = np.poly(poles)
    if np.max(np.abs(coeffs.imag)) > 1e-9 * max(1.0, np.max(np.abs(coeffs))):
        raise ValueError("pole set does not give a real polynomial")
    beta = coeffs.real[1:][::-1].copy()
    return gains_from_beta(beta)


def _conjugate_closed(poles, tol=1e-12):
    remaining = list(poles)
    while remaining:
        p = remaining.pop()
        if abs(p.imag) <= tol:
            continue
        k = next(
            (k for k, q in enumerate(remaining) if abs(q - np.conj(p)) <= tol * max(1.0, abs(p))),
            None,
        )
        if k is None:
            return False
        remaining.pop(k)
    return True


def parse_poles(text):
    """Parse ``"-1,-1"`` or ``"-1+1j,-1-1j"`` into a list of complex poles."""
    out = []
    for tok in text.replace(" ", "").split(","):
        if not tok:
            continue
        out.append(complex(tok.replace("i", "j")))
    return out


@dataclass(frozen=True)
class XMapChain:
    maps: tuple

    @property
    def order(self):
        return len(self.maps) - 1

    def evaluate(self, v):
        """Stack X_1..X_{r+1} at ``v`` (shape ``(..., m)``) along a new last axis."""
        return np.stack([np.asarray(f(v), dtype=float) for f in self.maps], axis=-1)

    def weighted_sum(self, v, weights):
        """sum_s weights[s] * X_s(v) without stacking."""
        total = weights[0] * self.maps[0](v)
        for w, f in zip(weights[1:], self.maps[1:]):
            total = total + w * f(v)
        return total


def directional_derivative(f, drift, v, step=FD_STEP):
    """Central-difference (df/dv) a(v), broadcasting over leading axes of ``v``."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(drift(v), dtype=float)
    total = np.zeros(v.shape[:-1])
    for k in range(v.shape[-1]):
        e = np.zeros(v.shape[-1])
        e[k] = step
        total = total + (np.asarray(f(v + e)) - np.asarray(f(v - e))) / (2 * step) * a[..., k]
    return total


def _numeric_next(prev, drift):
    def xmap(v):
        return directional_derivative(prev, drift, v, step=NESTED_FD_STEP)

    return xmap


def check_recursion(maps, exo, lower=None, upper=None, n_points=100, rtol=FD_RTOL):
    """Worst relative violation of X_{s+1} = (dX_s/dv) a(v) at Halton points."""
    m = exo.dim_state
    lower = -2.0 * np.ones(m) if lower is None else lower
    upper = 2.0 * np.ones(m) if upper is None else upper
    pts = sample_points(lower, upper, n_points)
    worst = 0.0
    for s in range(len(maps) - 1):
        lhs = np.asarray(maps[s + 1](pts), dtype=float)
        rhs = directional_derivative(maps[s], exo.drift, pts)
        scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    return worst


def build_xmaps(exo, r, analytic=None):
    """Chain X_1..X_{r+1} for an order-r follower.

    Analytic maps (given, or stored on the exosystem) are cross-checked by
    central differences.  Without them the chain is built by nested
    differencing, which loses accuracy quickly, so r > 4 is refused.
    """
    if r < 1:
        raise ValueError("order must be >= 1")
    if analytic is None and len(exo.xmaps) >= r + 1:
        analytic = exo.xmaps[: r + 1]
    if analytic is not None:
        analytic = tuple(analytic)
        if len(analytic) != r + 1:
            raise ValueError(f"need {r + 1} maps for order {r}, got {len(analytic)}")
        worst = check_recursion(analytic, exo)
        if worst > FD_RTOL:
            raise AnalyticMapMismatch(
                f"supplied maps violate the recursion (relative error {worst:.3g})"
            )
        return XMapChain(analytic)
    if r > MAX_NUMERIC_ORDER:
        raise ExcessiveOrder(
            f"numerical x-map chain refused for r = {r} > {MAX_NUMERIC_ORDER}; supply analytic maps"
        )
    maps = [exo.output]
    for _ in range(r):
        maps.append(_numeric_next(maps[-1], exo.drift))
    return XMapChain(tuple(maps))


def control_input(agent, gains, xm, eta_i):
    """Control law for one agent from its own state and estimate."""
    eta_i = np.asarray(eta_i, dtype=float)
    if xm.order != agent.order or gains.order != agent.order:
        raise ValueError("gains, x-maps and agent order disagree")
    u = control_batch(
        agent.state[None, :],
        eta_i[None, :],
        np.array([agent.phi]),
        gains,
        xm,
        agent.nonlinearity,
    )[0]
    if not np.isfinite(u):
        raise FloatingPointError("non-finite control input")
    return float(u)


def control_batch(x, eta, phi, gains, xm, nonlinearity):
    """Control inputs for a stack of agents sharing gains and nonlinearity.

    ``x`` is (k, r), ``eta`` is (k, m), ``phi`` is (k,).
    """
    z = phi[:, None] * eta
    feedforward = phi * xm.weighted_sum(z, gains._weights)
    return feedforward - nonlinearity(x, z) - x @ gains.beta


def plant_rhs(agent, u, v, x=None):
    x = agent.state if x is None else np.asarray(x, dtype=float)
    dx = np.empty_like(x)
    dx[:-1] = x[1:]
    dx[-1] = agent.nonlinearity(x, np.asarray(v, dtype=float)) + u
    return dx


def plant_batch(x, u, f_xv):
    """Chain shift for a (k, r) stack; ``f_xv`` is f_i(x_i, v) per agent."""
    dx = np.empty_like(x)
    dx[:, :-1] = x[:, 1:]
    dx[:, -1] = f_xv + u
    return dx


def tracking_error(y_i, y0, phi_i):
    return np.asarray(y_i, dtype=float) - phi_i * np.asarray(y0, dtype=float)


def regulation_manifold(phi, v, xm):
    """x_i = phi_i (X_1(v), ..., X_r(v)), the state each agent settles on."""
    return np.outer(phi, xm.evaluate(np.asarray(v, dtype=float))[:-1])
