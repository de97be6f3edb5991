"""Leader (exosystem) dynamics v' = a(v), y0 = g(v).

Callables act on the last axis, so ``drift(v)`` accepts a single state of
shape ``(m,)`` or a stack of shape ``(..., m)``.  The observer relies on this
to evaluate every agent's estimate in one call.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

ASSUMPTION_TOL = 1e-12


@dataclass(frozen=True)
class Exosystem:
    """Leader system with the split a(v) = M v + diag(d(v)) v.

    ``t_diag(v)`` returns the diagonal entries d_1(v)..d_m(v), which must be
    nonpositive.  ``xmaps`` optionally holds the closed-form chain
    g, (dg/dv) a, ... used by the control law; see
    :func:`bipartite_regulation.regulation.build_xmaps`.
    """

    name: str
    dim_state: int
    dim_output: int
    drift: Callable
    output: Callable
    m_matrix: np.ndarray
    t_diag: Callable
    xmaps: tuple = ()

    def __post_init__(self):
        m = np.array(self.m_matrix, dtype=float)
        if m.shape != (self.dim_state, self.dim_state):
            raise ValueError(f"M must be {self.dim_state}x{self.dim_state}")
        m.setflags(write=False)
        object.__setattr__(self, "m_matrix", m)


def evaluate(exo, v):
    """Return ``(a(v), g(v))`` for a single leader state."""
    v = np.asarray(v, dtype=float)
    if v.shape != (exo.dim_state,):
        raise ValueError(f"leader state must have shape ({exo.dim_state},)")
    drift = np.asarray(exo.drift(v), dtype=float)
    out = np.atleast_1d(np.asarray(exo.output(v), dtype=float))
    if not (np.all(np.isfinite(drift)) and np.all(np.isfinite(out))):
        raise FloatingPointError(f"non-finite exosystem value at v={v}")
    return drift, out


def decomposition_residual(exo, v):
    """Euclidean norm of a(v) - M v - diag(d(v)) v."""
    v = np.asarray(v, dtype=float)
    r = exo.drift(v) - exo.m_matrix @ v - np.asarray(exo.t_diag(v)) * v
    return float(np.linalg.norm(r))


@dataclass(frozen=True)
class AssumptionReport:
    max_residual: float
    max_d: np.ndarray
    drift_vanishes: bool
    output_vanishes: bool
    n_samples: int
    drift_scale: float = 1.0

    @property
    def decomposition_ok(self):
        return self.max_residual <= ASSUMPTION_TOL * max(1.0, self.drift_scale)

    @property
    def sign_ok(self):
        return bool(np.all(self.max_d <= ASSUMPTION_TOL))

    @property
    def passed(self):
        return (
            self.decomposition_ok
            and self.sign_ok
            and self.drift_vanishes
            and self.output_vanishes
        )


def sample_points(lower, upper, n_samples):
    """Deterministic Halton points in the box [lower, upper]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    sampler = qmc.Halton(d=lower.size, scramble=False)
    # the first Halton point is the origin of the unit cube; skip it
    sampler.fast_forward(1)
    return qmc.scale(sampler.random(n_samples), lower, upper)


def validate_assumptions(exo, lower, upper, n_samples=10_000):
    """Check a(0)=0, g(0)=0, the M/T split, and d_i(v) <= 0 on sampled v.

    Boundedness of leader trajectories is not decided here; the engine
    monitors it per run.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pts = sample_points(lower, upper, n_samples)
    zero = np.zeros(exo.dim_state)
    drift = np.asarray(exo.drift(pts), dtype=float)
    d = np.asarray(exo.t_diag(pts), dtype=float)
    resid = np.linalg.norm(drift - pts @ exo.m_matrix.T - d * pts, axis=-1)
    scale = float(np.max(np.abs(drift))) if drift.size else 1.0
    return AssumptionReport(
        max_residual=float(resid.max()),
        max_d=d.max(axis=0),
        drift_vanishes=bool(np.all(np.asarray(exo.drift(zero)) == 0)),
        output_vanishes=bool(np.all(np.asarray(exo.output(zero)) == 0)),
        n_samples=n_samples,
        drift_scale=scale,
    )


def numerical_jacobian(f, v, step=1e-5):
    v = np.asarray(v, dtype=float)
    cols = []
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = step
        cols.append((np.asarray(f(v + e)) - np.asarray(f(v - e))) / (2 * step))
    return np.stack(cols, axis=-1)


# Van der Pol leader: v1' = v2, v2' = -v1 + (1 - v1^2) v2, y0 = v1

def _vdp_drift(v):
    v1, v2 = v[..., 0], v[..., 1]
    out = np.empty(np.shape(v))
    out[..., 0] = v2
    out[..., 1] = -v1 + (1.0 - v1 * v1) * v2
    return out


def _vdp_t(v):
    v1 = v[..., 0]
    out = np.zeros(np.shape(v))
    out[..., 1] = -v1 * v1
    return out


def _first(v):
    return v[..., 0]


def _second(v):
    return v[..., 1]


def _vdp_x3(v):
    v1, v2 = v[..., 0], v[..., 1]
    return -v1 + (1.0 - v1 * v1) * v2


def _vdp_x4(v):
    # d/dv(x3) . a(v)
    v1, v2 = v[..., 0], v[..., 1]
    a2 = -v1 + (1.0 - v1 * v1) * v2
    return (-1.0 - 2.0 * v1 * v2) * v2 + (1.0 - v1 * v1) * a2


def vanderpol():
    return Exosystem(
        name="vanderpol",
        dim_state=2,
        dim_output=1,
        drift=_vdp_drift,
        output=_first,
        m_matrix=np.array([[0.0, 1.0], [-1.0, 1.0]]),
        t_diag=_vdp_t,
        xmaps=(_first, _second, _vdp_x3, _vdp_x4),
    )


def _zeros_like_state(v):
    return np.zeros_like(np.asarray(v, dtype=float))


def _zero_scalar(v):
    return np.zeros(np.shape(v)[:-1])


def constant2():
    """Two-state constant leader, v' = 0, with output y0 = v1."""
    return Exosystem(
        name="constant2",
        dim_state=2,
        dim_output=1,
        drift=_zeros_like_state,
        output=_first,
        m_matrix=np.zeros((2, 2)),
        t_diag=_zeros_like_state,
        xmaps=(_first, _zero_scalar, _zero_scalar, _zero_scalar),
    )


def linear(s_matrix, output_row=None, name="linear"):
    """Linear leader a(v) = S v with output ``output_row @ v`` (default v1)."""
    s = np.array(s_matrix, dtype=float)
    m = s.shape[0]
    c = np.zeros(m) if output_row is None else np.asarray(output_row, dtype=float)
    if output_row is None:
        c[0] = 1.0

    def drift(v):
        return np.asarray(v) @ s.T

    def output(v):
        return np.asarray(v) @ c

    return Exosystem(
        name=name,
        dim_state=m,
        dim_output=1,
        drift=drift,
        output=output,
        m_matrix=s,
        t_diag=_zeros_like_state,
    )


BUILTIN = {"vanderpol": vanderpol, "constant2": constant2}


def builtin(name):
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValueError(
            f"unknown exosystem {name!r}; choose from {sorted(BUILTIN)}"
        ) from None
