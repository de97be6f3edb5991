"""Fixed-step integration of leader, observers and followers as one ODE.

The stacked state is ``[v (m), eta (N*m), x (N*r)]``.  Control inputs are
recomputed inside every Runge-Kutta stage.
"""

import csv
import io
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from . import observer, regulation
from .signed_graph import (
    GaugePartition,
    GraphError,
    SignedDigraph,
    check_partition,
    has_leader_spanning_tree,
)

BLOWUP_THRESHOLD = 1e6
RATE_FLOOR = 1e-12
MIN_RATE_POINTS = 10
SPARSE_ABOVE = 64


class InvalidScenario(ValueError):
    pass


class BlowUp(FloatingPointError):
    """State left the bounded region; ``trajectory`` holds what was recorded."""

    def __init__(self, message, trajectory=None, time=None, state=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.time = time
        self.state = state


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = f(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def n_steps(t_final, dt):
    if not dt > 0 or not t_final >= dt:
        raise InvalidScenario("need dt > 0 and t_final >= dt")
    n = int(round(t_final / dt))
    if abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise InvalidScenario(f"t_final={t_final} is not a whole number of steps dt={dt}")
    return n


def rk4_solve(f, y0, t_final, dt):
    """Integrate y' = f(t, y) and return ``(times, states)`` at every step."""
    n = n_steps(t_final, dt)
    y = np.array(y0, dtype=float)
    out = np.empty((n + 1,) + y.shape)
    out[0] = y
    for k in range(n):
        y = rk4_step(f, k * dt, y, dt)
        out[k + 1] = y
    return np.arange(n + 1) * dt, out


@dataclass(frozen=True)
class Scenario:
    graph: SignedDigraph
    partition: GaugePartition
    exo: object
    mu: float
    t_final: float
    dt: float
    v0: np.ndarray
    eta0: np.ndarray
    agents: tuple = ()
    gains: regulation.ControllerGains | None = None
    xmaps: regulation.XMapChain | None = None
    sample_every: int = 1
    blowup_threshold: float = BLOWUP_THRESHOLD

    def validate(self):
        g, gp, exo = self.graph, self.partition, self.exo
        try:
            check_partition(g, gp)
        except GraphError as exc:
            raise InvalidScenario(str(exc)) from None
        if not has_leader_spanning_tree(g):
            raise InvalidScenario("graph has no spanning tree rooted at the leader")
        if not self.mu > 0:
            raise InvalidScenario("mu must be positive")
        n_steps(self.t_final, self.dt)
        if self.sample_every < 1:
            raise InvalidScenario("sample_every must be >= 1")
        if np.shape(self.v0) != (exo.dim_state,):
            raise InvalidScenario("v0 has the wrong dimension")
        if np.shape(self.eta0) != (g.n_followers, exo.dim_state):
            raise InvalidScenario("eta0 must be N x m")
        if self.agents:
            if len(self.agents) != g.n_followers:
                raise InvalidScenario("need one agent per follower")
            orders = {a.order for a in self.agents}
            if len(orders) != 1:
                raise InvalidScenario("all agents must share one order")
            if self.gains is None or self.xmaps is None:
                raise InvalidScenario("agents need gains and x-maps")
            r = orders.pop()
            if self.gains.order != r or self.xmaps.order != r:
                raise InvalidScenario("gains / x-maps order mismatch")
            for a, p in zip(self.agents, gp.phi):
                if a.phi != p:
                    raise InvalidScenario("agent phi must come from the graph partition")


class ClosedLoop:
    """Right-hand side of the stacked leader/observer/follower system."""

    def __init__(self, adj, degree, leader, phi, exo, mu,
                 order=0, groups=(), gains=None, xmaps=None):
        self.adj = adj
        self.degree = np.asarray(degree, dtype=float)
        self.leader = np.asarray(leader, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        self.exo = exo
        self.mu = float(mu)
        self.n = self.phi.size
        self.m = exo.dim_state
        self.r = order
        # groups: list of (index array or slice, nonlinearity)
        self.groups = list(groups)
        self.gains = gains
        self.xmaps = xmaps
        self._phi_col = self.phi[:, None]
        # coupling mu*(A eta - C eta + Delta (phi v - eta)) folded into
        # one matrix and one pinning column
        diag = self.degree + self.leader
        if sparse.issparse(adj):
            self._lmat = (sparse.csr_matrix(adj) - sparse.diags(diag)).tocsr() * self.mu
        else:
            self._lmat = self.mu * (np.asarray(adj, dtype=float) - np.diag(diag))
        self._pin = (self.mu * self.leader * self.phi)[:, None]
        self._w = np.empty((self.n + 1, self.m))

    @classmethod
    def from_scenario(cls, sc):
        g = sc.graph
        adj = g.follower_adjacency
        degree = np.abs(adj).sum(axis=1)
        if g.n_followers > SPARSE_ABOVE:
            adj = sparse.csr_matrix(adj)
        else:
            adj = np.ascontiguousarray(adj)
        groups = group_agents(sc.agents)
        order = sc.agents[0].order if sc.agents else 0
        return cls(adj, degree, g.leader_weights, sc.partition.phi, sc.exo, sc.mu,
                   order, groups, sc.gains, sc.xmaps)

    @property
    def size(self):
        return self.m + self.n * self.m + self.n * self.r

    def split(self, y):
        m, n, r = self.m, self.n, self.r
        v = y[:m]
        eta = y[m:m + n * m].reshape(n, m)
        x = y[m + n * m:].reshape(n, r) if r else None
        return v, eta, x

    def pack(self, v, eta, x=None):
        parts = [np.asarray(v, float).ravel(), np.asarray(eta, float).ravel()]
        if self.r:
            parts.append(np.asarray(x, float).ravel())
        return np.concatenate(parts)

    def control(self, x, eta):
        if len(self.groups) == 1:
            f = self.groups[0][1]
            return regulation.control_batch(x, eta, self.phi, self.gains, self.xmaps, f)
        u = np.empty(self.n)
        for idx, f in self.groups:
            u[idx] = regulation.control_batch(
                x[idx], eta[idx], self.phi[idx], self.gains, self.xmaps, f
            )
        return u

    def control_samples(self, x, eta):
        """Control inputs for (K, N, .) stacks of recorded states."""
        k = x.shape[0]
        u = np.empty((k, self.n))
        for idx, f in self.groups:
            xs, es = x[:, idx], eta[:, idx]
            cnt = xs.shape[1]
            phi = np.broadcast_to(self.phi[idx], (k, cnt)).ravel()
            u[:, idx] = regulation.control_batch(
                xs.reshape(k * cnt, -1), es.reshape(k * cnt, -1), phi,
                self.gains, self.xmaps, f,
            ).reshape(k, cnt)
        return u

    def plant_drift(self, x, v):
        # v is the single shared leader state; nonlinearities broadcast it
        if len(self.groups) == 1:
            return self.groups[0][1](x, v)
        out = np.empty(self.n)
        for idx, f in self.groups:
            out[idx] = f(x[idx], v)
        return out

    def __call__(self, t, y):
        v, eta, x = self.split(y)
        m, n = self.m, self.n
        # leader and estimates share one drift evaluation
        w = self._w
        w[0] = v
        np.multiply(self._phi_col, eta, out=w[1:])
        a = self.exo.drift(w)
        out = np.empty_like(y)
        out[:m] = a[0]
        deta = out[m:m + n * m].reshape(n, m)
        np.multiply(self._phi_col, a[1:], out=deta)
        deta += self._lmat @ eta
        deta += self._pin * v
        if self.r:
            u = self.control(x, eta)
            out[m + n * m:] = regulation.plant_batch(x, u, self.plant_drift(x, v)).ravel()
        return out


def group_agents(agents):
    """Group agent indices by nonlinearity so each group is one vectorised call."""
    by_f = {}
    for i, a in enumerate(agents):
        by_f.setdefault(a.nonlinearity, []).append(i)
    groups = []
    for f, idx in by_f.items():
        if idx == list(range(len(agents))):
            groups.append((slice(None), f))
        else:
            groups.append((np.array(idx), f))
    return groups


@dataclass
class Trajectory:
    times: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    y0: np.ndarray
    x: np.ndarray | None = None
    u: np.ndarray | None = None
    e: np.ndarray | None = None
    complete: bool = True
    blowup_threshold: float = BLOWUP_THRESHOLD

    @property
    def n_agents(self):
        return self.eta.shape[1]

    @property
    def outputs(self):
        return None if self.x is None else self.x[:, :, 0]

    def estimation_errors(self):
        """(K, N) array of ||eta_i - phi_i v||."""
        return np.linalg.norm(self.eta - self.phi[None, :, None] * self.v[:, None, :], axis=2)


def _record(loop, exo, ys):
    v = ys[:, :loop.m]
    eta = ys[:, loop.m:loop.m + loop.n * loop.m].reshape(len(ys), loop.n, loop.m)
    y0 = np.asarray(exo.output(v), dtype=float).reshape(len(ys), -1)[:, 0]
    if not loop.r:
        return dict(v=v, eta=eta, y0=y0)
    x = ys[:, loop.m + loop.n * loop.m:].reshape(len(ys), loop.n, loop.r)
    u = loop.control_samples(x, eta)
    e = x[:, :, 0] - loop.phi[None, :] * y0[:, None]
    return dict(v=v, eta=eta, y0=y0, x=x, u=u, e=e)


def run(loop, y0, t_final, dt, sample_every=1, threshold=BLOWUP_THRESHOLD):
    """Integrate ``loop`` and return ``(times, states)`` at the sampled steps.

    Raises :class:`BlowUp` (with the partial arrays attached as
    ``trajectory=(times, states)``) when a state component leaves
    [-threshold, threshold] or turns non-finite.
    """
    n = n_steps(t_final, dt)
    y = np.array(y0, dtype=float)
    keep = list(range(0, n + 1, sample_every))
    if keep[-1] != n:
        keep.append(n)
    states = np.empty((len(keep), y.size))
    states[0] = y
    slot = 1
    for k in range(1, n + 1):
        y = rk4_step(loop, (k - 1) * dt, y, dt)
        big = np.max(np.abs(y))
        if not big <= threshold:
            times = np.array(keep[:slot]) * dt
            raise BlowUp(
                f"state magnitude {big:.3g} exceeded {threshold:.3g} at t={k * dt:.6g}",
                trajectory=(times, states[:slot]),
                time=k * dt,
                state=y,
            )
        if slot < len(keep) and keep[slot] == k:
            states[slot] = y
            slot += 1
    return np.array(keep) * dt, states


def integrate(sc):
    """Integrate a validated :class:`Scenario` with classical RK4."""
    sc.validate()
    loop = ClosedLoop.from_scenario(sc)
    x0 = np.array([a.state for a in sc.agents]) if sc.agents else None
    y0 = loop.pack(sc.v0, sc.eta0, x0)
    try:
        times, ys = run(loop, y0, sc.t_final, sc.dt, sc.sample_every, sc.blowup_threshold)
    except BlowUp as exc:
        times, ys = exc.trajectory
        exc.trajectory = Trajectory(
            times=times, phi=sc.partition.phi.copy(), complete=False,
            blowup_threshold=sc.blowup_threshold, **_record(loop, sc.exo, ys)
        )
        raise
    return Trajectory(
        times=times, phi=sc.partition.phi.copy(),
        blowup_threshold=sc.blowup_threshold, **_record(loop, sc.exo, ys)
    )


@dataclass(frozen=True)
class GaugedNonlinearity:
    """x -> phi f(phi x, w), the follower nonlinearity seen in gauge coordinates."""

    f: object
    phi: float

    def __call__(self, x, w):
        return self.phi * self.f(self.phi * x, w)


def gauged_scenario(sc):
    """The same closed loop rewritten on the unsigned graph, all phi = +1.

    States are sign-flipped for V2 agents and follower weights replaced by
    their magnitudes; leader weights are unchanged.
    """
    g, phi = sc.graph, sc.partition.phi
    w = np.abs(g.weights)
    gauged_graph = SignedDigraph(g.n_followers, w)
    gp = GaugePartition(np.ones_like(phi))
    agents = tuple(
        regulation.RegulatedAgent(
            a.order,
            a.nonlinearity if p > 0 else GaugedNonlinearity(a.nonlinearity, p),
            1.0,
            p * a.state,
        )
        for a, p in zip(sc.agents, phi)
    )
    return replace(
        sc, graph=gauged_graph, partition=gp, agents=agents,
        eta0=phi[:, None] * np.asarray(sc.eta0, dtype=float),
    )


@dataclass(frozen=True)
class ConvergenceReport:
    final_tracking: np.ndarray | None
    final_estimation: np.ndarray
    bipartite_residuals: np.ndarray | None
    tracking_rate: float | None
    estimation_rate: float | None
    bounded: bool
    max_norm: float

    @property
    def rate_fit(self):
        return self.tracking_rate if self.final_tracking is not None else self.estimation_rate


def fit_rate(times, err, floor=RATE_FLOOR, min_points=MIN_RATE_POINTS):
    """Slope of an affine least-squares fit to log(err) over the last half.

    The run is cut at the first sample at or below ``floor``; the fit window
    is the second half of what remains.  Returns None with fewer than
    ``min_points`` usable samples.
    """
    times = np.asarray(times, dtype=float)
    err = np.asarray(err, dtype=float)
    below = np.flatnonzero(~(err > floor))
    end = below[0] if below.size else len(err)
    if end < 2:
        return None
    t, e = times[:end], err[:end]
    mid = t[0] + 0.5 * (t[-1] - t[0])
    sel = t >= mid
    if sel.sum() < min_points:
        return None
    slope, _ = np.polyfit(t[sel], np.log(e[sel]), 1)
    return float(slope)


def convergence_report(traj, gp=None):
    phi = traj.phi if gp is None else gp.phi
    est = np.linalg.norm(traj.eta - phi[None, :, None] * traj.v[:, None, :], axis=2)
    norms = [np.max(np.linalg.norm(traj.v, axis=1)), np.max(np.linalg.norm(traj.eta, axis=2))]
    tracking = residuals = tracking_rate = None
    if traj.x is not None:
        e = traj.outputs - phi[None, :] * traj.y0[:, None]
        tracking = np.abs(e[-1])
        y = traj.outputs[-1]
        residuals = np.where(phi > 0, np.abs(y - traj.y0[-1]), np.abs(y + traj.y0[-1]))
        tracking_rate = fit_rate(traj.times, np.abs(e).max(axis=1))
        norms.append(np.max(np.linalg.norm(traj.x, axis=2)))
    max_norm = float(max(norms))
    return ConvergenceReport(
        final_tracking=tracking,
        final_estimation=est[-1],
        bipartite_residuals=residuals,
        tracking_rate=tracking_rate,
        estimation_rate=fit_rate(traj.times, est.max(axis=1)),
        bounded=bool(traj.complete and np.isfinite(max_norm) and max_norm <= traj.blowup_threshold),
        max_norm=max_norm,
    )


@dataclass(frozen=True)
class OrderReport:
    dt: float
    error_coarse: float
    error_fine: float
    ratio: float | None
    passed: bool


def _decay(t, y):
    return -y


def _oscillator(t, y):
    return np.array([y[1], -y[0]])


def _zero(t, y):
    return np.zeros_like(y)


ORDER_SYSTEMS = {
    "decay": (_decay, np.array([1.0]), lambda t: np.array([np.exp(-t)]), 1.0),
    "oscillator": (_oscillator, np.array([1.0, 0.0]),
                   lambda t: np.array([np.cos(t), -np.sin(t)]), 2.0),
    "zero": (_zero, np.array([1.0]), lambda t: np.array([1.0]), 1.0),
}


def order_check(dt=0.1, system="decay", bounds=(12.0, 20.0)):
    """Global error at dt versus dt/2; fourth order gives a ratio near 16."""
    f, y0, exact, t_final = ORDER_SYSTEMS[system]
    errs = []
    for h in (dt, dt / 2):
        _, ys = rk4_solve(f, y0, t_final, h)
        errs.append(float(np.linalg.norm(ys[-1] - exact(t_final))))
    if errs[1] == 0.0:
        return OrderReport(dt, errs[0], errs[1], None, errs[0] == 0.0)
    ratio = errs[0] / errs[1]
    return OrderReport(dt, errs[0], errs[1], ratio, bounds[0] <= ratio <= bounds[1])


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(traj, stream):
    """Long-format CSV: ``time,entity,series,value``."""
    stream.write("time,entity,series,value\n")
    m = traj.v.shape[1]
    n = traj.n_agents
    for k, t in enumerate(traj.times):
        ts = _fmt(t)
        lines = [f"{ts},leader,v{j + 1},{_fmt(traj.v[k, j])}" for j in range(m)]
        for i in range(n):
            ent = f"agent{i + 1}"
            lines += [f"{ts},{ent},eta{j + 1},{_fmt(traj.eta[k, i, j])}" for j in range(m)]
            if traj.x is not None:
                lines += [
                    f"{ts},{ent},x{j + 1},{_fmt(traj.x[k, i, j])}"
                    for j in range(traj.x.shape[2])
                ]
                lines.append(f"{ts},{ent},u,{_fmt(traj.u[k, i])}")
                lines.append(f"{ts},{ent},e,{_fmt(traj.e[k, i])}")
        stream.write("\n".join(lines) + "\n")


def csv_text(traj):
    buf = io.StringIO()
    write_csv(traj, buf)
    return buf.getvalue()


def read_csv(stream):
    """Parse the long-format CSV back into ``{(entity, series): (times, values)}``."""
    out = {}
    reader = csv.DictReader(stream)
    for row in reader:
        key = (row["entity"], row["series"])
        out.setdefault(key, ([], []))
        out[key][0].append(float(row["time"]))
        out[key][1].append(float(row["value"]))
    return {k: (np.array(t), np.array(v)) for k, (t, v) in out.items()}
