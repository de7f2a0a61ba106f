"""
Reverse-flow curves, hyperplane discs and tubes

A ReverseCurve discretizes C_x = {Phi(x, -t) : 0 <= t < t-(x)} uniformly in
reverse time; `coords` is the integration variable for line integrals
(reverse time for flow curves, the material parameter for crack curves)
and `speeds` the matching Jacobian factor.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from . import config
from .errors import InputError, NumericalFlowError
from .pdmp import as_state, exit_time_backward, exit_time_forward, flow_at, flow_path, wrap_difference

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ReverseCurve:
    base: np.ndarray
    taus: np.ndarray
    nodes: np.ndarray
    speeds: np.ndarray
    step: float
    horizon: float
    coords: np.ndarray

    def __len__(self):
        return int(self.taus.shape[0])

    @property
    def dim(self):
        return int(self.nodes.shape[1])

    @classmethod
    def from_nodes(cls, base, nodes, taus, coords, speeds=None):
        """Curve with explicit nodes, e.g. indexed by a model parameter"""
        nodes = np.asarray(nodes, dtype=float).reshape(len(taus), -1)
        taus = np.asarray(taus, dtype=float)
        coords = np.asarray(coords, dtype=float)
        speeds = np.ones(len(taus)) if speeds is None else np.asarray(speeds, dtype=float)
        step = float(np.min(np.diff(coords))) if len(coords) > 1 else 0.0
        return cls(np.asarray(base, dtype=float), taus, nodes, speeds, step,
                   float(np.max(taus)) if len(taus) else 0.0, coords)

    def to_rows(self):
        """Rows j, tau, xi_1..xi_d, speed"""
        return [[j, float(self.taus[j]), *map(float, self.nodes[j]), float(self.speeds[j])]
                for j in range(len(self))]


@dataclass(frozen=True, eq=False)
class Tube:
    base: np.ndarray
    radius: float
    direction: np.ndarray
    normal_frame: np.ndarray
    disc_mesh: np.ndarray
    step: float
    periodic_axes: dict

    @property
    def dim(self):
        return int(self.base.shape[0])

    @property
    def disc_measure(self):
        return disc_measure(self.dim, self.radius)


def disc_measure(d, rho):
    """(d-1)-dimensional volume of a radius-rho disc"""
    k = d - 1
    return math.pi ** (k / 2.0) * rho ** k / special.gamma(k / 2.0 + 1.0)


def flow_velocity(model, x, eps=None):
    """d/dt Phi(x, t) at t = 0, analytic when the model provides it"""
    x = as_state(model, x)
    if model.flow_velocity is not None:
        return np.asarray(model.flow_velocity(x), dtype=float)
    eps = config.FD_STEP if eps is None else eps
    return (flow_at(model, x, eps) - flow_at(model, x, -eps)) / (2.0 * eps)


def reverse_curve(model, x, step=None, cap=None):
    """
    Discretize the reverse-flow curve from x

    Args:
        model: PdmpModel
        x: base point, must lie in E
        step: reverse-time step h (default: at least CURVE_MIN_NODES nodes)
        cap: time cap applied on top of t-(x) (default CURVE_TIME_CAP)

    Returns:
        ReverseCurve with nodes at tau_j = j*h up to min(t-(x) - h, cap)
    """
    x = as_state(model, x)
    t_minus = exit_time_backward(model, x)
    cap = config.CURVE_TIME_CAP if cap is None else float(cap)
    horizon = min(t_minus, cap)
    if not math.isfinite(horizon) or horizon <= 0:
        raise InputError(f"Reverse curve horizon is {horizon}, a finite cap is required")
    if step is None:
        step = horizon / (config.CURVE_MIN_NODES + 1)
    if step <= 0:
        raise InputError(f"Curve step must be positive, got {step}")

    limit = min(t_minus - step, cap)
    j_max = max(0, int(math.floor(limit / step * (1 + 1e-12) + 1e-9)))
    taus = step * np.arange(j_max + 1)

    nodes, kept = [], []
    eps = config.FD_STEP * max(1.0, horizon)
    for tau in taus:
        xi = flow_at(model, x, -tau)
        if not model.in_domain(xi):
            logger.warning(f"Reverse curve from {x.tolist()} left the state space at tau={tau:.6g}, truncated")
            break
        nodes.append(xi)
        kept.append(tau)
    taus = np.asarray(kept)
    nodes = np.asarray(nodes).reshape(len(taus), model.dim)
    speeds = np.array([np.linalg.norm(flow_velocity(model, xi, eps)) for xi in nodes])

    logger.debug(f"Reverse curve built: {len(taus)} nodes, step {step:.6g}, horizon {horizon:.6g}")
    return ReverseCurve(x, taus, nodes, speeds, float(step), float(horizon), taus.copy())


def tau(curve, xi):
    """Stored reverse time of a curve node"""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    close = np.all(np.abs(curve.nodes - xi[None, :]) <= 1e-9 * (1.0 + np.abs(xi[None, :])), axis=1)
    hits = np.flatnonzero(close)
    if hits.size == 0:
        raise InputError(f"State {xi.tolist()} is not a node of the reverse curve")
    return float(curve.taus[hits[0]])


def build_tube(model, x, rho, step, mesh_per_axis=config.DISC_MESH_PER_AXIS):
    """
    Disc of radius rho in the hyperplane orthogonal to the flow at x

    The tube is the union of the reverse curves through that disc; membership
    is decided by tube_hit.
    """
    x = as_state(model, x)
    if rho <= 0:
        raise InputError(f"Tube radius must be positive, got {rho}")
    velocity = flow_velocity(model, x)
    norm = np.linalg.norm(velocity)
    if norm == 0 or not math.isfinite(norm):
        raise NumericalFlowError(f"Flow is stationary at {x.tolist()}, the orthogonal hyperplane is undefined")
    direction = velocity / norm

    d = model.dim
    q, _ = np.linalg.qr(np.column_stack([direction, np.eye(d)]))
    frame = q[:, 1:d]

    if d == 1:
        mesh = x[None, :].copy()
    else:
        axis = np.linspace(-rho, rho, mesh_per_axis)
        grid = np.array(np.meshgrid(*([axis] * (d - 1)), indexing='ij')).reshape(d - 1, -1).T
        grid = grid[np.linalg.norm(grid, axis=1) <= rho * (1 + 1e-12)]
        mesh = x[None, :] + grid @ frame.T

    return Tube(x, float(rho), direction, frame, mesh, float(step), dict(model.periodic_axes))


def tube_hit(model, tube, xi, max_time):
    """
    Time at which the forward flow from xi crosses the tube disc

    Returns:
        float or None: theta, or None when xi is not in the tube
    """
    xi = as_state(model, xi)
    if not model.in_domain(xi):
        return None
    limit = min(float(max_time), exit_time_forward(model, xi))
    if limit <= 0:
        return None

    def offset(t):
        return wrap_difference(flow_at(model, xi, t) - tube.base, tube.periodic_axes)

    def signed(t):
        return float(np.dot(offset(t), tube.direction))

    h = 0.5 * tube.step
    times = np.append(np.arange(0.0, limit, h), limit)
    path = wrap_difference(flow_path(model, xi, times) - tube.base[None, :], tube.periodic_axes)
    dist = path @ tube.direction

    zero = np.flatnonzero(dist == 0)
    change = np.flatnonzero(np.sign(dist[:-1]) * np.sign(dist[1:]) < 0)
    candidates = sorted(set(zero.tolist()) | set((change + 1).tolist()))
    if not candidates:
        return None

    k = candidates[0]
    if dist[k] == 0:
        theta = float(times[k])
    else:
        theta = optimize.brentq(signed, times[k - 1], times[k], xtol=1e-13, rtol=1e-12)

    if np.linalg.norm(offset(theta)) > tube.radius * (1 + 1e-9):
        return None

    if len(candidates) > 1:
        later = [j for j in candidates[1:] if np.linalg.norm(path[j]) <= tube.radius]
        if later:
            logger.warning(f"Flow from {xi.tolist()} crosses the tube disc {len(later) + 1} times, "
                           f"keeping the first crossing")
    return theta


def line_integral(curve, g):
    """
    Trapezoid rule of g * speed along the curve

    Args:
        curve: ReverseCurve
        g: array of node values, or a callable g(node, tau)
    """
    if callable(g):
        values = np.array([g(node, t) for node, t in zip(curve.nodes, curve.taus)], dtype=float)
    else:
        values = np.asarray(g, dtype=float)
    if values.shape[0] != len(curve):
        raise InputError(f"Expected {len(curve)} node values, got {values.shape[0]}")
    if len(curve) < 2:
        return 0.0
    return float(integrate.trapezoid(values * curve.speeds, curve.coords))
