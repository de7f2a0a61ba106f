"""
Recursive kernel estimators of the joint law of (Z_n, S_{n+1})

F(x, t)   joint density of post-jump location and interarrival time
G(x, t)   nu(x) times the conditional survival of the interarrival time
nu(x)     invariant density of the post-jump locations

Two evaluation modes share the same sums: StreamingEstimator keeps running
sums at queries registered up front, BatchEstimator stores the observations
and evaluates arbitrary queries later.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from . import config
from .errors import DimensionMismatchError, EstimationError, UnregisteredQueryError
from .pdmp import wrap_difference

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueryPoint:
    x: Tuple[float, ...]
    t: float

    @classmethod
    def of(cls, x, t):
        return cls(tuple(float(v) for v in np.asarray(x, dtype=float).reshape(-1)), float(t))


class RawEstimate(NamedTuple):
    F: float
    G: float
    nu: float


def ratio(numerator, denominator, label='ratio'):
    """numerator / denominator with 0/0 = 0; x/0 with x > 0 is +inf and logged"""
    if denominator == 0:
        if numerator == 0:
            return 0.0
        logger.warning(f"Infinite {label}: numerator {numerator} over a zero denominator")
        return math.inf
    return numerator / denominator


G_OUT_OF_RANGE = 'g_out_of_range'


def survival_flags(value):
    """Report flags for a conditional survival estimate outside [0, G_RATIO_LIMIT]"""
    if value < 0.0 or value > config.G_RATIO_LIMIT:
        return [G_OUT_OF_RANGE]
    return []


def spatial_weights(z, x, v, kernel, periodic_axes=None):
    """
    Matrix v_i^-d K_d((z_i - x_j) / v_i), shape (n, m)

    Args:
        z: observations, shape (n, d)
        x: query locations, shape (m, d)
        v: spatial bandwidth per observation, shape (n,)
    """
    n, d = z.shape
    weights = np.ones((n, x.shape[0]))
    for axis in range(d):
        diff = z[:, axis, None] - x[None, :, axis]
        if periodic_axes and axis in periodic_axes:
            period = periodic_axes[axis]
            diff = np.mod(diff + 0.5 * period, period) - 0.5 * period
        weights *= kernel.profile(diff / v[:, None])
    return weights / (v ** d)[:, None]


def time_weights(s, t, w, kernel):
    """Matrix w_i^-1 K_1((s_i - t_j) / w_i), shape (n, m)"""
    return kernel.profile((s[:, None] - t[None, :]) / w[:, None]) / w[:, None]


class _KernelEstimator:
    """Bandwidths, kernels and the ratio estimators common to both modes"""

    def __init__(self, schedule, spatial_kernel, time_kernel, periodic_axes=None):
        if spatial_kernel.dim != schedule.d:
            raise DimensionMismatchError(
                f"Spatial kernel has dimension {spatial_kernel.dim}, schedule expects {schedule.d}"
            )
        if time_kernel.dim != 1:
            raise DimensionMismatchError(f"Time kernel must be one-dimensional, got {time_kernel.dim}")
        self.schedule = schedule
        self.spatial_kernel = spatial_kernel
        self.time_kernel = time_kernel
        self.periodic_axes = dict(periodic_axes or {})

    @property
    def d(self):
        return self.schedule.d

    def eval_raw(self, q):
        raise NotImplementedError

    def estimate_f(self, q):
        """Conditional interarrival density F / nu"""
        raw = self.eval_raw(q)
        return ratio(raw.F, raw.nu, 'conditional density')

    def estimate_G(self, q):
        """Conditional survival G / nu; see survival_flags for the range check"""
        raw = self.eval_raw(q)
        value = ratio(raw.G, raw.nu, 'conditional survival')
        if survival_flags(value):
            logger.warning(f"Survival ratio {value:.4f} outside [0, {config.G_RATIO_LIMIT}] at {q}")
        return value

    def estimate_lambda_phi(self, q):
        """Rate along the flow, F / G"""
        raw = self.eval_raw(q)
        return ratio(raw.F, raw.G, 'rate estimate')

    def _check_count(self, n):
        if n < 1:
            raise EstimationError("Estimator has not consumed any record")


class StreamingEstimator(_KernelEstimator):
    """Running sums at a fixed set of registered queries"""

    def __init__(self, schedule, spatial_kernel, time_kernel, queries, periodic_axes=None):
        super().__init__(schedule, spatial_kernel, time_kernel, periodic_axes)
        self.queries = [q if isinstance(q, QueryPoint) else QueryPoint.of(*q) for q in queries]
        self._index = {q: i for i, q in enumerate(self.queries)}
        self._x = np.array([q.x for q in self.queries], dtype=float).reshape(len(self.queries), self.d)
        self._t = np.array([q.t for q in self.queries], dtype=float)
        self._F = np.zeros(len(self.queries))
        self._G = np.zeros(len(self.queries))
        self._nu = np.zeros(len(self.queries))
        self.count = 0

    def accumulate(self, z, s):
        """Consume record number `count`"""
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape[0] != self.d:
            raise DimensionMismatchError(f"Record has dimension {z.shape[0]}, estimator expects {self.d}")
        v, w = self.schedule.at(self.count)
        diff = wrap_difference(z[None, :] - self._x, self.periodic_axes)
        kd = self.spatial_kernel.evaluate(diff / v) / v ** self.d
        k1 = self.time_kernel.profile((s - self._t) / w) / w
        self._F += kd * k1
        self._G += kd * (s > self._t)
        self._nu += kd
        self.count += 1
        return self

    def accumulate_all(self, observations):
        for z, s in zip(observations.z, observations.s):
            self.accumulate(z, float(s))
        return self

    def eval_raw(self, q):
        q = q if isinstance(q, QueryPoint) else QueryPoint.of(*q)
        if q not in self._index:
            raise UnregisteredQueryError(f"Query {q} was not registered with this estimator")
        self._check_count(self.count)
        i = self._index[q]
        n = float(self.count)
        return RawEstimate(self._F[i] / n, self._G[i] / n, self._nu[i] / n)

    def eval_raw_many(self, x, t):
        """Raw triples at a list of registered queries, as three arrays"""
        rows = [self.eval_raw(QueryPoint.of(xi, ti)) for xi, ti in zip(x, t)]
        return tuple(np.array([r[k] for r in rows]) for k in range(3))

    def to_snapshot(self):
        n = max(self.count, 1)
        return {
            'mode': 'streaming',
            'schedule': self.schedule.to_dict(),
            'kernel': self.spatial_kernel.name,
            'time_kernel': self.time_kernel.name,
            'count': self.count,
            'queries': [
                {'x': list(q.x), 't': q.t,
                 'F': self._F[i] / n, 'G': self._G[i] / n, 'nu': self._nu[i] / n}
                for i, q in enumerate(self.queries)
            ],
        }


class BatchEstimator(_KernelEstimator):
    """Stored observations, evaluated at arbitrary queries"""

    def __init__(self, schedule, spatial_kernel, time_kernel, observations, periodic_axes=None):
        super().__init__(schedule, spatial_kernel, time_kernel, periodic_axes)
        if observations.dim != self.d:
            raise DimensionMismatchError(
                f"Observations have dimension {observations.dim}, estimator expects {self.d}"
            )
        self.observations = observations
        self.count = len(observations)
        self.v, self.w = schedule.arrays(self.count)

    def spatial_matrix(self, x):
        return spatial_weights(self.observations.z, x, self.v, self.spatial_kernel, self.periodic_axes)

    def time_matrix(self, t):
        return time_weights(self.observations.s, t, self.w, self.time_kernel)

    def eval_raw_many(self, x, t):
        """
        Raw estimates at queries (x_j, t_j)

        Returns:
            tuple: (F, G, nu) arrays of length m
        """
        self._check_count(self.count)
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        t = np.asarray(t, dtype=float).reshape(-1)
        m = x.shape[0]
        F, G, nu = np.zeros(m), np.zeros(m), np.zeros(m)
        block = max(1, config.STREAMING_CHUNK // max(self.count, 1))
        s = self.observations.s
        for start in range(0, m, block):
            sl = slice(start, min(start + block, m))
            kd = self.spatial_matrix(x[sl])
            k1 = self.time_matrix(t[sl])
            F[sl] = (kd * k1).sum(axis=0)
            G[sl] = (kd * (s[:, None] > t[None, sl])).sum(axis=0)
            nu[sl] = kd.sum(axis=0)
        n = float(self.count)
        return F / n, G / n, nu / n

    def eval_raw(self, q):
        q = q if isinstance(q, QueryPoint) else QueryPoint.of(*q)
        F, G, nu = self.eval_raw_many(np.array([q.x]), np.array([q.t]))
        return RawEstimate(float(F[0]), float(G[0]), float(nu[0]))

    def to_snapshot(self, queries):
        queries = [q if isinstance(q, QueryPoint) else QueryPoint.of(*q) for q in queries]
        if queries:
            F, G, nu = self.eval_raw_many(np.array([q.x for q in queries]), np.array([q.t for q in queries]))
        else:
            F = G = nu = []
        return {
            'mode': 'batch',
            'schedule': self.schedule.to_dict(),
            'kernel': self.spatial_kernel.name,
            'time_kernel': self.time_kernel.name,
            'count': self.count,
            'queries': [
                {'x': list(q.x), 't': q.t, 'F': float(F[i]), 'G': float(G[i]), 'nu': float(nu[i])}
                for i, q in enumerate(queries)
            ],
        }
