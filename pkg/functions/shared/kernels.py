"""
Smoothing kernels and bandwidth schedules
Shipped kernels are products of a one-dimensional profile supported on [-1, 1],
so their support lies in the ball of radius sqrt(p)
"""

import functools
import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate

from . import config
from .errors import ConfigError, DimensionMismatchError
from .pdmp import as_state, exit_time_forward

logger = logging.getLogger(__name__)


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _biweight(u):
    return np.where(np.abs(u) <= 1.0, 0.9375 * (1.0 - u * u) ** 2, 0.0)


def _uniform(u):
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


# name -> (profile, Lipschitz)
PROFILES = {
    'epanechnikov': (_epanechnikov, True),
    'biweight': (_biweight, True),
    'uniform': (_uniform, False),
}


@dataclass(frozen=True)
class Kernel:
    """Product kernel K_p(u) = prod_k profile(u_k)"""

    name: str
    dim: int
    profile: Callable[[np.ndarray], np.ndarray]
    lipschitz: bool = True

    @property
    def support_radius(self):
        return math.sqrt(self.dim)

    def evaluate(self, u):
        """Vectorized evaluation over the last axis of u (shape (..., p))"""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.dim:
            raise DimensionMismatchError(
                f"Kernel '{self.name}' has dimension {self.dim}, argument has {u.shape[-1]}"
            )
        return np.prod(self.profile(u), axis=-1)

    def __call__(self, u):
        return kernel_eval(self, u)

    @cached_property
    def profile_l2sq(self):
        value, _ = integrate.quad(lambda v: float(self.profile(np.array(v))) ** 2, -1.0, 1.0,
                                  points=[0.0], epsabs=1e-13)
        return value

    @cached_property
    def profile_mass(self):
        value, _ = integrate.quad(lambda v: float(self.profile(np.array(v))), -1.0, 1.0,
                                  points=[0.0], epsabs=1e-13)
        return value

    @cached_property
    def l2sq(self):
        return self.profile_l2sq ** self.dim

    @cached_property
    def mass(self):
        return self.profile_mass ** self.dim


@functools.lru_cache(maxsize=None)
def build_kernel(name, dim):
    """Shipped product kernel by name"""
    if name not in PROFILES:
        raise ConfigError(f"Unknown kernel '{name}'", {'supported': sorted(PROFILES)})
    if dim < 1:
        raise ConfigError(f"Kernel dimension must be positive, got {dim}")
    profile, lipschitz = PROFILES[name]
    return Kernel(name, int(dim), profile, lipschitz)


def validate_kernel(kernel, spatial=False):
    """
    Check normalization, support and (for spatial kernels) Lipschitz continuity

    Returns:
        tuple: (is_valid, errors)
    """
    errors = []
    if abs(kernel.mass - 1.0) > 1e-6:
        errors.append(f"Kernel mass is {kernel.mass}, expected 1")
    support = np.linspace(-1.5, 1.5, 61)
    values = kernel.profile(support)
    if np.any(values < 0):
        errors.append("Kernel takes negative values")
    if np.any(values[np.abs(support) > 1.0] != 0):
        errors.append("Kernel is not zero outside its support")
    if spatial and not kernel.lipschitz:
        errors.append(f"Kernel '{kernel.name}' is not Lipschitz and cannot smooth in space")
    return len(errors) == 0, errors


def kernel_eval(kernel, u):
    """K_p(u) for a single point u (a scalar is accepted when p = 1)"""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1 or u.shape[0] != kernel.dim:
        raise DimensionMismatchError(
            f"Kernel '{kernel.name}' has dimension {kernel.dim}, point has {u.size} coordinates"
        )
    return float(kernel.evaluate(u))


def kernel_l2norm_sq(kernel):
    return kernel.l2sq


@dataclass(frozen=True)
class BandwidthSchedule:
    """v_k = v0 (k+1)^-alpha in space, w_k = w0 (k+1)^-beta in time"""

    v0: float
    w0: float
    alpha: float
    beta: float
    d: int

    def __post_init__(self):
        if not (self.v0 > 0 and self.w0 > 0):
            raise ConfigError(f"Initial bandwidths must be positive (v0={self.v0}, w0={self.w0})")
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError(f"Bandwidth exponents must be positive (alpha={self.alpha}, beta={self.beta})")

    def at(self, k):
        return bandwidth_at(self, k)

    def arrays(self, n):
        """(v, w) bandwidths for records 0..n-1"""
        k = np.arange(1, n + 1, dtype=float)
        return self.v0 * k ** (-self.alpha), self.w0 * k ** (-self.beta)

    def to_dict(self):
        return {'v0': self.v0, 'w0': self.w0, 'alpha': self.alpha, 'beta': self.beta, 'd': self.d}


def bandwidth_at(schedule, k):
    if k < 0:
        raise ValueError(f"Bandwidth index must be non-negative, got {k}")
    kk = float(k + 1)
    return schedule.v0 * kk ** (-schedule.alpha), schedule.w0 * kk ** (-schedule.beta)


def admissible(alpha, beta, d):
    """Membership in the admissible set of bandwidth exponents"""
    return (alpha > 0 and beta > 0
            and alpha * d + beta < 1
            and alpha * d + beta + 2 * min(alpha, beta) > 1)


def survival_clt_band(alpha, d):
    """Exponent band under which the survival estimator is asymptotically normal"""
    return alpha * d < 1 and alpha * (d + 2) > 1


def ball_mesh(x, radius):
    """Center, cube corners and axis points of the ball, at full and half radius"""
    d = x.shape[0]
    points = [x.copy()]
    for r in (radius, 0.5 * radius):
        for signs in itertools.product((-1.0, 1.0), repeat=d):
            points.append(x + r * np.asarray(signs) / math.sqrt(d))
        for k in range(d):
            for sign in (-1.0, 1.0):
                p = x.copy()
                p[k] += sign * r
                points.append(p)
    return points


def ball_exit_infimum(model, x, radius):
    """Lower estimate of inf t+ over the ball B(x, radius)"""
    if model.exit_infimum_on_ball is not None:
        return float(model.exit_infimum_on_ball(x, radius))
    infimum = math.inf
    for p in ball_mesh(x, radius):
        if not model.in_domain(p):
            return 0.0
        infimum = min(infimum, exit_time_forward(model, p))
    if math.isinf(infimum):
        return infimum
    return infimum * config.BALL_INFIMUM_SHRINK


def check_initial_bandwidths(model, x, t, v0, w0, delta):
    """Whether t + w0*delta < inf of t+ over B(x, v0*delta)"""
    x = as_state(model, x)
    infimum = ball_exit_infimum(model, x, v0 * delta)
    if math.isinf(infimum):
        return True
    return t + w0 * delta < infimum


def check_initial_bandwidths_uniform(model, points, times, v0, w0, delta):
    """Feasibility of every (x, t) pair in a query set"""
    return np.array([check_initial_bandwidths(model, x, t, v0, w0, delta)
                     for x, t in zip(points, times)], dtype=bool)
