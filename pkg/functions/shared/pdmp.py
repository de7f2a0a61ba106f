"""
PDMP model abstraction and embedded-chain simulation
A model bundles its local characteristics (flow, jump rate, transition kernel)
with the state-space predicate and optional analytic overrides
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, Optional

import numpy as np
from scipy import integrate, optimize

from . import config
from .errors import (
    DimensionMismatchError,
    DomainError,
    InputError,
    ModelContractError,
    NumericalFlowError,
    PdmpError,
    SimulationError,
)

logger = logging.getLogger(__name__)

SAMPLERS = ('inversion', 'thinning')


@dataclass(frozen=True, eq=False)
class PdmpModel:
    """
    Local characteristics of a PDMP on an open set E of R^d

    flow(x, t) must satisfy flow(x, 0) == x and the semigroup property.
    hazard_inverse(x, level) returns the time at which the cumulative hazard
    along the flow from x reaches level (inf if it never does); models set it
    when the inversion has a closed form.
    """

    name: str
    dim: int
    flow: Callable[[np.ndarray, float], np.ndarray]
    rate: Callable[[np.ndarray], float]
    kernel_sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    in_domain: Callable[[np.ndarray], bool]
    kernel_density: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    analytic_exit_fwd: Optional[Callable[[np.ndarray], float]] = None
    analytic_exit_bwd: Optional[Callable[[np.ndarray], float]] = None
    rate_bound_along_flow: Optional[Callable[[np.ndarray, float], float]] = None
    hazard_inverse: Optional[Callable[[np.ndarray, float], float]] = None
    flow_velocity: Optional[Callable[[np.ndarray], np.ndarray]] = None
    exit_infimum_on_ball: Optional[Callable[[np.ndarray, float], float]] = None
    periodic_axes: Dict[int, float] = field(default_factory=dict)
    vectorized_flow: bool = False
    horizon: float = config.EXIT_TIME_HORIZON
    exit_tol: float = config.EXIT_TIME_TOL
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class JumpRecord:
    z: np.ndarray
    s: float
    boundary: bool


@dataclass(frozen=True, eq=False)
class Observations:
    """Estimation pairs (Z_i, S_{i+1}) in chain order"""

    z: np.ndarray
    s: np.ndarray

    def __len__(self):
        return int(self.s.shape[0])

    @property
    def dim(self):
        return int(self.z.shape[1])

    def split_validation(self, divisor=config.VALIDATION_SPLIT_DIVISOR):
        """
        Split one sequence into (main, validation)

        The first ceil(n / divisor) pairs form the validation part. The two
        parts are not independent, callers flag the result as approximate.
        """
        n_val = math.ceil(len(self) / divisor)
        validation = Observations(self.z[:n_val], self.s[:n_val])
        main = Observations(self.z[n_val:], self.s[n_val:])
        return main, validation

    def project(self, axes):
        """Keep only the given state coordinates"""
        return Observations(np.ascontiguousarray(self.z[:, list(axes)]), self.s)


@dataclass(eq=False)
class EmbeddedChain:
    """
    Jumps of a simulated PDMP

    Record k holds the post-jump location z_k, the interarrival s_k that led
    to it (drawn from z_{k-1}, with z_0 = x0) and whether that jump was forced
    by the boundary.
    """

    model_name: str
    x0: Optional[np.ndarray]
    z: np.ndarray
    s: np.ndarray
    boundary: np.ndarray
    seed: Optional[int] = None

    def __len__(self):
        return int(self.s.shape[0])

    @property
    def dim(self):
        return int(self.z.shape[1])

    @property
    def records(self) -> Iterator[JumpRecord]:
        for k in range(len(self)):
            yield JumpRecord(self.z[k], float(self.s[k]), bool(self.boundary[k]))

    def observations(self):
        """Pairs (Z_i, S_{i+1}); without x0 the first interarrival is dropped"""
        if self.x0 is not None:
            z = np.vstack([self.x0[None, :], self.z[:-1]]) if len(self) else self.z
            return Observations(z, self.s.copy())
        return Observations(self.z[:-1].copy(), self.s[1:].copy())


def as_state(model, x):
    """Coerce x to a float vector of the model's dimension"""
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != model.dim:
        raise DimensionMismatchError(
            f"State has dimension {arr.shape[0]}, model '{model.name}' expects {model.dim}",
            {'expected': model.dim, 'received': int(arr.shape[0])}
        )
    return arr


def wrap_difference(diff, periodic_axes):
    """Map coordinate differences on periodic axes into [-P/2, P/2)"""
    if not periodic_axes:
        return diff
    diff = np.array(diff, dtype=float, copy=True)
    for axis, period in periodic_axes.items():
        diff[..., axis] = np.mod(diff[..., axis] + 0.5 * period, period) - 0.5 * period
    return diff


def flow_at(model, x, t):
    """Phi(x, t); negative t follows the reverse flow"""
    x = as_state(model, x)
    if t == 0:
        return x.copy()
    y = np.asarray(model.flow(x, float(t)), dtype=float)
    if not np.all(np.isfinite(y)):
        raise NumericalFlowError(
            f"Flow of model '{model.name}' returned a non-finite state",
            {'x': x.tolist(), 't': float(t)}
        )
    return y


def flow_path(model, x, times):
    """States Phi(x, t) for an array of times, shape (len(times), d)"""
    x = as_state(model, x)
    times = np.asarray(times, dtype=float)
    if model.vectorized_flow:
        path = np.asarray(model.flow(np.broadcast_to(x, (times.shape[0], model.dim)), times), dtype=float)
        if not np.all(np.isfinite(path)):
            raise NumericalFlowError(f"Flow of model '{model.name}' returned a non-finite state")
        return path
    return np.array([flow_at(model, x, t) for t in times]).reshape(times.shape[0], model.dim)


def exit_time_forward(model, x):
    """t+(x): first time the forward flow leaves E, inf beyond the horizon"""
    return _exit_time(model, x, 1.0)


def exit_time_backward(model, x):
    """t-(x): first time the reverse flow leaves E, inf beyond the horizon"""
    return _exit_time(model, x, -1.0)


def _exit_time(model, x, sign):
    x = as_state(model, x)
    if not model.in_domain(x):
        raise DomainError(
            f"State {x.tolist()} is outside the state space of model '{model.name}'",
            {'x': x.tolist()}
        )

    analytic = model.analytic_exit_fwd if sign > 0 else model.analytic_exit_bwd
    if analytic is not None:
        return float(analytic(x))

    inside = 0.0
    t = config.EXIT_INITIAL_STEP
    while True:
        t = min(t, model.horizon)
        if not model.in_domain(flow_at(model, x, sign * t)):
            return _bisect_exit(model, x, sign, inside, t)
        if t >= model.horizon:
            return math.inf
        inside = t
        t *= 2.0


def _bisect_exit(model, x, sign, lo, hi):
    while hi - lo > model.exit_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if model.in_domain(flow_at(model, x, sign * mid)):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _rate_along_flow(model, x):
    def rate(s):
        value = float(model.rate(flow_at(model, x, s)))
        if not math.isfinite(value) or value < 0:
            raise SimulationError(
                f"Jump rate is {value} along the flow of model '{model.name}'",
                details={'x': x.tolist(), 't': float(s)}
            )
        return value
    return rate


def cumulative_hazard(model, x, t0, t1):
    """Integral of lambda(Phi(x, s)) over [t0, t1]"""
    if t1 <= t0:
        return 0.0
    value, _ = integrate.quad(
        _rate_along_flow(model, x), t0, t1,
        limit=config.HAZARD_QUAD_LIMIT, epsabs=0.0, epsrel=1e-10
    )
    if not math.isfinite(value):
        raise SimulationError(f"Hazard integration failed for model '{model.name}'")
    return value


def _inversion_time(model, x, level, t_plus):
    if model.hazard_inverse is not None:
        return float(model.hazard_inverse(x, level))
    if level <= 0:
        return 0.0

    limit = t_plus if math.isfinite(t_plus) else model.horizon
    lo, hazard_lo = 0.0, 0.0
    hi = min(1.0, limit)
    while True:
        hazard_hi = hazard_lo + cumulative_hazard(model, x, lo, hi)
        if hazard_hi >= level:
            break
        if hi >= limit:
            return math.inf
        lo, hazard_lo = hi, hazard_hi
        hi = min(2.0 * hi, limit)

    base_t, base_h = lo, hazard_lo
    return optimize.brentq(
        lambda t: base_h + cumulative_hazard(model, x, base_t, t) - level,
        lo, hi, xtol=1e-14, rtol=config.INVERSION_RTOL
    )


def _thinning_time(model, x, t_plus, rng):
    if model.rate_bound_along_flow is None:
        raise ModelContractError(
            f"Model '{model.name}' has no rate_bound_along_flow, thinning is unavailable"
        )
    rate = _rate_along_flow(model, x)
    end = t_plus if math.isfinite(t_plus) else model.horizon
    start = 0.0
    while start < end:
        window = min(config.THINNING_WINDOW, end - start)
        bound = float(model.rate_bound_along_flow(flow_at(model, x, start), window))
        t = start
        while bound > 0:
            t += rng.exponential(1.0 / bound)
            if t >= start + window:
                break
            value = rate(t)
            if value > bound * (1 + 1e-12):
                raise ModelContractError(
                    f"Jump rate {value} exceeds the declared bound {bound} along the flow",
                    {'x': x.tolist(), 't': t}
                )
            if rng.uniform() * bound <= value:
                return t
        start += window
    return math.inf


def sample_interjump(model, x, rng, method='inversion'):
    """
    Draw S from the law of the next interarrival time at x

    Returns:
        tuple: (time, boundary) where boundary is True when the jump is
        forced at t+(x)
    """
    x = as_state(model, x)
    if method not in SAMPLERS:
        raise InputError(f"Unknown interarrival sampler '{method}'", {'supported': list(SAMPLERS)})
    t_plus = exit_time_forward(model, x)

    if method == 'thinning':
        t = _thinning_time(model, x, t_plus, rng)
    else:
        t = _inversion_time(model, x, rng.exponential(), t_plus)

    if t >= t_plus:
        if not math.isfinite(t_plus):
            raise SimulationError(
                f"Process never jumps from {x.tolist()} within the horizon {model.horizon}"
            )
        return t_plus, True
    return t, False


def sample_post_jump(model, pre_jump, rng):
    """Draw the post-jump location from Q(pre_jump, .)"""
    pre_jump = as_state(model, pre_jump)
    y = np.asarray(model.kernel_sampler(pre_jump, rng), dtype=float).reshape(-1)
    if y.shape[0] != model.dim or not model.in_domain(y):
        raise ModelContractError(
            f"Kernel sampler of model '{model.name}' returned {y.tolist()} outside the state space",
            {'pre_jump': pre_jump.tolist()}
        )
    return y


def simulate_chain(model, x0, n, rng, method='inversion', seed=None):
    """
    Simulate n jumps of the embedded chain from x0

    Args:
        model: PdmpModel
        x0: starting post-jump location, must lie in E
        n: number of jumps (0 gives an empty chain)
        rng: numpy Generator for this chain
        method: 'inversion' or 'thinning'
        seed: seed value recorded with the chain

    Returns:
        EmbeddedChain
    """
    x0 = as_state(model, x0)
    if n < 0:
        raise InputError(f"Chain length must be non-negative, got {n}")
    if not model.in_domain(x0):
        raise DomainError(f"Starting point {x0.tolist()} is outside the state space", {'x0': x0.tolist()})

    z = np.empty((n, model.dim))
    s = np.empty(n)
    boundary = np.zeros(n, dtype=bool)
    current = x0

    for i in range(n):
        try:
            s_i, forced = sample_interjump(model, current, rng, method)
            current = sample_post_jump(model, flow_at(model, current, s_i), rng)
        except PdmpError as e:
            raise SimulationError(
                f"Chain simulation failed at record {i}: {e.message}",
                index=i,
                details={'cause': e.error_code, **e.details}
            ) from e
        z[i] = current
        s[i] = s_i
        boundary[i] = forced

    if n:
        logger.info(f"Chain simulated: {n} records for model '{model.name}' "
                    f"({int(boundary.sum())} boundary jumps)")
    return EmbeddedChain(model.name, x0, z, s, boundary, seed)
