"""
Built-in PDMP models

tcp        window-size process on (0,1)^2 with rate x1 + x2
bacteria   run-and-tumble motion in the unit disc, uniform tumble angle
crack      fatigue crack growth in the Paris regime, jump = regime switch
oracle     constant rate with an x-free kernel, invariant law known exactly
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, optimize, stats

from . import config
from .errors import ConfigError, EstimationError, NumericalFlowError, SingularityError
from .flow_geometry import ReverseCurve
from .pdmp import PdmpModel

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DISC_INSET = 1e-9


# TCP window size

def build_tcp():
    """
    TCP-like process: E = (0,1)^2, Phi(x, t) = (x1 + t, x2), lambda(x) = x1 + x2

    The post-jump location is Beta(2, 2/x1) x Beta(2, 2) with x1 the
    pre-jump first coordinate.
    """
    def flow(x, t):
        y = np.array(x, dtype=float, copy=True)
        y[..., 0] = y[..., 0] + t
        return y

    def rate(x):
        return float(x[0] + x[1])

    def in_domain(x):
        return bool(0.0 < x[0] < 1.0 and 0.0 < x[1] < 1.0)

    def hazard_inverse(x, level):
        a = float(x[0] + x[1])
        return -a + math.sqrt(a * a + 2.0 * level)

    def kernel_sampler(pre, rng):
        b = 2.0 / min(max(float(pre[0]), 1e-12), 1.0)
        return np.array([rng.beta(2.0, b), rng.beta(2.0, 2.0)])

    def kernel_density(pre, y):
        b = 2.0 / min(max(float(pre[0]), 1e-12), 1.0)
        return float(stats.beta.pdf(y[0], 2.0, b) * stats.beta.pdf(y[1], 2.0, 2.0))

    return PdmpModel(
        name='tcp',
        dim=2,
        flow=flow,
        rate=rate,
        kernel_sampler=kernel_sampler,
        in_domain=in_domain,
        kernel_density=kernel_density,
        analytic_exit_fwd=lambda x: 1.0 - float(x[0]),
        analytic_exit_bwd=lambda x: float(x[0]),
        rate_bound_along_flow=lambda x, horizon: float(x[0] + x[1] + horizon),
        hazard_inverse=hazard_inverse,
        flow_velocity=lambda x: np.array([1.0, 0.0]),
        exit_infimum_on_ball=lambda x, r: max(0.0, 1.0 - float(x[0]) - r),
        vectorized_flow=True,
    )


# Bacteria in the unit disc

def _ray_exit(x1, x2, c, s):
    b = x1 * c + x2 * s
    q = x1 * x1 + x2 * x2 - 1.0
    return -b + math.sqrt(max(b * b - q, 0.0))


def build_bacteria(rate_field=1.0, rate_bound=None):
    """
    Bacteria moving at unit speed in its heading direction inside the unit disc

    Args:
        rate_field: constant rate or callable (x1, x2) -> rate
        rate_bound: bound on the rate used for thinning when rate_field is a callable
    """
    constant = not callable(rate_field)
    if constant and rate_field < 0:
        raise ConfigError(f"Bacteria jump rate must be non-negative, got {rate_field}")

    def flow(x, t):
        x = np.asarray(x, dtype=float)
        y = np.array(x, copy=True)
        y[..., 0] = x[..., 0] + t * np.cos(x[..., 2])
        y[..., 1] = x[..., 1] + t * np.sin(x[..., 2])
        return y

    def rate(x):
        return float(rate_field) if constant else float(rate_field(x[0], x[1]))

    def in_domain(x):
        return bool(x[0] * x[0] + x[1] * x[1] < 1.0 and 0.0 <= x[2] < TWO_PI)

    def exit_fwd(x):
        return _ray_exit(x[0], x[1], math.cos(x[2]), math.sin(x[2]))

    def exit_bwd(x):
        return _ray_exit(x[0], x[1], -math.cos(x[2]), -math.sin(x[2]))

    def kernel_sampler(pre, rng):
        position = np.array(pre[:2], dtype=float)
        radius = math.hypot(position[0], position[1])
        if radius >= 1.0 - DISC_INSET:
            position *= (1.0 - DISC_INSET) / radius
        return np.array([position[0], position[1], rng.uniform(0.0, TWO_PI)])

    hazard_inverse = None
    bound = None
    if constant:
        hazard_inverse = (lambda x, level: level / rate_field) if rate_field > 0 else (lambda x, level: math.inf)
        bound = lambda x, horizon: float(rate_field)
    elif rate_bound is not None:
        bound = rate_bound if callable(rate_bound) else (lambda x, horizon: float(rate_bound))

    return PdmpModel(
        name='bacteria',
        dim=3,
        flow=flow,
        rate=rate,
        kernel_sampler=kernel_sampler,
        in_domain=in_domain,
        analytic_exit_fwd=exit_fwd,
        analytic_exit_bwd=exit_bwd,
        rate_bound_along_flow=bound,
        hazard_inverse=hazard_inverse,
        flow_velocity=lambda x: np.array([math.cos(x[2]), math.sin(x[2]), 0.0]),
        exit_infimum_on_ball=lambda x, r: max(0.0, 1.0 - math.hypot(x[0], x[1]) - r),
        periodic_axes={2: TWO_PI},
        vectorized_flow=True,
        params={'rate': float(rate_field) if constant else 'field'},
    )


def bacteria_angles(count=16):
    """Uniform heading grid on [0, 2 pi)"""
    return TWO_PI * np.arange(count) / count


def aggregate_bacteria_lambda(per_angle_estimates):
    """
    Mean of the per-heading estimates at one position

    Args:
        per_angle_estimates: mapping angle -> estimate on a uniform heading grid
    """
    if not per_angle_estimates:
        raise EstimationError("No per-angle estimates to aggregate")
    angles = np.array(sorted(per_angle_estimates))
    if len(angles) > 2:
        gaps = np.diff(np.append(angles, angles[0] + TWO_PI))
        if np.ptp(gaps) > 1e-6:
            logger.warning(f"Heading grid of {len(angles)} angles is not uniform")
    return float(np.mean([per_angle_estimates[a] for a in angles]))


# Fatigue crack growth

@dataclass(frozen=True)
class CrackParameters:
    """Center-cracked panel under constant-amplitude loading (lengths in mm, stress in MPa)"""

    delta_sigma: float = 48.28
    omega: float = 152.0
    load_ratio: float = 0.2
    a0: float = 9.0
    a_final: float = 49.8
    logc_intercept: float = -9.25
    logc_slope: float = -5.89
    logc_noise: float = 0.0
    m_mean: float = 3.0
    m_sd: float = 0.15
    m_low: float = 2.6
    m_high: float = 3.4
    rate_scale: float = 2.7e-8
    rate_power: float = 2.0
    forman_kc: float = 2000.0

    def validate(self):
        """
        Returns:
            tuple: (is_valid, errors)
        """
        errors = []
        if not 0 < self.a0 < self.a_final < self.omega / 2.0:
            errors.append("Lengths must satisfy 0 < a0 < a_final < omega/2")
        if not self.m_low < self.m_high:
            errors.append("m band is empty (m_low >= m_high)")
        if not self.m_low <= self.m_mean <= self.m_high:
            errors.append(f"m_mean={self.m_mean} outside the band [{self.m_low}, {self.m_high}]")
        if self.m_sd <= 0:
            errors.append("m_sd must be positive")
        if self.logc_noise < 0:
            errors.append("logc_noise must be non-negative")
        if self.rate_scale < 0:
            errors.append("rate_scale must be non-negative")
        if not 0 <= self.load_ratio < 1:
            errors.append("load_ratio must lie in [0, 1)")
        return len(errors) == 0, errors

    def logc(self, m):
        return self.logc_intercept + self.logc_slope * m

    def switch_rate(self, a):
        """Synthetic regime-switch rate per cycle, increasing in a"""
        return self.rate_scale * max(a - self.a0, 0.0) ** self.rate_power


def delta_k(a, params):
    """Stress intensity factor range (MPa sqrt(mm))"""
    arg = math.pi * a / params.omega
    if a <= 0:
        raise NumericalFlowError(f"Crack length must be positive, got {a}")
    if arg >= math.pi / 2.0 * (1.0 - config.CRACK_SINGULARITY_MARGIN):
        raise SingularityError(f"Crack length {a} mm reached omega/2 = {params.omega / 2.0} mm",
                               {'a': a})
    return params.delta_sigma * math.sqrt(math.pi * a) / math.sqrt(math.cos(arg))


def paris_rate(a, m, C, params):
    """da/dN = C dK^m"""
    return C * delta_k(a, params) ** m


def forman_rate(a, m, C, params):
    """da/dN = C dK^m / ((1 - R) Kc - dK)"""
    dk = delta_k(a, params)
    margin = (1.0 - params.load_ratio) * params.forman_kc - dk
    if margin <= 0:
        raise SingularityError(f"Unstable fracture at a={a} mm (dK={dk:.1f} >= (1-R)Kc)", {'a': a})
    return C * dk ** m / margin


def _rk4(rate, a0, N, step):
    if step <= 0:
        raise NumericalFlowError(f"Integration step must be positive, got {step}")
    if N == 0:
        return float(a0)
    steps = int(math.ceil(abs(N) / step - 1e-12))
    h = N / steps
    a = float(a0)
    for _ in range(steps):
        k1 = rate(a)
        k2 = rate(a + 0.5 * h * k1)
        k3 = rate(a + 0.5 * h * k2)
        k4 = rate(a + h * k3)
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return a


def paris_flow_rk4(a0, m, C, N, step, params=None):
    """
    Crack length after N cycles of Paris growth from a0

    Args:
        a0: initial length (mm), below omega/2
        m, C: Paris parameters
        N: cycles, negative values integrate backwards
        step: RK4 step in cycles
        params: CrackParameters (default constants)

    Raises:
        SingularityError: the length reaches omega/2
    """
    params = params or CrackParameters()
    if a0 >= params.omega / 2.0:
        raise SingularityError(f"Initial length {a0} mm is not below omega/2", {'a0': a0})
    return _rk4(lambda a: paris_rate(a, m, C, params), a0, N, step)


def forman_flow_rk4(a0, m, C, N, step, params=None):
    """Crack length after N cycles of Forman growth from a0"""
    params = params or CrackParameters()
    return _rk4(lambda a: forman_rate(a, m, C, params), a0, N, step)


def euler_flow(rate, a0, N, step):
    """Explicit Euler integration of da/dN = rate(a)"""
    steps = int(math.ceil(abs(N) / step - 1e-12))
    h = N / steps
    a = float(a0)
    for _ in range(steps):
        a += h * rate(a)
    return a


def cycles_to_length(a_start, a_end, m, C, params):
    """Exact number of Paris cycles from a_start to a_end (quadrature of dN/da)"""
    if a_end <= a_start:
        return 0.0
    value, _ = integrate.quad(lambda a: 1.0 / paris_rate(a, m, C, params), a_start, a_end,
                              epsabs=0.0, epsrel=1e-11, limit=200)
    return value


def length_after_cycles(a_start, m, C, N, params):
    """Inverse of cycles_to_length by root finding, used as an exact flow"""
    if N == 0:
        return float(a_start)
    hi = params.omega / 2.0 * (1.0 - 2 * config.CRACK_SINGULARITY_MARGIN)
    if cycles_to_length(a_start, hi, m, C, params) <= N:
        raise SingularityError(f"Crack reaches omega/2 within {N} cycles", {'a': a_start})
    return optimize.brentq(lambda a: cycles_to_length(a_start, a, m, C, params) - N,
                           a_start, hi, xtol=1e-13, rtol=1e-14)


def _switch_hazard(a_start, a_end, m, C, params):
    if a_end <= a_start:
        return 0.0
    value, _ = integrate.quad(lambda a: params.switch_rate(a) / paris_rate(a, m, C, params),
                              a_start, a_end, epsabs=0.0, epsrel=1e-11, limit=200)
    return value


def build_crack(params=None):
    """
    Crack growth model with state (a, m, log C)

    The Paris parameters ride along with the state and never change along
    the flow; a jump starts a new specimen at a0 with fresh (m, log C).
    Reaching a_final without switching is a boundary jump.
    """
    params = params or CrackParameters()
    is_valid, errors = params.validate()
    if not is_valid:
        raise ConfigError("Invalid crack parameters", {'errors': errors})
    m_law = stats.truncnorm((params.m_low - params.m_mean) / params.m_sd,
                            (params.m_high - params.m_mean) / params.m_sd,
                            loc=params.m_mean, scale=params.m_sd)

    def flow(x, t):
        a, m, logc = float(x[0]), float(x[1]), float(x[2])
        step = max(abs(t) / config.RK4_STEPS_PER_FLOW, 1e-12)
        return np.array([paris_flow_rk4(a, m, math.exp(logc), t, step, params), m, logc])

    def rate(x):
        return params.switch_rate(float(x[0]))

    def in_domain(x):
        return bool(0.0 < x[0] < params.a_final and params.m_low <= x[1] <= params.m_high)

    def exit_fwd(x):
        return cycles_to_length(float(x[0]), params.a_final, float(x[1]), math.exp(float(x[2])), params)

    def hazard_inverse(x, level):
        a, m, C = float(x[0]), float(x[1]), math.exp(float(x[2]))
        if _switch_hazard(a, params.a_final, m, C, params) < level:
            return math.inf
        a_switch = optimize.brentq(lambda b: _switch_hazard(a, b, m, C, params) - level,
                                   a, params.a_final, xtol=1e-12, rtol=config.INVERSION_RTOL)
        return cycles_to_length(a, a_switch, m, C, params)

    def kernel_sampler(pre, rng):
        m = float(m_law.rvs(random_state=rng))
        logc = params.logc(m)
        if params.logc_noise > 0:
            logc += params.logc_noise * rng.normal()
        return np.array([params.a0, m, logc])

    return PdmpModel(
        name='crack',
        dim=3,
        flow=flow,
        rate=rate,
        kernel_sampler=kernel_sampler,
        in_domain=in_domain,
        analytic_exit_fwd=exit_fwd,
        analytic_exit_bwd=lambda x: math.inf,
        hazard_inverse=hazard_inverse,
        flow_velocity=lambda x: np.array([paris_rate(float(x[0]), float(x[1]), math.exp(float(x[2])), params),
                                          0.0, 0.0]),
        params=asdict(params),
    )


def crack_parameters(model):
    return CrackParameters(**model.params)


def crack_initial_state(params):
    return np.array([params.a0, params.m_mean, params.logc(params.m_mean)])


def crack_observations(observations):
    """Project crack observations onto the Paris exponent m"""
    return observations.project([1])


def crack_curve(params, a_target, m_grid):
    """
    Curve indexed by the Paris exponent m

    Node m has time tau_m(a) = cycles from a0 to the target length under the
    mean log C relation; line integrals run over m with unit speed.
    """
    m_grid = np.asarray(m_grid, dtype=float)
    if np.any(m_grid < params.m_low) or np.any(m_grid > params.m_high):
        raise ConfigError(f"m grid leaves the band [{params.m_low}, {params.m_high}]")
    if not params.a0 <= a_target < params.a_final:
        raise ConfigError(f"Target length {a_target} outside [{params.a0}, {params.a_final})")
    taus = [cycles_to_length(params.a0, a_target, m, math.exp(params.logc(m)), params) for m in m_grid]
    return ReverseCurve.from_nodes(np.array([a_target]), m_grid[:, None], taus, m_grid)


def simulate_crack_path(params, m, a_switch, points=100):
    """
    Plot-only growth curve: Paris up to the switch, Forman afterwards

    The Forman constant is matched so the growth rate is continuous at the
    switch. The curve stops where Forman growth becomes unstable or at a_final.

    Returns:
        tuple: (cycles, lengths) arrays
    """
    C = math.exp(params.logc(m))
    pre = np.linspace(params.a0, a_switch, points)
    cycles = [cycles_to_length(params.a0, a, m, C, params) for a in pre]

    margin = (1.0 - params.load_ratio) * params.forman_kc - delta_k(a_switch, params)
    if margin <= 0:
        return np.array(cycles), pre
    C_forman = C * margin
    a_stop = params.a_final
    dk_limit = (1.0 - params.load_ratio) * params.forman_kc * (1.0 - 1e-3)
    lengths = np.linspace(a_switch, params.a_final, 4 * points)
    unstable = [a for a in lengths if delta_k(a, params) >= dk_limit]
    if unstable:
        a_stop = unstable[0]
    post = np.linspace(a_switch, a_stop, points)[1:]
    n_switch = cycles[-1]
    for a in post:
        value, _ = integrate.quad(lambda b: 1.0 / forman_rate(b, m, C_forman, params), a_switch, a,
                                  epsabs=0.0, epsrel=1e-10, limit=200)
        cycles.append(n_switch + value)
    return np.array(cycles), np.concatenate([pre, post])


# Analytic oracle

def build_oracle(q_spec=None, lambda_const=1.0, dim=1):
    """
    Constant-rate model on R^dim with an x-free post-jump law q

    Phi(x, t) = x + t e_1, so there is no boundary and G(x, t) = exp(-lambda t).
    q_spec is a frozen one-dimensional scipy.stats distribution used
    independently on every coordinate (default Beta(2, 2)).
    """
    q = q_spec if q_spec is not None else stats.beta(2.0, 2.0)
    if lambda_const <= 0:
        raise ConfigError(f"Oracle rate must be positive, got {lambda_const}")
    e1 = np.zeros(dim)
    e1[0] = 1.0

    def flow(x, t):
        y = np.array(x, dtype=float, copy=True)
        y[..., 0] = y[..., 0] + t
        return y

    def kernel_sampler(pre, rng):
        return np.atleast_1d(q.rvs(size=dim, random_state=rng)).astype(float)

    def kernel_density(pre, y):
        return float(np.prod(q.pdf(np.asarray(y, dtype=float))))

    return PdmpModel(
        name='oracle',
        dim=dim,
        flow=flow,
        rate=lambda x: float(lambda_const),
        kernel_sampler=kernel_sampler,
        in_domain=lambda x: bool(np.all(np.isfinite(x))),
        kernel_density=kernel_density,
        analytic_exit_fwd=lambda x: math.inf,
        analytic_exit_bwd=lambda x: math.inf,
        rate_bound_along_flow=lambda x, horizon: float(lambda_const),
        hazard_inverse=lambda x, level: level / lambda_const,
        flow_velocity=lambda x: e1.copy(),
        exit_infimum_on_ball=lambda x, r: math.inf,
        vectorized_flow=True,
        params={'lambda': float(lambda_const), 'q': q},
    )


def oracle_invariant_density(model, x):
    """nu(x) = prod q(x_k)"""
    return float(np.prod(model.params['q'].pdf(np.asarray(x, dtype=float))))


def oracle_survival(model, t):
    return math.exp(-model.params['lambda'] * t)


def oracle_density(model, t):
    lam = model.params['lambda']
    return lam * math.exp(-lam * t)


def oracle_criterion(model, xi, tau):
    """kappa_x(xi) = nu(xi) exp(-lambda tau)"""
    return oracle_invariant_density(model, xi) * oracle_survival(model, tau)


def oracle_joint(model, xi, tau):
    """F(xi, tau) = nu(xi) lambda exp(-lambda tau)"""
    return oracle_invariant_density(model, xi) * oracle_density(model, tau)


def build_model(name, params=None):
    """Model by configuration name"""
    params = dict(params or {})
    if name == 'tcp':
        return build_tcp()
    if name == 'bacteria':
        return build_bacteria(params.get('rate', 1.0))
    if name == 'crack':
        try:
            return build_crack(CrackParameters(**params))
        except TypeError as e:
            raise ConfigError(f"Invalid crack parameter: {e}") from e
    if name == 'oracle':
        q = params.get('q')
        q_spec = stats.beta(*q) if q else None
        return build_oracle(q_spec, params.get('lambda', 1.0), params.get('dim', 1))
    raise ConfigError(f"Unknown model '{name}'", {'supported': sorted(config.SUPPORTED_MODELS)})


def default_start(model):
    """A post-jump location inside E for starting a chain"""
    if model.name == 'tcp':
        return np.array([0.5, 0.5])
    if model.name == 'bacteria':
        return np.array([0.0, 0.0, 0.0])
    if model.name == 'crack':
        return crack_initial_state(crack_parameters(model))
    return np.full(model.dim, 0.5)
