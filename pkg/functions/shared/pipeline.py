"""
Estimation pipeline

One replicate runs, for every target state x:
  1. main and validation chains (independent Philox streams)
  2. reverse curve C_x and the two tubes
  3. cross-validation of alpha for G-hat
  4. selection of xi* along the curve
  5. cross-validation of (alpha, beta) for F-hat
  6. the rate estimate F-hat / G-hat at (xi*, tau*) with its plug-in variance
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import stats

from . import config, rng
from .artifacts import read_chain, save_report, write_chain, write_curve_csv, write_rows_csv
from .bandwidth_cv import choose_alpha_beta_F, choose_alpha_G, locate_tube_hits
from .crack_data import histories_to_observations, ingest_crack_histories
from .errors import ConfigError, EstimationError, InputError, SingularityError
from .estimators import BatchEstimator
from .flow_geometry import build_tube, reverse_curve
from .kernels import BandwidthSchedule, admissible, build_kernel, survival_clt_band, validate_kernel
from .models import (
    aggregate_bacteria_lambda,
    bacteria_angles,
    build_model,
    crack_curve,
    crack_observations,
    crack_parameters,
    cycles_to_length,
    default_start,
    length_after_cycles,
    oracle_invariant_density,
    oracle_survival,
    simulate_crack_path,
)
from .pdmp import Observations, simulate_chain
from .selector import (
    estimator_class,
    finalize_report,
    node_feasibility,
    select_by_invariant_measure,
    select_xi_star,
)

logger = logging.getLogger(__name__)

BACTERIA_POSITIONS = [(0.0, 0.0), (-0.5, 0.0), (-0.5, 0.5), (-0.5, -0.5), (0.0, 0.5),
                      (0.0, -0.5), (0.5, 0.0), (0.5, 0.5), (0.5, -0.5)]
CRACK_TARGETS = [25.0, 30.0, 35.0, 40.0, 45.0]
CRACK_M_NODES = 41
CRACK_PLOT_PATHS = 5
NU_GRID_PER_AXIS = 25


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated run configuration bound to its model and kernels"""

    run: object
    model: object
    est_dim: int
    spatial_kernel: object
    time_kernel: object
    periodic_axes: dict
    delta: float

    @property
    def name(self):
        return self.model.name


@dataclass(eq=False)
class ChainData:
    main: Observations
    validation: Observations
    main_chain: object = None
    validation_chain: object = None
    seeds: dict = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class Geometry:
    curve: object
    tube_g: object = None
    tube_f: object = None
    max_time: float = 0.0


@dataclass(eq=False)
class TargetEstimate:
    label: str
    x: np.ndarray
    geometry: Geometry
    selection: object
    alpha_g: float
    alpha_f: float
    beta_f: float
    cv_g: object = None
    cv_f: object = None
    per_index: Optional[np.ndarray] = None
    gstate: object = None

    @property
    def lambda_hat(self):
        return self.selection.lambda_hat

    def to_dict(self):
        return {
            'target': self.label,
            'x': [float(v) for v in self.x],
            'alpha_g': self.alpha_g,
            'alpha_f': self.alpha_f,
            'beta_f': self.beta_f,
            'selection': self.selection.to_dict(),
            'cv_g': self.cv_g.to_dict() if self.cv_g is not None else None,
            'cv_f': self.cv_f.to_dict() if self.cv_f is not None else None,
            'per_index_lambda': [float(v) for v in self.per_index] if self.per_index is not None else None,
        }


def _empty_observations(d):
    return Observations(np.empty((0, d)), np.empty(0))


def build_scenario(run):
    """
    Bind a RunConfig to its model and kernels

    Raises:
        ConfigError: combinations the model cannot support
    """
    model = build_model(run.model_name, run.model_params)
    crack = model.name == 'crack'
    est_dim = 1 if crack else model.dim

    if crack and run.cross_validate:
        raise ConfigError("Cross-validation needs a flow tube; set alpha_g, alpha_f and beta_f "
                          "with cross_validate false for the crack model")
    if run.sampler == 'thinning' and model.rate_bound_along_flow is None:
        raise ConfigError(f"Model '{model.name}' has no rate bound, use the inversion sampler")
    if run.target_x is not None and model.name not in ('crack', 'bacteria') and len(run.target_x) != model.dim:
        raise ConfigError(f"target_x has {len(run.target_x)} coordinates, model '{model.name}' "
                          f"has dimension {model.dim}")

    spatial = build_kernel(run.kernel, est_dim)
    temporal = build_kernel(run.time_kernel, 1)
    for kernel, is_spatial in ((spatial, True), (temporal, False)):
        is_valid, errors = validate_kernel(kernel, spatial=is_spatial)
        if not is_valid:
            raise ConfigError(f"Kernel '{kernel.name}' rejected", {'errors': errors})

    delta = float(run.delta) if run.delta is not None else spatial.support_radius
    logger.info(f"Scenario: model={model.name}, d={est_dim}, n={run.n}, n_val={run.n_val}, "
                f"kernel={spatial.name}/{temporal.name}")
    return Scenario(run, model, est_dim, spatial, temporal,
                    {} if crack else dict(model.periodic_axes), delta)


def _estimation_pairs(scenario, chain):
    obs = chain.observations()
    return crack_observations(obs) if scenario.name == 'crack' else obs


def _load_external(scenario):
    run = scenario.run
    if scenario.name == 'crack':
        params = crack_parameters(scenario.model)
        histories = ingest_crack_histories(run.chain_path, params.a0)
        if not histories:
            raise InputError(f"No crack histories in {run.chain_path}")
        return histories_to_observations(histories, params), None
    chain = read_chain(run.chain_path)
    if chain.dim != scenario.model.dim:
        raise InputError(f"Chain {run.chain_path} has dimension {chain.dim}, "
                         f"model '{scenario.name}' expects {scenario.model.dim}")
    return _estimation_pairs(scenario, chain), chain


def chain_data(scenario, replicate=0, need_validation=None):
    """
    Main and validation pairs for one replicate

    A chain file from the config replaces the simulated main chain; its
    validation part then comes from the split and is flagged approximate.
    """
    run = scenario.run
    model = scenario.model
    need_validation = run.cross_validate if need_validation is None else need_validation
    flags = []

    if run.chain_path:
        main, chain = _load_external(scenario)
        if need_validation:
            main, validation = main.split_validation()
            flags.append('approximate_split_validation')
            logger.warning("Validation records split from the input chain, cross-validation is approximate")
        else:
            validation = _empty_observations(scenario.est_dim)
        return ChainData(main, validation, main_chain=chain, flags=flags)

    x0 = np.asarray(run.x0, dtype=float) if run.x0 is not None else default_start(model)
    seeds = {
        'main': rng.derived_seed(run.seed, replicate, rng.ROLE_MAIN),
        'validation': rng.derived_seed(run.seed, replicate, rng.ROLE_VALIDATION),
    }
    main_chain = simulate_chain(model, x0, run.n, rng.stream(run.seed, replicate, rng.ROLE_MAIN),
                                run.sampler, seed=seeds['main'])
    main = _estimation_pairs(scenario, main_chain)

    validation_chain = None
    if run.split_validation and need_validation:
        main, validation = main.split_validation()
        flags.append('approximate_split_validation')
        logger.warning("Validation records split from the main chain, cross-validation is approximate")
    elif run.n_val > 0 and not run.split_validation:
        validation_chain = simulate_chain(model, x0, run.n_val,
                                          rng.stream(run.seed, replicate, rng.ROLE_VALIDATION),
                                          run.sampler, seed=seeds['validation'])
        validation = _estimation_pairs(scenario, validation_chain)
    else:
        validation = _empty_observations(scenario.est_dim)

    return ChainData(main, validation, main_chain, validation_chain, seeds, flags)


def target_states(scenario):
    """(label, state) pairs for the configured targets"""
    run = scenario.run
    if scenario.name == 'crack':
        lengths = run.targets if run.targets else CRACK_TARGETS
        return [(f"a={float(a):g}", np.array([float(a)])) for a in lengths]
    if scenario.name == 'bacteria':
        positions = run.targets if run.targets else BACTERIA_POSITIONS
        return [(f"({p[0]:g},{p[1]:g},{theta:.4f})", np.array([p[0], p[1], theta], dtype=float))
                for p in positions for theta in bacteria_angles(run.angles)]
    if run.targets:
        points = run.targets
    elif run.target_x is not None:
        points = [run.target_x]
    else:
        raise ConfigError("No target state: set target_x or targets")
    return [("(" + ",".join(f"{v:g}" for v in p) + ")", np.asarray(p, dtype=float)) for p in points]


def crack_m_grid(params, step=None):
    if step is None:
        return np.linspace(params.m_low, params.m_high, CRACK_M_NODES)
    count = int(math.floor((params.m_high - params.m_low) / step * (1 + 1e-12) + 1e-9)) + 1
    return params.m_low + step * np.arange(count)


def build_geometry(scenario, x, with_tubes=None):
    """Reverse curve at x and, when cross-validating, the G and F tubes"""
    run = scenario.run
    with_tubes = run.cross_validate if with_tubes is None else with_tubes
    if scenario.name == 'crack':
        if with_tubes:
            raise ConfigError("The crack curve is indexed by m and has no tube for cross-validation")
        params = crack_parameters(scenario.model)
        curve = crack_curve(params, float(x[0]), crack_m_grid(params, run.curve_step))
        return Geometry(curve)

    curve = reverse_curve(scenario.model, x, run.curve_step)
    if not with_tubes:
        return Geometry(curve)
    tube_g = build_tube(scenario.model, x, run.rho, curve.step)
    tube_f = build_tube(scenario.model, x, run.rho1, curve.step)
    return Geometry(curve, tube_g, tube_f, config.TUBE_TIME_FACTOR * curve.horizon)


def _schedule(scenario, alpha, beta):
    run = scenario.run
    return BandwidthSchedule(run.v0, run.w0, alpha, beta, scenario.est_dim)


def _require_validation(data):
    if len(data.validation) == 0:
        raise EstimationError("Cross-validation needs validation records (n_val > 0 or split_validation)")


def cross_validate_G(scenario, data, geometry, jobs=1):
    """CvReport for alpha^G at the geometry's target"""
    run = scenario.run
    _require_validation(data)
    hits = locate_tube_hits(scenario.model, geometry.tube_g, data.validation, geometry.max_time, jobs)
    return choose_alpha_G(data.main, hits, geometry.curve, run.alpha_grid, run.v0, run.w0,
                          scenario.spatial_kernel, scenario.time_kernel, scenario.periodic_axes, jobs)


def cross_validate_F(scenario, data, geometry, jobs=1):
    """CvReport for (alpha^F, beta^F) at the geometry's target"""
    run = scenario.run
    _require_validation(data)
    hits = locate_tube_hits(scenario.model, geometry.tube_f, data.validation, geometry.max_time, jobs)
    return choose_alpha_beta_F(data.main, hits, geometry.curve, run.alpha_grid, run.beta_grid, run.v0, run.w0,
                               scenario.spatial_kernel, scenario.time_kernel, run.rho2,
                               scenario.periodic_axes, jobs)


def select_target(scenario, data, geometry, jobs=1):
    """
    alpha^G (cross-validated or configured) and the selected node

    Returns:
        tuple: (SelectionReport, G estimator, CvReport or None)
    """
    run = scenario.run
    if len(data.main) == 0:
        raise EstimationError("Estimation needs at least one main-chain record")
    cv_g = None
    if run.cross_validate:
        cv_g = cross_validate_G(scenario, data, geometry, jobs)
        alpha_g = cv_g.chosen[0]
    else:
        alpha_g = float(run.alpha_g)

    curve = geometry.curve
    gstate = BatchEstimator(_schedule(scenario, alpha_g, alpha_g), scenario.spatial_kernel,
                            scenario.time_kernel, data.main, scenario.periodic_axes)
    feasible = None
    if scenario.name != 'crack':
        feasible = node_feasibility(scenario.model, curve, run.v0, run.w0, scenario.delta)
    selection = select_xi_star(gstate, curve, feasible, run.strict_feasibility)
    selection.nu_argmax_index = select_by_invariant_measure(gstate, curve)
    selection.params['alpha_g'] = alpha_g
    if not survival_clt_band(alpha_g, scenario.est_dim):
        selection.flags.append('alpha_g_outside_clt_band')
    return selection, gstate, cv_g


def estimate_target(scenario, data, x, label=None, geometry=None, jobs=1):
    """
    Optimal rate estimate at one target state

    Returns:
        TargetEstimate
    """
    run = scenario.run
    x = np.asarray(x, dtype=float)
    label = label or ",".join(f"{v:g}" for v in x)
    geometry = geometry or build_geometry(scenario, x)
    selection, gstate, cv_g = select_target(scenario, data, geometry, jobs)

    cv_f = None
    if run.cross_validate:
        cv_f = cross_validate_F(scenario, data, geometry, jobs)
        alpha_f, beta_f = cv_f.chosen
    else:
        alpha_f, beta_f = float(run.alpha_f), float(run.beta_f)

    fstate = BatchEstimator(_schedule(scenario, alpha_f, beta_f), scenario.spatial_kernel,
                            scenario.time_kernel, data.main, scenario.periodic_axes)
    finalize_report(selection, fstate, gstate, alpha_f, beta_f, len(data.main))
    if not admissible(alpha_f, beta_f, scenario.est_dim):
        selection.flags.append('bandwidth_not_admissible')

    return TargetEstimate(
        label=label,
        x=x,
        geometry=geometry,
        selection=selection,
        alpha_g=selection.params['alpha_g'],
        alpha_f=alpha_f,
        beta_f=beta_f,
        cv_g=cv_g,
        cv_f=cv_f,
        per_index=estimator_class(fstate, gstate, geometry.curve),
        gstate=gstate,
    )


def nu_grid_points(scenario):
    """Evaluation grid for the invariant-density plot, None when there is no natural grid"""
    if scenario.name == 'crack':
        params = crack_parameters(scenario.model)
        return np.linspace(params.m_low, params.m_high, 2 * NU_GRID_PER_AXIS)[:, None]
    if scenario.name == 'bacteria' or scenario.est_dim > 2:
        return None
    axis = (np.arange(NU_GRID_PER_AXIS) + 0.5) / NU_GRID_PER_AXIS
    mesh = np.meshgrid(*([axis] * scenario.est_dim), indexing='ij')
    return np.column_stack([m.ravel() for m in mesh])


def nu_grid(gstate, points):
    """Rows x_1..x_d, nu_hat"""
    _, _, nu = gstate.eval_raw_many(points, np.zeros(len(points)))
    return [[*map(float, p), float(v)] for p, v in zip(points, nu)]


def crack_paths(scenario, data, count=CRACK_PLOT_PATHS):
    """Plot rows path, m, cycle, a for the first switched records of the main data"""
    params = crack_parameters(scenario.model)
    rows = []
    path = 0
    for m, s in zip(data.main.z[:, 0], data.main.s):
        if path >= count:
            break
        C = math.exp(params.logc(m))
        if s >= cycles_to_length(params.a0, params.a_final, m, C, params):
            continue
        try:
            a_switch = length_after_cycles(params.a0, m, C, s, params)
            cycles, lengths = simulate_crack_path(params, m, a_switch)
        except SingularityError as e:
            logger.warning(f"Crack path {path} skipped: {e.message}")
            continue
        rows.extend([path, float(m), float(n), float(a)] for n, a in zip(cycles, lengths))
        path += 1
    return rows


def run_replicate(scenario, replicate, jobs=1):
    """
    Every target of one replicate

    Returns:
        dict with the per-target estimates and replicate metadata
    """
    data = chain_data(scenario, replicate)
    targets = [estimate_target(scenario, data, x, label, jobs=jobs) for label, x in target_states(scenario)]

    result = {
        'replicate': replicate,
        'seeds': data.seeds,
        'n_main': len(data.main),
        'n_val': len(data.validation),
        'flags': list(data.flags),
        'targets': targets,
        'data': data,
    }

    if scenario.name == 'bacteria':
        result['aggregates'] = aggregate_bacteria(targets)
    elif scenario.name == 'crack':
        params = crack_parameters(scenario.model)
        result['crack'] = [{
            'a': float(t.x[0]),
            'm_star': float(t.selection.xi_star[0]),
            'lambda_hat': t.lambda_hat,
            'true_rate': params.switch_rate(float(t.x[0])),
        } for t in targets]
    logger.info(f"Replicate {replicate} done: {len(targets)} targets")
    return result


def aggregate_bacteria(targets):
    """Per-position mean over headings plus the xi* 'flower' around each position"""
    grouped = {}
    for t in targets:
        key = (float(t.x[0]), float(t.x[1]))
        grouped.setdefault(key, []).append(t)
    aggregates = []
    for (x1, x2), group in grouped.items():
        per_angle = {float(t.x[2]): t.lambda_hat for t in group}
        aggregates.append({
            'position': [x1, x2],
            'lambda_hat': aggregate_bacteria_lambda(per_angle),
            'per_angle': [[float(t.x[2]), t.lambda_hat] for t in group],
            'flower': [[float(t.x[2]), float(t.selection.xi_star[0]), float(t.selection.xi_star[1])]
                       for t in group],
        })
    return aggregates


def run_replicates(scenario, jobs=None):
    """All replicates, in parallel up to `jobs`, returned in replicate order"""
    run = scenario.run
    jobs = run.jobs if jobs is None else jobs
    count = run.replicates
    if jobs > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, count)) as pool:
            return list(pool.map(lambda r: run_replicate(scenario, r, 1), range(count)))
    return [run_replicate(scenario, r, jobs) for r in range(count)]


def lambda_summary(values):
    """Median and interquartile range of the finite estimates"""
    finite = np.array([v for v in values if v is not None and math.isfinite(v)], dtype=float)
    if finite.size == 0:
        return {'count': 0, 'median': None, 'q1': None, 'q3': None, 'iqr': None}
    q1, median, q3 = np.percentile(finite, [25, 50, 75])
    return {'count': int(finite.size), 'median': float(median), 'q1': float(q1), 'q3': float(q3),
            'iqr': float(q3 - q1)}


def variance_rate_study(model, x0, x, t, sizes, replicates, alpha, beta, v0, w0, seed,
                        spatial_kernel=None, time_kernel=None, sampler='inversion', jobs=1):
    """
    Monte Carlo variance of F-hat(x, t) across replicates for growing n

    Each replicate simulates max(sizes) records once; smaller n use its prefix.

    Returns:
        dict: sizes, variances, fitted log-log slope and the theoretical -(1 - alpha d - beta)
    """
    sizes = sorted(int(n) for n in sizes)
    if len(sizes) < 2 or replicates < 2:
        raise InputError("Variance study needs at least two sizes and two replicates")
    d = model.dim
    spatial_kernel = spatial_kernel or build_kernel('epanechnikov', d)
    time_kernel = time_kernel or build_kernel('epanechnikov', 1)
    schedule = BandwidthSchedule(v0, w0, alpha, beta, d)
    query_x = np.asarray(x, dtype=float)[None, :]
    query_t = np.array([float(t)])

    def one(r):
        chain = simulate_chain(model, x0, sizes[-1], rng.stream(seed, r, rng.ROLE_AUXILIARY), sampler)
        obs = chain.observations()
        values = []
        for n in sizes:
            estimator = BatchEstimator(schedule, spatial_kernel, time_kernel,
                                       Observations(obs.z[:n], obs.s[:n]), model.periodic_axes)
            F, _, _ = estimator.eval_raw_many(query_x, query_t)
            values.append(float(F[0]))
        return values

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            table = np.array(list(pool.map(one, range(replicates))))
    else:
        table = np.array([one(r) for r in range(replicates)])

    variances = table.var(axis=0, ddof=1)
    if np.any(variances <= 0):
        raise EstimationError("Zero Monte Carlo variance, the query sees no data")
    fit = stats.linregress(np.log(sizes), np.log(variances))
    expected = -(1.0 - alpha * d - beta)
    logger.info(f"Variance study: slope {fit.slope:.3f} (expected {expected:.3f}) over n={sizes}")
    return {
        'sizes': sizes,
        'variances': variances.tolist(),
        'means': table.mean(axis=0).tolist(),
        'slope': float(fit.slope),
        'slope_stderr': float(fit.stderr),
        'expected_slope': expected,
    }


def oracle_error_curve(model, observations, grid, t, schedule, spatial_kernel=None, time_kernel=None):
    """
    Sup-norm errors of nu-hat and G-hat / nu-hat on a grid, against the oracle's exact values

    Args:
        observations: one Observations per sample size, in increasing size

    Returns:
        tuple: (nu_errors, survival_errors) lists aligned with observations
    """
    d = model.dim
    spatial_kernel = spatial_kernel or build_kernel('epanechnikov', d)
    time_kernel = time_kernel or build_kernel('epanechnikov', 1)
    grid = np.asarray(grid, dtype=float).reshape(-1, d)
    times = np.full(len(grid), float(t))
    exact_nu = np.array([oracle_invariant_density(model, x) for x in grid])
    exact_survival = oracle_survival(model, float(t))

    nu_errors, survival_errors = [], []
    for obs in observations:
        estimator = BatchEstimator(schedule, spatial_kernel, time_kernel, obs)
        _, G, nu = estimator.eval_raw_many(grid, times)
        nu_errors.append(float(np.max(np.abs(nu - exact_nu))))
        survival_errors.append(float(np.max(np.abs(G / nu - exact_survival))))
    return nu_errors, survival_errors


def calibrate_oracle_thresholds(model, x0, grid, t, sizes, v0, w0, alpha, beta, seed,
                                runs=3, margin=1.5, jobs=1):
    """
    Error thresholds for the oracle convergence check from independent Monte Carlo runs

    Run r simulates max(sizes) records on the calibration stream (seed, r);
    the threshold is margin times the largest final-size error over the runs.
    write_json the result next to the acceptance data to record it.

    Returns:
        dict: thresholds, per-run error curves and their provenance
    """
    sizes = sorted(int(n) for n in sizes)
    schedule = BandwidthSchedule(v0, w0, alpha, beta, model.dim)

    def one(r):
        chain = simulate_chain(model, x0, sizes[-1], rng.stream(seed, r, rng.ROLE_CALIBRATION))
        obs = chain.observations()
        return oracle_error_curve(model, [Observations(obs.z[:n], obs.s[:n]) for n in sizes], grid, t, schedule)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            curves = list(pool.map(one, range(runs)))
    else:
        curves = [one(r) for r in range(runs)]

    thresholds = {
        'max_density_error': margin * max(c[0][-1] for c in curves),
        'max_survival_error': margin * max(c[1][-1] for c in curves),
    }
    logger.info(f"Oracle thresholds from {runs} runs: density {thresholds['max_density_error']:.4g}, "
                f"survival {thresholds['max_survival_error']:.4g}")
    return {
        **thresholds,
        'runs': [{'density_errors': c[0], 'survival_errors': c[1]} for c in curves],
        'provenance': {
            'method': f"{margin} x max over {runs} independent Monte Carlo runs at n = {sizes[-1]}",
            'seed': int(seed),
            'stream_role': rng.ROLE_CALIBRATION,
            'runs': runs,
            'margin': margin,
            'sizes': sizes,
        },
    }


def replicate_to_dict(result):
    """JSON-ready view of a run_replicate result"""
    out = {k: v for k, v in result.items() if k not in ('targets', 'data')}
    out['targets'] = [t.to_dict() for t in result['targets']]
    return out


def _kappa_rows(r, t):
    curve = t.geometry.curve
    feasible = t.selection.feasible
    return [[r, t.label, j, float(curve.taus[j]), *map(float, curve.nodes[j]), float(t.selection.kappa_values[j]),
             bool(feasible[j]) if feasible is not None else True, j == t.selection.xi_star_index]
            for j in range(len(curve))]


def write_full_run(scenario, results, out_dir):
    """
    Plot-ready CSV files for a full run

    Returns:
        dict: artifact name -> path
    """
    d = scenario.est_dim
    xi_cols = [f'xi_{k + 1}' for k in range(d)]

    def path(name):
        return os.path.join(out_dir, name)

    outputs = {}

    kappa, per_index, lambdas, cv_g, cv_f = [], [], [], [], []
    for result in results:
        r = result['replicate']
        for t in result['targets']:
            kappa.extend(_kappa_rows(r, t))
            per_index.extend([r, t.label, j, float(t.geometry.curve.taus[j]), float(v)]
                             for j, v in enumerate(t.per_index))
            sel = t.selection
            lambdas.append([r, t.label, result['seeds'].get('main'), result['seeds'].get('validation'),
                            sel.lambda_hat, *map(float, sel.xi_star), sel.tau_star, t.alpha_g, t.alpha_f, t.beta_f,
                            sel.standard_error, ';'.join(sel.flags)])
            if t.cv_g is not None:
                cv_g.extend([r, t.label, *row] for row in t.cv_g.to_rows())
            if t.cv_f is not None:
                cv_f.extend([r, t.label, *row] for row in t.cv_f.to_rows())

    outputs['kappa_curve'] = write_rows_csv(
        path('kappa_curve.csv'),
        ['replicate', 'target', 'j', 'tau', *xi_cols, 'kappa', 'feasible', 'selected'], kappa)
    outputs['lambda_per_index'] = write_rows_csv(
        path('lambda_per_index.csv'), ['replicate', 'target', 'j', 'tau', 'lambda_hat'], per_index)
    outputs['lambda_replicates'] = write_rows_csv(
        path('lambda_replicates.csv'),
        ['replicate', 'target', 'seed_main', 'seed_validation', 'lambda_hat', *[f'xi_star_{k + 1}' for k in range(d)],
         'tau_star', 'alpha_g', 'alpha_f', 'beta_f', 'standard_error', 'flags'], lambdas)
    if cv_g:
        outputs['cv_g'] = write_rows_csv(
            path('cv_g.csv'), ['replicate', 'target', 'alpha', 'error', 'first_term', 'second_term'], cv_g)
    if cv_f:
        outputs['cv_f'] = write_rows_csv(
            path('cv_f.csv'), ['replicate', 'target', 'alpha', 'beta', 'error', 'first_term', 'second_term'], cv_f)

    first = results[0]
    if first['targets']:
        outputs['curve'] = write_curve_csv(first['targets'][0].geometry.curve, path('curve.csv'))
        points = nu_grid_points(scenario)
        if points is not None:
            outputs['nu_grid'] = write_rows_csv(
                path('nu_grid.csv'), [*[f'x_{k + 1}' for k in range(d)], 'nu_hat'],
                nu_grid(first['targets'][0].gstate, points))

    data = first['data']
    if data.main_chain is not None:
        outputs['chain'] = write_chain(data.main_chain, path('chain.csv'))[0]
    if data.validation_chain is not None:
        outputs['chain_validation'] = write_chain(data.validation_chain, path('chain_validation.csv'))[0]

    if scenario.name == 'bacteria':
        aggregate, angles, flower = [], [], []
        for result in results:
            r = result['replicate']
            for agg in result['aggregates']:
                x1, x2 = agg['position']
                aggregate.append([r, x1, x2, agg['lambda_hat']])
                angles.extend([r, x1, x2, theta, value] for theta, value in agg['per_angle'])
                flower.extend([r, x1, x2, theta, xi1, xi2] for theta, xi1, xi2 in agg['flower'])
        outputs['bacteria_aggregate'] = write_rows_csv(
            path('bacteria_aggregate.csv'), ['replicate', 'x_1', 'x_2', 'lambda_hat'], aggregate)
        outputs['bacteria_angles'] = write_rows_csv(
            path('bacteria_angles.csv'), ['replicate', 'x_1', 'x_2', 'theta', 'lambda_hat'], angles)
        outputs['bacteria_flower'] = write_rows_csv(
            path('bacteria_flower.csv'), ['replicate', 'x_1', 'x_2', 'theta', 'xi_star_1', 'xi_star_2'], flower)

    if scenario.name == 'crack':
        criterion, rates = [], []
        for result in results:
            r = result['replicate']
            for t in result['targets']:
                curve = t.geometry.curve
                criterion.extend([r, float(t.x[0]), float(curve.coords[j]), float(curve.taus[j]),
                                  float(t.selection.kappa_values[j])] for j in range(len(curve)))
            rates.extend([r, c['a'], c['m_star'], c['lambda_hat'], c['true_rate']] for c in result['crack'])
        outputs['crack_criterion'] = write_rows_csv(
            path('crack_criterion.csv'), ['replicate', 'a', 'm', 'tau', 'kappa'], criterion)
        outputs['crack_lambda'] = write_rows_csv(
            path('crack_lambda.csv'), ['replicate', 'a', 'm_star', 'lambda_hat', 'true_rate'], rates)
        outputs['crack_paths'] = write_rows_csv(
            path('crack_paths.csv'), ['path', 'm', 'cycle', 'a'], crack_paths(scenario, data))

    return outputs


def full_run(run):
    """
    Run every replicate and write the report and plot files

    Returns:
        dict: the saved report
    """
    scenario = build_scenario(run)
    results = run_replicates(scenario)
    out_dir = run.output_dir
    outputs = write_full_run(scenario, results, out_dir)

    flags = sorted({f for r in results for f in r['flags']}
                   | {f for r in results for t in r['targets'] for f in t.selection.flags})
    by_target = {}
    for result in results:
        for t in result['targets']:
            by_target.setdefault(t.label, []).append(t.lambda_hat)

    report = {
        'kind': 'full-run',
        'model': scenario.name,
        'seed': run.seed,
        'config': run.to_dict(),
        'results': [replicate_to_dict(r) for r in results],
        'summary': {label: lambda_summary(values) for label, values in by_target.items()},
        'flags': flags,
        'outputs': {k: os.path.basename(v) for k, v in sorted(outputs.items())},
    }
    save_report(report, os.path.join(out_dir, 'report.json'))
    return report
