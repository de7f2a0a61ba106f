"""
Tube-based cross-validation of the bandwidth exponents

The integrated square error of G-hat (resp. F-hat) along C_x splits into a
term computable from the main chain and a cross term estimated from an
independent validation chain: validation records whose forward flow crosses
the tube disc contribute G-hat (resp. F-hat) at their crossing time.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import EstimationError, InputError
from .estimators import BatchEstimator, spatial_weights, time_weights
from .flow_geometry import disc_measure, line_integral, tube_hit
from .kernels import BandwidthSchedule

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TubeHits:
    """Validation records inside the tube with their crossing times"""

    points: np.ndarray
    theta: np.ndarray
    s: np.ndarray
    n_val: int
    rho: float

    def __len__(self):
        return int(self.theta.shape[0])

    @property
    def dim(self):
        return int(self.points.shape[1])


@dataclass
class CvReport:
    kind: str
    alpha_grid: List[float]
    beta_grid: Optional[List[float]]
    errors: np.ndarray
    first_terms: np.ndarray
    second_terms: np.ndarray
    chosen: tuple
    rho: float
    rho2: Optional[float]
    n_main: int
    n_val: int
    hit_count: int
    window_hit_count: Optional[int] = None
    flags: List[str] = field(default_factory=list)

    def to_dict(self):
        return {
            'kind': self.kind,
            'alpha_grid': list(self.alpha_grid),
            'beta_grid': list(self.beta_grid) if self.beta_grid is not None else None,
            'errors': np.asarray(self.errors).tolist(),
            'first_terms': np.asarray(self.first_terms).tolist(),
            'second_terms': np.asarray(self.second_terms).tolist(),
            'chosen': list(self.chosen),
            'rho': self.rho,
            'rho2': self.rho2,
            'n_main': self.n_main,
            'n_val': self.n_val,
            'hit_count': self.hit_count,
            'window_hit_count': self.window_hit_count,
            'flags': list(self.flags),
        }

    def to_rows(self):
        """Rows alpha[, beta], error, first_term, second_term"""
        if self.kind == 'G':
            return [[a, float(self.errors[i]), float(self.first_terms[i]), float(self.second_terms[i])]
                    for i, a in enumerate(self.alpha_grid)]
        return [[a, b, float(self.errors[i, j]), float(self.first_terms[i, j]), float(self.second_terms[i, j])]
                for i, a in enumerate(self.alpha_grid) for j, b in enumerate(self.beta_grid)]


def locate_tube_hits(model, tube, validation, max_time, jobs=1):
    """
    Crossing times of the validation records through the tube disc

    Args:
        validation: Observations of the validation chain
        max_time: scan limit for each forward flow
    """
    def hit(k):
        return tube_hit(model, tube, validation.z[k], max_time)

    n_val = len(validation)
    if jobs > 1 and n_val:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            thetas = list(pool.map(hit, range(n_val)))
    else:
        thetas = [hit(k) for k in range(n_val)]

    inside = [k for k, th in enumerate(thetas) if th is not None]
    hits = TubeHits(
        points=validation.z[inside].reshape(len(inside), validation.dim),
        theta=np.array([thetas[k] for k in inside], dtype=float),
        s=validation.s[inside].astype(float),
        n_val=n_val,
        rho=tube.radius,
    )
    if not len(hits):
        logger.warning(f"No validation record among {n_val} lands in the tube of radius {tube.radius}")
    else:
        logger.info(f"Tube hits: {len(hits)} of {n_val} validation records (rho={tube.radius})")
    return hits


def normalizer_G(d, rho, n_val):
    """2 Gamma((d-1)/2 + 1) / (n_val pi^((d-1)/2) rho^(d-1))"""
    if n_val == 0:
        return 0.0
    return 2.0 / (n_val * disc_measure(d, rho))


def normalizer_F(d, rho1, rho2, n_val):
    """normalizer_G with the extra time-window width rho2 in the denominator"""
    if n_val == 0:
        return 0.0
    return 2.0 / (n_val * rho2 * disc_measure(d, rho1))


def _terms_G(G_curve, G_hits, hits, curve):
    first = line_integral(curve, G_curve ** 2)
    indicator = hits.s > hits.theta
    second = normalizer_G(curve.dim, hits.rho, hits.n_val) * float(np.sum(G_hits * indicator))
    return first, second


def _terms_F(F_curve, F_hits, hits, curve, rho2):
    first = line_integral(curve, F_curve ** 2)
    window = np.abs(hits.s - hits.theta) < 0.5 * rho2
    second = normalizer_F(curve.dim, hits.rho, rho2, hits.n_val) * float(np.sum(F_hits * window))
    return first, second


def cv_error_G(estimator, curve, hits):
    """
    Cross-validated error of G-hat along the curve

    Returns:
        tuple: (error, first_term, second_term)
    """
    _, G_curve, _ = estimator.eval_raw_many(curve.nodes, curve.taus)
    if len(hits):
        _, G_hits, _ = estimator.eval_raw_many(hits.points, hits.theta)
    else:
        G_hits = np.zeros(0)
    first, second = _terms_G(G_curve, G_hits, hits, curve)
    return first - second, first, second


def cv_error_F(estimator, curve, hits, rho2):
    """Cross-validated error of F-hat along the curve, time window of width rho2"""
    if rho2 <= 0:
        raise InputError(f"Time window rho2 must be positive, got {rho2}")
    F_curve, _, _ = estimator.eval_raw_many(curve.nodes, curve.taus)
    if len(hits):
        F_hits, _, _ = estimator.eval_raw_many(hits.points, hits.theta)
    else:
        F_hits = np.zeros(0)
    first, second = _terms_F(F_curve, F_hits, hits, curve, rho2)
    return first - second, first, second


def direct_error_G(estimator, curve, kappa):
    """Error integral of G-hat against a known criterion kappa(node, tau), up to its constant"""
    _, G_curve, _ = estimator.eval_raw_many(curve.nodes, curve.taus)
    exact = np.array([kappa(node, t) for node, t in zip(curve.nodes, curve.taus)])
    return line_integral(curve, G_curve ** 2) - 2.0 * line_integral(curve, G_curve * exact)


def direct_error_F(estimator, curve, joint):
    """Error integral of F-hat against a known joint density joint(node, tau), up to its constant"""
    F_curve, _, _ = estimator.eval_raw_many(curve.nodes, curve.taus)
    exact = np.array([joint(node, t) for node, t in zip(curve.nodes, curve.taus)])
    return line_integral(curve, F_curve ** 2) - 2.0 * line_integral(curve, F_curve * exact)


def _sorted_grid(grid, name):
    values = sorted({float(v) for v in grid})
    if not values:
        raise InputError(f"Empty {name} grid")
    return values


def _check_finite(errors, kind):
    if not np.all(np.isfinite(errors)):
        raise EstimationError(f"Non-finite cross-validation error in the {kind} grid")


def choose_alpha_G(main, hits, curve, alpha_grid, v0, w0, spatial_kernel, time_kernel,
                   periodic_axes=None, jobs=1):
    """
    Minimize the cross-validated error of G-hat over the alpha grid

    Ties go to the smaller alpha.
    """
    alphas = _sorted_grid(alpha_grid, 'alpha')

    def evaluate(alpha):
        schedule = BandwidthSchedule(v0, w0, alpha, alpha, curve.dim)
        estimator = BatchEstimator(schedule, spatial_kernel, time_kernel, main, periodic_axes)
        return cv_error_G(estimator, curve, hits)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate, alphas))
    else:
        results = [evaluate(a) for a in alphas]

    errors = np.array([r[0] for r in results])
    _check_finite(errors, 'G')
    best = int(np.argmin(errors))
    flags = [] if len(hits) else ['no_tube_hits']

    logger.info(f"Cross-validation for G: alpha={alphas[best]} over {len(alphas)} values "
                f"({len(hits)} tube hits)")
    return CvReport(
        kind='G',
        alpha_grid=alphas,
        beta_grid=None,
        errors=errors,
        first_terms=np.array([r[1] for r in results]),
        second_terms=np.array([r[2] for r in results]),
        chosen=(alphas[best],),
        rho=hits.rho,
        rho2=None,
        n_main=len(main),
        n_val=hits.n_val,
        hit_count=len(hits),
        flags=flags,
    )


def choose_alpha_beta_F(main, hits, curve, alpha_grid, beta_grid, v0, w0, spatial_kernel, time_kernel,
                        rho2, periodic_axes=None, jobs=1):
    """
    Minimize the cross-validated error of F-hat over the (alpha, beta) grid

    Spatial weights are shared across beta for each alpha. Ties go to the
    smaller alpha, then the smaller beta.
    """
    if rho2 <= 0:
        raise InputError(f"Time window rho2 must be positive, got {rho2}")
    alphas = _sorted_grid(alpha_grid, 'alpha')
    betas = _sorted_grid(beta_grid, 'beta')
    d = curve.dim
    n = len(main)
    if n == 0:
        raise EstimationError("Cross-validation needs a non-empty main chain")

    x_all = np.vstack([curve.nodes, hits.points]) if len(hits) else curve.nodes
    t_all = np.concatenate([curve.taus, hits.theta])
    m = len(curve)
    k = np.arange(1, n + 1, dtype=float)

    def evaluate_row(alpha):
        W = spatial_weights(main.z, x_all, v0 * k ** (-alpha), spatial_kernel, periodic_axes)
        row = []
        for beta in betas:
            F_all = (W * time_weights(main.s, t_all, w0 * k ** (-beta), time_kernel)).sum(axis=0) / n
            first, second = _terms_F(F_all[:m], F_all[m:], hits, curve, rho2)
            row.append((first - second, first, second))
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(evaluate_row, alphas))
    else:
        rows = [evaluate_row(a) for a in alphas]

    errors = np.array([[c[0] for c in row] for row in rows])
    _check_finite(errors, 'F')
    best = int(np.argmin(errors))  # row-major: smaller alpha first, then smaller beta
    i, j = divmod(best, len(betas))
    window_hits = int(np.sum(np.abs(hits.s - hits.theta) < 0.5 * rho2))
    flags = [] if len(hits) else ['no_tube_hits']
    if len(hits) and not window_hits:
        flags.append('no_window_hits')

    logger.info(f"Cross-validation for F: alpha={alphas[i]}, beta={betas[j]} "
                f"({window_hits} window hits, d={d})")
    return CvReport(
        kind='F',
        alpha_grid=alphas,
        beta_grid=betas,
        errors=errors,
        first_terms=np.array([[c[1] for c in row] for row in rows]),
        second_terms=np.array([[c[2] for c in row] for row in rows]),
        chosen=(alphas[i], betas[j]),
        rho=hits.rho,
        rho2=float(rho2),
        n_main=n,
        n_val=hits.n_val,
        hit_count=len(hits),
        window_hit_count=window_hits,
        flags=flags,
    )


def grid_spreads(report):
    """Largest spread of the F error across beta at fixed alpha, and across alpha at fixed beta"""
    if report.kind != 'F':
        raise InputError("Spread is only defined for the two-dimensional F grid")
    i = report.alpha_grid.index(report.chosen[0])
    j = report.beta_grid.index(report.chosen[1])
    over_beta = float(np.ptp(report.errors[i, :]))
    over_alpha = float(np.ptp(report.errors[:, j]))
    return over_beta, over_alpha


