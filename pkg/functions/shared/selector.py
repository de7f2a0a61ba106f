"""
Selection of the jump-rate estimator along the reverse curve

Every node xi of C_x gives an estimator F(xi, tau)/G(xi, tau) of lambda(x).
The node maximizing the estimated criterion kappa(xi) = G(xi, tau_x(xi))
has the smallest asymptotic variance.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import EstimationError, SelectionImpossibleError
from .estimators import QueryPoint, ratio
from .kernels import check_initial_bandwidths

logger = logging.getLogger(__name__)


@dataclass
class SelectionReport:
    x: np.ndarray
    curve: object
    kappa_values: np.ndarray
    xi_star_index: int
    xi_star: np.ndarray
    tau_star: float
    lambda_hat: Optional[float] = None
    plugin_variance: Optional[float] = None
    standard_error: Optional[float] = None
    local_maxima: int = 0
    nu_argmax_index: Optional[int] = None
    feasible: Optional[np.ndarray] = None
    flags: List[str] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_dict(self):
        curve = self.curve
        return {
            'x': [float(v) for v in self.x],
            'xi_star_index': int(self.xi_star_index),
            'xi_star': [float(v) for v in self.xi_star],
            'tau_star': float(self.tau_star),
            'lambda_hat': self.lambda_hat,
            'plugin_variance': self.plugin_variance,
            'standard_error': self.standard_error,
            'local_maxima': self.local_maxima,
            'nu_argmax_index': self.nu_argmax_index,
            'nu_argmax_xi': ([float(v) for v in curve.nodes[self.nu_argmax_index]]
                             if self.nu_argmax_index is not None else None),
            'kappa_values': [float(v) for v in self.kappa_values],
            'curve_taus': [float(v) for v in curve.taus],
            'curve_nodes': [[float(c) for c in node] for node in curve.nodes],
            'feasible': [bool(v) for v in self.feasible] if self.feasible is not None else None,
            'flags': list(self.flags),
            'params': dict(self.params),
        }


def estimated_criterion(gstate, curve, j):
    """kappa-hat at node j: the raw G estimate at (xi_j, tau_j)"""
    return float(gstate.eval_raw(QueryPoint.of(curve.nodes[j], curve.taus[j])).G)


def criterion_values(gstate, curve):
    """kappa-hat at every node"""
    _, G, _ = gstate.eval_raw_many(curve.nodes, curve.taus)
    return np.asarray(G, dtype=float)


def count_local_maxima(values):
    """Strict local maxima of a sequence, endpoints compared with their single neighbour"""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return int(v.size)
    padded = np.concatenate([[-np.inf], v, [-np.inf]])
    return int(np.sum((padded[1:-1] > padded[:-2]) & (padded[1:-1] > padded[2:])))


def node_feasibility(model, curve, v0, w0, delta):
    """Initial-bandwidth condition at every (xi_j, tau_j)"""
    return np.array([check_initial_bandwidths(model, xi, t, v0, w0, delta)
                     for xi, t in zip(curve.nodes, curve.taus)], dtype=bool)


def _argmax_smallest_tau(values, taus, eligible):
    masked = np.where(eligible, values, -np.inf)
    best = np.max(masked)
    ties = np.flatnonzero(masked == best)
    return int(ties[np.argmin(taus[ties])])


def select_xi_star(gstate, curve, feasible=None, strict=False):
    """
    Maximize kappa-hat over the curve nodes

    Ties go to the node with the smallest tau. Infeasible nodes are flagged,
    and excluded only in strict mode.

    Returns:
        SelectionReport without the rate estimate
    """
    kappa = criterion_values(gstate, curve)
    eligible = np.ones(len(curve), dtype=bool)
    flags = []
    if feasible is not None:
        feasible = np.asarray(feasible, dtype=bool)
        if strict:
            eligible &= feasible
            if not eligible.any():
                raise SelectionImpossibleError("No curve node satisfies the initial-bandwidth condition")

    if not np.any(kappa[eligible] > 0):
        raise SelectionImpossibleError(
            f"Estimated criterion is zero on all {int(eligible.sum())} eligible nodes, no data near the curve",
            {'x': [float(v) for v in curve.base], 'nodes': len(curve)}
        )

    j = _argmax_smallest_tau(kappa, curve.taus, eligible)
    if feasible is not None and not feasible[j]:
        flags.append('selected_node_infeasible')
    maxima = count_local_maxima(kappa)
    if maxima > 1:
        flags.append('criterion_oscillates')

    logger.info(f"Selected node {j} (tau={curve.taus[j]:.4g}) out of {len(curve)}, "
                f"kappa={kappa[j]:.4g}, {maxima} local maxima")
    return SelectionReport(
        x=np.asarray(curve.base, dtype=float),
        curve=curve,
        kappa_values=kappa,
        xi_star_index=j,
        xi_star=curve.nodes[j].copy(),
        tau_star=float(curve.taus[j]),
        local_maxima=maxima,
        feasible=feasible,
        flags=flags,
    )


def select_by_invariant_measure(gstate, curve):
    """Index of the node maximizing the invariant-density estimate, for comparison"""
    _, _, nu = gstate.eval_raw_many(curve.nodes, np.zeros(len(curve)))
    return _argmax_smallest_tau(np.asarray(nu), curve.taus, np.ones(len(curve), dtype=bool))


def estimate_jump_rate(fstate, gstate, report):
    """F-hat / G-hat at the selected node; an infinite result is flagged on the report"""
    q = QueryPoint.of(report.xi_star, report.tau_star)
    F = fstate.eval_raw(q).F
    G = gstate.eval_raw(q).G
    value = ratio(F, G, 'jump-rate estimate')
    if math.isinf(value) and 'infinite_estimate' not in report.flags:
        report.flags.append('infinite_estimate')
    report.lambda_hat = value
    return value


def estimator_class(fstate, gstate, curve):
    """Rate estimate F/G at every node of the curve"""
    F, _, _ = fstate.eval_raw_many(curve.nodes, curve.taus)
    _, G, _ = gstate.eval_raw_many(curve.nodes, curve.taus)
    return np.array([ratio(f, g, 'rate estimate') for f, g in zip(F, G)])


def _l2sq(kernel):
    return float(kernel) if isinstance(kernel, (int, float)) else kernel.l2sq


def plugin_variance(alpha, beta, d, kernels, lambda_hat, kappa_hat):
    """
    Asymptotic variance tau_1^2 tau_d^2 lambda / ((1 + alpha d + beta) kappa)

    Args:
        kernels: (spatial, time) kernels, or their squared L2 norms
    """
    if not kappa_hat > 0:
        raise EstimationError(f"Plug-in variance needs a positive criterion, got {kappa_hat}")
    spatial, temporal = kernels
    return _l2sq(temporal) * _l2sq(spatial) * lambda_hat / ((1.0 + alpha * d + beta) * kappa_hat)


def plugin_variance_f(alpha, beta, d, kernels, f_hat, nu_hat):
    """Asymptotic variance of the conditional density estimator"""
    if not nu_hat > 0:
        raise EstimationError(f"Plug-in variance needs a positive density, got {nu_hat}")
    spatial, temporal = kernels
    return _l2sq(temporal) * _l2sq(spatial) * f_hat / ((1.0 + alpha * d + beta) * nu_hat)


def plugin_variance_G(alpha, d, spatial_kernel, G_hat, nu_hat):
    """Asymptotic variance of the conditional survival estimator"""
    if not nu_hat > 0:
        raise EstimationError(f"Plug-in variance needs a positive density, got {nu_hat}")
    return _l2sq(spatial_kernel) * G_hat / ((1.0 + alpha * d) * nu_hat)


def clt_scale(alpha, beta, d, n):
    """n^-(1 - alpha d - beta)/2"""
    return float(n) ** (-(1.0 - alpha * d - beta) / 2.0)


def finalize_report(report, fstate, gstate, alpha_f, beta_f, n):
    """Attach the rate estimate, plug-in variance and heuristic standard error"""
    lam = estimate_jump_rate(fstate, gstate, report)
    kappa = float(report.kappa_values[report.xi_star_index])
    d = gstate.d
    if math.isfinite(lam) and kappa > 0:
        report.plugin_variance = plugin_variance(
            alpha_f, beta_f, d, (fstate.spatial_kernel, fstate.time_kernel), lam, kappa)
        report.standard_error = math.sqrt(report.plugin_variance) * clt_scale(alpha_f, beta_f, d, n)
    report.params.update({'alpha_f': alpha_f, 'beta_f': beta_f, 'n': int(n)})
    return report
