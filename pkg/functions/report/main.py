"""
Human-readable summary of saved reports
pdmp-rate report runs/tcp/report.json [more reports ...]
"""

import logging
import math
import os
import sys

# Add parent directory to path for shared modules
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from shared import config
from shared.artifacts import load_report, report_age_hours
from shared.errors import PdmpError, error_response
from shared.pipeline import lambda_summary

logger = logging.getLogger(__name__)

COLUMNS = ('replicate', 'target', 'lambda_hat', 'xi_star', 'alpha_g', 'alpha_f/beta_f', 'std_err', 'flags')


def report(args):
    """One summary block per report, plus a median/IQR row per target when several estimates exist"""
    try:
        reports = [(path, load_report(path)) for path in args.paths]
        text = '\n\n'.join(summary_block(path, rep) for path, rep in reports)

        rows = [row for _, rep in reports for row in summary_rows(rep)]
        spread = spread_lines(rows)
        if spread:
            text += '\n\n' + '\n'.join(spread)

        return {
            'status': 'success',
            'reports': len(reports),
            'text': text,
        }, config.EXIT_OK

    except PdmpError as e:
        logger.error(f"Report failed: {e.message}")
        return e.to_response(), e.exit_code

    except Exception as e:
        logger.exception("Unexpected error while reading reports")
        return error_response('INTERNAL_ERROR', 'Unexpected error occurred', {'error': str(e)}), \
            config.EXIT_INTERNAL_ERROR


def _targets(rep):
    """(replicate, target entry) pairs across report kinds"""
    if rep['kind'] == 'estimate':
        return []
    if rep['kind'] == 'full-run':
        return [(r.get('replicate', 0), t) for r in rep['results'] for t in r.get('targets', [])]
    return [(0, t) for t in rep['results']]


def summary_rows(rep):
    rows = []
    for replicate, t in _targets(rep):
        selection = t.get('selection') or {}
        rows.append({
            'replicate': replicate,
            'target': t.get('target', ''),
            'lambda_hat': selection.get('lambda_hat'),
            'xi_star': selection.get('xi_star'),
            'alpha_g': t.get('alpha_g'),
            'alpha_f': t.get('alpha_f'),
            'beta_f': t.get('beta_f'),
            'std_err': selection.get('standard_error'),
            'flags': selection.get('flags', []),
        })
    return rows


def _num(value, digits=4):
    if value is None:
        return '-'
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return f"{value:.{digits}g}"


def _format_row(row):
    xi = '(' + ', '.join(_num(v) for v in row['xi_star']) + ')' if row['xi_star'] else '-'
    return '  '.join([
        str(row['replicate']),
        row['target'],
        _num(row['lambda_hat']),
        xi,
        _num(row['alpha_g'], 3),
        f"{_num(row['alpha_f'], 3)}/{_num(row['beta_f'], 3)}",
        _num(row['std_err']),
        ','.join(row['flags']) or '-',
    ])


def summary_block(path, rep):
    age = report_age_hours(rep)
    header = f"== {os.path.basename(path)}: {rep['kind']} ({rep['model']}, seed {rep.get('seed', '-')})"
    if age is not None:
        header += f", generated {age:.1f} h ago"
    lines = [header]

    rows = summary_rows(rep)
    if rows:
        lines.append('  '.join(COLUMNS))
        lines.extend(_format_row(row) for row in rows)

    for result in rep['results']:
        if rep['kind'] == 'cv-g':
            lines.append(f"alpha_g = {result['alpha_g']} ({result['cv_g']['hit_count']} tube hits)")
        if rep['kind'] == 'cv-f':
            lines.append(f"alpha_f = {result['alpha_f']}, beta_f = {result['beta_f']} "
                         f"(spread over beta {_num(result['spread_over_beta'])}, "
                         f"over alpha {_num(result['spread_over_alpha'])})")
        if rep['kind'] == 'estimate':
            lines.append(f"x={result['x']} t={result['t']}: F={_num(result['F'])} G={_num(result['G'])} "
                         f"nu={_num(result['nu'])} rate={_num(result['rate_along_flow'])}")
        for agg in result.get('aggregates', []) if isinstance(result, dict) else []:
            lines.append(f"aggregate at {tuple(agg['position'])}: lambda_hat = {_num(agg['lambda_hat'])}")

    if rep.get('flags'):
        lines.append(f"flags: {', '.join(rep['flags'])}")
    return '\n'.join(lines)


def spread_lines(rows):
    """Median and IQR of lambda_hat per target having more than one estimate"""
    by_target = {}
    for row in rows:
        by_target.setdefault(row['target'], []).append(row['lambda_hat'])
    lines = []
    for target, values in by_target.items():
        if len(values) < 2:
            continue
        s = lambda_summary(values)
        lines.append(f"{target}: median {_num(s['median'])}, IQR {_num(s['iqr'])} "
                     f"[{_num(s['q1'])}, {_num(s['q3'])}] over {s['count']} estimates")
    return lines
