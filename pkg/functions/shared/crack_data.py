"""
Crack-growth history files

Two layouts are recognized by their header:
  history_id,m,a_switch_mm   one switch record per history
  history_id,cycle,a_mm      full growth curves, one row per measurement
"""

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import InputError
from .models import cycles_to_length
from .pdmp import Observations

logger = logging.getLogger(__name__)

SWITCH_COLUMNS = ('history_id', 'm', 'a_switch_mm')
CURVE_COLUMNS = ('history_id', 'cycle', 'a_mm')


@dataclass(frozen=True)
class CrackHistory:
    history_id: str
    m: Optional[float] = None
    a_switch_mm: Optional[float] = None
    cycles: Tuple[float, ...] = ()
    lengths: Tuple[float, ...] = ()
    line: Optional[int] = field(default=None, compare=False)

    @property
    def is_switch_record(self):
        return self.m is not None and self.a_switch_mm is not None


def _detect_layout(header, path):
    columns = tuple(c.strip() for c in header)
    if all(c in columns for c in SWITCH_COLUMNS):
        return 'switch'
    if all(c in columns for c in CURVE_COLUMNS):
        return 'curve'
    raise InputError(
        f"Crack file {path} is missing columns: expected {','.join(SWITCH_COLUMNS)} "
        f"or {','.join(CURVE_COLUMNS)}",
        {'path': path, 'header': list(columns)}
    )


def _number(row, key, path, line_no):
    try:
        value = float(row[key])
    except (TypeError, ValueError):
        raise InputError(f"Crack file {path} line {line_no}: '{key}' is not a number ({row.get(key)!r})",
                         {'path': path, 'line': line_no})
    if not math.isfinite(value):
        raise InputError(f"Crack file {path} line {line_no}: '{key}' is not finite", {'path': path, 'line': line_no})
    return value


def _below_a0_message(path, line_no, a_switch, a0):
    return f"Crack file {path} line {line_no}: switch length {a_switch} is not beyond the initial length {a0}"


def ingest_crack_histories(path, a0=None):
    """
    Parse a crack-history CSV file

    Args:
        a0: initial crack length; switch lengths must exceed it when given

    Returns:
        list of CrackHistory, in order of first appearance

    Raises:
        InputError: missing file or columns, malformed rows, non-monotone histories
    """
    if not os.path.exists(path):
        raise InputError(f"Crack file not found: {path}", {'path': path})

    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            logger.warning(f"Crack file {path} is empty")
            return []
        layout = _detect_layout(reader.fieldnames, path)
        rows = [(line_no, row) for line_no, row in enumerate(reader, start=2)]

    if layout == 'switch':
        histories, seen = [], set()
        for line_no, row in rows:
            history_id = (row.get('history_id') or '').strip()
            if not history_id:
                raise InputError(f"Crack file {path} line {line_no}: empty history_id", {'line': line_no})
            if history_id in seen:
                raise InputError(f"Crack file {path} line {line_no}: duplicate history '{history_id}'",
                                 {'line': line_no})
            seen.add(history_id)
            m = _number(row, 'm', path, line_no)
            a_switch = _number(row, 'a_switch_mm', path, line_no)
            if a_switch <= 0:
                raise InputError(f"Crack file {path} line {line_no}: switch length must be positive",
                                 {'line': line_no})
            if a0 is not None and a_switch <= a0:
                raise InputError(_below_a0_message(path, line_no, a_switch, a0), {'line': line_no})
            histories.append(CrackHistory(history_id, m=m, a_switch_mm=a_switch, line=line_no))
    else:
        grouped = {}
        for line_no, row in rows:
            history_id = (row.get('history_id') or '').strip()
            if not history_id:
                raise InputError(f"Crack file {path} line {line_no}: empty history_id", {'line': line_no})
            cycle = _number(row, 'cycle', path, line_no)
            length = _number(row, 'a_mm', path, line_no)
            points = grouped.setdefault(history_id, [])
            if points:
                last_cycle, last_length = points[-1]
                if length <= last_length or cycle < last_cycle:
                    raise InputError(
                        f"Crack file {path} line {line_no}: history '{history_id}' is not increasing "
                        f"(a={length} after {last_length})",
                        {'line': line_no, 'history_id': history_id}
                    )
            points.append((cycle, length))
        histories = [CrackHistory(h, cycles=tuple(c for c, _ in pts), lengths=tuple(a for _, a in pts))
                     for h, pts in grouped.items()]

    if not histories:
        logger.warning(f"Crack file {path} has no records")
    else:
        logger.info(f"Crack histories loaded: {len(histories)} ({layout} layout) from {path}")
    return histories


def histories_to_observations(histories, params):
    """
    Estimation pairs (m, switch cycles) from switch records

    The switch time is the Paris cycle count from a0 to the switch length
    under the mean log C relation.
    """
    usable = [h for h in histories if h.is_switch_record]
    if len(usable) != len(histories):
        raise InputError("Only switch records (history_id,m,a_switch_mm) can be estimated from")
    for h in usable:
        if h.a_switch_mm <= params.a0:
            raise InputError(f"Crack history '{h.history_id}' (line {h.line}): switch length {h.a_switch_mm} "
                             f"is not beyond the initial length {params.a0}",
                             {'line': h.line, 'history_id': h.history_id})
    z = np.array([[h.m] for h in usable], dtype=float).reshape(len(usable), 1)
    s = np.array([cycles_to_length(params.a0, h.a_switch_mm, h.m, math.exp(params.logc(h.m)), params)
                  for h in usable], dtype=float)
    return Observations(z, s)
