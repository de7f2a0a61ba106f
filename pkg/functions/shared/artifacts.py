"""
Artifact storage: chain/curve/plot CSV files and JSON reports
Floats are written with repr() so every value round-trips exactly
"""

import csv
import json
import logging
import math
import os
import shutil
import time
from datetime import datetime, timezone

import numpy as np
from dateutil import parser as date_parser

from . import config
from .errors import InputError
from .pdmp import EmbeddedChain

logger = logging.getLogger(__name__)

REPORT_REQUIRED_FIELDS = ('kind', 'model', 'results')


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return '1' if value else '0'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ''
    return str(value)


def to_jsonable(obj):
    """Convert numpy containers and scalars to plain Python values"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_rows_csv(path, header, rows):
    """Write a CSV file with a header row"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.debug(f"CSV written: {path} ({len(rows)} rows)")
    return path


def write_json(path, payload):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def chain_header(dim):
    return ['idx'] + [f'z_{k + 1}' for k in range(dim)] + ['s', 'boundary']


def write_chain(chain, csv_path, dim=None):
    """
    Write a chain CSV and its metadata JSON next to it

    Returns:
        tuple: (csv_path, metadata_path)
    """
    dim = chain.dim if dim is None else dim
    rows = [[k, *chain.z[k], chain.s[k], bool(chain.boundary[k])] for k in range(len(chain))]
    write_rows_csv(csv_path, chain_header(dim), rows)
    meta_path = os.path.splitext(csv_path)[0] + '.json'
    write_json(meta_path, {
        'model': chain.model_name,
        'seed': chain.seed,
        'n': len(chain),
        'dim': dim,
        'x0': chain.x0,
        'boundary_jumps': int(np.sum(chain.boundary)),
    })
    return csv_path, meta_path


def read_chain(csv_path):
    """
    Read a chain CSV; the metadata JSON next to it supplies x0 and the seed

    Raises:
        InputError: missing file or malformed rows
    """
    if not os.path.exists(csv_path):
        raise InputError(f"Chain file not found: {csv_path}", {'path': csv_path})
    with open(csv_path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != 'idx' or header[-2:] != ['s', 'boundary']:
            raise InputError(f"Chain file {csv_path} has an invalid header", {'header': header})
        dim = len(header) - 3
        z, s, boundary = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 3:
                raise InputError(f"Chain file {csv_path} line {line_no}: expected {dim + 3} columns",
                                 {'line': line_no})
            try:
                z.append([float(v) for v in row[1:1 + dim]])
                s.append(float(row[-2]))
                boundary.append(row[-1] == '1')
            except ValueError as e:
                raise InputError(f"Chain file {csv_path} line {line_no}: {e}", {'line': line_no}) from e

    meta = {}
    meta_path = os.path.splitext(csv_path)[0] + '.json'
    if os.path.exists(meta_path):
        with open(meta_path, 'r', encoding='utf-8') as f:
            meta = json.load(f)
    else:
        logger.warning(f"No metadata next to {csv_path}, the first interarrival will be dropped")
    x0 = meta.get('x0')
    return EmbeddedChain(
        model_name=meta.get('model', 'unknown'),
        x0=np.asarray(x0, dtype=float) if x0 is not None else None,
        z=np.asarray(z, dtype=float).reshape(len(s), dim),
        s=np.asarray(s, dtype=float),
        boundary=np.asarray(boundary, dtype=bool),
        seed=meta.get('seed'),
    )


def write_curve_csv(curve, path):
    header = ['j', 'tau'] + [f'xi_{k + 1}' for k in range(curve.dim)] + ['speed']
    return write_rows_csv(path, header, curve.to_rows())


def _timestamp():
    return time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())


def save_report(report, path):
    """
    Save a JSON report, keeping a timestamped backup of the previous file

    The `generated_at` field is the only non-deterministic entry.
    """
    if os.path.exists(path):
        backup_dir = os.path.join(os.path.dirname(os.path.abspath(path)), config.REPORT_BACKUP_DIR)
        os.makedirs(backup_dir, exist_ok=True)
        stem = os.path.splitext(os.path.basename(path))[0]
        backup = os.path.join(backup_dir, f"{stem}.{int(time.time() * 1000)}.json")
        shutil.copyfile(path, backup)
        logger.info(f"Backup saved: {backup}")

    payload = dict(report)
    payload['generated_at'] = _timestamp()
    write_json(path, payload)
    logger.info(f"Report saved: {path}")
    return path


def load_report(path):
    """
    Load and validate a JSON report

    Raises:
        InputError: missing file, invalid JSON or missing fields
    """
    if not os.path.exists(path):
        raise InputError(f"Report not found: {path}", {'path': path})
    try:
        with open(path, 'r', encoding='utf-8') as f:
            report = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"Report {path} is not valid JSON: {e}", {'path': path}) from e
    if not isinstance(report, dict):
        raise InputError(f"Invalid report format in {path}: expected an object", {'path': path})
    for key in REPORT_REQUIRED_FIELDS:
        if key not in report:
            raise InputError(f"Invalid report format in {path}: missing '{key}' field", {'path': path})
    return report


def report_age_hours(report):
    """Hours since the report was generated, None when unknown"""
    stamp = report.get('generated_at')
    if not stamp:
        return None
    try:
        generated = date_parser.isoparse(stamp)
    except (ValueError, OverflowError):
        return None
    if generated.tzinfo is None:
        generated = generated.replace(tzinfo=timezone.utc)
    delta = datetime.now(timezone.utc) - generated
    return delta.total_seconds() / 3600.0


def strip_volatile(report):
    """Report without fields that change between identical runs"""
    return {k: v for k, v in report.items() if k != 'generated_at'}


def finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None
