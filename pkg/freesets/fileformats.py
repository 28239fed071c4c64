"""Reading and writing config, dataset, description, metrics and program files."""

import json
import logging
from pathlib import Path

from django.conf import settings

import numpy as np
from rest_framework import serializers

from .equivariant import clear_basis_caches
from .exceptions import ConfigError
from .regression import Dataset
from .serializers import (
    PROGRAM_SERIALIZERS,
    ConfigSerializer,
    DatasetRecordSerializer,
    DescriptionSerializer,
    InvariantSDPSerializer,
    RelativeEntropyProgramSerializer,
    SageInstanceSerializer,
)
from .symmetry_reduction import InvariantREProgram, InvariantSDP, SageInstance

logger = logging.getLogger(__name__)

TOLERANCE_KEYS = {
    'solver': 'SOLVER',
    'rank_tolerance': 'RANK_TOLERANCE',
    'residual_tolerance': 'RESIDUAL_TOLERANCE',
    'membership_tolerance': 'MEMBERSHIP_TOLERANCE',
}


def flatten_detail(detail):
    """One line of text from a DRF error detail, keeping the field names."""
    if isinstance(detail, dict):
        return '; '.join(f'{key}: {flatten_detail(value)}' for key, value in detail.items())
    if isinstance(detail, list):
        return ' '.join(flatten_detail(item) for item in detail)
    return str(detail)


def _strip_comment(line):
    return line.split('#', 1)[0].strip()


# Config


def parse_config(text, source='config'):
    """
    Parse ``key = value`` lines into validated settings.

    Blank lines and ``#`` comments are ignored.

    Raises:
        ConfigError: with the line number of the offending key
    """
    values, lines = {}, {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip().lower()
        if not sep or not key:
            raise ConfigError(f'{source} line {number}: expected key = value')
        if key in values:
            raise ConfigError(f'{source} line {number}: {key} already set on line {lines[key]}')
        values[key] = value.strip()
        lines[key] = number

    serializer = ConfigSerializer(data=values)
    if not serializer.is_valid():
        messages = []
        for key, detail in serializer.errors.items():
            where = f'line {lines[key]}' if key in lines else 'config'
            messages.append(f'{source} {where}: {key}: {flatten_detail(detail)}')
        raise ConfigError('\n'.join(messages))
    return dict(serializer.validated_data)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f'cannot read config {path}: {exc}') from exc
    return parse_config(text, source=str(path))


def apply_tolerances(config):
    """
    Copy solver and tolerance overrides from a config into settings.FREESETS.

    Cached bases are dropped whenever something is overridden.
    """
    overrides = {
        setting: config[key] for key, setting in TOLERANCE_KEYS.items() if key in config
    }
    if overrides:
        settings.FREESETS = {**getattr(settings, 'FREESETS', {}), **overrides}
        clear_basis_caches()
        logger.info('tolerance overrides: %s', overrides)
    return overrides


# Datasets


def parse_dataset(text, seq_v=None, source='dataset'):
    """
    One record per line: ``n x_1 ... x_d y``, whitespace or comma separated.

    Args:
        seq_v: when given, every point must have length dim V_n
    """
    levels, points, targets = [], [], []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        fields = line.replace(',', ' ').split()
        if len(fields) < 2:
            raise ConfigError(f'{source} line {number}: expected a level, a point and a target')
        serializer = DatasetRecordSerializer(
            data={'level': fields[0], 'point': fields[1:-1], 'target': fields[-1]}
        )
        if not serializer.is_valid():
            raise ConfigError(f'{source} line {number}: {flatten_detail(serializer.errors)}')
        record = serializer.validated_data
        if seq_v is not None and len(record['point']) != seq_v.dim(record['level']):
            raise ConfigError(
                f'{source} line {number}: a level-{record["level"]} point needs '
                f'{seq_v.dim(record["level"])} coordinates, got {len(record["point"])}'
            )
        levels.append(record['level'])
        points.append(record['point'])
        targets.append(record['target'])
    return Dataset(levels, points, np.array(targets))


def load_dataset(path, seq_v=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f'cannot read dataset {path}: {exc}') from exc
    return parse_dataset(text, seq_v, source=str(path))


def write_dataset(dataset, stream):
    for n, x, y in zip(dataset.levels, dataset.points, dataset.targets):
        stream.write(' '.join([str(n)] + [repr(float(v)) for v in x] + [repr(float(y))]) + '\n')


# JSON documents


def _read_json(path, what):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f'cannot read {what} {path}: {exc}') from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f'{path} line {exc.lineno}: {exc.msg}') from exc


def _validated(serializer_class, payload, source):
    serializer = serializer_class(data=payload)
    try:
        valid = serializer.is_valid()
    except serializers.ValidationError as exc:
        raise ConfigError(f'{source}: {flatten_detail(exc.detail)}') from exc
    if not valid:
        raise ConfigError(f'{source}: {flatten_detail(serializer.errors)}')
    return serializer.save()


def description_to_json(description):
    return json.dumps(DescriptionSerializer(description).data, indent=1)


def description_from_json(text, source='description'):
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f'{source} line {exc.lineno}: {exc.msg}') from exc
    return _validated(DescriptionSerializer, payload, source)


def write_description(description, path):
    Path(path).write_text(description_to_json(description) + '\n')
    logger.info('wrote description %s to %s', description.name or '<unnamed>', path)


def read_description(path):
    return _validated(DescriptionSerializer, _read_json(path, 'description'), str(path))


def write_metrics(result, path):
    Path(path).write_text(json.dumps(result.metrics(), indent=1) + '\n')


def program_to_json(program):
    writers = {
        InvariantSDP: InvariantSDPSerializer,
        InvariantREProgram: RelativeEntropyProgramSerializer,
        SageInstance: SageInstanceSerializer,
    }
    return json.dumps(writers[type(program)](program).data, indent=1)


def read_program(path):
    """An InvariantSDP, InvariantREProgram or SageInstance, chosen by the file's format key."""
    payload = _read_json(path, 'program')
    kind = payload.get('format') if isinstance(payload, dict) else None
    if kind not in PROGRAM_SERIALIZERS:
        raise ConfigError(
            f'{path}: format must be one of {", ".join(sorted(PROGRAM_SERIALIZERS))}'
        )
    return _validated(PROGRAM_SERIALIZERS[kind], payload, str(path))


# Sparse triplets


def write_triplets(matrix, stream, label=''):
    """``rows cols nnz`` followed by ``i j value`` lines."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    if label:
        stream.write(f'# {label}\n')
    stream.write(f'{coo.shape[0]} {coo.shape[1]} {len(order)}\n')
    for k in order:
        stream.write(f'{coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}\n')
