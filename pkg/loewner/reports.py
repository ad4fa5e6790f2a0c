from __future__ import annotations

import csv
import json
import math
import os
import tempfile
import dataclasses

from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .enums import Verdict
from .errors import SpecValidationError


__all__: tuple = (
    'Report',
    'encode',
    'decode_complex',
    'decode_vector',
    'decode_matrix',
    'write_json',
    'write_csv',
)


def encode(value: Any) -> Any:
    """Converts a value into a JSON-safe structure.

    Complex numbers become ``[re, im]`` pairs, numpy arrays become nested
    lists, enums become their values and objects with ``to_raw`` are
    serialized through it.
    """

    if value is None or isinstance(value, (bool, str)):
        return value

    if isinstance(value, Enum):
        return value.value

    if hasattr(value, 'to_raw'):
        return value.to_raw()

    if isinstance(value, (complex, np.complexfloating)):
        return [_encode_float(value.real), _encode_float(value.imag)]

    if isinstance(value, (int, np.integer)):
        return int(value)

    if isinstance(value, (float, np.floating)):
        return _encode_float(value)

    if isinstance(value, np.ndarray):
        if value.ndim == 0:
            return encode(value.item())
        return [encode(item) for item in value]

    if isinstance(value, dict):
        return {str(key): encode(item) for key, item in value.items()}

    if isinstance(value, (list, tuple)):
        return [encode(item) for item in value]

    raise TypeError(f'Cannot encode object of type {type(value).__name__!r}.')


def _encode_float(value: float) -> Any:
    value = float(value)
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    if math.isnan(value):
        return 'nan'
    return value


def decode_complex(raw: Any, path: str = '') -> complex:
    """Decodes ``[re, im]`` (or a plain real number) into a complex number."""

    if isinstance(raw, bool):
        raise SpecValidationError(path, 'expected a number or [re, im] pair')

    if isinstance(raw, (int, float)):
        value = complex(raw)
    elif isinstance(raw, (list, tuple)) and len(raw) == 2 and all(
        isinstance(part, (int, float)) and not isinstance(part, bool) for part in raw
    ):
        value = complex(raw[0], raw[1])
    else:
        raise SpecValidationError(path, 'expected a number or [re, im] pair')

    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise SpecValidationError(path, 'entries must be finite')

    return value


def decode_vector(raw: Any, path: str = '') -> np.ndarray:
    if not isinstance(raw, (list, tuple)) or not raw:
        raise SpecValidationError(path, 'expected a non-empty list of complex entries')

    # a bare [re, im] pair is ambiguous with a 2-vector of reals, so vectors are always lists of entries
    return np.array([decode_complex(item, f'{path}[{i}]') for i, item in enumerate(raw)], dtype=complex)


def decode_matrix(raw: Any, path: str = '') -> np.ndarray:
    if not isinstance(raw, (list, tuple)) or not raw:
        raise SpecValidationError(path, 'expected a non-empty list of rows')

    rows = [decode_vector(row, f'{path}[{i}]') for i, row in enumerate(raw)]
    if any(len(row) != len(rows) for row in rows):
        raise SpecValidationError(path, 'matrix must be square')

    return np.array(rows, dtype=complex)


class Report:
    """The base class that all analysis reports inherit from.

    Subclasses are dataclasses; :meth:`to_raw` serializes every field
    through :func:`encode`.
    """

    @property
    def passed(self) -> bool:
        """bool: Whether this report does not carry a failing verdict.

        Marginal verdicts count as passing; reports without a verdict always pass.
        """

        verdict = getattr(self, 'verdict', None)
        if verdict is None:
            return True
        if isinstance(verdict, Verdict):
            return verdict is not Verdict.FAIL
        return bool(verdict)

    def to_raw(self) -> Dict[str, Any]:
        return {
            field.name: encode(getattr(self, field.name))
            for field in dataclasses.fields(self)
            if not field.name.startswith('_')
        }

    def __repr__(self) -> str:
        verdict = getattr(self, 'verdict', None)
        verdict = verdict.value if isinstance(verdict, Enum) else verdict
        return f'<{self.__class__.__name__} verdict={verdict}>'


def _atomic_write(path: str, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    fd, temp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as fp:
            writer(fp)
        os.replace(temp, path)
    except BaseException:
        try:
            os.unlink(temp)
        except OSError:
            pass
        raise


def write_json(path: str, payload: Any) -> None:
    """Writes a JSON document atomically (temporary file + rename)."""

    text = json.dumps(encode(payload), indent=2, sort_keys=True) + '\n'
    _atomic_write(path, lambda fp: fp.write(text))


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    rows: List[Sequence[Any]] = list(rows)

    def writer(fp) -> None:
        out = csv.writer(fp)
        out.writerow(header)
        for row in rows:
            out.writerow([_csv_cell(cell) for cell in row])

    _atomic_write(path, writer)


def _csv_cell(cell: Any) -> Optional[Any]:
    if isinstance(cell, (float, np.floating)):
        return repr(float(cell))
    if isinstance(cell, np.integer):
        return int(cell)
    return cell
