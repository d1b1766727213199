"""report serialization: numpy -> json, deterministic dumps, spec hashing, csv tables"""
from __future__ import annotations
import hashlib
import json
import math
from typing import Any

import numpy as np
import pandas as pd


def to_jsonable(obj: Any) -> Any:
    """
    numpy scalars/arrays -> python, complex -> [re, im],
    nan/inf -> None, objects with to_dict -> dict
    """
    if obj is None or isinstance(obj, (str, bool)):
        return obj
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, int):
        return obj
    if isinstance(obj, complex):
        return [to_jsonable(obj.real), to_jsonable(obj.imag)]
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return obj
    if hasattr(obj, 'to_dict'):
        return to_jsonable(obj.to_dict())
    raise TypeError(f'cannot serialize {type(obj)}')


FLOAT_FORMAT = '%.17g'


def float_to_str(value: float) -> str:
    """17 significant digits; integral values keep a trailing .0"""
    if not math.isfinite(value):
        raise ValueError(f'non-finite float {value!r} in a report')
    text = FLOAT_FORMAT % value
    if not any(char in text for char in '.en'):
        text += '.0'
    return text


class ReportEncoder(json.JSONEncoder):
    """json.JSONEncoder with FLOAT_FORMAT floats"""
    def iterencode(self, o: Any, _one_shot: bool=False):
        markers = {} if self.check_circular else None
        encoder = (json.encoder.encode_basestring_ascii if self.ensure_ascii
                   else json.encoder.encode_basestring)
        iterencode = json.encoder._make_iterencode(
            markers, self.default, encoder, self.indent, float_to_str,
            self.key_separator, self.item_separator, self.sort_keys,
            self.skipkeys, _one_shot)
        return iterencode(o, 0)


def dumps_report(report: Any) -> str:
    """sorted keys, indent=2, floats with 17 significant digits"""
    return json.dumps(to_jsonable(report), cls=ReportEncoder, sort_keys=True, indent=2) + '\n'


def spec_hash(spec: Any) -> str:
    """sha256 of the canonical (sorted, compact) json of a spec"""
    text = json.dumps(to_jsonable(spec), sort_keys=True, separators=(',', ':'), allow_nan=False)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def table_to_csv(table: pd.DataFrame) -> str:
    return table.to_csv(index=False, float_format='%.17g', lineterminator='\n')
