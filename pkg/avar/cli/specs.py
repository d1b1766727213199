"""
Loads the command-line inputs: operators, domains and omega specs given as
JSON files, inline JSON or catalog/named entries.
"""
from __future__ import annotations
import json
import os
from typing import Optional, Union

from avar.core.errors import AvarInputError
from avar.core.catalog import catalog_entry
from avar.core.operator import Operator
from avar.core.voxel import VoxelDomain, named_domain, NAMED_DOMAINS, NAMED_GAMMAS, DEFAULT_H


def _stem(value: str) -> str:
    name = os.path.basename(value)
    return name[:-5] if name.endswith('.json') else name


def load_json_arg(value: str) -> Optional[Union[dict, list]]:
    """a JSON file, inline JSON or None when value is a plain name"""
    if os.path.exists(value):
        with open(value, 'r') as json_file:
            try:
                return json.load(json_file)
            except json.JSONDecodeError as error:
                raise AvarInputError(f'{value!r} is not valid JSON: {error}')
    if value.lstrip().startswith(('{', '[')):
        try:
            return json.loads(value)
        except json.JSONDecodeError as error:
            raise AvarInputError(f'invalid inline JSON {value!r}: {error}')
    return None


def load_operator(value: str) -> Operator:
    """
    gradient2d.json loads the file when it exists and the catalog entry
    gradient2d otherwise
    """
    data = load_json_arg(value)
    if data is None:
        return catalog_entry(_stem(value)).operator
    if not isinstance(data, dict):
        raise AvarInputError(f'operator spec {value!r} must be a JSON object')
    if 'operator' in data:
        # a catalog entry dump
        data = data['operator']
    return Operator.from_dict(data)


def load_domain(value: str, h: Optional[float]=None) -> VoxelDomain:
    """
    a domain spec file/JSON or a named domain (interval, unit_square, ...);
    an explicit h overrides the domain spec, DEFAULT_H fills in a missing one
    """
    data = load_json_arg(value)
    if data is None:
        name = _stem(value)
        if name not in NAMED_DOMAINS:
            raise AvarInputError(f'unknown domain {value!r}; give a JSON spec or one of {NAMED_DOMAINS}')
        return named_domain(name, DEFAULT_H if h is None else h)
    if not isinstance(data, dict):
        raise AvarInputError(f'domain spec {value!r} must be a JSON object')
    if h is None and 'h' not in data:
        h = DEFAULT_H
    return VoxelDomain.from_dict(data, h=h)


def load_omega(value: str) -> Union[dict, str]:
    """an omega shape spec (file or inline JSON) or a named piece of the boundary"""
    data = load_json_arg(value)
    if data is None:
        name = _stem(value)
        if name == 'domain':
            return {'shape': 'domain'}
        if name not in NAMED_GAMMAS:
            raise AvarInputError(f'unknown omega {value!r}; give a JSON spec or one of {NAMED_GAMMAS}')
        return name
    if not isinstance(data, dict) or 'shape' not in data:
        raise AvarInputError(f'omega spec {value!r} must be a JSON object with a "shape"')
    return data


def load_subset(value: Optional[str]) -> Optional[dict]:
    """None or 'domain' selects E = Omega"""
    if value is None:
        return None
    data = load_json_arg(value)
    if data is None:
        if _stem(value) == 'domain':
            return None
        raise AvarInputError(f'--subset expects an omega spec (JSON) or "domain"; got {value!r}')
    if not isinstance(data, dict) or 'shape' not in data:
        raise AvarInputError(f'subset spec {value!r} must be a JSON object with a "shape"')
    return data
