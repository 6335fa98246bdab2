"""
Handles input and output

- Binary field files (header + row-major float64 samples)
- Flat key = value configuration files
- CSV tables and the JSON run manifest
"""

import os
import ast
import sys
import json
import copy
import platform

import numpy as np
import pandas as pd
from pandas import DataFrame
from typing import Optional, Union, Dict, Any

import bzm
from bzm.spectral import Grid, Field, make_grid
from bzm.errors import FormatMismatchError, TruncatedFileError, ConfigParseError

#%% Field files
magic = b'BZMF1'
"""bytes: First bytes of every field file"""

_header = [('magic', 'S5'), ('d', 'i4'), ('N', 'i4'), ('period', 'f8'), ('components', 'i4'), ('endian', 'S1')]


def _header_dtype(endian: str) -> np.dtype:
    return np.dtype([(name, kind if kind.startswith('S') else endian + kind) for name, kind in _header])


def write_field(file_path: str, f: Field):
    """Write a Field in the native byte order

    Header: magic, d, N (int32), period (float64), components (int32),
    then one byte-order tag, < or >. Samples follow row-major, component first.

    Parameters
    ----------
    file_path : str
        Output file
    f : Field
        Field to store
    """
    endian = '<' if sys.byteorder == 'little' else '>'
    header = np.zeros(1, dtype=_header_dtype(endian))
    header['magic'] = magic
    header['endian'] = endian.encode()
    header['d'] = f.grid.d
    header['N'] = f.grid.N
    header['period'] = f.grid.period
    header['components'] = f.n_components
    folder = os.path.dirname(os.path.abspath(file_path))
    if not os.path.exists(folder): os.makedirs(folder)
    with open(file_path, 'wb') as handle:
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(f.samples, dtype=endian + 'f8').tobytes())


def read_field(file_path: str, grid: Optional[Grid] = None) -> Field:
    """Read a Field written by write_field

    Parameters
    ----------
    file_path : str
        Input file
    grid : Optional[Grid], optional
        Target grid, by default the grid described by the header

    Returns
    -------
    Field
        The stored samples, bitwise

    Raises
    ------
    FormatMismatchError
        Wrong magic or byte-order tag, header not matching the grid,
        trailing data
    TruncatedFileError
        Fewer bytes than the header announces
    """
    with open(file_path, 'rb') as handle:
        content = handle.read()
    size = _header_dtype('<').itemsize
    if len(content) < size:
        raise TruncatedFileError('{} ends inside the header ({} of {} bytes)'.format(file_path, len(content), size))
    if content[:len(magic)] != magic:
        raise FormatMismatchError('{} is not a field file: magic {!r}, expected {!r}'.format(
            file_path, content[:len(magic)], magic))
    # byte-order tag is the last header byte
    endian = content[size - 1:size].decode('ascii', errors='replace')
    if endian not in ('<', '>'):
        raise FormatMismatchError('{} has an unknown byte-order tag {!r}'.format(file_path, endian))
    header = np.frombuffer(content[:size], dtype=_header_dtype(endian))[0]
    d, N, period, components = int(header['d']), int(header['N']), float(header['period']), int(header['components'])

    if grid is None:
        grid = make_grid(d, N, period)
    if d != grid.d:
        raise FormatMismatchError('Field file has d = {}, target grid has d = {}'.format(d, grid.d))
    if N != grid.N:
        raise FormatMismatchError('Field file has N = {}, target grid has N = {}'.format(N, grid.N))
    if period != grid.period:
        raise FormatMismatchError('Field file has period = {}, target grid has period = {}'.format(period, grid.period))
    if components < 1:
        raise FormatMismatchError('Field file announces {} components'.format(components))

    count = components * N**d
    body = content[size:]
    if len(body) < 8 * count:
        raise TruncatedFileError('{} holds {} of {} samples'.format(file_path, len(body) // 8, count))
    if len(body) > 8 * count:
        raise FormatMismatchError('{} has {} trailing bytes'.format(file_path, len(body) - 8 * count))
    samples = np.frombuffer(body, dtype=endian + 'f8').astype(np.float64)
    return Field(grid, samples=samples.reshape((components,) + grid.shape))


def field_io(
    file_path: str,
    direction: str,
    f: Optional[Field] = None,
    grid: Optional[Grid] = None,
) -> Optional[Field]:
    """Read or write a field file

    Parameters
    ----------
    file_path : str
        File location
    direction : str
        read or write
    f : Optional[Field], optional
        Field to write, by default None
    grid : Optional[Grid], optional
        Target grid when reading, by default None

    Returns
    -------
    Optional[Field]
        The field read, None after writing
    """
    if direction == 'write':
        if f is None:
            raise ValueError('field_io: must input a Field to write.')
        write_field(file_path, f)
        return None
    if direction == 'read':
        return read_field(file_path, grid)
    raise ValueError('direction must be read or write, got {}'.format(direction))


#%% Configuration
def default_config() -> Dict[str, Any]:
    """Baseline configuration, flat with dotted keys"""
    return {
        'grid.d': 2,
        'grid.N': 32,
        'grid.period': 2 * np.pi,
        'data.rho_profile': 'cos-mode',
        'data.rho_amplitude': 0.05,
        'data.rho_mode': [1, 0],
        'data.rho_file': None,
        'data.u_profile': 'taylor-green',
        'data.u_amplitude': 0.05,
        'data.u_mode': 1,
        'data.u_file': None,
        'data.n_samples': 32,
        'data.k_max': 6,
        'physics.gamma': 1.4,
        'physics.P0': 1.0,
        'physics.R_gas': 1.0,
        'physics.kappa_spec': 'fickian',
        'physics.kappa0': 0.1,
        'physics.kappa_m': 1.0,
        'besov.s': 1.0,
        'besov.p': 2,
        'besov.r': 1,
        'monitor.sigma': 0.5,
        'monitor.p': 2,
        'monitor.s': None,
        'monitor.r': 1,
        'monitor.stride': 4,
        'monitor.thresholds': {},
        'monitor.max_principle_tol': 1e-6,
        'lifespan.L': 0.1,
        'lifespan.ell': 7.0,
        'lifespan.delta': 2.0,
        'lifespan.C_energy': 1.0,
        'lifespan.amplitudes': [0.25, 0.5, 1.0],
        'solver.dt': 0.01,
        'solver.T': 0.5,
        'solver.T_star': 0.1,
        'solver.n_max': 10,
        'solver.picard_dt': 5e-3,
        'solver.picard_tol': 1e-10,
        'solver.pressure_tol': 1e-12,
        'solver.tau': 0.1,
        'probe.inequality': 'prod_para',
        'probe.parameters': {},
        'probe.refine': True,
        'run.seed': 0,
        'run.out': 'bzm_output',
    }


def _parse_value(text: str):
    text = text.strip()
    if text in ('inf', '+inf'):
        return np.inf
    if text == '-inf':
        return -np.inf
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config(text: str, base: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Apply key = value lines to a configuration

    Parameters
    ----------
    text : str
        Lines of key = value, # starts a comment
    base : Optional[Dict[str, Any]], optional
        Configuration to update, by default default_config()

    Returns
    -------
    Dict[str, Any]
        Updated copy

    Raises
    ------
    ConfigParseError
        Line without =, or a key not in the base configuration
    """
    config = copy.deepcopy(base if base is not None else default_config())
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigParseError('Line {}: expected key = value, got {!r}'.format(number, line))
        key, value = line.split('=', 1)
        key = key.strip()
        if key not in config:
            raise ConfigParseError('Line {}: unknown key {}'.format(number, key))
        config[key] = _parse_value(value)
    return config


def read_config(file_path: str, verbose: Optional[bool] = True) -> Dict[str, Any]:
    """Read a configuration file on top of default_config()

    Parameters
    ----------
    file_path : str
        Path of the configuration file
    verbose : Optional[bool], optional
        Flag whether to output print statements, by default True

    Returns
    -------
    Dict[str, Any]
        Full configuration
    """
    with open(file_path, 'r') as handle:
        text = handle.read()
    config = parse_config(text)
    if verbose:
        changed = [k for k, v in config.items() if k in default_config() and repr(v) != repr(default_config()[k])]
        print('\nConfiguration {} sets {} keys:'.format(file_path, len(changed)))
        print('\t{}'.format(', '.join(changed)))
    return config


def write_config(config: Dict[str, Any], file_path: str):
    """Write a configuration as key = value lines, readable by read_config"""
    lines = []
    for key in sorted(config):
        value = config[key]
        if isinstance(value, float) and np.isinf(value):
            value = 'inf' if value > 0 else '-inf'
        else:
            value = repr(value)
        lines.append('{} = {}'.format(key, value))
    with open(file_path, 'w') as handle:
        handle.write('\n'.join(lines) + '\n')


#%% Artifacts
def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isinf(value) or np.isnan(value):
            return str(value)
        return value
    if hasattr(value, 'to_dict'):
        return _jsonable(value.to_dict())
    return value


def versions() -> Dict[str, str]:
    """Versions of the numerical stack"""
    import scipy
    import torch
    return {'bzm': bzm.__version__, 'python': platform.python_version(), 'numpy': np.__version__,
            'scipy': scipy.__version__, 'torch': torch.__version__, 'pandas': pd.__version__}


def write_manifest(file_path: str, config: Dict[str, Any], **extra):
    """JSON manifest: configuration echo, versions and run details"""
    content = {'config': _jsonable(config), 'versions': versions()}
    content.update(_jsonable(extra))
    with open(file_path, 'w') as handle:
        json.dump(content, handle, indent=2, sort_keys=True)


def write_csv(data: DataFrame, file_path: str, verbose: Optional[bool] = True):
    """Write a table without its index

    Parameters
    ----------
    data : DataFrame
        Table to write
    file_path : str
        Output file
    verbose : Optional[bool], optional
        Flag whether to output print statements, by default True
    """
    data.to_csv(file_path, index=False, float_format='%.17g')
    if verbose:
        print('\nWrote {} rows, {} columns to {}'.format(data.shape[0], data.shape[1], file_path))


def read_csv(file_path: str, verbose: Optional[bool] = True) -> DataFrame:
    """Read a table written by write_csv"""
    data = pd.read_csv(file_path)
    if verbose:
        print('\nInput data contains {} rows, {} columns:'.format(data.shape[0], data.shape[1]))
        print('\t{}'.format(', '.join(data.columns)))
    return data
