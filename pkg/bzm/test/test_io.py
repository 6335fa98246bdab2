"""
Test field files, configuration parsing and table output
"""
import os
import sys
import json

import numpy as np
import pandas as pd
import pytest

from bzm.spectral import make_grid
from bzm.io import write_field, read_field, field_io, parse_config, default_config, read_config, \
    write_config, write_csv, read_csv, write_manifest, magic, _header_dtype
from bzm.doe import random_field
from bzm.errors import FormatMismatchError, TruncatedFileError, ConfigParseError

grid = make_grid(2, 16)
f = random_field(grid, k_max=4, components=2, seed=3)


def test_field_file(tmp_path):
    file_path = os.path.join(str(tmp_path), 'fields', 'u.bin')
    write_field(file_path, f)
    g = read_field(file_path)
    assert g.grid == grid
    assert np.array_equal(g.samples, f.samples)
    assert np.array_equal(field_io(file_path, 'read', grid=grid).samples, f.samples)
    with pytest.raises(ValueError):
        field_io(file_path, 'write')


def test_field_header_layout(tmp_path):
    file_path = os.path.join(str(tmp_path), 'rho.bin')
    write_field(file_path, f)
    with open(file_path, 'rb') as handle:
        raw = handle.read()
    endian = '<' if sys.byteorder == 'little' else '>'
    assert raw[:5] == b'BZMF1'
    assert raw[5:9] == np.array(2, dtype=endian + 'i4').tobytes()
    assert raw[9:13] == np.array(16, dtype=endian + 'i4').tobytes()
    assert raw[13:21] == np.array(grid.period, dtype=endian + 'f8').tobytes()
    assert raw[21:25] == np.array(2, dtype=endian + 'i4').tobytes()
    assert raw[25:26] == endian.encode()
    assert len(raw) == 26 + 8 * f.samples.size


def test_field_file_other_byte_order(tmp_path):
    endian = '>' if sys.byteorder == 'little' else '<'
    header = np.zeros(1, dtype=_header_dtype(endian))
    header['magic'] = magic
    header['d'] = 2
    header['N'] = 16
    header['period'] = grid.period
    header['components'] = 2
    header['endian'] = endian.encode()
    file_path = os.path.join(str(tmp_path), 'swapped.bin')
    with open(file_path, 'wb') as handle:
        handle.write(header.tobytes())
        handle.write(f.samples.astype(endian + 'f8').tobytes())
    g = read_field(file_path, grid)
    assert np.array_equal(g.samples, f.samples)


def test_field_file_errors(tmp_path):
    file_path = os.path.join(str(tmp_path), 'u.bin')
    write_field(file_path, f)
    with open(file_path, 'rb') as handle:
        content = handle.read()

    bad = os.path.join(str(tmp_path), 'bad.bin')
    with open(bad, 'wb') as handle:
        handle.write(b'XXXXX' + content[len(magic):])
    with pytest.raises(FormatMismatchError):
        read_field(bad)

    with open(bad, 'wb') as handle:
        handle.write(content[:-8])
    with pytest.raises(TruncatedFileError):
        read_field(bad)

    with open(bad, 'wb') as handle:
        handle.write(content[:10])
    with pytest.raises(TruncatedFileError):
        read_field(bad)

    with open(bad, 'wb') as handle:
        handle.write(content + b'\x00' * 8)
    with pytest.raises(FormatMismatchError):
        read_field(bad)

    with pytest.raises(FormatMismatchError):
        read_field(file_path, make_grid(2, 32))


def test_parse_config():
    config = parse_config('grid.N = 16  # coarse\n\nsolver.T = inf\nmonitor.thresholds = {"K": 2.0}\n')
    assert config['grid.N'] == 16
    assert config['solver.T'] == np.inf
    assert config['monitor.thresholds'] == {'K': 2.0}
    assert config['grid.d'] == default_config()['grid.d']
    assert parse_config('physics.kappa_spec = power')['physics.kappa_spec'] == 'power'
    with pytest.raises(ConfigParseError):
        parse_config('grid.M = 3')
    with pytest.raises(ConfigParseError):
        parse_config('grid.N 16')
    with pytest.raises(ConfigParseError):
        parse_config('probe.j = 2')


def test_config_file(tmp_path):
    config = parse_config('grid.N = 64\nsolver.T = inf\ndata.rho_mode = [2, 1]')
    file_path = os.path.join(str(tmp_path), 'run.cfg')
    write_config(config, file_path)
    assert read_config(file_path, verbose=False) == config


def test_csv_keeps_precision(tmp_path):
    data = pd.DataFrame({'j': [0, 1], 'value': [1.0 / 3.0, np.pi]})
    file_path = os.path.join(str(tmp_path), 'table.csv')
    write_csv(data, file_path, verbose=False)
    back = read_csv(file_path, verbose=False)
    assert list(back.columns) == ['j', 'value']
    assert back['value'].tolist() == data['value'].tolist()


def test_manifest(tmp_path):
    file_path = os.path.join(str(tmp_path), 'manifest.json')
    write_manifest(file_path, default_config(), command='norm', summary={'T': np.inf, 'ok': np.bool_(True)})
    with open(file_path) as handle:
        content = json.load(handle)
    assert content['command'] == 'norm'
    assert content['summary'] == {'T': 'inf', 'ok': True}
    assert content['config']['grid.N'] == 32
    assert 'numpy' in content['versions']
