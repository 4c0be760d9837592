# coding=utf-8
# Copyright 2023 The jax_simex Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Utils shared across the jax_simex modules."""

import json
import os
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import jax
import jax.numpy as jnp
import numpy as np


Tensor = jnp.ndarray
ArrayLike = Union[Tensor, np.ndarray, Sequence[float], float]

# Every file written by the library starts with this prefix followed by the
# JSON-encoded resolved configuration.
CONFIG_PREFIX = '# config: '

######## Argument checking ########


def is_concrete(value: Any) -> bool:
  """Returns whether `value` can be inspected on the host (not traced)."""
  return not isinstance(value, jax.core.Tracer)


def check_positive(name: str, value: ArrayLike):
  if is_concrete(value) and np.any(~(np.asarray(value) > 0.)):
    raise ValueError(f'{name} must be positive, got {value}.')


def check_nonnegative(name: str, value: ArrayLike):
  if is_concrete(value) and np.any(~(np.asarray(value) >= 0.)):
    raise ValueError(f'{name} must be non-negative, got {value}.')


def check_finite(name: str, value: ArrayLike):
  if not is_concrete(value):
    return
  bad = np.flatnonzero(~np.isfinite(np.asarray(value, dtype=np.float64)))
  if bad.size:
    raise ValueError(f'{name} has non-finite entries at rows {bad.tolist()}.')


######## Grids and random streams ########


def parse_grid(text: str) -> np.ndarray:
  """Parses an `a:step:b` string into an inclusive grid."""
  try:
    start, step, stop = (float(part) for part in text.split(':'))
  except ValueError:
    raise ValueError(f'Grid must be given as a:step:b, got {text!r}.') from None
  if step <= 0. or stop < start:
    raise ValueError(f'Invalid grid {text!r}.')
  nb_points = int(np.floor((stop - start) / step + 1e-9)) + 1
  grid = start + step * np.arange(nb_points)
  return np.round(grid, 12)


def stream_key(seed: int, *path: int) -> Tensor:
  """Random key for the stream identified by `seed` and an integer path.

  Keys only depend on the path, never on the order in which streams are
  requested, so that consumers can be evaluated in any order or in parallel.

  Args:
    seed: Master seed.
    *path: Integer indices identifying the stream (e.g. dataset index,
      lambda index, replicate index).
  Returns:
    key: PRNGKey for this stream.
  """
  if seed < 0 or seed >= 2**63:
    raise ValueError(f'Seed must lie in [0, 2**63), got {seed}.')
  key = jax.random.PRNGKey(seed)
  for index in path:
    key = jax.random.fold_in(key, index)
  return key


######## File Loading ########


def open_file(name, *open_args, **open_kwargs):
  """Open file, creating its parent directory first if necessary."""
  directory = os.path.dirname(name)
  if directory and not os.path.exists(directory):
    os.makedirs(directory)
  return open(name, *open_args, **open_kwargs)


def format_float(value: float) -> str:
  """Shortest decimal string that round-trips to the same double."""
  return repr(float(value))


def config_line(config: Mapping[str, Any]) -> str:
  return CONFIG_PREFIX + json.dumps(config, sort_keys=True) + '\n'


def write_csv(path: str,
              columns: Mapping[str, ArrayLike],
              config: Optional[Mapping[str, Any]] = None):
  """Writes equally long numeric columns as CSV, with a provenance line.

  Args:
    path: Destination file.
    columns: Ordered mapping from column name to values.
    config: Resolved configuration embedded as a JSON comment line.
  """
  names = list(columns)
  values = [np.asarray(columns[name], dtype=np.float64) for name in names]
  lengths = {v.shape[0] for v in values}
  if len(lengths) > 1:
    raise ValueError(f'Columns have different lengths: {sorted(lengths)}.')
  with open_file(path, 'w') as f:
    if config is not None:
      f.write(config_line(config))
    f.write(','.join(names) + '\n')
    for row in zip(*values):
      f.write(','.join(format_float(v) for v in row) + '\n')


def read_csv(path: str, required: Sequence[str]) -> Dict[str, np.ndarray]:
  """Reads a numeric CSV with a header row, skipping `#` comment lines.

  Args:
    path: File to read.
    required: Column names that must be present.
  Returns:
    Mapping from column name to float64 array.
  """
  with open(path) as f:
    lines = [line for line in f if line.strip() and not line.startswith('#')]
  if not lines:
    raise ValueError(f'{path} is empty.')
  table = np.genfromtxt(lines, delimiter=',', names=True, dtype=np.float64)
  table = np.atleast_1d(table)
  missing = [name for name in required if name not in table.dtype.names]
  if missing:
    raise ValueError(f'{path} is missing columns {missing}; header is '
                     f'{list(table.dtype.names)}.')
  return {name: np.asarray(table[name]) for name in table.dtype.names}
