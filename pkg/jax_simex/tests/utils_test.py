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

"""Tests for utils."""

import json
import os

from absl.testing import absltest
from absl.testing import parameterized

import jax
import jax.numpy as jnp
from jax_simex.src import utils
import numpy as np


class GridTest(parameterized.TestCase):

  def test_lambda_grid(self):
    grid = utils.parse_grid('0:0.2:2')
    self.assertLen(grid, 11)
    self.assertEqual(grid[0], 0.)
    self.assertEqual(grid[3], 0.6)
    self.assertEqual(grid[-1], 2.)

  def test_single_point(self):
    np.testing.assert_array_equal(utils.parse_grid('1:0.5:1'), [1.])

  @parameterized.parameters(('0:0.6:1', [0., 0.6]),
                            ('-3:0.4:-2', [-3., -2.6, -2.2]),
                            ('0:0.1:0.3', [0., 0.1, 0.2, 0.3]))
  def test_stops_at_upper_bound(self, text, expected):
    grid = utils.parse_grid(text)
    np.testing.assert_allclose(grid, expected, atol=1e-12)
    self.assertLessEqual(grid[-1], float(text.split(':')[-1]))

  @parameterized.parameters('0:0.2', '0:-0.2:2', '2:0.2:0', 'a:b:c')
  def test_invalid(self, text):
    with self.assertRaises(ValueError):
      utils.parse_grid(text)


class StreamKeyTest(absltest.TestCase):

  def test_path_determines_key(self):
    np.testing.assert_array_equal(utils.stream_key(3, 1, 2),
                                  utils.stream_key(3, 1, 2))
    self.assertFalse(np.array_equal(utils.stream_key(3, 1, 2),
                                    utils.stream_key(3, 2, 1)))
    self.assertFalse(np.array_equal(utils.stream_key(3, 1),
                                    utils.stream_key(4, 1)))
    np.testing.assert_array_equal(utils.stream_key(3), jax.random.PRNGKey(3))

  def test_invalid_seed(self):
    for seed in (-1, 2**63):
      with self.assertRaisesRegex(ValueError, 'Seed'):
        utils.stream_key(seed)


class CheckTest(absltest.TestCase):

  def test_checks(self):
    utils.check_positive('h', 0.1)
    utils.check_nonnegative('lambda', np.array([0., 1.]))
    with self.assertRaisesRegex(ValueError, 'h must be positive'):
      utils.check_positive('h', 0.)
    with self.assertRaisesRegex(ValueError, 'non-negative'):
      utils.check_nonnegative('lambda', np.array([0., -1.]))
    with self.assertRaisesRegex(ValueError, r'rows \[1, 3\]'):
      utils.check_finite('z', [0., np.nan, 1., np.inf])

  def test_traced_values_are_not_checked(self):
    @jax.jit
    def fn(h):
      utils.check_positive('h', h)
      return h

    self.assertEqual(float(fn(jnp.array(-1.))), -1.)


class CsvTest(absltest.TestCase):

  def test_round_trip(self):
    path = os.path.join(self.create_tempdir().full_path, 'a', 'b.csv')
    columns = {'x': np.array([0.1, 1. / 3., -2.5]),
               'g_ex': np.array([1e-17, np.pi, 7.])}
    utils.write_csv(path, columns, {'seed': 3, 'method': 'ex'})
    with open(path) as f:
      first = f.readline()
    self.assertEqual(first, '# config: {"method": "ex", "seed": 3}\n')
    table = utils.read_csv(path, ['x', 'g_ex'])
    for name, values in columns.items():
      np.testing.assert_array_equal(table[name], values)

  def test_single_row(self):
    path = os.path.join(self.create_tempdir().full_path, 'one.csv')
    utils.write_csv(path, {'y': [1.5], 'z': [0.5]})
    table = utils.read_csv(path, ['y', 'z'])
    np.testing.assert_array_equal(table['y'], [1.5])

  def test_errors(self):
    directory = self.create_tempdir().full_path
    with self.assertRaisesRegex(ValueError, 'different lengths'):
      utils.write_csv(os.path.join(directory, 'bad.csv'),
                      {'x': [1., 2.], 'y': [1.]})
    path = os.path.join(directory, 'ok.csv')
    utils.write_csv(path, {'x': [1., 2.]})
    with self.assertRaisesRegex(ValueError, 'missing columns'):
      utils.read_csv(path, ['x', 'y'])

  def test_config_line(self):
    line = utils.config_line({'b': [0.5], 'a': None})
    self.assertEqual(json.loads(line[len(utils.CONFIG_PREFIX):]),
                     {'a': None, 'b': [0.5]})
    self.assertTrue(line.endswith('\n'))


if __name__ == '__main__':
  absltest.main()
