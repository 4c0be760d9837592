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

"""Tests for the simulation harness."""

import json
import os
import unittest

from absl import logging
from absl.testing import absltest
from absl.testing import parameterized

import jax.numpy as jnp
from jax_simex.src import harness
from jax_simex.src import utils
from jax_simex.tests import test_utils
import numpy as np

_GOLDEN_TABLE = os.path.join(os.path.dirname(__file__), 'testdata',
                             'golden_table.csv')

# g -> (EX MSE, Naive MSE) of the reference rows at n = 500, sigma_u2 = 0.25.
_REFERENCE_MSE = {
    'xsinx': (0.065, 0.119),
    'square': (0.029, 1.456),
    'exp': (0.070, 2.749),
}


def _small_spec(**kwargs):
  config = dict(n=100, n_datasets=4, nb_x=20,
                methods=('naive', 'ex', 'simex:5'))
  config.update(kwargs)
  return harness.SimulationSpec(**config)


def _fixture_result(spec, threads, cells):
  methods = []
  for label, (mse, seconds) in cells.items():
    method_spec = harness.parse_method(label)
    methods.append(harness.MethodResult(
        label=label, replicates=method_spec.replicates, mse=mse,
        wall_time_seconds=seconds, degenerate_cell_count=0,
        curve=np.zeros(spec.nb_x), dataset_curves=np.zeros((1, spec.nb_x)),
        dataset_mses=np.zeros(1), z_digests=['']))
  return harness.ScenarioResult(spec=spec, methods=methods,
                                truth=np.zeros(spec.nb_x), threads=threads)


def _fixture_results():
  xsinx = ('ex', 'naive', 'simex:50')
  return [
      _fixture_result(
          harness.SimulationSpec(n=100, methods=xsinx), 1,
          {'ex': (0.335, 2.202), 'naive': (0.221, 0.176),
           'simex:50': (0.075, 71.053)}),
      _fixture_result(
          harness.SimulationSpec(n=500, methods=xsinx), 4,
          {'ex': (0.065, 5.334), 'naive': (0.119, 0.574),
           'simex:50': (0.077, 287.537)}),
      _fixture_result(
          harness.SimulationSpec(g_name='square', n=500, sigma_u2=0.1,
                                 methods=('ex',)), 1,
          {'ex': (0.067, 5.884)}),
  ]


class SimulationSpecTest(parameterized.TestCase):

  def test_defaults(self):
    spec = harness.SimulationSpec()
    self.assertLen(spec.x_grid, 200)
    self.assertEqual(spec.x_grid[0], -3.)
    self.assertEqual(spec.x_grid[-1], 3.)
    self.assertLen(spec.lambda_grid, 11)
    self.assertAlmostEqual(spec.resolved_bandwidth, 500**-0.2)
    self.assertEqual([m.label for m in spec.method_specs],
                     ['naive', 'ex', 'simex:50'])
    self.assertTrue(spec.family.is_quadratic)

  @parameterized.parameters((0.25, 4.), (0.1, 10.))
  def test_signal_to_noise(self, sigma_u2, expected):
    self.assertAlmostEqual(
        harness.SimulationSpec(sigma_u2=sigma_u2).signal_to_noise, expected)

  def test_json_round_trip(self):
    spec = harness.SimulationSpec(g_name='exp', n=200, bandwidth=0.3,
                                  methods=['ex', 'simex:100'],
                                  extrapolant='rational', seed=7)
    self.assertEqual(harness.SimulationSpec.from_json(spec.to_json()), spec)

  def test_resolved_bandwidth_is_echoed(self):
    config = harness.SimulationSpec(n=100).to_dict()
    self.assertAlmostEqual(config['bandwidth'], 100**-0.2)

  def test_unknown_field(self):
    with self.assertRaisesRegex(ValueError, 'Unknown simulation spec fields'):
      harness.SimulationSpec.from_json('{"n": 100, "bandwith": 0.3}')

  @parameterized.named_parameters(
      ('zero_error', dict(sigma_u2=0.)),
      ('small_n', dict(n=5)),
      ('no_dataset', dict(n_datasets=0)),
      ('unknown_g', dict(g_name='cos')),
      ('duplicate_method', dict(methods=('ex', 'ex'))),
      ('unknown_method', dict(methods=('kde',))),
      ('negative_lambda', dict(lambda_grid=(-0.2, 0., 1.))),
      ('bad_extrapolant', dict(extrapolant='spline')),
      ('bad_grid', dict(x_min=1., x_max=-1.)),
      ('short_lambda_grid', dict(lambda_grid=(0., 1.))),
      ('short_rational_grid', dict(lambda_grid=(0., 1., 2.),
                                   extrapolant='rational')),
  )
  def test_invalid(self, kwargs):
    with self.assertRaises(ValueError):
      harness.SimulationSpec(**kwargs)

  def test_short_lambda_grid_without_extrapolation(self):
    spec = harness.SimulationSpec(lambda_grid=(0.,), methods=('naive',))
    self.assertEqual(spec.lambda_grid, (0.,))
    with self.assertRaisesRegex(ValueError, 'needs at least 3'):
      harness.SimulationSpec(lambda_grid=(0., 1.), methods=('naive', 'ex'))

  def test_load_specs(self):
    one = harness.load_specs('{"n": 100}')
    self.assertLen(one, 1)
    several = harness.load_specs(json.dumps(
        [{'n': 100}, {'n': 200, 'g_name': 'square'}]))
    self.assertEqual([s.n for s in several], [100, 200])
    with self.assertRaises(ValueError):
      harness.load_specs('[]')

  def test_parse_method(self):
    self.assertEqual(harness.parse_method('SIMEX').replicates,
                     harness.DEFAULT_SIMEX_REPLICATES)
    self.assertEqual(harness.parse_method('simex:100').label, 'simex:100')
    self.assertIsNone(harness.parse_method('ex').replicates)
    for text in ('ex:3', 'simex:0', 'spline'):
      with self.assertRaises(ValueError):
        harness.parse_method(text)

  def test_custom_regression_function(self):
    harness.register_regression_function('cubic', lambda x: x**3)
    spec = harness.SimulationSpec(g_name='custom:cubic', n=50)
    dataset = harness.generate_dataset(spec, 0)
    np.testing.assert_allclose(dataset.gx, dataset.x**3)


class GenerateDatasetTest(absltest.TestCase):

  def test_deterministic(self):
    spec = harness.SimulationSpec(n=100)
    first = harness.generate_dataset(spec, 3)
    second = harness.generate_dataset(spec, 3)
    np.testing.assert_array_equal(first.sample.z, second.sample.z)
    np.testing.assert_array_equal(first.sample.y, second.sample.y)
    other = harness.generate_dataset(spec, 4)
    self.assertFalse(np.array_equal(first.sample.z, other.sample.z))

  def test_surrogate_variance(self):
    n = 100000
    spec = harness.SimulationSpec(n=n, sigma_u2=0.25)
    z = np.asarray(harness.generate_dataset(spec, 0).sample.z)
    std_err = 1.25 * np.sqrt(2. / (n - 1))
    self.assertLess(abs(np.var(z, ddof=1) - 1.25), 3. * std_err)

  def test_vanishing_error(self):
    spec = harness.SimulationSpec(n=10000, sigma_u2=1e-6)
    dataset = harness.generate_dataset(spec, 0)
    self.assertGreater(np.corrcoef(dataset.x, dataset.sample.z)[0, 1], 0.999)

  def test_regression_noise(self):
    spec = harness.SimulationSpec(n=20000, g_name='square', tau2=0.5)
    dataset = harness.generate_dataset(spec, 1)
    residual = np.asarray(dataset.sample.y - dataset.gx)
    np.testing.assert_allclose(np.var(residual), 0.5, rtol=0.05)
    np.testing.assert_array_equal(dataset.gx, jnp.square(dataset.x))


class RunScenarioTest(absltest.TestCase):

  @classmethod
  def setUpClass(cls):
    super().setUpClass()
    cls.result = harness.run_scenario(_small_spec())

  def test_shapes(self):
    self.assertEqual([m.label for m in self.result.methods],
                     ['naive', 'ex', 'simex:5'])
    for method in self.result.methods:
      self.assertEqual(method.curve.shape, (20,))
      self.assertEqual(method.dataset_curves.shape, (4, 20))
      self.assertGreaterEqual(method.mse, 0.)
      self.assertGreaterEqual(method.wall_time_seconds, 0.)
      self.assertEqual(method.missing_point_count, 0)
    self.assertEqual(self.result.method('simex:5').replicates, 5)
    with self.assertRaises(KeyError):
      self.result.method('simex:50')

  def test_paired_datasets(self):
    digests = [m.z_digests for m in self.result.methods]
    self.assertEqual(digests[0], digests[1])
    self.assertEqual(digests[1], digests[2])
    self.assertLen(set(digests[0]), 4)

  def test_averaged_curve_beats_average_mse(self):
    for method in self.result.methods:
      self.assertLessEqual(method.mse, np.mean(method.dataset_mses) + 1e-12)

  def test_curve_is_dataset_average(self):
    for method in self.result.methods:
      np.testing.assert_allclose(method.curve,
                                 method.dataset_curves.mean(axis=0))

  def test_matches_direct_estimate(self):
    spec = self.result.spec
    dataset = harness.generate_dataset(spec, 2)
    for method in self.result.methods:
      curve, _ = harness.estimate_curve(
          spec, harness.parse_method(method.label), dataset.sample, 2)
      np.testing.assert_array_equal(method.dataset_curves[2], curve)

  def test_worker_count_does_not_change_results(self):
    spec = self.result.spec
    tables = {harness.emit_tables([self.result], include_timing=False)}
    for num_workers in (4, 8):
      other = harness.run_scenario(spec, num_workers=num_workers)
      self.assertEqual(other.threads, num_workers)
      tables.add(harness.emit_tables([other], include_timing=False))
      for mine, theirs in zip(self.result.methods, other.methods):
        np.testing.assert_array_equal(mine.dataset_curves,
                                      theirs.dataset_curves)
    self.assertLen(tables, 1)

  def test_invalid_workers(self):
    with self.assertRaises(ValueError):
      harness.run_scenario(self.result.spec, num_workers=0)


class AverageCurvesTest(absltest.TestCase):

  def test_missing_cells_are_skipped_and_counted(self):
    curves = np.array([[1., np.nan, np.nan, 4.],
                       [3., 2., np.nan, 0.]])
    curve, nb_missing = harness.average_curves(curves)
    np.testing.assert_array_equal(curve[[0, 1, 3]], [2., 2., 2.])
    self.assertTrue(np.isnan(curve[2]))
    self.assertEqual(nb_missing, 3)

  def test_complete_curves(self):
    curves = np.arange(6.).reshape(3, 2)
    curve, nb_missing = harness.average_curves(curves)
    np.testing.assert_allclose(curve, [2., 3.])
    self.assertEqual(nb_missing, 0)


class ScenarioPropertiesTest(absltest.TestCase):

  def test_naive_without_error(self):
    spec = harness.SimulationSpec(g_name='square', n=500, sigma_u2=1e-8,
                                  methods=('naive',))
    self.assertLess(harness.run_scenario(spec).methods[0].mse, 0.05)

  def test_more_datasets_do_not_increase_naive_mse(self):
    # Datasets are drawn by index, so the first half of a run with 4 datasets
    # is the run with 2 datasets.
    halves, fulls = [], []
    for seed in range(20):
      spec = harness.SimulationSpec(n=100, sigma_u2=1e-8, n_datasets=4,
                                    x_min=-2., x_max=2., nb_x=50,
                                    methods=('naive',), seed=seed)
      result = harness.run_scenario(spec)
      method = result.methods[0]
      half, _ = harness.average_curves(method.dataset_curves[:2])
      halves.append(np.mean((half - result.truth)**2))
      fulls.append(method.mse)
    logging.info('Naive MSE over 20 reruns: %.4g with 2 datasets, %.4g with '
                 '4 datasets.', np.mean(halves), np.mean(fulls))
    self.assertLessEqual(np.mean(fulls), np.mean(halves))

  def test_ex_is_faster_than_simex(self):
    spec = harness.SimulationSpec(n=100, n_datasets=2, nb_x=50,
                                  methods=('ex', 'simex:50'))
    result = harness.run_scenario(spec)
    self.assertLess(result.method('ex').wall_time_seconds,
                    result.method('simex:50').wall_time_seconds)


class SystematicErrorTest(parameterized.TestCase):

  @parameterized.parameters('square', 'exp')
  def test_exceeds_reference_band(self, g_name):
    # Even with unlimited data the quadratic extrapolant leaves more error
    # than 2.5 times the reference EX value.
    spec = harness.SimulationSpec(g_name=g_name, n=500, sigma_u2=0.25)
    self.assertGreater(harness.systematic_mse(spec),
                       2.5 * _REFERENCE_MSE[g_name][0])

  def test_error_concentrates_in_the_tails(self):
    spec = harness.SimulationSpec(g_name='square', n=500, sigma_u2=0.25,
                                  nb_x=61)
    error = np.abs(harness.systematic_curve(spec) - spec.x_grid**2)
    inner = np.abs(spec.x_grid) <= 1.
    self.assertLess(np.max(error[inner]), np.max(error[~inner]))
    self.assertIn(int(np.argmax(error)), (0, 60))

  def test_custom_function_has_no_model(self):
    harness.register_regression_function('quartic', lambda x: x**4)
    spec = harness.SimulationSpec(g_name='custom:quartic', nb_x=5)
    with self.assertRaisesRegex(ValueError, 'No analytic model'):
      harness.systematic_curve(spec)


class TablesTest(absltest.TestCase):

  def test_single_result(self):
    result = _fixture_results()[2]
    rows = harness.table_rows([result])
    self.assertEqual(rows, [
        ['g', 'sigma_u2', 'method', 'B', 'MSE_n500', 'Time_n500', 'threads'],
        ['square', '0.1', 'ex', '', '0.067', '5.884', '1']])

  def test_two_sample_sizes(self):
    results = _fixture_results()[:2]
    rows = harness.table_rows(results, include_timing=False)
    self.assertEqual(rows[0], ['g', 'sigma_u2', 'method', 'B', 'MSE_n100',
                               'MSE_n500'])
    self.assertLen(rows, 4)
    self.assertEqual(rows[3], ['xsinx', '0.25', 'simex', '50', '0.075',
                               '0.077'])

  def test_golden_table(self):
    with open(_GOLDEN_TABLE) as f:
      golden = f.read()
    self.assertEqual(harness.emit_tables(_fixture_results()), golden)

  def test_markdown(self):
    text = harness.emit_tables(_fixture_results(), fmt='markdown')
    lines = text.splitlines()
    self.assertLen(lines, 6)
    self.assertEqual(lines[0], '| g | sigma_u2 | method | B | MSE_n100 | '
                     'Time_n100 | MSE_n500 | Time_n500 | threads |')
    self.assertEqual(lines[1], '|' + '|'.join(['---'] * 9) + '|')
    self.assertEqual(lines[-1], '| square | 0.1 | ex |  |  |  | 0.067 | '
                     '5.884 | 1 |')

  def test_errors(self):
    with self.assertRaises(ValueError):
      harness.emit_tables([])
    with self.assertRaises(ValueError):
      harness.emit_tables(_fixture_results(), fmt='latex')

  def test_write_tables(self):
    path = os.path.join(self.create_tempdir().full_path, 'out', 'tables.csv')
    harness.write_tables(path, _fixture_results())
    with open(path) as f:
      config_line = f.readline()
      body = f.read()
    self.assertTrue(config_line.startswith(utils.CONFIG_PREFIX))
    config = json.loads(config_line[len(utils.CONFIG_PREFIX):])
    self.assertEqual([s['n'] for s in config['scenarios']], [100, 500, 500])
    with open(_GOLDEN_TABLE) as f:
      self.assertEqual(body, f.read())

  def test_write_curves(self):
    result = harness.run_scenario(_small_spec(n_datasets=2,
                                              methods=('ex', 'simex:3')))
    directory = self.create_tempdir().full_path
    paths = harness.write_curves(directory, result)
    self.assertLen(paths, 3)
    self.assertEqual(paths[0], os.path.join(directory, 'curves',
                                            'xsinx_n100_s0.25.csv'))
    curves = utils.read_csv(paths[0], ['x', 'truth', 'ex', 'simex_3'])
    np.testing.assert_array_equal(curves['x'], result.spec.x_grid)
    np.testing.assert_array_equal(curves['ex'], result.method('ex').curve)
    per_dataset = utils.read_csv(paths[2], ['x', 'dataset0', 'dataset1'])
    np.testing.assert_array_equal(
        per_dataset['dataset1'], result.method('simex:3').dataset_curves[1])


@unittest.skipUnless(test_utils.RUN_SLOW, 'Set JAX_SIMEX_RUN_SLOW=1.')
class ReferenceTablesTest(parameterized.TestCase):
  """Banded reproduction of the n = 500, sigma_u2 = 0.25 reference rows.

  Naive MSE is banded around the reference value. EX MSE is banded around
  the reference value for xsinx only. For square and exp the quadratic
  extrapolant alone leaves more error than the reference band allows, so EX
  is banded around that systematic floor plus the Monte-Carlo noise.
  """

  @parameterized.parameters('xsinx', 'square', 'exp')
  def test_table_row(self, g_name):
    methods = ('naive', 'ex') + tuple(
        f'simex:{b}' for b in harness.SIMEX_PRESETS)
    spec = harness.SimulationSpec(g_name=g_name, n=500, sigma_u2=0.25,
                                  n_datasets=10, methods=methods)
    result = harness.run_scenario(spec)
    ex_mse, naive_mse = _REFERENCE_MSE[g_name]
    ex, naive = result.method('ex'), result.method('naive')
    floor = harness.systematic_mse(spec)
    noise = float(np.nanmean(np.nanvar(ex.dataset_curves, axis=0, ddof=1)))
    logging.info('%s: naive %.4f, ex %.4f, floor %.4f, noise %.4f', g_name,
                 naive.mse, ex.mse, floor, noise / spec.n_datasets)
    self.assertLess(ex.mse, naive.mse)
    self.assertBetween(naive.mse, naive_mse / 2.5, naive_mse * 2.5)
    if g_name == 'xsinx':
      self.assertBetween(ex.mse, ex_mse / 2.5, ex_mse * 2.5)
    else:
      self.assertGreater(floor, 2.5 * ex_mse)
      self.assertBetween(ex.mse, floor / 2.5, 2.5 * (floor + noise))
    simex = result.method('simex:50')
    self.assertGreaterEqual(simex.wall_time_seconds,
                            20. * ex.wall_time_seconds)


if __name__ == '__main__':
  absltest.main()
