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

# Lint as: python3
r"""Command line front end.

  jax_simex simulate --spec=scenarios.json --out=results/ [--emit_curves]
  jax_simex fit --data=sample.csv --sigma_u2=0.25 --method=ex,naive \
      --out=curves.csv
  jax_simex fit --data=replicates.csv --replicates --transform=sqrt \
      --method=ex --out=curves.csv
  jax_simex diagnose --truth=xsinx --sigma_u2=0.25 --out=diagnostics.csv

Every output starts with a `# config: {...}` line holding the resolved
configuration.
"""

import os
from typing import Any, Dict, Optional, Sequence

from absl import app
from absl import flags
from absl import logging
import jax.numpy as jnp
from jax_simex.src import asymptotics
from jax_simex.src import errormodel
from jax_simex.src import extrapolation
from jax_simex.src import harness
from jax_simex.src import locallinear
from jax_simex.src import utils
import numpy as np

COMMANDS = ('simulate', 'fit', 'diagnose')

FLAGS = flags.FLAGS
flags.DEFINE_string('spec', None, 'JSON scenario file (simulate).')
flags.DEFINE_string('out', None, 'Output directory (simulate) or file.')
flags.DEFINE_integer('num_workers', 1, 'Worker threads over datasets.')
flags.DEFINE_bool('emit_curves', False, 'Also write curves/*.csv (simulate).')
flags.DEFINE_bool('include_timing', True, 'Write Time columns (simulate).')
flags.DEFINE_string('data', None, 'Input CSV with y,z or y,w1,w2 (fit).')
flags.DEFINE_float('sigma_u2', None, 'Measurement error variance.')
flags.DEFINE_bool('replicates', False,
                  'Input holds two replicate surrogates w1,w2 (fit).')
flags.DEFINE_list('method', ['ex'], 'Methods among ex, simex, naive (fit).')
flags.DEFINE_integer('simex_replicates', harness.DEFAULT_SIMEX_REPLICATES,
                     'SIMEX replicates B per lambda.')
flags.DEFINE_alias('B', 'simex_replicates')
flags.DEFINE_float('bandwidth', None, 'Kernel bandwidth, n^(-1/5) if unset.')
flags.DEFINE_string('lambda_grid', '0:0.2:2', 'Lambda grid as a:step:b.')
flags.DEFINE_string('x_grid', None,
                    'Evaluation grid as a:step:b; 200 points spanning the '
                    'surrogates for fit, -2:0.5:2 for diagnose.')
flags.DEFINE_string('extrapolant', 'quadratic',
                    'quadratic, poly:<p> or rational.')
flags.DEFINE_enum('transform', 'none', ['none', 'sqrt'],
                  'Response transformation (fit).')
flags.DEFINE_integer('seed', 0, 'Master seed.')
flags.DEFINE_enum('truth', 'xsinx', ['quadratic', 'exp', 'xsinx'],
                  'Built-in truth, X ~ N(0, 1) (diagnose).')
flags.DEFINE_float('tau2', 1., 'Regression noise variance (diagnose).')
flags.DEFINE_enum('quadrature', 'adaptive', ['adaptive', 'fixed_nodes'],
                  'Quadrature rule (diagnose).')
flags.DEFINE_integer('nodes', 96, 'Gauss-Hermite nodes for fixed_nodes.')


def simulate(spec_path: str, out_dir: str, num_workers: int = 1,
             emit_curves: bool = False,
             include_timing: bool = True) -> Sequence[harness.ScenarioResult]:
  """Runs every scenario of a spec file and writes tables.csv."""
  with open(spec_path) as f:
    specs = harness.load_specs(f.read())
  results = [harness.run_scenario(spec, num_workers) for spec in specs]
  table_path = os.path.join(out_dir, 'tables.csv')
  harness.write_tables(table_path, results, include_timing)
  logging.info('Wrote %s.', table_path)
  if emit_curves:
    for result in results:
      harness.write_curves(out_dir, result)
  return results


def _load_sample(data: str, sigma_u2: Optional[float], replicates: bool,
                 transform: errormodel.Transform
                 ) -> locallinear.ObservedSample:
  if replicates:
    table = utils.read_csv(data, ['y', 'w1', 'w2'])
    sample = errormodel.collapse_replicates(
        errormodel.ReplicateSample(table['y'], table['w1'], table['w2']))
    if sigma_u2 is not None:
      logging.warning('--sigma_u2 is ignored with --replicates; using the '
                      'estimated value %g.', sample.sigma_u2)
  else:
    if sigma_u2 is None:
      raise ValueError('--sigma_u2 is required unless --replicates is set.')
    table = utils.read_csv(data, ['y', 'z'])
    sample = locallinear.ObservedSample(jnp.asarray(table['y']),
                                        jnp.asarray(table['z']), sigma_u2)
  y = errormodel.transform_response(sample.y, transform)
  return locallinear.check_sample(sample._replace(y=y))


def fit(data: str, out: str, methods: Sequence[str], sigma_u2: Optional[float],
        replicates: bool = False, transform: str = 'none',
        simex_replicates: int = harness.DEFAULT_SIMEX_REPLICATES,
        bandwidth: Optional[float] = None, lambda_grid: str = '0:0.2:2',
        x_grid: Optional[str] = None, extrapolant: str = 'quadratic',
        seed: int = 0) -> Dict[str, np.ndarray]:
  """Estimates the curves of a single observed sample and writes them.

  Args:
    data: Input CSV.
    out: Output CSV with columns x and g_<method>.
    methods: Subset of ex, simex, naive.
    sigma_u2: Known measurement error variance, unless `replicates`.
    replicates: Whether `data` holds y,w1,w2.
    transform: 'none' or 'sqrt'.
    simex_replicates: SIMEX B.
    bandwidth: Bandwidth, n^(-1/5) when None.
    lambda_grid: a:step:b.
    x_grid: a:step:b, or None for 200 points spanning the surrogates.
    extrapolant: Extrapolant family.
    seed: SIMEX seed.
  Returns:
    The written columns.
  """
  unknown = sorted(set(methods) - {'ex', 'naive', 'simex'})
  if unknown:
    raise ValueError(f'Unknown methods {unknown}.')
  sample = _load_sample(data, sigma_u2, replicates,
                        errormodel.Transform(transform))
  n = sample.y.shape[0]
  if bandwidth is None:
    bandwidth = locallinear.SmootherConfig.default_bandwidth(n)
  if x_grid is None:
    grid = np.linspace(float(jnp.min(sample.z)), float(jnp.max(sample.z)), 200)
  else:
    grid = utils.parse_grid(x_grid)
  cfg = locallinear.SmootherConfig(
      bandwidth=bandwidth, lambda_grid=utils.parse_grid(lambda_grid),
      simex_replicates=simex_replicates, seed=seed)
  family = extrapolation.ExtrapolantFamily.parse(extrapolant)
  columns = {'x': grid}
  for name in ('ex', 'naive', 'simex'):
    if name not in methods:
      continue
    method = locallinear.Method(name)
    profile = locallinear.profile(method, sample, grid, cfg)
    if method is locallinear.Method.NAIVE:
      columns['g_naive'] = profile.g_hat[:, 0]
    else:
      columns[f'g_{name}'], _ = extrapolation.extrapolate_profile(
          profile, family)
  config: Dict[str, Any] = dict(
      command='fit', data=data, methods=list(methods),
      sigma_u2=sample.sigma_u2, replicates=replicates, transform=transform,
      simex_replicates=simex_replicates, bandwidth=bandwidth,
      lambda_grid=list(cfg.lambda_grid), x_grid=x_grid,
      extrapolant=str(family), seed=seed, n=n)
  utils.write_csv(out, columns, config)
  return columns


def diagnose(truth: str, sigma_u2: float, out: str, x_grid: str = '-2:0.5:2',
             lambda_grid: str = '0:0.2:2', tau2: float = 1.,
             quadrature: str = 'adaptive', nodes: int = 96
             ) -> Dict[str, np.ndarray]:
  """Writes Gamma, B and Delta of a built-in truth over (x, lambda) grids."""
  model = asymptotics.builtin_truth(truth, sigma_u2, tau2)
  q = asymptotics.QuadratureConfig(rule=asymptotics.Rule(quadrature),
                                   nodes=nodes)
  rows = {name: [] for name in ('x', 'lambda', 'gamma', 'bias', 'delta')}
  for x in utils.parse_grid(x_grid):
    for lam in utils.parse_grid(lambda_grid):
      summary = asymptotics.summarize(model, float(x), float(lam), q)
      rows['x'].append(summary.x)
      rows['lambda'].append(summary.lam)
      rows['gamma'].append(summary.gamma)
      rows['bias'].append(summary.bias2)
      rows['delta'].append(summary.var_point)
  config = dict(command='diagnose', truth=truth, sigma_u2=sigma_u2, tau2=tau2,
                x_grid=x_grid, lambda_grid=lambda_grid, quadrature=quadrature,
                nodes=nodes)
  utils.write_csv(out, rows, config)
  return {name: np.asarray(values) for name, values in rows.items()}


def main(argv):
  if len(argv) != 2 or argv[1] not in COMMANDS:
    raise app.UsageError(f'Expected exactly one command among {COMMANDS}.')
  if FLAGS.out is None:
    raise app.UsageError('--out is required.')
  command = argv[1]
  if command == 'simulate':
    if FLAGS.spec is None:
      raise app.UsageError('--spec is required by simulate.')
    simulate(FLAGS.spec, FLAGS.out, FLAGS.num_workers, FLAGS.emit_curves,
             FLAGS.include_timing)
  elif command == 'fit':
    if FLAGS.data is None:
      raise app.UsageError('--data is required by fit.')
    fit(FLAGS.data, FLAGS.out, FLAGS.method, FLAGS.sigma_u2,
        replicates=FLAGS.replicates, transform=FLAGS.transform,
        simex_replicates=FLAGS.simex_replicates, bandwidth=FLAGS.bandwidth,
        lambda_grid=FLAGS.lambda_grid, x_grid=FLAGS.x_grid,
        extrapolant=FLAGS.extrapolant, seed=FLAGS.seed)
  else:
    if FLAGS.sigma_u2 is None:
      raise app.UsageError('--sigma_u2 is required by diagnose.')
    diagnose(FLAGS.truth, FLAGS.sigma_u2, FLAGS.out,
             x_grid=FLAGS.x_grid or '-2:0.5:2', lambda_grid=FLAGS.lambda_grid,
             tau2=FLAGS.tau2, quadrature=FLAGS.quadrature, nodes=FLAGS.nodes)


def run():
  app.run(main)


if __name__ == '__main__':
  run()
