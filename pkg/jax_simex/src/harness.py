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
"""Monte-Carlo simulation harness comparing the naive, EX and SIMEX curves.

A scenario generates `n_datasets` datasets with X ~ N(0, 1), regression noise
N(0, tau2) and measurement error N(0, sigma_u2); estimates the curve of every
requested method on every dataset; averages the curves pointwise and reports
the MSE of the averaged curve against the truth, together with the estimation
wall time. All methods consume the same datasets.
"""

import concurrent.futures
import dataclasses
import hashlib
import json
import time
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

from absl import logging
import jax
import jax.numpy as jnp
from jax_simex.src import asymptotics
from jax_simex.src import extrapolation
from jax_simex.src import locallinear
from jax_simex.src import utils
import numpy as np

Tensor = utils.Tensor

DEFAULT_SIMEX_REPLICATES = 50
# Replicate counts of the reference comparison tables.
SIMEX_PRESETS = (50, 100)

_REGRESSION_FUNCTIONS: Dict[str, Callable[[Tensor], Tensor]] = {
    'xsinx': lambda x: x * jnp.sin(x),
    'square': jnp.square,
    'exp': jnp.exp,
}
_CUSTOM_PREFIX = 'custom:'


def register_regression_function(identifier: str,
                                 fn: Callable[[Tensor], Tensor]):
  """Makes `fn` available to specs as g_name 'custom:<identifier>'."""
  name = _CUSTOM_PREFIX + identifier
  if name in _REGRESSION_FUNCTIONS:
    logging.warning('Overriding regression function %s.', name)
  _REGRESSION_FUNCTIONS[name] = fn


def regression_function(g_name: str) -> Callable[[Tensor], Tensor]:
  try:
    return _REGRESSION_FUNCTIONS[g_name]
  except KeyError:
    raise ValueError(f'Unknown regression function {g_name!r}; known: '
                     f'{sorted(_REGRESSION_FUNCTIONS)}.') from None


class MethodSpec(NamedTuple):
  method: locallinear.Method
  replicates: Optional[int] = None

  @property
  def label(self) -> str:
    if self.method is locallinear.Method.SIMEX:
      return f'simex:{self.replicates}'
    return self.method.value


def parse_method(text: str) -> MethodSpec:
  """Parses `naive`, `ex`, `simex` or `simex:<B>`."""
  name, _, replicates = text.strip().lower().partition(':')
  try:
    method = locallinear.Method(name)
  except ValueError:
    raise ValueError(f'Unknown method {text!r}; expected naive, ex or '
                     'simex[:B].') from None
  if method is not locallinear.Method.SIMEX:
    if replicates:
      raise ValueError(f'Only SIMEX takes a replicate count, got {text!r}.')
    return MethodSpec(method)
  nb_replicates = int(replicates) if replicates else DEFAULT_SIMEX_REPLICATES
  if nb_replicates < 1:
    raise ValueError(f'SIMEX needs at least one replicate, got {text!r}.')
  return MethodSpec(method, nb_replicates)


@dataclasses.dataclass(frozen=True)
class SimulationSpec:
  """One simulation scenario.

  Attributes:
    g_name: 'xsinx', 'square', 'exp' or 'custom:<id>'.
    n: Sample size of each dataset.
    sigma_u2: Measurement error variance.
    n_datasets: Number of datasets whose curves are averaged.
    x_min, x_max, nb_x: Equally spaced evaluation grid.
    lambda_grid: Added-noise multipliers shared by EX and SIMEX.
    bandwidth: Kernel bandwidth; n^(-1/5) when None.
    methods: Method labels, see `parse_method`.
    extrapolant: 'quadratic', 'poly:<p>' or 'rational'.
    seed: Master seed.
    tau2: Variance of the regression noise.
  """
  g_name: str = 'xsinx'
  n: int = 500
  sigma_u2: float = 0.25
  n_datasets: int = 10
  x_min: float = -3.
  x_max: float = 3.
  nb_x: int = 200
  lambda_grid: Tuple[float, ...] = locallinear.SmootherConfig.standard_lambda_grid()
  bandwidth: Optional[float] = None
  methods: Tuple[str, ...] = ('naive', 'ex', f'simex:{DEFAULT_SIMEX_REPLICATES}')
  extrapolant: str = 'quadratic'
  seed: int = 0
  tau2: float = 1.

  def __post_init__(self):
    object.__setattr__(self, 'lambda_grid',
                       tuple(float(l) for l in self.lambda_grid))
    object.__setattr__(self, 'methods', tuple(self.methods))
    regression_function(self.g_name)
    if self.n < 10:
      raise ValueError(f'n must be >= 10, got {self.n}.')
    if self.n_datasets < 1:
      raise ValueError(f'n_datasets must be >= 1, got {self.n_datasets}.')
    if not self.sigma_u2 > 0.:
      raise ValueError(f'sigma_u2 must be positive, got {self.sigma_u2}.')
    if self.tau2 < 0.:
      raise ValueError(f'tau2 must be non-negative, got {self.tau2}.')
    if self.nb_x < 1 or not self.x_min <= self.x_max:
      raise ValueError('Invalid x grid.')
    if not self.methods:
      raise ValueError('At least one method is needed.')
    labels = [spec.label for spec in self.method_specs]
    if len(set(labels)) != len(labels):
      raise ValueError(f'Duplicate methods in {self.methods}.')
    self.smoother_config(DEFAULT_SIMEX_REPLICATES)
    family = self.family
    extrapolated = [spec.label for spec in self.method_specs
                    if spec.method is not locallinear.Method.NAIVE]
    if extrapolated and len(self.lambda_grid) < family.min_points:
      raise ValueError(f'{family} extrapolation for {extrapolated} needs at '
                       f'least {family.min_points} lambda points, got '
                       f'{len(self.lambda_grid)}.')

  @property
  def method_specs(self) -> List[MethodSpec]:
    return [parse_method(m) for m in self.methods]

  @property
  def family(self) -> extrapolation.ExtrapolantFamily:
    return extrapolation.ExtrapolantFamily.parse(self.extrapolant)

  @property
  def x_grid(self) -> np.ndarray:
    return np.linspace(self.x_min, self.x_max, self.nb_x)

  @property
  def resolved_bandwidth(self) -> float:
    if self.bandwidth is None:
      return locallinear.SmootherConfig.default_bandwidth(self.n)
    return float(self.bandwidth)

  @property
  def signal_to_noise(self) -> float:
    # Var(X) = 1.
    return 1. / self.sigma_u2

  def smoother_config(self, replicates: int) -> locallinear.SmootherConfig:
    return locallinear.SmootherConfig(
        bandwidth=self.resolved_bandwidth, lambda_grid=self.lambda_grid,
        simex_replicates=replicates, seed=self.seed)

  def to_dict(self) -> Dict[str, Any]:
    config = dataclasses.asdict(self)
    config['lambda_grid'] = list(self.lambda_grid)
    config['methods'] = list(self.methods)
    config['bandwidth'] = self.resolved_bandwidth
    return config

  def to_json(self) -> str:
    return json.dumps(self.to_dict(), sort_keys=True)

  @classmethod
  def from_dict(cls, config: Dict[str, Any]) -> 'SimulationSpec':
    known = {field.name for field in dataclasses.fields(cls)}
    unknown = sorted(set(config) - known)
    if unknown:
      raise ValueError(f'Unknown simulation spec fields {unknown}.')
    return cls(**config)

  @classmethod
  def from_json(cls, text: str) -> 'SimulationSpec':
    return cls.from_dict(json.loads(text))


def load_specs(text: str) -> List[SimulationSpec]:
  """Parses a JSON spec file holding one scenario or a list of them."""
  config = json.loads(text)
  if isinstance(config, dict):
    config = [config]
  if not isinstance(config, list) or not config:
    raise ValueError('A spec file holds a scenario object or a non-empty '
                     'list of them.')
  return [SimulationSpec.from_dict(c) for c in config]


class Dataset(NamedTuple):
  sample: locallinear.ObservedSample
  x: Tensor  # Hidden true covariates.
  gx: Tensor  # g(x) without noise.


def generate_dataset(spec: SimulationSpec, dataset_index: int,
                     key: Optional[Tensor] = None) -> Dataset:
  """Draws dataset `dataset_index` of a scenario.

  Args:
    spec: Scenario.
    dataset_index: Index of the dataset; selects the random stream.
    key: Overrides the (seed, dataset_index) stream when given.
  Returns:
    dataset: Observed sample and hidden truth.
  """
  if key is None:
    key = utils.stream_key(spec.seed, dataset_index)
  key_x, key_eps, key_u = jax.random.split(key, 3)
  x = jax.random.normal(key_x, (spec.n,), dtype=jnp.float64)
  gx = regression_function(spec.g_name)(x)
  y = gx + jnp.sqrt(spec.tau2) * jax.random.normal(
      key_eps, (spec.n,), dtype=jnp.float64)
  z = x + jnp.sqrt(spec.sigma_u2) * jax.random.normal(
      key_u, (spec.n,), dtype=jnp.float64)
  return Dataset(locallinear.ObservedSample(y, z, spec.sigma_u2), x, gx)


def estimate_curve(spec: SimulationSpec, method_spec: MethodSpec,
                   sample: locallinear.ObservedSample,
                   dataset_index: int) -> Tuple[np.ndarray, int]:
  """Estimated curve over spec.x_grid and its number of degenerate solves."""
  x_grid = spec.x_grid
  cfg = spec.smoother_config(method_spec.replicates or 1)
  profile = locallinear.profile(method_spec.method, sample, x_grid, cfg,
                                stream_prefix=(dataset_index,))
  degenerate = int(np.sum(profile.degenerate_count))
  if method_spec.method is locallinear.Method.NAIVE:
    return profile.g_hat[:, 0], degenerate
  curve, _ = extrapolation.extrapolate_profile(profile, spec.family)
  return curve, degenerate


@dataclasses.dataclass
class MethodResult:
  """Outcome of one method in one scenario.

  Attributes:
    label: Method label, e.g. 'simex:50'.
    replicates: SIMEX replicate count, None for the other methods.
    mse: MSE of the dataset-averaged curve against the truth.
    wall_time_seconds: Summed estimation time over datasets.
    degenerate_cell_count: Number of fallback local solves.
    curve: Dataset-averaged curve.
    dataset_curves: Per-dataset curves, shape [n_datasets, nb_x].
    dataset_mses: Per-dataset MSEs.
    z_digests: Digests of the surrogate vectors the method consumed.
    missing_point_count: Number of (dataset, x) cells left without an
      extrapolated value. They are skipped by the dataset average, and x
      points missing from every dataset are skipped by the MSE.
  """
  label: str
  replicates: Optional[int]
  mse: float
  wall_time_seconds: float
  degenerate_cell_count: int
  curve: np.ndarray
  dataset_curves: np.ndarray
  dataset_mses: np.ndarray
  z_digests: List[str]
  missing_point_count: int = 0


@dataclasses.dataclass
class ScenarioResult:
  spec: SimulationSpec
  methods: List[MethodResult]
  truth: np.ndarray
  threads: int

  @property
  def signal_to_noise(self) -> float:
    return self.spec.signal_to_noise

  def method(self, label: str) -> MethodResult:
    for result in self.methods:
      if result.label == label:
        return result
    raise KeyError(label)


def _digest(z: Tensor) -> str:
  return hashlib.sha256(np.asarray(z, dtype=np.float64).tobytes()).hexdigest()


def _mse(curve: np.ndarray, truth: np.ndarray) -> float:
  return float(np.nanmean((curve - truth)**2))


def average_curves(curves: np.ndarray) -> Tuple[np.ndarray, int]:
  """Pointwise average of per-dataset curves that skips missing values.

  Args:
    curves: Array of shape [n_datasets, nb_x], NaN where a value is missing.
  Returns:
    curve: Average over the datasets; NaN where every dataset is missing.
    nb_missing: Number of missing cells.
  """
  missing = np.isnan(curves)
  present = np.sum(~missing, axis=0)
  total = np.sum(np.where(missing, 0., curves), axis=0)
  curve = np.where(present > 0, total / np.maximum(present, 1), np.nan)
  return curve, int(np.sum(missing))


def run_scenario(spec: SimulationSpec, num_workers: int = 1) -> ScenarioResult:
  """Runs every method of `spec` on shared datasets.

  Datasets are processed by `num_workers` threads. Each dataset draws from its
  own stream and results are reduced in dataset order, so everything except
  the timings is independent of `num_workers`. The time of a method is the
  sum of its per-dataset estimation times; data generation and a compilation
  warm-up on dataset 0 are excluded.

  Args:
    spec: Scenario.
    num_workers: Number of worker threads.
  Returns:
    result: ScenarioResult.
  """
  if num_workers < 1:
    raise ValueError(f'num_workers must be >= 1, got {num_workers}.')
  method_specs = spec.method_specs
  logging.info('Scenario g=%s n=%d sigma_u2=%g: %d datasets, methods %s, '
               '%d workers.', spec.g_name, spec.n, spec.sigma_u2,
               spec.n_datasets, [m.label for m in method_specs], num_workers)

  warm_up = generate_dataset(spec, 0)
  for method_spec in method_specs:
    estimate_curve(spec, method_spec, warm_up.sample, 0)

  def process(dataset_index):
    dataset = generate_dataset(spec, dataset_index)
    outputs = []
    for method_spec in method_specs:
      start = time.perf_counter()
      curve, degenerate = estimate_curve(spec, method_spec, dataset.sample,
                                         dataset_index)
      elapsed = time.perf_counter() - start
      outputs.append((curve, degenerate, elapsed, _digest(dataset.sample.z)))
    logging.vlog(1, 'Dataset %d done.', dataset_index)
    return outputs

  indices = range(spec.n_datasets)
  if num_workers == 1:
    per_dataset = [process(i) for i in indices]
  else:
    with concurrent.futures.ThreadPoolExecutor(num_workers) as pool:
      per_dataset = list(pool.map(process, indices))

  truth = np.asarray(regression_function(spec.g_name)(jnp.asarray(spec.x_grid)))
  results = []
  for k, method_spec in enumerate(method_specs):
    curves = np.stack([outputs[k][0] for outputs in per_dataset])
    curve, nb_missing = average_curves(curves)
    if nb_missing:
      logging.warning('%s: %d of %d (dataset, x) cells are missing and are '
                      'left out of the average and the MSE.',
                      method_spec.label, nb_missing, curves.size)
    result = MethodResult(
        label=method_spec.label, replicates=method_spec.replicates,
        mse=_mse(curve, truth),
        wall_time_seconds=float(sum(outputs[k][2] for outputs in per_dataset)),
        degenerate_cell_count=sum(outputs[k][1] for outputs in per_dataset),
        curve=curve, dataset_curves=curves,
        dataset_mses=np.array([_mse(c, truth) for c in curves]),
        z_digests=[outputs[k][3] for outputs in per_dataset],
        missing_point_count=nb_missing)
    logging.info('%s: MSE %.6g, time %.3fs, %d degenerate solves.',
                 result.label, result.mse, result.wall_time_seconds,
                 result.degenerate_cell_count)
    results.append(result)
  return ScenarioResult(spec=spec, methods=results, truth=truth,
                        threads=num_workers)


######## Systematic error ########

_FIXED_NODES = asymptotics.QuadratureConfig(
    rule=asymptotics.Rule.FIXED_NODES, nodes=96)
_TRUE_MODEL_NAMES = {'xsinx': 'xsinx', 'square': 'quadratic', 'exp': 'exp'}


def true_model(spec: SimulationSpec) -> asymptotics.TrueModel:
  """Analytic model of the scenario's data generating process."""
  try:
    name = _TRUE_MODEL_NAMES[spec.g_name]
  except KeyError:
    raise ValueError(f'No analytic model for regression function '
                     f'{spec.g_name!r}.') from None
  return asymptotics.builtin_truth(name, spec.sigma_u2, tau2=spec.tau2)


def systematic_curve(
    spec: SimulationSpec,
    q: asymptotics.QuadratureConfig = _FIXED_NODES) -> np.ndarray:
  """Curve the extrapolated estimator tends to as the sample size grows.

  Every (x, lambda) cell of the profile is replaced by the population fit at
  the scenario's bandwidth, and the profile is extrapolated with the
  scenario's family. What separates this curve from the truth is the part of
  the error that averaging more datasets cannot remove: the finite-bandwidth
  bias and the misfit of the extrapolant to the lambda trend.

  Args:
    spec: Scenario with one of the built-in regression functions.
    q: Quadrature configuration.
  Returns:
    curve: Values over spec.x_grid.
  """
  m = true_model(spec)
  h = spec.resolved_bandwidth
  x_grid = spec.x_grid
  lambdas = np.asarray(spec.lambda_grid)
  g_hat = np.array([[asymptotics.population_fit(m, float(x), float(lam), h,
                                                q)[0]
                     for lam in lambdas] for x in x_grid])
  profile = locallinear.LambdaProfile(
      x_grid=x_grid, lambda_grid=lambdas, g_hat=g_hat,
      g_prime_hat=np.zeros_like(g_hat), method=locallinear.Method.EX,
      degenerate_count=np.zeros(g_hat.shape, dtype=np.int64))
  curve, _ = extrapolation.extrapolate_profile(profile, spec.family)
  return curve


def systematic_mse(spec: SimulationSpec,
                   q: asymptotics.QuadratureConfig = _FIXED_NODES) -> float:
  """MSE of `systematic_curve` against the truth on the scenario grid."""
  truth = np.asarray(regression_function(spec.g_name)(jnp.asarray(spec.x_grid)))
  value = _mse(systematic_curve(spec, q), truth)
  logging.info('Systematic MSE of g=%s n=%d sigma_u2=%g with %s '
               'extrapolation: %.6g.', spec.g_name, spec.n, spec.sigma_u2,
               spec.family, value)
  return value


######## Tables ########


def _fmt(value: float) -> str:
  return f'{value:.6g}'


def table_rows(results: Sequence[ScenarioResult],
               include_timing: bool = True) -> List[List[str]]:
  """Header and rows of the comparison table, one row per (g, sigma_u2, method).

  Each distinct n contributes an MSE column block (and a Time block when
  `include_timing`); cells of absent (row, n) combinations are empty.
  """
  if not results:
    raise ValueError('No results to tabulate.')
  ns = sorted({r.spec.n for r in results})
  cells, threads, order = {}, {}, []
  for result in results:
    for method in result.methods:
      row = (result.spec.g_name, result.spec.sigma_u2, method.label,
             method.replicates)
      if row not in threads:
        order.append(row)
        threads[row] = set()
      cells[row + (result.spec.n,)] = method
      threads[row].add(result.threads)
  header = ['g', 'sigma_u2', 'method', 'B']
  for n in ns:
    header.append(f'MSE_n{n}')
    if include_timing:
      header.append(f'Time_n{n}')
  if include_timing:
    header.append('threads')
  # Rows are grouped by (g, sigma_u2) in order of first appearance.
  groups = []
  for row in order:
    if row[:2] not in groups:
      groups.append(row[:2])
  rows = [header]
  for group in groups:
    for row in (r for r in order if r[:2] == group):
      g_name, sigma_u2, label, replicates = row
      line = [g_name, _fmt(sigma_u2), label.partition(':')[0],
              '' if replicates is None else str(replicates)]
      for n in ns:
        method = cells.get(row + (n,))
        line.append('' if method is None else _fmt(method.mse))
        if include_timing:
          line.append('' if method is None else _fmt(method.wall_time_seconds))
      if include_timing:
        line.append('/'.join(str(t) for t in sorted(threads[row])))
      rows.append(line)
  return rows


def emit_tables(results: Sequence[ScenarioResult], fmt: str = 'csv',
                include_timing: bool = True) -> str:
  """Formats results as CSV or as a markdown table."""
  rows = table_rows(results, include_timing)
  if fmt == 'csv':
    return ''.join(','.join(row) + '\n' for row in rows)
  elif fmt == 'markdown':
    lines = ['| ' + ' | '.join(rows[0]) + ' |',
             '|' + '|'.join('---' for _ in rows[0]) + '|']
    lines += ['| ' + ' | '.join(row) + ' |' for row in rows[1:]]
    return '\n'.join(lines) + '\n'
  raise ValueError(f"Unknown table format {fmt!r}; expected 'csv' or "
                   "'markdown'.")


def write_tables(path: str, results: Sequence[ScenarioResult],
                 include_timing: bool = True):
  config = {'scenarios': [r.spec.to_dict() for r in results]}
  with utils.open_file(path, 'w') as f:
    f.write(utils.config_line(config))
    f.write(emit_tables(results, 'csv', include_timing))


def curve_file_stem(spec: SimulationSpec) -> str:
  return f'{spec.g_name.replace(":", "_")}_n{spec.n}_s{spec.sigma_u2:g}'


def write_curves(directory: str, result: ScenarioResult) -> List[str]:
  """Writes the averaged curves and the per-dataset curves of a scenario."""
  spec = result.spec
  stem = f'{directory}/curves/{curve_file_stem(spec)}'
  columns = {'x': spec.x_grid, 'truth': result.truth}
  for method in result.methods:
    columns[method.label.replace(':', '_')] = method.curve
  paths = [stem + '.csv']
  utils.write_csv(paths[0], columns, spec.to_dict())
  for method in result.methods:
    per_dataset = {'x': spec.x_grid}
    for i, curve in enumerate(method.dataset_curves):
      per_dataset[f'dataset{i}'] = curve
    path = f'{stem}_{method.label.replace(":", "_")}_datasets.csv'
    utils.write_csv(path, per_dataset, spec.to_dict())
    paths.append(path)
  return paths
