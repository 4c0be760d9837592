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
"""Naive, EX and SIMEX local linear estimators with a Gaussian kernel.

Every estimator solves, at each evaluation point x, the 2x2 normal equations

  [[S0, S1], [S1, S2]] (b0, b1) = (T0, T1)

of a kernel-weighted local linear fit. They only differ in how the kernel sums
are formed:
  * naive: plain kernel weights K_h(Z_i - x) on the observed surrogates.
  * EX: the weights and their first two moments are replaced by their
    conditional expectations over the added noise, in closed form.
  * SIMEX: naive fits on B sets of remeasured pseudo-data, averaged.

Weights are normalised by their largest value before summing; the solution of
the normal equations does not depend on a common scale.
"""

import dataclasses
import enum
from typing import NamedTuple, Optional, Sequence, Tuple

from absl import logging
import jax
import jax.numpy as jnp
from jax_simex.src import gausskit
from jax_simex.src import utils
import numpy as np

Tensor = utils.Tensor

# Folded into the key path of SIMEX pseudo-noise so that it never shares a
# stream with dataset generation.
SIMEX_TAG = 0x51


class Method(enum.Enum):
  EX = 'ex'
  SIMEX = 'simex'
  NAIVE = 'naive'


class ObservedSample(NamedTuple):
  """Responses Y_i, surrogates Z_i = X_i + U_i and the known Var(U)."""
  y: Tensor
  z: Tensor
  sigma_u2: float


def check_sample(s: ObservedSample) -> ObservedSample:
  """Validates `s` and returns it with float64 array fields."""
  y = jnp.asarray(s.y, dtype=jnp.float64)
  z = jnp.asarray(s.z, dtype=jnp.float64)
  if y.ndim != 1 or z.shape != y.shape:
    raise ValueError(f'y and z must be vectors of equal length, got shapes '
                     f'{y.shape} and {z.shape}.')
  if y.shape[0] < 3:
    raise ValueError(f'At least 3 observations are needed, got {y.shape[0]}.')
  utils.check_finite('y', y)
  utils.check_finite('z', z)
  utils.check_nonnegative('sigma_u2', s.sigma_u2)
  return ObservedSample(y, z, float(s.sigma_u2))


class PointFit(NamedTuple):
  g_hat: float
  g_prime_hat: float
  degenerate: bool


class SmoothedSums(NamedTuple):
  """Averaged conditional kernel sums entering the EX normal equations.

  Fields:
    * s0: n^-1 sum phi(x; Z_i, h^2 + lam sigma_u2).
    * s1: n^-1 sum E[(Z_i(lam) - x) K_h | Y, Z].
    * s2: n^-1 sum E[(Z_i(lam) - x)^2 K_h | Y, Z].
    * t0: n^-1 sum Y_i phi(x; Z_i, h^2 + lam sigma_u2).
    * t1: n^-1 sum Y_i E[(Z_i(lam) - x) K_h | Y, Z].
  """
  s0: Tensor
  s1: Tensor
  s2: Tensor
  t0: Tensor
  t1: Tensor


class LambdaProfile(NamedTuple):
  """Estimates over an x grid (rows) and a lambda grid (columns).

  Fields:
    * x_grid: Evaluation points, shape [nx].
    * lambda_grid: Added-noise multipliers, shape [nl].
    * g_hat: Estimates of g(x) for each lambda, shape [nx, nl].
    * g_prime_hat: Estimates of g'(x), shape [nx, nl].
    * method: Method which produced the profile.
    * degenerate_count: Number of fallback solves per cell, shape [nx, nl].
      For SIMEX this counts replicates, for the other methods it is 0 or 1.
    * replicates: Number of solves averaged into each cell.
  """
  x_grid: np.ndarray
  lambda_grid: np.ndarray
  g_hat: np.ndarray
  g_prime_hat: np.ndarray
  method: Method
  degenerate_count: np.ndarray
  replicates: int = 1

  @property
  def degenerate(self) -> np.ndarray:
    """Cells in which every averaged solve fell back."""
    return self.degenerate_count >= self.replicates


@dataclasses.dataclass(frozen=True)
class SmootherConfig:
  """Configuration shared by the three estimators.

  Attributes:
    bandwidth: Kernel bandwidth h.
    lambda_grid: Strictly ascending added-noise multipliers, all >= 0.
    det_floor: Relative floor on the normal-equation determinant below which
      the locally constant fallback is used.
    simex_replicates: Number B of pseudo-data sets per lambda for SIMEX.
    seed: Master seed of the SIMEX pseudo-noise streams.
  """
  bandwidth: float
  lambda_grid: Tuple[float, ...] = (0.,)
  det_floor: float = 1e-12
  simex_replicates: int = 50
  seed: int = 0

  def __post_init__(self):
    object.__setattr__(self, 'lambda_grid',
                       tuple(float(l) for l in self.lambda_grid))
    utils.check_positive('bandwidth', self.bandwidth)
    utils.check_positive('det_floor', self.det_floor)
    if not self.lambda_grid:
      raise ValueError('lambda_grid must not be empty.')
    if self.lambda_grid[0] < 0.:
      raise ValueError(f'lambda_grid must start at a value >= 0, got '
                       f'{self.lambda_grid[0]}.')
    if np.any(np.diff(self.lambda_grid) <= 0.):
      raise ValueError(f'lambda_grid must be strictly ascending, got '
                       f'{self.lambda_grid}.')
    if self.simex_replicates < 1:
      raise ValueError(f'simex_replicates must be >= 1, got '
                       f'{self.simex_replicates}.')

  @staticmethod
  def default_bandwidth(n: int) -> float:
    return float(n) ** (-0.2)

  @staticmethod
  def standard_lambda_grid() -> Tuple[float, ...]:
    return tuple(utils.parse_grid('0:0.2:2').tolist())


######## Local solves ########


def _solve_local(s0, s1, s2, t0, t1, det_floor):
  """Solves the 2x2 normal equations, falling back to a local constant."""
  det = s0 * s2 - s1**2
  degenerate = det <= det_floor * s0 * s2
  safe_det = jnp.where(degenerate, 1., det)
  safe_s0 = jnp.where(s0 > 0., s0, 1.)
  g = jnp.where(degenerate, t0 / safe_s0, (s2 * t0 - s1 * t1) / safe_det)
  g_prime = jnp.where(degenerate, 0., (s0 * t1 - s1 * t0) / safe_det)
  return g, g_prime, degenerate


def _naive_point(y, z, x, h, det_floor):
  log_w = gausskit._log_pdf(x, z, h**2)  # pylint: disable=protected-access
  w = jnp.exp(log_w - jnp.max(log_w))
  d = z - x
  return _solve_local(jnp.sum(w), jnp.sum(d * w), jnp.sum(d**2 * w),
                      jnp.sum(y * w), jnp.sum(y * d * w), det_floor)


def _ex_point(y, z, sigma_u2, x, lam, h, det_floor):
  log_m0, f1, f2 = gausskit.cond_moment_factors(z, x, h, lam, sigma_u2)
  w = jnp.exp(log_m0 - jnp.max(log_m0))
  return _solve_local(jnp.sum(w), jnp.sum(f1 * w), jnp.sum(f2 * w),
                      jnp.sum(y * w), jnp.sum(y * f1 * w), det_floor)


_naive_point_jit = jax.jit(_naive_point)
_ex_point_jit = jax.jit(_ex_point)
_naive_column = jax.jit(jax.vmap(_naive_point,
                                 in_axes=(None, None, 0, None, None)))
_ex_column = jax.jit(jax.vmap(_ex_point,
                              in_axes=(None, None, None, 0, None, None, None)))


def _pseudo_data(z, lam, sigma_u2, key):
  return z + jnp.sqrt(lam * sigma_u2) * jax.random.normal(
      key, z.shape, dtype=z.dtype)


@jax.jit
def _simex_column(y, z, sigma_u2, x_grid, lam, h, det_floor, keys):
  def replicate(key):
    return _naive_column(y, _pseudo_data(z, lam, sigma_u2, key), x_grid, h,
                         det_floor)
  return jax.lax.map(replicate, keys)


def _check_grid(x_grid) -> Tensor:
  x_grid = jnp.atleast_1d(jnp.asarray(x_grid, dtype=jnp.float64))
  if x_grid.ndim != 1 or x_grid.shape[0] == 0:
    raise ValueError('x_grid must be a non-empty vector.')
  utils.check_finite('x_grid', x_grid)
  return x_grid


def _log_degenerate(method: Method, count: np.ndarray, total: int):
  nb_degenerate = int(np.sum(count))
  if nb_degenerate:
    logging.warning('%s: %d of %d local solves fell back to a locally '
                    'constant fit.', method.name, nb_degenerate, total)


######## Point operations ########


def naive_fit(s: ObservedSample, x: float, h: float,
              det_floor: float = 1e-12) -> PointFit:
  """Local linear fit at x treating the surrogates as the true covariate."""
  s = check_sample(s)
  utils.check_positive('bandwidth', h)
  g, g_prime, degenerate = _naive_point_jit(s.y, s.z, x, h, det_floor)
  return PointFit(float(g), float(g_prime), bool(degenerate))


def ex_fit_point(s: ObservedSample, x: float, lam: float, h: float,
                 det_floor: float = 1e-12) -> PointFit:
  """EX estimate of (g(x), g'(x)) at a single added-noise level lam.

  Args:
    s: Observed sample.
    x: Evaluation point.
    lam: Added-noise multiplier, non-negative.
    h: Bandwidth.
    det_floor: Relative determinant floor of the degeneracy guard.
  Returns:
    fit: PointFit, locally constant if the local system is degenerate.
  """
  s = check_sample(s)
  utils.check_positive('bandwidth', h)
  utils.check_nonnegative('lambda', lam)
  g, g_prime, degenerate = _ex_point_jit(s.y, s.z, s.sigma_u2, x, lam, h,
                                         det_floor)
  return PointFit(float(g), float(g_prime), bool(degenerate))


def smoothed_sums(s: ObservedSample, x: float, lam: float,
                  h: float) -> SmoothedSums:
  """Averaged conditional kernel sums at x, without normalisation."""
  s = check_sample(s)
  moments = gausskit.cond_moments(s.z, x, h, lam, s.sigma_u2)
  return SmoothedSums(s0=jnp.mean(moments.m0), s1=jnp.mean(moments.m1),
                      s2=jnp.mean(moments.m2), t0=jnp.mean(s.y * moments.m0),
                      t1=jnp.mean(s.y * moments.m1))


def pseudo_data(z: Tensor, lam: float, sigma_u2: float,
                key: Tensor) -> Tensor:
  """Remeasured surrogates z + sqrt(lam) V with V ~ N(0, sigma_u2)."""
  utils.check_nonnegative('lambda', lam)
  utils.check_nonnegative('sigma_u2', sigma_u2)
  z = jnp.asarray(z, dtype=jnp.float64)
  if lam == 0.:
    return z
  return _pseudo_data(z, lam, sigma_u2, key)


######## Profiles ########


def naive_profile(s: ObservedSample, x_grid: Tensor,
                  cfg: SmootherConfig) -> LambdaProfile:
  """Single-column profile of the naive estimator, at lambda = 0."""
  s = check_sample(s)
  x_grid = _check_grid(x_grid)
  g, g_prime, degenerate = _naive_column(s.y, s.z, x_grid, cfg.bandwidth,
                                         cfg.det_floor)
  count = np.asarray(degenerate, dtype=np.int64)[:, None]
  _log_degenerate(Method.NAIVE, count, count.size)
  return LambdaProfile(
      x_grid=np.asarray(x_grid), lambda_grid=np.zeros((1,)),
      g_hat=np.asarray(g)[:, None], g_prime_hat=np.asarray(g_prime)[:, None],
      method=Method.NAIVE, degenerate_count=count)


def ex_profile(s: ObservedSample, x_grid: Tensor,
               cfg: SmootherConfig) -> LambdaProfile:
  """EX estimates for every (x, lambda) cell; deterministic.

  Args:
    s: Observed sample.
    x_grid: Evaluation points.
    cfg: Smoother configuration; `simex_replicates` and `seed` are unused.
  Returns:
    profile: LambdaProfile with method EX.
  """
  s = check_sample(s)
  x_grid = _check_grid(x_grid)
  columns = [_ex_column(s.y, s.z, s.sigma_u2, x_grid, lam, cfg.bandwidth,
                        cfg.det_floor) for lam in cfg.lambda_grid]
  g = np.stack([np.asarray(c[0]) for c in columns], axis=1)
  g_prime = np.stack([np.asarray(c[1]) for c in columns], axis=1)
  count = np.stack([np.asarray(c[2], dtype=np.int64) for c in columns], axis=1)
  _log_degenerate(Method.EX, count, count.size)
  return LambdaProfile(
      x_grid=np.asarray(x_grid), lambda_grid=np.asarray(cfg.lambda_grid),
      g_hat=g, g_prime_hat=g_prime, method=Method.EX, degenerate_count=count)


def simex_keys(seed: int, lambda_index: int, nb_replicates: int,
               stream_prefix: Sequence[int] = ()) -> Tensor:
  """Keys of the B pseudo-noise streams used at one lambda index."""
  base = utils.stream_key(seed, *stream_prefix, SIMEX_TAG, lambda_index)
  return jax.vmap(lambda b: jax.random.fold_in(base, b))(
      jnp.arange(nb_replicates))


def simex_replicates(
    s: ObservedSample, x_grid: Tensor, cfg: SmootherConfig,
    lambda_index: int, stream_prefix: Sequence[int] = ()
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  """Per-replicate naive fits on pseudo-data at one lambda of the grid.

  Args:
    s: Observed sample.
    x_grid: Evaluation points.
    cfg: Smoother configuration.
    lambda_index: Index into `cfg.lambda_grid`.
    stream_prefix: Extra integers (e.g. a dataset index) placed between the
      seed and the lambda index in the stream path.
  Returns:
    g_hat, g_prime_hat, degenerate: Arrays of shape [B, nx].
  """
  s = check_sample(s)
  x_grid = _check_grid(x_grid)
  lam = cfg.lambda_grid[lambda_index]
  nb_replicates = cfg.simex_replicates
  if lam == 0.:
    # No pseudo-noise at lambda = 0; every replicate is the naive fit.
    column = _naive_column(s.y, s.z, x_grid, cfg.bandwidth, cfg.det_floor)
    return tuple(np.repeat(np.asarray(c)[None], nb_replicates, axis=0)
                 for c in column)
  keys = simex_keys(cfg.seed, lambda_index, nb_replicates, stream_prefix)
  g, g_prime, degenerate = _simex_column(s.y, s.z, s.sigma_u2, x_grid, lam,
                                         cfg.bandwidth, cfg.det_floor, keys)
  return np.asarray(g), np.asarray(g_prime), np.asarray(degenerate)


def simex_profile(s: ObservedSample, x_grid: Tensor, cfg: SmootherConfig,
                  stream_prefix: Sequence[int] = ()) -> LambdaProfile:
  """Classical SIMEX estimates averaged over B replicates per lambda."""
  s = check_sample(s)
  x_grid = _check_grid(x_grid)
  nb_replicates = cfg.simex_replicates
  g_cols, g_prime_cols, count_cols = [], [], []
  for k, lam in enumerate(cfg.lambda_grid):
    if lam == 0.:
      g, g_prime, degenerate = _naive_column(s.y, s.z, x_grid, cfg.bandwidth,
                                             cfg.det_floor)
      g_cols.append(np.asarray(g))
      g_prime_cols.append(np.asarray(g_prime))
      count_cols.append(nb_replicates * np.asarray(degenerate, dtype=np.int64))
      continue
    g, g_prime, degenerate = simex_replicates(s, x_grid, cfg, k, stream_prefix)
    logging.vlog(1, 'SIMEX lambda=%g: %d replicates.', lam, nb_replicates)
    g_cols.append(np.sum(g, axis=0) / nb_replicates)
    g_prime_cols.append(np.sum(g_prime, axis=0) / nb_replicates)
    count_cols.append(np.sum(degenerate, axis=0, dtype=np.int64))
  count = np.stack(count_cols, axis=1)
  _log_degenerate(Method.SIMEX, count, count.size * nb_replicates)
  return LambdaProfile(
      x_grid=np.asarray(x_grid), lambda_grid=np.asarray(cfg.lambda_grid),
      g_hat=np.stack(g_cols, axis=1), g_prime_hat=np.stack(g_prime_cols, axis=1),
      method=Method.SIMEX, degenerate_count=count, replicates=nb_replicates)


def profile(method: Method, s: ObservedSample, x_grid: Tensor,
            cfg: SmootherConfig,
            stream_prefix: Optional[Sequence[int]] = None) -> LambdaProfile:
  """Dispatches to the profile function of `method`."""
  if method is Method.EX:
    return ex_profile(s, x_grid, cfg)
  elif method is Method.SIMEX:
    return simex_profile(s, x_grid, cfg, stream_prefix or ())
  elif method is Method.NAIVE:
    return naive_profile(s, x_grid, cfg)
  raise ValueError(f'Unknown method {method}.')
