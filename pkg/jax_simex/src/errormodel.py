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
"""Replicate-measurement ingestion and response transformations."""

import enum
from typing import NamedTuple

from absl import logging
import jax
import jax.numpy as jnp
from jax_simex.src import locallinear
from jax_simex.src import utils
import numpy as np

Tensor = utils.Tensor


class ReplicateSample(NamedTuple):
  """Responses with two independent surrogate measurements per subject."""
  y: Tensor
  w1: Tensor
  w2: Tensor


class Transform(enum.Enum):
  NONE = 'none'
  SQRT = 'sqrt'


def collapse_replicates(r: ReplicateSample) -> locallinear.ObservedSample:
  """Averages the two replicates and estimates their error variance.

  Under i.i.d. replicate errors, (W1 - W2)/2 and the averaged surrogate
  (W1 + W2)/2 carry the same error variance, so the sample variance of the
  half differences is returned as the sigma_u2 of the averaged surrogate.

  Args:
    r: Replicate sample with n >= 2 subjects.
  Returns:
    sample: ObservedSample with z = (w1 + w2)/2.
  """
  y, w1, w2 = (np.asarray(v, dtype=np.float64) for v in r)
  if not y.ndim == w1.ndim == w2.ndim == 1 or not (
      y.shape == w1.shape == w2.shape):
    raise ValueError(f'y, w1 and w2 must be vectors of equal length, got '
                     f'shapes {y.shape}, {w1.shape} and {w2.shape}.')
  if y.shape[0] < 2:
    raise ValueError('At least 2 subjects are needed to estimate the '
                     f'measurement error variance, got {y.shape[0]}.')
  for name, values in (('y', y), ('w1', w1), ('w2', w2)):
    utils.check_finite(name, values)
  half_diff = (w1 - w2) / 2.
  sigma_u2 = float(np.var(half_diff, ddof=1))
  logging.info('Estimated measurement error variance %g from %d replicate '
               'pairs.', sigma_u2, y.shape[0])
  return locallinear.ObservedSample(
      y=jnp.asarray(y), z=jnp.asarray((w1 + w2) / 2.), sigma_u2=sigma_u2)


def transform_response(y: Tensor, kind: Transform) -> Tensor:
  """Identity or elementwise square root of the responses."""
  y = jnp.asarray(y, dtype=jnp.float64)
  if kind is Transform.NONE:
    return y
  elif kind is Transform.SQRT:
    negative = np.flatnonzero(np.asarray(y) < 0.)
    if negative.size:
      raise ValueError(f'Square root transform needs non-negative responses; '
                       f'row {int(negative[0])} is {float(y[negative[0]])}.')
    return jnp.sqrt(y)
  raise ValueError(f'Unknown transform {kind}.')


def attenuation_curve(lambdas, beta: float, sigma_x2: float,
                      sigma_u2: float) -> np.ndarray:
  """Naive linear-regression slope at added noise lambda.

  beta sigma_x2 / (sigma_x2 + (1 + lambda) sigma_u2), equal to beta at -1.
  """
  lambdas = np.asarray(lambdas, dtype=np.float64)
  return beta * sigma_x2 / (sigma_x2 + (1. + lambdas) * sigma_u2)


def simulate_replicates(key: Tensor, n: int, g=jnp.sin,
                        sigma_x2: float = 1., sigma_w2: float = 0.36,
                        tau2: float = 1.):
  """Synthetic replicate-measurement sample with known covariates.

  Args:
    key: PRNGKey.
    n: Number of subjects.
    g: Regression function.
    sigma_x2: Variance of X ~ N(0, sigma_x2).
    sigma_w2: Error variance of each single measurement W_j = X + U_j.
    tau2: Variance of the regression noise.
  Returns:
    sample: ReplicateSample.
    x: The hidden true covariates.
  """
  key_x, key_eps, key_u1, key_u2 = jax.random.split(key, 4)
  x = jnp.sqrt(sigma_x2) * jax.random.normal(key_x, (n,))
  y = g(x) + jnp.sqrt(tau2) * jax.random.normal(key_eps, (n,))
  w1 = x + jnp.sqrt(sigma_w2) * jax.random.normal(key_u1, (n,))
  w2 = x + jnp.sqrt(sigma_w2) * jax.random.normal(key_u2, (n,))
  return ReplicateSample(y, w1, w2), x
