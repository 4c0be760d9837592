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
"""Gaussian density identities and the closed-form conditional kernel moments.

With a standard normal kernel K, the expectations over the pseudo-noise
V ~ N(0, lam * sigma_u2) of K_h(z + V - x), (z + V - x) K_h(.) and
(z + V - x)^2 K_h(.) are available in closed form. They are what makes the EX
estimator free of simulation. All density arithmetic is carried out in log
space and exponentiated last.
"""

import math
from typing import NamedTuple, Tuple

import jax
import jax.numpy as jnp
from jax_simex.src import utils

Tensor = utils.Tensor

_LOG_2PI = math.log(2. * math.pi)


class GaussParams(NamedTuple):
  """Parameters of a univariate normal density phi(.; mean, variance)."""
  mean: Tensor
  variance: Tensor


class CondMoments(NamedTuple):
  """Conditional kernel moments of order 0, 1 and 2 given (Y, Z).

  Fields:
    * m0: E[K_h(Z(lam) - x) | Y, Z].
    * m1: E[(Z(lam) - x) K_h(Z(lam) - x) | Y, Z].
    * m2: E[(Z(lam) - x)^2 K_h(Z(lam) - x) | Y, Z].
    * evaluated_at, surrogate, bandwidth, lam, sigma_u2: the inputs.
  """
  m0: Tensor
  m1: Tensor
  m2: Tensor
  evaluated_at: Tensor
  surrogate: Tensor
  bandwidth: Tensor
  lam: Tensor
  sigma_u2: Tensor


def _log_pdf(x: Tensor, mean: Tensor, variance: Tensor) -> Tensor:
  return -0.5 * (_LOG_2PI + jnp.log(variance)) - 0.5 * (x - mean)**2 / variance


def log_pdf(x: Tensor, p: GaussParams) -> Tensor:
  """Log of the normal density phi(x; p.mean, p.variance)."""
  utils.check_positive('variance', p.variance)
  return _log_pdf(x, p.mean, p.variance)


def gaussian_product(p1: GaussParams,
                     p2: GaussParams) -> Tuple[Tensor, GaussParams]:
  """Writes phi(u; p1) * phi(u; p2) as exp(log_scale) * phi(u; p).

  Args:
    p1: First factor.
    p2: Second factor.
  Returns:
    log_scale: log phi(mean1 - mean2; 0, var1 + var2).
    p: Parameters of the normalised product density.
  """
  utils.check_positive('variance of the first factor', p1.variance)
  utils.check_positive('variance of the second factor', p2.variance)
  total = p1.variance + p2.variance
  log_scale = _log_pdf(p1.mean - p2.mean, 0., total)
  mean = (p1.variance * p2.mean + p2.variance * p1.mean) / total
  variance = p1.variance * p2.variance / total
  return log_scale, GaussParams(mean, variance)


def power_identity(p: GaussParams, k: int) -> Tuple[Tensor, GaussParams]:
  """Writes phi(u; p)^k as exp(log_scale) * phi(u; p_out), for k in {2, 3}."""
  if k not in (2, 3):
    raise ValueError(f'Only powers 2 and 3 are supported, got k={k}.')
  utils.check_positive('variance', p.variance)
  log_scale = (-0.5 * (k - 1) * (_LOG_2PI + jnp.log(p.variance))
               - 0.5 * math.log(k))
  return log_scale, GaussParams(p.mean, p.variance / k)


def smoothing_ratio(h: Tensor, lam: Tensor, sigma_u2: Tensor) -> Tensor:
  """r(lam, h) = h^2 / (h^2 + lam * sigma_u2)."""
  return h**2 / (h**2 + lam * sigma_u2)


@jax.jit
def cond_moment_factors(z: Tensor, x: Tensor, h: Tensor, lam: Tensor,
                        sigma_u2: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
  """Unchecked kernel of `cond_moments`, shaped for use inside estimators.

  Args:
    z: Surrogate value(s).
    x: Evaluation point(s), broadcastable against z.
    h: Bandwidth.
    lam: Added-noise multiplier.
    sigma_u2: Measurement-error variance.
  Returns:
    log_m0: log phi(x; z, h^2 + lam * sigma_u2).
    f1: m1 / m0.
    f2: m2 / m0.
  """
  extra = lam * sigma_u2
  r = smoothing_ratio(h, lam, sigma_u2)
  log_m0 = _log_pdf(x, z, h**2 + extra)
  diff = z - x
  f1 = r * diff
  f2 = r**2 * diff**2 + extra * r
  return log_m0, f1, f2


def cond_moments(z: Tensor, x: Tensor, h: Tensor, lam: Tensor,
                 sigma_u2: Tensor) -> CondMoments:
  """Closed-form conditional kernel moments for a standard normal kernel.

  Args:
    z: Observed surrogate Z.
    x: Point at which the local fit is evaluated.
    h: Bandwidth, positive.
    lam: Added-noise multiplier, non-negative.
    sigma_u2: Measurement-error variance, non-negative.
  Returns:
    moments: CondMoments.
  """
  utils.check_positive('bandwidth', h)
  utils.check_nonnegative('lambda', lam)
  utils.check_nonnegative('sigma_u2', sigma_u2)
  z, x, h, lam, sigma_u2 = (jnp.asarray(v, dtype=jnp.float64)
                            for v in (z, x, h, lam, sigma_u2))
  log_m0, f1, f2 = cond_moment_factors(z, x, h, lam, sigma_u2)
  m0 = jnp.exp(log_m0)
  return CondMoments(m0=m0, m1=f1 * m0, m2=f2 * m0, evaluated_at=x,
                     surrogate=z, bandwidth=h, lam=lam, sigma_u2=sigma_u2)
