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

"""Tests for the Gaussian identities and conditional kernel moments."""

import math

from absl.testing import absltest
from absl.testing import parameterized

import jax
import jax.numpy as jnp
from jax_simex.src import gausskit
import numpy as np
import scipy.integrate


def _pdf(u, p):
  return np.exp(np.asarray(gausskit.log_pdf(u, p)))


class LogPdfTest(parameterized.TestCase):

  def test_standard_normal_mode(self):
    value = gausskit.log_pdf(0., gausskit.GaussParams(0., 1.))
    self.assertAlmostEqual(float(value), -0.5 * math.log(2. * math.pi),
                           places=12)

  def test_symmetry(self):
    p = gausskit.GaussParams(1.3, 0.7)
    sigma = math.sqrt(0.7)
    self.assertAlmostEqual(float(gausskit.log_pdf(1.3 + sigma, p)),
                           float(gausskit.log_pdf(1.3 - sigma, p)), places=12)

  def test_far_tail_value(self):
    # -0.5 log(2 pi 0.04) - 312.5, evaluated in extended precision.
    value = gausskit.log_pdf(5., gausskit.GaussParams(0., 0.04))
    np.testing.assert_allclose(float(value), -311.8095006207706, rtol=1e-13)

  @parameterized.named_parameters(('zero', 0.), ('negative', -1.))
  def test_invalid_variance(self, variance):
    with self.assertRaisesRegex(ValueError, 'variance'):
      gausskit.log_pdf(0., gausskit.GaussParams(0., variance))

  @parameterized.named_parameters(
      ('standard', 0., 1.), ('narrow', 2., 0.01), ('wide', -3., 25.))
  def test_integrates_to_one(self, mean, variance):
    p = gausskit.GaussParams(mean, variance)
    total, _ = scipy.integrate.quad(lambda u: float(_pdf(u, p)), -np.inf,
                                    np.inf, epsabs=1e-13, epsrel=1e-12)
    self.assertAlmostEqual(total, 1., delta=1e-10)


class IdentityTest(parameterized.TestCase):

  def test_product_of_standard_normals(self):
    log_scale, p = gausskit.gaussian_product(gausskit.GaussParams(0., 1.),
                                             gausskit.GaussParams(0., 1.))
    self.assertAlmostEqual(
        float(log_scale),
        float(gausskit.log_pdf(0., gausskit.GaussParams(0., 2.))), places=12)
    self.assertAlmostEqual(float(p.mean), 0.)
    self.assertAlmostEqual(float(p.variance), 0.5)

  def test_product_of_identical_factors(self):
    mu, var = 0.4, 2.5
    log_scale, p = gausskit.gaussian_product(gausskit.GaussParams(mu, var),
                                             gausskit.GaussParams(mu, var))
    np.testing.assert_allclose(np.exp(float(log_scale)),
                               1. / (2. * math.sqrt(math.pi * var)),
                               rtol=1e-12)
    np.testing.assert_allclose([float(p.mean), float(p.variance)],
                               [mu, var / 2.], rtol=1e-12)

  @parameterized.named_parameters(
      ('fixed', 1., 2., 3., 4., (-2., 0., 1., 5.)),
      ('random', None, None, None, None, None))
  def test_product_pointwise(self, mu1, var1, mu2, var2, points):
    if mu1 is None:
      keys = jax.random.split(jax.random.PRNGKey(0), 3)
      mu1, mu2 = (float(v) for v in jax.random.uniform(keys[0], (2,),
                                                          minval=-2.,
                                                          maxval=2.))
      var1, var2 = (float(v) for v in jax.random.uniform(keys[1], (2,),
                                                          minval=0.1,
                                                          maxval=3.))
      points = jax.random.uniform(keys[2], (16,), minval=-4., maxval=4.)
    points = np.asarray(points)
    p1, p2 = gausskit.GaussParams(mu1, var1), gausskit.GaussParams(mu2, var2)
    log_scale, p = gausskit.gaussian_product(p1, p2)
    lhs = _pdf(points, p1) * _pdf(points, p2)
    rhs = np.exp(float(log_scale)) * _pdf(points, p)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

  @parameterized.named_parameters(
      ('square', 2, 1. / (2. * math.sqrt(math.pi)), 0.5),
      ('cube', 3, 1. / (2. * math.sqrt(3.) * math.pi), 1. / 3.))
  def test_power_of_standard_normal(self, k, scale, variance):
    log_scale, p = gausskit.power_identity(gausskit.GaussParams(0., 1.), k)
    np.testing.assert_allclose(np.exp(float(log_scale)), scale, rtol=1e-12)
    np.testing.assert_allclose(float(p.variance), variance, rtol=1e-12)
    self.assertEqual(float(p.mean), 0.)

  @parameterized.named_parameters(
      ('square_fixed', 2, 4., 9., (0., 4., 10.)),
      ('square_random', 2, -0.7, 0.3, None),
      ('cube_random', 3, 1.1, 2.2, None))
  def test_power_pointwise(self, k, mean, variance, points):
    if points is None:
      points = jax.random.uniform(jax.random.PRNGKey(k), (16,), minval=-3.,
                                  maxval=3.)
    points = np.asarray(points)
    p = gausskit.GaussParams(mean, variance)
    log_scale, p_out = gausskit.power_identity(p, k)
    np.testing.assert_allclose(_pdf(points, p)**k,
                               np.exp(float(log_scale)) * _pdf(points, p_out),
                               rtol=1e-12)

  def test_unsupported_power(self):
    with self.assertRaisesRegex(ValueError, 'k=4'):
      gausskit.power_identity(gausskit.GaussParams(0., 1.), 4)


class CondMomentsTest(parameterized.TestCase):

  def test_no_added_noise(self):
    z, x, h = 1.2, 0.3, 0.5
    moments = gausskit.cond_moments(z, x, h, 0., 0.25)
    m0 = math.exp(-0.5 * (z - x)**2 / h**2) / math.sqrt(2. * math.pi * h**2)
    np.testing.assert_allclose(
        [float(moments.m0), float(moments.m1), float(moments.m2)],
        [m0, (z - x) * m0, (z - x)**2 * m0], rtol=1e-12)

  @parameterized.parameters(0.2, 1., 3.)
  def test_error_free_matches_no_added_noise(self, lam):
    with_lambda = gausskit.cond_moments(-0.4, 0.6, 0.3, lam, 0.)
    without = gausskit.cond_moments(-0.4, 0.6, 0.3, 0., 0.)
    for field in ('m0', 'm1', 'm2'):
      self.assertEqual(float(getattr(with_lambda, field)),
                       float(getattr(without, field)))

  def test_invalid_bandwidth(self):
    with self.assertRaisesRegex(ValueError, 'bandwidth'):
      gausskit.cond_moments(0., 0., 0., 1., 0.25)

  def test_smoothing_ratio(self):
    self.assertEqual(float(gausskit.smoothing_ratio(0.5, 0., 0.25)), 1.)
    self.assertAlmostEqual(float(gausskit.smoothing_ratio(0.5, 1., 0.25)), 0.5)
    moments = gausskit.cond_moments(0.7, 0.2, 0.5, 1., 0.25)
    self.assertAlmostEqual(float(moments.m1 / moments.m0), 0.5 * 0.5)

  def test_sign_and_positivity(self):
    keys = jax.random.split(jax.random.PRNGKey(1), 5)
    nb = 500
    z = jax.random.uniform(keys[0], (nb,), minval=-3., maxval=3.)
    x = jax.random.uniform(keys[1], (nb,), minval=-3., maxval=3.)
    h = jax.random.uniform(keys[2], (nb,), minval=0.3, maxval=1.5)
    lam = jax.random.uniform(keys[3], (nb,), minval=0., maxval=2.)
    sigma_u2 = jax.random.uniform(keys[4], (nb,), minval=0., maxval=1.)
    moments = gausskit.cond_moments(z, x, h, lam, sigma_u2)
    self.assertTrue(np.all(np.asarray(moments.m0) > 0.))
    self.assertTrue(np.all(np.asarray(moments.m2) >= 0.))
    np.testing.assert_array_equal(np.sign(np.asarray(moments.m1)),
                                  np.sign(np.asarray(z - x)))

  def _check_against_monte_carlo(self, key, z, x, h, lam, sigma_u2,
                                 nb_draws=1_000_000):
    noise = jnp.sqrt(lam * sigma_u2) * jax.random.normal(key, (nb_draws,))
    d = z + noise - x
    kernel = jnp.exp(-0.5 * (d / h)**2) / (math.sqrt(2. * math.pi) * h)
    moments = gausskit.cond_moments(z, x, h, lam, sigma_u2)
    for samples, exact in ((kernel, moments.m0), (d * kernel, moments.m1),
                           (d**2 * kernel, moments.m2)):
      mean = float(jnp.mean(samples))
      std_err = float(jnp.std(samples)) / math.sqrt(nb_draws)
      self.assertLess(abs(mean - float(exact)),
                      4. * std_err + 1e-9 * abs(float(exact)))

  def test_documented_case_against_monte_carlo(self):
    self._check_against_monte_carlo(jax.random.PRNGKey(2), 1., 0.3, 0.4, 1.,
                                    0.25)

  def test_random_cases_against_monte_carlo(self):
    lambdas = (0., 0.2, 1., 2.)
    key = jax.random.PRNGKey(3)
    for i in range(20):
      key, key_params, key_noise = jax.random.split(key, 3)
      z, x, h, sigma_u2 = (float(v) for v in jax.random.uniform(
          key_params, (4,), minval=jnp.array([-2., -2., 0.2, 0.05]),
          maxval=jnp.array([2., 2., 1., 0.5])))
      self._check_against_monte_carlo(key_noise, z, x, h, lambdas[i % 4],
                                      sigma_u2)


if __name__ == '__main__':
  absltest.main()
