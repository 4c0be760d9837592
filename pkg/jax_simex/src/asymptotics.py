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
"""Asymptotic diagnostics of the per-lambda estimator against a known truth.

All quantities are built from Gaussian-smoothed moments

  w_{lam}(x) = int phi(t; x, v) w(t) dt,    v = (lam + 1) sigma_u2,

of w in {f_X, g f_X, g^2 f_X, tau^2 f_X} (optionally times t^j), and of their
first two derivatives in x. The integrals are taken in the standardised
variable s = (t - x) / sqrt(v), folded onto s >= 0 and truncated where the
Gaussian factor drops below 1e-16 of its peak. Derivatives in x are obtained
by differentiating the Gaussian factor under the integral.
"""

import dataclasses
import enum
import functools
import math
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

from absl import logging
import numpy as np
from numpy.polynomial import hermite_e
import scipy.integrate

HostFn = Callable[[np.ndarray], np.ndarray]

# Gaussian factor exp(-s^2/2) falls below 1e-16 of its peak beyond this.
_TRUNCATION = math.sqrt(2. * 16. * math.log(10.))
_INV_SQRT_2PI = 1. / math.sqrt(2. * math.pi)
# tau2 is checked for non-negativity on this many support points.
_TAU2_CHECK_POINTS = 2001
_TAU2_CHECK_RANGE = 1e3


class QuadratureError(ArithmeticError):
  """Raised when adaptive quadrature fails to reach its tolerance."""

  def __init__(self, message: str, abserr: float):
    super().__init__(f'{message} (achieved absolute error {abserr:.3g})')
    self.abserr = abserr


class InconsistentVarianceError(ArithmeticError):
  """Raised when an asymptotic variance evaluates negative."""


class Rule(enum.Enum):
  ADAPTIVE = 'adaptive'
  FIXED_NODES = 'fixed_nodes'


class Which(enum.Enum):
  F = 'f'  # f_X
  G_FUN = 'g'  # g f_X
  G2 = 'G'  # g^2 f_X
  TAU2 = 'H'  # tau^2 f_X


@dataclasses.dataclass(frozen=True)
class QuadratureConfig:
  rule: Rule = Rule.ADAPTIVE
  nodes: int = 96
  abs_tol: float = 1e-10
  rel_tol: float = 1e-9
  max_subdivisions: int = 200

  def __post_init__(self):
    if self.abs_tol <= 0. or self.rel_tol <= 0.:
      raise ValueError('Quadrature tolerances must be positive.')
    if self.nodes < 2 or self.max_subdivisions < 1:
      raise ValueError('Invalid quadrature node or subdivision count.')


@dataclasses.dataclass(frozen=True)
class TrueModel:
  """Analytic description of the data generating process.

  Attributes:
    g: Regression function.
    f_x: Density of the covariate X.
    tau2: Conditional variance of the regression noise given X = x, checked
      to be non-negative on a grid over the support.
    sigma_u2: Measurement error variance.
    support: Interval outside of which f_x is treated as zero.
    g_prime, g_second, f_prime, f_second: Analytic derivatives, needed only
      by `gamma_rational_approximation`.
    name: Label used in logs and outputs.
  All callables take and return numpy arrays (or floats).
  """
  g: HostFn
  f_x: HostFn
  tau2: HostFn
  sigma_u2: float
  support: Tuple[float, float] = (-math.inf, math.inf)
  g_prime: Optional[HostFn] = None
  g_second: Optional[HostFn] = None
  f_prime: Optional[HostFn] = None
  f_second: Optional[HostFn] = None
  name: str = 'custom'

  def __post_init__(self):
    if self.sigma_u2 < 0.:
      raise ValueError(f'sigma_u2 must be non-negative, got {self.sigma_u2}.')
    lo, hi = self.support
    if not lo < hi:
      raise ValueError(f'Invalid support {self.support}.')
    mass, _ = scipy.integrate.quad(self.f_x, lo, hi, epsabs=1e-12,
                                   epsrel=1e-12, limit=200)
    if abs(mass - 1.) > 1e-8:
      raise ValueError(f'f_x integrates to {mass} over {self.support}, '
                       'not 1.')
    grid = np.linspace(max(lo, -_TAU2_CHECK_RANGE), min(hi, _TAU2_CHECK_RANGE),
                       _TAU2_CHECK_POINTS)
    tau2 = np.broadcast_to(self.tau2(grid), grid.shape)
    if np.any(tau2 < 0.):
      worst = int(np.argmin(tau2))
      raise ValueError(f'tau2 must be non-negative on the support, got '
                       f'{tau2[worst]} at t={grid[worst]}.')

  def weight(self, which: Which, j: int = 0) -> HostFn:
    """t -> t^j w(t) with w the base function selected by `which`."""
    lo, hi = self.support

    def base(t):
      if which is Which.F:
        value = self.f_x(t)
      elif which is Which.G_FUN:
        value = self.g(t) * self.f_x(t)
      elif which is Which.G2:
        value = self.g(t)**2 * self.f_x(t)
      else:
        value = self.tau2(t) * self.f_x(t)
      return np.where((t >= lo) & (t <= hi), value * t**j, 0.)
    return base


class AsymptoticSummary(NamedTuple):
  x: float
  lam: float
  gamma: float
  bias2: float
  var_point: float
  cross: Optional[np.ndarray] = None


class MomentCoefficients(NamedTuple):
  """Linearisation weights of the estimator in the five kernel sums.

  Fields:
    * c0, c1, c2: Weights of the centred S~_{n0}, S~_{n1}, S~_{n2}.
    * d0, d1: Weights of the centred T~_{n0}, T~_{n1}.
    * f_moms: (f_0, f_1, f_2) at (x, lam).
    * g_moms: (g_0, g_1).
    * G_moms: (G_0,).
    * H_moms: (H_0,).
  """
  c0: float
  c1: float
  c2: float
  d0: float
  d1: float
  f_moms: Tuple[float, ...]
  g_moms: Tuple[float, ...]
  G_moms: Tuple[float, ...]
  H_moms: Tuple[float, ...]


class LemmaPredictions(NamedTuple):
  """Leading-order means and variances of the averaged kernel sums."""
  s0_mean: float
  s1_mean: float
  s2_mean: float
  t0_mean: float
  t1_mean: float
  s0_var: float
  s1_var: float
  s2_var: float
  t0_var: float
  t1_var: float


class ExpectedSums(NamedTuple):
  s0: float
  s1: float
  s2: float
  t0: float
  t1: float


######## Quadrature ########


@functools.lru_cache(maxsize=None)
def _hermite_rule(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
  return hermite_e.hermegauss(nodes)


def _adaptive(integrand, q: QuadratureConfig) -> float:
  result = scipy.integrate.quad(
      integrand, 0., _TRUNCATION, epsabs=q.abs_tol, epsrel=q.rel_tol,
      limit=q.max_subdivisions, full_output=1)
  value, abserr = result[0], result[1]
  if len(result) > 3 and abserr > max(q.abs_tol, q.rel_tol * abs(value)):
    raise QuadratureError(f'Quadrature did not converge: {result[3]}', abserr)
  return value


def smoothed(w: HostFn, x: float, v: float, order: int,
             q: QuadratureConfig) -> float:
  """d^order/dx^order of int phi(t; x, v) w(t) dt, for order in {0, 1, 2}.

  Args:
    w: Integrand weight, vectorised over numpy arrays.
    x: Centre of the Gaussian factor.
    v: Variance of the Gaussian factor, non-negative.
    order: Derivative order in x.
    q: Quadrature configuration.
  Returns:
    The smoothed value or derivative.
  """
  if order not in (0, 1, 2):
    raise ValueError(f'Derivative order must be 0, 1 or 2, got {order}.')
  if v < 0.:
    raise ValueError(f'Smoothing variance must be non-negative, got {v}.')
  if v == 0.:
    if order:
      raise ValueError('Derivatives of smoothed moments need a positive '
                       'smoothing variance (lambda + 1) sigma_u2.')
    return float(w(np.asarray(x)))
  scale = math.sqrt(v)

  if q.rule is Rule.FIXED_NODES:
    nodes, weights = _hermite_rule(q.nodes)
    values = w(x + scale * nodes)
    if order == 1:
      values = values * nodes / scale
    elif order == 2:
      values = values * (nodes**2 - 1.) / v
    return float(np.dot(weights, values) * _INV_SQRT_2PI)

  if order == 0:
    def integrand(s):
      return math.exp(-0.5 * s * s) * (w(x + scale * s) + w(x - scale * s))
    factor = 1.
  elif order == 1:
    def integrand(s):
      return math.exp(-0.5 * s * s) * s * (w(x + scale * s) - w(x - scale * s))
    factor = 1. / scale
  else:
    w_x = float(w(np.asarray(x)))

    # int phi(s) (s^2 - 1) ds = 0 lets the centre value be subtracted.
    def integrand(s):
      return math.exp(-0.5 * s * s) * (s * s - 1.) * (
          w(x + scale * s) + w(x - scale * s) - 2. * w_x)
    factor = 1. / v
  return factor * _INV_SQRT_2PI * _adaptive(lambda s: float(integrand(s)), q)


def _smoothing_variance(m: TrueModel, lam: float) -> float:
  if lam < -1.:
    raise ValueError(f'lambda must be >= -1, got {lam}.')
  return (lam + 1.) * m.sigma_u2


######## Weighted moments ########


def weighted_moment(m: TrueModel, which: Which, j: int, x: float, lam: float,
                    q: QuadratureConfig = QuadratureConfig()) -> float:
  """int phi(t; x, (lam + 1) sigma_u2) t^j w(t) dt, pointwise at lam = -1."""
  if j < 0:
    raise ValueError(f'Moment order must be >= 0, got {j}.')
  return smoothed(m.weight(which, j), x, _smoothing_variance(m, lam), 0, q)


def _check_density(f0: float, x: float, lam: float):
  if not f0 > 0.:
    raise ValueError(f'Smoothed covariate density vanishes at x={x}, '
                     f'lambda={lam}: x is outside the effective support.')


def gamma_limit(m: TrueModel, x: float, lam: float,
                q: QuadratureConfig = QuadratureConfig()) -> float:
  """Large-sample limit g_{0,lam}(x) / f_{0,lam}(x) of the estimator."""
  f0 = weighted_moment(m, Which.F, 0, x, lam, q)
  _check_density(f0, x, lam)
  return weighted_moment(m, Which.G_FUN, 0, x, lam, q) / f0


def bias_coefficient(m: TrueModel, x: float, lam: float,
                     q: QuadratureConfig = QuadratureConfig()) -> float:
  """Coefficient B(x; lam) of the h^2 bias term.

  B = (f0 g0'' - f0'' g0) / (2 f0^2) + C_f (g0 C_f - f0 C_g) / (v^2 f0^3),
  with C_f = f_1 - x f_0 = v f0' and C_g = g_1 - x g_0 = v g0'.

  Args:
    m: True model.
    x: Evaluation point.
    lam: Added-noise multiplier; (lam + 1) sigma_u2 must be positive.
    q: Quadrature configuration.
  Returns:
    B(x; lam).
  """
  v = _smoothing_variance(m, lam)
  w_f, w_g = m.weight(Which.F), m.weight(Which.G_FUN)
  f0, f1, f2 = (smoothed(w_f, x, v, k, q) for k in range(3))
  g0, g1, g2 = (smoothed(w_g, x, v, k, q) for k in range(3))
  _check_density(f0, x, lam)
  c_f, c_g = v * f1, v * g1
  return ((f0 * g2 - f2 * g0) / (2. * f0**2)
          + c_f * (g0 * c_f - f0 * c_g) / (v**2 * f0**3))


def moment_coefficients(m: TrueModel, x: float, lam: float,
                        q: QuadratureConfig = QuadratureConfig()
                        ) -> MomentCoefficients:
  v = _smoothing_variance(m, lam)
  f_moms = tuple(weighted_moment(m, Which.F, j, x, lam, q) for j in range(3))
  g_moms = tuple(weighted_moment(m, Which.G_FUN, j, x, lam, q)
                 for j in range(2))
  big_g = (weighted_moment(m, Which.G2, 0, x, lam, q),)
  big_h = (weighted_moment(m, Which.TAU2, 0, x, lam, q),)
  f0, g0 = f_moms[0], g_moms[0]
  _check_density(f0, x, lam)
  c_f = smoothed(m.weight(Which.F), x, v, 1, q) * v if v > 0. else 0.
  c_g = smoothed(m.weight(Which.G_FUN), x, v, 1, q) * v if v > 0. else 0.
  safe_v = v if v > 0. else 1.
  return MomentCoefficients(
      c0=-g0 / f0**2,
      c1=(2. * c_f * g0 - c_g * f0) / (safe_v * f0**3),
      c2=(c_f * c_g * f0 - c_f**2 * g0) / (safe_v**2 * f0**4),
      d0=1. / f0,
      d1=-c_f / (safe_v * f0**2),
      f_moms=f_moms, g_moms=g_moms, G_moms=big_g, H_moms=big_h)


######## Variances ########


def _second_moment_terms(m: TrueModel, x: float, v: float,
                         q: QuadratureConfig) -> Tuple[float, float, float]:
  """Smoothed f, g f and (g^2 + tau^2) f at smoothing variance v."""
  f = smoothed(m.weight(Which.F), x, v, 0, q)
  g = smoothed(m.weight(Which.G_FUN), x, v, 0, q)
  gh = (smoothed(m.weight(Which.G2), x, v, 0, q)
        + smoothed(m.weight(Which.TAU2), x, v, 0, q))
  return f, g, gh


def _check_variance(value: float, what: str, q: QuadratureConfig) -> float:
  if value < -q.abs_tol:
    raise InconsistentVarianceError(f'{what} evaluated to {value} < 0.')
  return max(value, 0.)


def variance_delta(m: TrueModel, x: float, lam: float,
                   q: QuadratureConfig = QuadratureConfig()) -> float:
  """Asymptotic variance Delta_{lam,lam}(x) of the per-lambda estimator.

  For lam > 0 the estimator converges at the root-n rate and n Var -> Delta.
  For lam = 0 the usual nonparametric rate applies and the returned
  (1 / 2 sqrt(pi)) [(G + H) / f^2 - g^2 / f^3] is the coefficient of 1/(nh).
  """
  if lam < 0.:
    raise ValueError(f'lambda must be >= 0, got {lam}.')
  sigma_u2 = m.sigma_u2
  if lam == 0.:
    f, g, gh = _second_moment_terms(m, x, sigma_u2, q)
    _check_density(f, x, lam)
    value = (gh / f**2 - g**2 / f**3) / (2. * math.sqrt(math.pi))
  else:
    if sigma_u2 == 0.:
      raise ValueError('Delta at lambda > 0 needs sigma_u2 > 0.')
    return float(cross_covariance(m, x, [lam], q)[0, 0])
  return _check_variance(value, f'Delta at x={x}, lambda={lam}', q)


def cross_covariance(m: TrueModel, x: float, lambdas: Sequence[float],
                     q: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
  """Matrix of asymptotic covariances Delta_{lam_i, lam_j}(x), lam_i > 0.

  Args:
    m: True model with sigma_u2 > 0.
    x: Evaluation point.
    lambdas: Distinct positive added-noise multipliers.
    q: Quadrature configuration.
  Returns:
    Symmetric K x K matrix, diagonal equal to `variance_delta`.
  """
  lambdas = [float(l) for l in lambdas]
  if not lambdas or min(lambdas) <= 0.:
    raise ValueError(f'All lambdas must be positive, got {lambdas}.')
  if len(set(lambdas)) != len(lambdas):
    raise ValueError(f'lambdas must be distinct, got {lambdas}.')
  if m.sigma_u2 <= 0.:
    raise ValueError('Cross covariances need sigma_u2 > 0.')
  sigma_u2 = m.sigma_u2
  nb = len(lambdas)
  f0, g0 = np.empty(nb), np.empty(nb)
  for i, lam in enumerate(lambdas):
    f0[i], g0[i], _ = _second_moment_terms(m, x, (lam + 1.) * sigma_u2, q)
    _check_density(f0[i], x, lam)
  c0, d0 = -g0 / f0**2, 1. / f0
  cross = np.empty((nb, nb))
  for i in range(nb):
    for j in range(i, nb):
      total = lambdas[i] + lambdas[j]
      kernel_var = (lambdas[i] * lambdas[j] / total + 1.) * sigma_u2
      kappa = 1. / math.sqrt(2. * math.pi * total * sigma_u2)
      f_ij, g_ij, gh_ij = _second_moment_terms(m, x, kernel_var, q)
      value = (c0[i] * c0[j] * (kappa * f_ij - f0[i] * f0[j])
               + d0[i] * d0[j] * (kappa * gh_ij - g0[i] * g0[j])
               + c0[i] * d0[j] * (kappa * g_ij - f0[i] * g0[j])
               + c0[j] * d0[i] * (kappa * g_ij - f0[j] * g0[i]))
      if i == j:
        value = _check_variance(
            value, f'Delta at x={x}, lambda={lambdas[i]}', q)
      cross[i, j] = cross[j, i] = value
  min_eig = float(np.min(np.linalg.eigvalsh(cross)))
  if min_eig < -q.abs_tol * max(1., float(np.max(np.abs(cross)))):
    logging.warning('Cross covariance at x=%g is not positive semidefinite '
                    '(smallest eigenvalue %g).', x, min_eig)
  return cross


######## Appendix moment expansions ########


def lemma_moment_predictions(m: TrueModel, x: float, lam: float, h: float,
                             n: int, q: QuadratureConfig = QuadratureConfig()
                             ) -> LemmaPredictions:
  """Leading-order means and variances of the averaged kernel sums.

  The sums are those returned by `locallinear.smoothed_sums` for a sample of
  size n, bandwidth h and added-noise multiplier lam.

  Args:
    m: True model with sigma_u2 > 0.
    x: Evaluation point.
    lam: Added-noise multiplier, non-negative.
    h: Bandwidth.
    n: Sample size.
    q: Quadrature configuration.
  Returns:
    LemmaPredictions.
  """
  if lam < 0. or h <= 0. or n < 1:
    raise ValueError(f'Invalid arguments lambda={lam}, h={h}, n={n}.')
  if m.sigma_u2 <= 0.:
    raise ValueError('Kernel sum predictions need sigma_u2 > 0.')
  sigma_u2 = m.sigma_u2
  v = (lam + 1.) * sigma_u2
  w_f, w_g = m.weight(Which.F), m.weight(Which.G_FUN)
  f0, df, d2f = (smoothed(w_f, x, v, k, q) for k in range(3))
  g0, dg, d2g = (smoothed(w_g, x, v, k, q) for k in range(3))
  h2 = h * h
  means = dict(s0_mean=f0 + h2 * d2f / 2., s1_mean=h2 * df,
               s2_mean=h2 * f0, t0_mean=g0 + h2 * d2g / 2., t1_mean=h2 * dg)

  if lam == 0.:
    f, _, gh = _second_moment_terms(m, x, sigma_u2, q)
    root_pi = math.sqrt(math.pi)
    variances = dict(
        s0_var=f / (2. * n * h * root_pi) - f**2 / n,
        s1_var=h * f / (4. * n * root_pi),
        s2_var=3. * h**3 * f / (8. * n * root_pi),
        t0_var=gh / (2. * n * h * root_pi),
        t1_var=h * gh / (4. * n * root_pi))
    return LemmaPredictions(**means, **variances)

  half_v = (lam / 2. + 1.) * sigma_u2
  kappa = 1. / (2. * math.sqrt(math.pi * lam * sigma_u2))
  f_half, _, gh_half = _second_moment_terms(m, x, half_v, q)

  def centred_square(which_list):
    # int phi(t; x, half_v) (t - x)^2 w(t) dt.
    total = 0.
    for which in which_list:
      base = m.weight(which)
      total += smoothed(lambda t, b=base: (t - x)**2 * b(t), x, half_v, 0, q)
    return total

  q_f = centred_square([Which.F])
  q_gh = centred_square([Which.G2, Which.TAU2])
  h4 = h2 * h2
  root = math.sqrt(math.pi * lam * sigma_u2)

  def first_order_var(quad_term, zero_term, centred_mean):
    return (h4 * quad_term / (2. * n * (lam + 2.)**2 * sigma_u2**2 * root)
            + h4 * zero_term / (2. * n * lam * (lam + 2.) * sigma_u2 * root)
            - h4 * centred_mean**2 / (n * v**2))

  variances = dict(
      s0_var=(kappa * f_half - f0**2) / n,
      s1_var=first_order_var(q_f, f_half, v * df),
      s2_var=h4 * (kappa * f_half - f0**2) / n,
      t0_var=(kappa * gh_half - g0**2) / n,
      t1_var=first_order_var(q_gh, gh_half, v * dg))
  return LemmaPredictions(**means, **variances)


######## Finite-bandwidth expectations ########


def _centred_moment(m: TrueModel, which: Which, j: int, x: float, v: float,
                    q: QuadratureConfig) -> float:
  """int phi(t; x, v) (t - x)^j w(t) dt."""
  base = m.weight(which)
  if j == 0:
    return smoothed(base, x, v, 0, q)
  return smoothed(lambda t: (t - x)**j * base(t), x, v, 0, q)


def expected_sums(m: TrueModel, x: float, lam: float, h: float,
                  q: QuadratureConfig = QuadratureConfig()) -> ExpectedSums:
  """Exact expectations of the averaged kernel sums at a finite bandwidth.

  Integrating the surrogate out of the closed-form conditional moments leaves
  Gaussian smoothing of the covariate at variance V = h^2 + (lam + 1) sigma_u2.
  With C_j = int phi(t; x, V) (t - x)^j w(t) dt:

    E S0 = C_0[f],  E S1 = (h^2 / V) C_1[f],
    E S2 = (h^2 / V)^2 C_2[f] + ((lam + 1) sigma_u2 h^2 / V) C_0[f],
    E T0 = C_0[g f],  E T1 = (h^2 / V) C_1[g f].

  Args:
    m: True model.
    x: Evaluation point.
    lam: Added-noise multiplier, non-negative.
    h: Bandwidth.
    q: Quadrature configuration.
  Returns:
    ExpectedSums.
  """
  if lam < 0. or h <= 0.:
    raise ValueError(f'Invalid arguments lambda={lam}, h={h}.')
  h2 = h * h
  noise = (lam + 1.) * m.sigma_u2
  v = h2 + noise
  f_c = [_centred_moment(m, Which.F, j, x, v, q) for j in range(3)]
  g_c = [_centred_moment(m, Which.G_FUN, j, x, v, q) for j in range(2)]
  return ExpectedSums(
      s0=f_c[0], s1=h2 / v * f_c[1],
      s2=(h2 / v)**2 * f_c[2] + noise * h2 / v * f_c[0],
      t0=g_c[0], t1=h2 / v * g_c[1])


def population_fit(m: TrueModel, x: float, lam: float, h: float,
                   q: QuadratureConfig = QuadratureConfig()
                   ) -> Tuple[float, float]:
  """(g, g') solving the normal equations built from `expected_sums`.

  This is the estimate an infinitely large sample would give at bandwidth h;
  it differs from `gamma_limit` by the finite-bandwidth bias.
  """
  e = expected_sums(m, x, lam, h, q)
  _check_density(e.s0, x, lam)
  det = e.s0 * e.s2 - e.s1**2
  if not det > 0.:
    raise ArithmeticError(f'Singular expected normal equations at x={x}, '
                          f'lambda={lam}.')
  return ((e.s2 * e.t0 - e.s1 * e.t1) / det,
          (e.s0 * e.t1 - e.s1 * e.t0) / det)


######## Leading-order rational form ########


def gamma_rational_approximation(m: TrueModel,
                                 x: float) -> Tuple[float, float, float]:
  """(a, b, c) with Gamma(lam) ~ a + b / (c + lam) for small sigma_u2.

  Expanding both smoothed moments to first order in the smoothing variance,
  f_{0,lam} ~ f + v f''/2 and g_{0,lam} ~ g f + v (g f)''/2, makes Gamma a
  ratio of two affine functions of lam.

  Args:
    m: True model supplying g', g'', f' and f''.
    x: Evaluation point.
  Returns:
    (a, b, c).
  """
  if None in (m.g_prime, m.g_second, m.f_prime, m.f_second):
    raise ValueError('The rational approximation needs analytic first and '
                     'second derivatives of g and f_x.')
  s2 = m.sigma_u2
  f, f1, f2 = m.f_x(x), m.f_prime(x), m.f_second(x)
  g, g1, g2 = m.g(x), m.g_prime(x), m.g_second(x)
  gf2 = g2 * f + 2. * g1 * f1 + g * f2
  # Gamma = (alpha + beta lam) / (gamma + delta lam).
  alpha, beta = g * f + s2 * gf2 / 2., s2 * gf2 / 2.
  gamma, delta = f + s2 * f2 / 2., s2 * f2 / 2.
  if delta == 0.:
    raise ValueError(f'f_x has no curvature at x={x}; Gamma is affine in '
                     'lambda to first order.')
  a = beta / delta
  return float(a), float((alpha * delta - beta * gamma) / delta**2), float(
      gamma / delta)


######## Built-in truths ########


def _normal_density(sigma_x2: float):
  norm = 1. / math.sqrt(2. * math.pi * sigma_x2)
  f = lambda t: norm * np.exp(-0.5 * np.square(t) / sigma_x2)
  f_prime = lambda t: -t / sigma_x2 * f(t)
  f_second = lambda t: (np.square(t) / sigma_x2**2 - 1. / sigma_x2) * f(t)
  return f, f_prime, f_second


def _regression_functions(name: str, a: float, b: float, c: float):
  """(g, g', g'') for a built-in regression function."""
  if name == 'quadratic':
    return np.square, lambda t: 2. * t, lambda t: 2. + 0. * t
  elif name == 'exp':
    return np.exp, np.exp, np.exp
  elif name == 'xsinx':
    return (lambda t: t * np.sin(t),
            lambda t: np.sin(t) + t * np.cos(t),
            lambda t: 2. * np.cos(t) - t * np.sin(t))
  elif name == 'linear':
    return lambda t: a + b * t, lambda t: b + 0. * t, lambda t: 0. * t
  elif name == 'constant':
    return lambda t: c + 0. * t, lambda t: 0. * t, lambda t: 0. * t
  raise ValueError(f'Unknown built-in truth {name!r}; expected one of '
                   f'{BUILTIN_TRUTHS}.')


BUILTIN_TRUTHS = ('quadratic', 'exp', 'xsinx', 'linear', 'constant')


def builtin_truth(name: str, sigma_u2: float, tau2: float = 1.,
                  sigma_x2: float = 1., a: float = 0., b: float = 1.,
                  c: float = 0.) -> TrueModel:
  """Built-in truth with X ~ N(0, sigma_x2) and constant tau2.

  Args:
    name: One of BUILTIN_TRUTHS.
    sigma_u2: Measurement error variance.
    tau2: Regression noise variance.
    sigma_x2: Covariate variance.
    a: Intercept of 'linear'.
    b: Slope of 'linear'.
    c: Value of 'constant'.
  Returns:
    TrueModel.
  """
  g, g_prime, g_second = _regression_functions(name, a, b, c)
  f, f_prime, f_second = _normal_density(sigma_x2)
  half_width = 12. * math.sqrt(sigma_x2)
  return TrueModel(
      g=g, f_x=f, tau2=lambda t: tau2 + 0. * t, sigma_u2=sigma_u2,
      support=(-half_width, half_width), g_prime=g_prime, g_second=g_second,
      f_prime=f_prime, f_second=f_second, name=name)


def summarize(m: TrueModel, x: float, lam: float,
              q: QuadratureConfig = QuadratureConfig(),
              cross_lambdas: Optional[Sequence[float]] = None
              ) -> AsymptoticSummary:
  """Gamma, B and Delta at one (x, lam), optionally with cross covariances."""
  cross = None
  if cross_lambdas is not None:
    cross = cross_covariance(m, x, cross_lambdas, q)
  return AsymptoticSummary(
      x=x, lam=lam, gamma=gamma_limit(m, x, lam, q),
      bias2=bias_coefficient(m, x, lam, q),
      var_point=variance_delta(m, x, lam, q), cross=cross)
