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
"""Extrapolation of per-lambda estimates back to lambda = -1.

Each x point is handled independently: a trend G(lambda) is fit through the
pairs (lambda_k, g_hat(x; lambda_k)) and evaluated at lambda = -1, where the
total measurement error variance (1 + lambda) sigma_u2 vanishes.
"""

import dataclasses
import enum
import math
from typing import List, Optional, Tuple

from absl import logging
import jax.numpy as jnp
import jax.scipy.linalg
from jax_simex.src import locallinear
import numpy as np
import scipy.optimize

# Rational extrapolants a + b / (c + lambda) keep their pole left of -1.
POLE_MARGIN = 1e-3
C_MAX = 1e6
# Profiled residual improvement below which the rational form is not trusted.
MIN_IMPROVEMENT = 1e-12
_COARSE_SEARCH_POINTS = 64


class Kind(enum.Enum):
  POLYNOMIAL = 'poly'
  RATIONAL = 'rational'


@dataclasses.dataclass(frozen=True)
class ExtrapolantFamily:
  """Family of trend functions in lambda.

  Attributes:
    kind: POLYNOMIAL or RATIONAL.
    order: Polynomial degree p; ignored for RATIONAL.
  """
  kind: Kind
  order: int = 2

  def __post_init__(self):
    if self.kind is Kind.POLYNOMIAL and self.order < 1:
      raise ValueError(f'Polynomial order must be >= 1, got {self.order}.')

  @classmethod
  def quadratic(cls) -> 'ExtrapolantFamily':
    return cls(Kind.POLYNOMIAL, 2)

  @classmethod
  def polynomial(cls, order: int) -> 'ExtrapolantFamily':
    return cls(Kind.POLYNOMIAL, order)

  @classmethod
  def rational(cls) -> 'ExtrapolantFamily':
    return cls(Kind.RATIONAL, 0)

  @classmethod
  def parse(cls, text: str) -> 'ExtrapolantFamily':
    """Parses `quadratic`, `poly:<p>` or `rational`."""
    text = text.strip().lower()
    if text == 'quadratic':
      return cls.quadratic()
    elif text == 'rational':
      return cls.rational()
    elif text.startswith('poly:'):
      try:
        order = int(text[len('poly:'):])
      except ValueError:
        raise ValueError(f'Invalid polynomial order in {text!r}.') from None
      return cls.polynomial(order)
    raise ValueError(f'Unknown extrapolant {text!r}; expected quadratic, '
                     'poly:<p> or rational.')

  @property
  def is_quadratic(self) -> bool:
    return self.kind is Kind.POLYNOMIAL and self.order == 2

  @property
  def min_points(self) -> int:
    return 4 if self.kind is Kind.RATIONAL else self.order + 1

  def __str__(self) -> str:
    if self.kind is Kind.RATIONAL:
      return 'rational'
    return 'quadratic' if self.order == 2 else f'poly:{self.order}'


@dataclasses.dataclass(frozen=True)
class ExtrapolantFit:
  """A fitted trend.

  Attributes:
    family: Family actually fit (QUADRATIC after a rational fallback).
    coefficients: (alpha_0, ..., alpha_p) for polynomials, (a, b, c) for the
      rational form a + b / (c + lambda).
    rss: Residual sum of squares over the fitted lambda points.
    extrapolated: Value of the trend at lambda = -1.
    fallback_used: Whether a rational fit was replaced by the quadratic one.
  """
  family: ExtrapolantFamily
  coefficients: np.ndarray
  rss: float
  extrapolated: float
  fallback_used: bool = False

  def evaluate(self, lambdas) -> np.ndarray:
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if self.family.kind is Kind.RATIONAL:
      a, b, c = self.coefficients
      return a + b / (c + lambdas)
    return np.polynomial.polynomial.polyval(lambdas, self.coefficients)


def _check_points(lambdas, values, min_points: int,
                  what: str) -> Tuple[np.ndarray, np.ndarray]:
  lambdas = np.asarray(lambdas, dtype=np.float64)
  values = np.asarray(values, dtype=np.float64)
  if lambdas.ndim != 1 or lambdas.shape != values.shape:
    raise ValueError(f'lambdas and values must be vectors of equal length, '
                     f'got shapes {lambdas.shape} and {values.shape}.')
  if not (np.all(np.isfinite(lambdas)) and np.all(np.isfinite(values))):
    raise ValueError('lambdas and values must be finite.')
  nb_distinct = np.unique(lambdas).shape[0]
  if nb_distinct < min_points:
    raise ValueError(f'{what} needs at least {min_points} distinct lambda '
                     f'points, got {nb_distinct}.')
  return lambdas, values


def _fit_polynomial_rows(lambdas: np.ndarray, values: np.ndarray,
                         p: int) -> List[ExtrapolantFit]:
  """Degree p fits of every row of `values` on a shared lambda design."""
  design = jnp.vander(jnp.asarray(lambdas), p + 1, increasing=True)
  q, r = jnp.linalg.qr(design)
  rows = jnp.asarray(values)
  coefficients = jax.scipy.linalg.solve_triangular(r, q.T @ rows.T,
                                                   lower=False)
  rss = np.asarray(jnp.sum((rows - (design @ coefficients).T)**2, axis=1))
  coefficients = np.asarray(coefficients).T
  # s(-1) = (1, -1, 1, ...).
  extrapolated = coefficients @ (-1.)**np.arange(p + 1)
  family = ExtrapolantFamily.polynomial(p)
  return [ExtrapolantFit(family=family, coefficients=coefficients[i],
                         rss=float(rss[i]), extrapolated=float(extrapolated[i]))
          for i in range(coefficients.shape[0])]


def fit_polynomial(lambdas, values, p: int) -> ExtrapolantFit:
  """Least-squares polynomial trend of degree p, solved through a QR."""
  if p < 1:
    raise ValueError(f'Polynomial order must be >= 1, got {p}.')
  lambdas, values = _check_points(lambdas, values, p + 1,
                                  f'A degree {p} polynomial')
  return _fit_polynomial_rows(lambdas, values[None], p)[0]


def _rational_linear_part(c: float, lambdas: np.ndarray,
                          values: np.ndarray) -> Tuple[float, float, float]:
  """(a, b, rss) of the least-squares fit of a + b u with u = 1/(c + lambda)."""
  u = 1. / (c + lambdas)
  u_centered = u - u.mean()
  b = np.dot(u_centered, values - values.mean()) / np.dot(u_centered,
                                                          u_centered)
  a = values.mean() - b * u.mean()
  residuals = values - a - b * u
  return a, b, float(np.dot(residuals, residuals))


def fit_rational(lambdas, values) -> ExtrapolantFit:
  """Least-squares fit of a + b / (c + lambda) with c > 1.

  For fixed c the problem is linear in (a, b); c is found by a bounded 1-D
  search of the profiled residual over log(c - 1). When the optimum sits on a
  bound of the search interval, or when it does not improve on the quadratic
  fit by at least MIN_IMPROVEMENT, the quadratic fit is returned instead with
  `fallback_used` set.

  Args:
    lambdas: Distinct lambda values, at least 4.
    values: Estimates at those lambdas.
  Returns:
    fit: ExtrapolantFit.
  """
  lambdas, values = _check_points(lambdas, values, 4, 'A rational trend')
  quadratic = fit_polynomial(lambdas, values, 2)

  def profiled_rss(t):
    return _rational_linear_part(1. + math.exp(t), lambdas, values)[2]

  lower, upper = math.log(POLE_MARGIN), math.log(C_MAX - 1.)
  coarse = np.linspace(lower, upper, _COARSE_SEARCH_POINTS)
  coarse_rss = np.array([profiled_rss(t) for t in coarse])
  best = int(np.argmin(coarse_rss))
  bracket = (coarse[max(best - 1, 0)],
             coarse[min(best + 1, _COARSE_SEARCH_POINTS - 1)])
  result = scipy.optimize.minimize_scalar(
      profiled_rss, bounds=bracket, method='bounded',
      options={'xatol': 1e-12, 'maxiter': 500})
  t_best = float(result.x)
  if profiled_rss(t_best) > coarse_rss[best]:
    t_best = float(coarse[best])
  c = 1. + math.exp(t_best)
  a, b, rss = _rational_linear_part(c, lambdas, values)

  at_bound = min(t_best - lower, upper - t_best) < 1e-6 * (upper - lower)
  if at_bound or quadratic.rss - rss < MIN_IMPROVEMENT:
    logging.vlog(1, 'Rational fit replaced by quadratic (c=%g, at_bound=%s, '
                 'rss=%g, quadratic rss=%g).', c, at_bound, rss, quadratic.rss)
    return dataclasses.replace(quadratic, fallback_used=True)
  return ExtrapolantFit(
      family=ExtrapolantFamily.rational(), coefficients=np.array([a, b, c]),
      rss=rss, extrapolated=a + b / (c - 1.))


def fit(family: ExtrapolantFamily, lambdas, values) -> ExtrapolantFit:
  if family.kind is Kind.RATIONAL:
    return fit_rational(lambdas, values)
  return fit_polynomial(lambdas, values, family.order)


def extrapolate_profile(
    profile: locallinear.LambdaProfile, family: ExtrapolantFamily,
    target: str = 'g'
) -> Tuple[np.ndarray, List[Optional[ExtrapolantFit]]]:
  """Fits `family` to every x row of a profile and evaluates it at -1.

  Rows are fit on their non-degenerate cells only. A row left with fewer
  usable lambda points than the family needs is marked missing: its curve
  value is NaN and its fit is None.

  Args:
    profile: EX or SIMEX LambdaProfile.
    family: Extrapolant family.
    target: 'g' to extrapolate g_hat, 'g_prime' to extrapolate g_prime_hat.
  Returns:
    curve: Extrapolated values over profile.x_grid.
    fits: Per-row fits.
  """
  if target not in ('g', 'g_prime'):
    raise ValueError(f"target must be 'g' or 'g_prime', got {target!r}.")
  if profile.method is locallinear.Method.NAIVE:
    raise ValueError('A naive profile has a single lambda column and cannot '
                     'be extrapolated.')
  nb_lambdas = profile.lambda_grid.shape[0]
  if nb_lambdas < family.min_points:
    raise ValueError(f'{family} extrapolation needs at least '
                     f'{family.min_points} lambda points, profile has '
                     f'{nb_lambdas}.')
  values = np.asarray(profile.g_hat if target == 'g' else profile.g_prime_hat)
  usable = ~profile.degenerate
  if not np.all(np.isfinite(values[usable])):
    raise ValueError('Non-degenerate profile cells must be finite.')
  nb_rows = profile.x_grid.shape[0]
  fits: List[Optional[ExtrapolantFit]] = [None] * nb_rows
  # Rows sharing the same usable lambda subset share one design matrix.
  patterns = {}
  for j in range(nb_rows):
    if np.sum(usable[j]) >= family.min_points:
      patterns.setdefault(usable[j].tobytes(), []).append(j)
  for rows in patterns.values():
    keep = usable[rows[0]]
    lambdas = profile.lambda_grid[keep]
    if family.kind is Kind.POLYNOMIAL:
      row_fits = _fit_polynomial_rows(lambdas, values[np.ix_(rows, keep)],
                                      family.order)
    else:
      row_fits = [fit_rational(lambdas, values[j, keep]) for j in rows]
    for j, row_fit in zip(rows, row_fits):
      fits[j] = row_fit
  curve = np.array([np.nan if f is None else f.extrapolated for f in fits])
  nb_fallbacks = sum(f is not None and f.fallback_used for f in fits)
  nb_missing = sum(f is None for f in fits)
  if nb_missing:
    logging.warning('%d of %d x points have too few usable lambda points '
                    'for %s extrapolation.', nb_missing, nb_rows, family)
  if nb_fallbacks:
    logging.warning('Rational extrapolation fell back to quadratic at %d of '
                    '%d x points.', nb_fallbacks, nb_rows)
  return curve, fits
