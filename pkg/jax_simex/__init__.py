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

"""Nonparametric regression with Gaussian covariate measurement error.

Naive, simulation-free EX and classical SIMEX local linear estimators,
extrapolation to lambda = -1, asymptotic diagnostics and a Monte-Carlo
harness.
"""

import jax

jax.config.update('jax_enable_x64', True)

# pylint: disable=g-import-not-at-top,wrong-import-position
from jax_simex.src.asymptotics import bias_coefficient
from jax_simex.src.asymptotics import builtin_truth
from jax_simex.src.asymptotics import cross_covariance
from jax_simex.src.asymptotics import expected_sums
from jax_simex.src.asymptotics import gamma_limit
from jax_simex.src.asymptotics import lemma_moment_predictions
from jax_simex.src.asymptotics import moment_coefficients
from jax_simex.src.asymptotics import population_fit
from jax_simex.src.asymptotics import QuadratureConfig
from jax_simex.src.asymptotics import TrueModel
from jax_simex.src.asymptotics import variance_delta
from jax_simex.src.asymptotics import weighted_moment
from jax_simex.src.errormodel import collapse_replicates
from jax_simex.src.errormodel import ReplicateSample
from jax_simex.src.errormodel import transform_response
from jax_simex.src.extrapolation import extrapolate_profile
from jax_simex.src.extrapolation import ExtrapolantFamily
from jax_simex.src.extrapolation import fit_polynomial
from jax_simex.src.extrapolation import fit_rational
from jax_simex.src.gausskit import cond_moments
from jax_simex.src.gausskit import GaussParams
from jax_simex.src.harness import emit_tables
from jax_simex.src.harness import generate_dataset
from jax_simex.src.harness import run_scenario
from jax_simex.src.harness import systematic_curve
from jax_simex.src.harness import SimulationSpec
from jax_simex.src.locallinear import ex_fit_point
from jax_simex.src.locallinear import ex_profile
from jax_simex.src.locallinear import naive_fit
from jax_simex.src.locallinear import naive_profile
from jax_simex.src.locallinear import ObservedSample
from jax_simex.src.locallinear import simex_profile
from jax_simex.src.locallinear import SmootherConfig
from jax_simex.src.utils import open_file
