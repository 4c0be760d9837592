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

"""Setup for pip package."""

import unittest
from setuptools import find_namespace_packages
from setuptools import setup


def _parse_requirements(requirements_txt_path):
  with open(requirements_txt_path) as fp:
    return fp.read().splitlines()


def test_suite():
  test_loader = unittest.TestLoader()
  all_tests = test_loader.discover('jax_simex/tests',
                                   pattern='*_test.py',
                                   top_level_dir='.')
  return all_tests

setup(
    name='jax_simex',
    version='0.1',
    description=('Exact extrapolation, SIMEX and naive local linear '
                 'regression under Gaussian measurement error.'),
    author='The jax_simex Authors',
    # Contained modules and scripts.
    packages=find_namespace_packages(include=['jax_simex', 'jax_simex.*']),
    package_data={'jax_simex.tests': ['testdata/*.csv']},
    entry_points={'console_scripts': ['jax_simex=jax_simex.cli:run']},
    install_requires=_parse_requirements('requirements.txt'),
    python_requires='>=3.7',
    platforms=['any'],
    license='Apache 2.0',
    test_suite='setup.test_suite',
    include_package_data=True,
    zip_safe=False,
)
