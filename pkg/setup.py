#!/usr/bin/env python
import re
import os
from setuptools import setup, find_packages

with open('./requirements.txt', 'r') as reqs_file:
    reqs = reqs_file.readlines()

# Get version
with open(os.path.join('polyflow', 'constants.py'), 'rt') as consts_file:
    version = re.search(r'__version__ = \'(.*?)\'', consts_file.read()).group(1)

setup(
    name='polyflow',
    version=version,
    description='Polyflow lifting and lifted linear MPC of nonlinear systems',
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    packages=find_packages(exclude=('tests', 'acceptance')),
    install_requires=reqs,
    python_requires='>=3.7',
    license='MIT',
    setup_requires=['pytest-runner'],
    tests_require=['pytest', 'mock', 'hypothesis'],
    entry_points={
        'console_scripts': ['polyflow = polyflow.cli:main']
    },
    keywords=[
        'koopman',
        'edmd',
        'model-predictive-control',
        'lifting',
        'invariant-set',
        'riccati',
    ],
    classifiers=(
        'Intended Audience :: Science/Research',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.7',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Topic :: Scientific/Engineering :: Mathematics',
    )
)
