#!/usr/bin/env python

from setuptools import setup

setup(
    name='heatdisc',
    version='0.1.0',
    description='Optimal placement of a conductive disc in a heated composite',
    packages=['heatdisc'],
    scripts=['scripts/heatdisc'],
    python_requires='>=3.9',
    install_requires=[
        'numpy',
        'scipy',
        'meshio',
    ],
)
