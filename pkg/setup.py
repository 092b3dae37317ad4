#!/usr/bin/env python
# -*- coding: utf-8 -*-
#
"""The setup.py file."""

import os
import re

from setuptools import find_packages, setup

with open("README.md", "r") as fh:
    LONG_DESCRIPTION = fh.read()

with open(os.path.join("gibbscal", "_version.py"), "r") as fh:
    VERSION = re.search(r'__version__\s*=\s*"([^"]+)"', fh.read()).group(1)

setup(
    name="gibbscal",
    description="Gibbs posteriors with a coverage-calibrated learning rate",
    keywords=["gibbs posterior", "generalized bayes", "calibration", "bootstrap"],
    install_requires=["numpy>=1.21", "scipy>=1.9", "joblib>=1.1", "tqdm>=4.60"],
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "docs"]),
    package_data={"gibbscal": ["schema/*.json"]},
    py_modules=["gcal"],
    version=VERSION,
    license="MIT",
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 4 - Beta",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
