#!/usr/bin/env python
"""Install the srlgProtect package. Requires setuptools.

To use:
python setup.py install

Alternatively you can copy python/srlgProtect to site-packages
"""
from setuptools import setup, find_packages
import sys
import os

PkgName = "srlgProtect"

PkgRoot = "python"
PkgDir = os.path.join(PkgRoot, PkgName)
sys.path.insert(0, PkgDir)

setup(
    name = PkgName,
    version = "1.0.0",
    description = "SRLG-protected load balancing and shared bandwidth reservation by Kelley cutting planes",
    package_dir = {PkgName: PkgDir},
    packages = find_packages(PkgRoot),
    include_package_data = True,
    install_requires = [
        "numpy",
        "scipy",
        "networkx",
        "pyparsing",
        "lxml",
        "twisted",
    ],
    scripts = ["bin/srlgProtect"],
)
