#!/usr/bin/env python3
"""
extlab - Setup Script
"""

from setuptools import setup, find_packages

# Read README for long description
with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

# Read requirements
with open("requirements.txt", "r", encoding="utf-8") as fh:
    requirements = [
        line.split("#", 1)[0].strip()
        for line in fh
        if line.strip() and not line.startswith("#")
    ]

# Version
__version__ = "1.0.0"

setup(
    name="extlab",
    version=__version__,
    author="extlab Contributors",
    description="Numerical verification of correct and normal extensions of differential operators",
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Mathematics",
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.10",
    install_requires=requirements,
    extras_require={
        "dev": [
            "pytest>=8.0.0",
            "jsonschema>=4.19.0",
            "black>=24.0.0",
            "flake8>=7.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "extlab=cli.main:main",
        ],
    },
    include_package_data=True,
    package_data={
        "utils": ["defaults.yaml"],
        "cli": ["report_schema.json"],
    },
    zip_safe=False,
)
