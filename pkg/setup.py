#!/usr/bin/env python

from setuptools import setup

with open("README.rst", encoding="utf-8") as readme_file:
    readme = readme_file.read()

with open("NEWS", encoding="utf-8") as history_file:
    history = history_file.read().replace(".. :changelog:", "")

setup(
    name="matlang",
    version="0.1.0",
    description="Matrix query languages over semirings: evaluation, typing and lowering",
    long_description=readme + "\n\n" + history,
    long_description_content_type="text/x-rst",
    packages=[
        "matlang",
    ],
    package_dir={
        "matlang": "matlang",
    },
    include_package_data=True,
    package_data={
        "matlang": ["programs/*.ml"],
    },
    install_requires=[
        "jmespath",
        "lark>=1.1",
    ],
    entry_points={
        "console_scripts": ["matlang = matlang.cli:main"],
    },
    python_requires=">=3.9",
    license="BSD",
    zip_safe=False,
    keywords="matlang semiring matrix query language",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Natural Language :: English",
        "Topic :: Software Development :: Interpreters",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: Implementation :: CPython",
        "Programming Language :: Python :: Implementation :: PyPy",
    ],
    tests_require=[
        "pytest",
    ],
    test_suite="tests",
)
