# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

from pathlib import Path

from setuptools import find_packages, setup

import versioningit

setup(
    name="seqpt",
    version=versioningit.get_version(),
    description="Selective and efficient quantum process tomography in "
                "composite dimension, simulated end to end",
    author="python-seqpt developers",
    long_description=Path("README.rst").read_text(),
    long_description_content_type="text/x-rst",
    license="PSF-2.0",
    keywords="quantum process tomography mutually unbiased bases 2-design "
             "chi matrix",
    zip_safe=False,
    packages=find_packages('src'),
    package_dir={'': 'src'},
    package_data={'seqpt': ['py.typed']},
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "zlib-ng>=0.4.0",
    ],
    entry_points={"console_scripts": ["seqpt=seqpt.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: Implementation :: CPython",
        "Development Status :: 4 - Beta",
        "Topic :: Scientific/Engineering :: Physics",
        "License :: OSI Approved :: Python Software Foundation License",
        "Operating System :: POSIX :: Linux",
        "Operating System :: MacOS",
        "Operating System :: Microsoft :: Windows",
    ],
    python_requires=">=3.8",  # Earliest version still tested.
)
