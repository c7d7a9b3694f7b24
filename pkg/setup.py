# Copyright (c), CommunityLogiq Software

import os
import setuptools

setuptools.setup(
    name="faultforge",
    version=os.getenv("PY_PACKAGE_VERSION") or "0.1.0",
    author="CommunityLogiq Software",
    description="Fault injection campaigns for neural network inference",
    packages=setuptools.find_packages(exclude=["tests", "tests.*"]),
    package_data={"faultforge": ["py.typed", "scenarios/*.yml"]},
    python_requires=">=3.10",
    zip_safe=False,
    install_requires=[
        "loguru",
        "numpy",
        "pyarrow",
        "pyyaml",
        "tabulate",
        "termcolor",
    ],
    entry_points={
        "console_scripts": ["faultforge=faultforge:run"],
    },
)
