from setuptools import find_packages, setup

setup(
    name="stokes-control",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "examples"]),
    install_requires=[
        "dagster>=1.5.0",
        "dagster-webserver>=1.5.0",
        "duckdb>=0.9.0",
        "pandas>=2.0.0",
        "numpy>=1.24",
        "scipy>=1.10",
        "tabulate>=0.9",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
        ],
    },
    entry_points={
        "console_scripts": ["stokes-control=stokes_control.cli:main"],
    },
)
