"""
Setup script for Default Contagion
"""
from setuptools import setup, find_packages

setup(
    name="default_contagion",
    version="0.1.0",
    description="Default clustering in large interacting credit portfolios: particle pools, mean-field limits and low-rank networks",
    author="Default Contagion",
    packages=find_packages(exclude=["examples", "examples.*"]),
    py_modules=["main"],
    include_package_data=True,
    install_requires=[
        "numpy>=1.20.0",
        "scipy>=1.7.0",
        "pandas>=1.5.0",
    ],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Financial and Insurance Industry",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Office/Business :: Financial :: Investment",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
    entry_points={
        "console_scripts": [
            "default-contagion=main:main",
        ],
    },
)
