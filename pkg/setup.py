from setuptools import setup, find_packages

setup(
    name="borel_variational_resum",
    version="0.1.0",
    description="Variational Borel-conformal resummation of divergent perturbation series, with bound diagnostics and exact-sum oracles.",
    packages=find_packages(exclude=["tests", "docs", "examples", "examples.*"]),
    include_package_data=True,
    install_requires=[
        "numpy",
        "pandas",
        "scipy",
        "PyYAML",
        "pydantic>=2",
        "python-dotenv",
        "tqdm",
        "loguru"
    ],
    extras_require={
        "test": ["pytest"],
    },
    python_requires=">=3.9",
    entry_points={
        "console_scripts": [
            "borel-resum=src.cli.main:main",
        ]
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
)
