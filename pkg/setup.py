import setuptools

setuptools.setup(
    name="thermoctl",
    version="0.0",
    packages=setuptools.find_packages(exclude=["tests", "tests.*"]),
    install_requires=["numpy", "scipy", "pandas", "scikit-learn", "tqdm", "mlflow<3"],
    entry_points={"console_scripts": ["thermoctl=thermoctl.cli:main"]},
)
