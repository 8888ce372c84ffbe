from setuptools import setup, find_packages

setup(
    name="echofusion",
    version="0.1.0",
    description="Streaming acoustic echo cancellation with filter-bank delay estimation, "
                "neural residual echo suppression and OMLSA fusion",
    packages=find_packages(exclude=("tests", "scripts")),
    python_requires=">=3.9",
    install_requires=[
        "torch",
        "transformers",
        "jsonschema",
        "numpy",
        "scipy",
        "pandas",
        "soundfile",
        "numba",
        "tqdm",
        "python-dotenv",
    ],
    entry_points={"console_scripts": ["echofusion=src.cli:main"]},
)
