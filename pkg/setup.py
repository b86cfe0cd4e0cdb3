from setuptools import setup, find_packages

setup(
    name="steering-bounds",
    version="1.0.0",
    description="Communication-assisted EPR-steering bounds, calibration and trial simulation",
    packages=find_packages(include=["src", "src.*"]),
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0",
        "scipy>=1.10.0",
        "pandas>=2.0.0",
        "pydantic>=2.0.0",
        "python-dotenv>=1.0.0",
        "langgraph>=0.0.32",
        "matplotlib>=3.7.0",
    ],
    extras_require={
        "dev": ["pytest>=7.0.0", "pytest-asyncio>=0.21.0", "hypothesis>=6.80.0", "black>=23.0.0"],
    },
    entry_points={
        "console_scripts": ["steering-bounds = src.cli.main:main"],
    },
)
