try:
    from setuptools import setup, find_packages
except ImportError:
    # Fallback if setuptools is not installed
    print("Error: setuptools is not installed. Please install it first:")
    print("    pip install setuptools")
    exit(1)

setup(
    name="cccharts",
    version="1.0.0",
    description="Canonical coordinate charts, Carnot-Caratheodory balls and scaling maps for vector fields",
    packages=find_packages(exclude=['tests', 'tests.*']),
    install_requires=[
        # Numerics
        'numpy>=1.20.0',
        'scipy>=1.7.0',

        # Configuration
        'python-dotenv>=0.21.0',
        'tomli>=1.1.0; python_version < "3.11"',
    ],
    extras_require={
        'test': [
            'pytest>=7.0',
        ],
    },
    entry_points={
        'console_scripts': [
            'cccharts=cccharts.cli:main',
        ],
    },
    python_requires='>=3.9',
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
