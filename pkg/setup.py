# coding=utf-8
import setuptools

try:
    with open("README.md", "r") as fh:
        long_description = fh.read()
except OSError:
    long_description = '''*lacsh* estimates latent socioeconomic health with a spatial hierarchical latent factor model and
    a generalized propensity score adjustment for a continuous treatment, sampled by adaptive Markov chain Monte Carlo.'''

setuptools.setup(
    name="lacsh",
    version="0.1.0",
    license='LGPL-3.0 License',
    author="lacsh developers",
    description="Bayesian latent causal socioeconomic health model with spatial dependence.",
    long_description=long_description,
    classifiers=[
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: GNU Lesser General Public License v3 (LGPLv3)",
        "Operating System :: OS Independent",
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    long_description_content_type='text/markdown',
    keywords=['bayesian statistics', 'markov chain monte carlo', 'latent factor model', 'spatial statistics',
              'generalized propensity score', 'causal inference'],
    packages=setuptools.find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    package_data={'lacsh': ['data/*.csv', 'data/*.cfg']},
    python_requires='>=3.9',
    install_requires=['deap', 'numpy>=1.22', 'scipy>=1.8', 'pandas>=1.5', 'statsmodels>=0.13'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['lacsh=lacsh.cli:main']},
)
