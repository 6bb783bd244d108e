# coding=utf-8
"""
The *lacsh* package estimates latent socioeconomic health from a panel of metrics with a spatial hierarchical latent
factor model, adjusts the effect of a continuous treatment on health with a generalized propensity score and samples the
posterior by Markov chain Monte Carlo.

.. tip::
    For convenience of usage, the public APIs have been imported into the top-level package *lacsh* and can be used with
    the short form ``lacsh.API`` directly. For example, ``lacsh.run_chain`` is an alias of
    :func:`lacsh.algorithms.basic.run_chain` and ``lacsh.Dataset`` of :class:`lacsh.core.entity.Dataset`.
"""
from importlib.metadata import version, PackageNotFoundError

# fetch version from setup.py
try:
    __version__ = version('lacsh')
except PackageNotFoundError:
    __version__ = 'Please install this package with setup.py'

from .core.errors import *
from .core.entity import *
from .core.spatial import *
from .core.model import *
from .tools.random import *
from .tools.kernels import *
from .tools.toolbox import *
from .tools.pipeline import *
from .tools.config import *
from .algorithms.updates import *
from .algorithms.adaptive import *
from .algorithms.basic import *
from .support.persistence import *
from .support.posterior import *
from .support.balance import *
from .support.visualization import *
from .validation.synthetic import *
from .validation.oracle import *
