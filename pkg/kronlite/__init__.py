"""
Kron reduction of three-phase radial networks and its exact reversal
"""
from ._version import get_versions
__version__ = get_versions()['version']
del get_versions

from ._utils import KronError, Violation
from .config import *
from .blockmat import *
from .network import *
from .kron_forward import *
from .sibling import *
from .kron_reverse import *
from .decomposition import *
from .estimation import *
from .analysis import *
