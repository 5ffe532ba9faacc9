from kirlab.exceptions import *
from kirlab.grid import *
from kirlab.groundstate import *
from kirlab.shooting import *
from kirlab.branch import *
from kirlab.kirchhoff import *
from kirlab.sweep import *
from kirlab.config import *
from kirlab.output import *

from kirlab.version import get_version as _get_version
__version__ = _get_version()
