from ._qtat import *  # noqa: F401,F403
from ._qtat import __version__  # noqa: F401
