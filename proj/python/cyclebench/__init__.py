"""Python access to the cyclebench C++ library."""

from ._cyclebench import *  # noqa: F401,F403
from ._cyclebench import __version__  # noqa: F401
