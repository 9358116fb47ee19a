"""Rate-distortion with a shared cache (Python bindings)."""

from ._rdcache import *  # noqa: F401,F403
from ._rdcache import RdcacheError, SourceLibrary, DistortionTransform

__version__ = "0.1.0"
