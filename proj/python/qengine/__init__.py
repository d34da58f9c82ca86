"""Open-system laser engines on a truncated Fock space.

Thin wrapper around the compiled ``_qengine`` extension. States are complex
NumPy matrices; photon distributions are real vectors over n = 0..cutoff.
"""

from ._qengine import *  # noqa: F401,F403

__version__ = "0.1.0"
