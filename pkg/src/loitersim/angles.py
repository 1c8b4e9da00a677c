"""Angle helpers shared across the package."""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_pi(angle):
    """Wrap an angle (scalar or array) into [-pi, pi), half-open."""
    wrapped = np.mod(angle + np.pi, TWO_PI) - np.pi
    if np.isscalar(angle) or np.ndim(angle) == 0:
        return float(wrapped)
    return wrapped
