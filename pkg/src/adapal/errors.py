"""Exception taxonomy shared across the package.

Four failure classes cover everything the library can reject:

* ``ConfigError``   -- a configuration object is malformed (bad bounds,
  impossible schedule parameters, schema violations).
* ``DomainError``   -- an operation was called outside its domain
  (empty input set, negative tolerance, r <= 0).
* ``InputError``    -- user-supplied data is malformed (non-finite
  observations, shape mismatches in data files).
* ``NumericalError`` -- linear algebra failed even after regularization;
  carries the last jitter level attempted.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class DomainError(ValueError):
    """Operation called outside its mathematical domain."""


class InputError(ValueError):
    """Malformed user-supplied data."""


class NumericalError(RuntimeError):
    """Numerical linear algebra failure.

    Parameters
    ----------
    message : str
        Human-readable description.
    jitter : float
        The largest diagonal jitter attempted before giving up.
    """

    def __init__(self, message: str, jitter: float = 0.0):
        super().__init__(message)
        self.jitter = jitter
