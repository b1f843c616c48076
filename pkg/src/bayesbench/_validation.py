"""Input validation helpers shared by the public API."""

import numbers

import numpy as np

from .exceptions import ConfigurationError, DomainError

TWO_PI = 2.0 * np.pi


def wrap_angles(x):
    """Map angles onto [0, 2*pi)."""
    out = np.mod(np.asarray(x, dtype=float), TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def wrap_centered(x):
    """Map angle differences onto (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(x, dtype=float), TWO_PI)
    return out


def check_angles(values, p=None, name="phases"):
    """Return ``values`` as a wrapped 1-d float array of length ``p``."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError(f"{name} must be a non-empty 1-d sequence of angles")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    if p is not None and arr.size != p:
        raise DomainError(f"{name} has length {arr.size}, expected {p}")
    return wrap_angles(arr)


def check_positions(positions, p=None):
    """Return particle positions as an (n, p) wrapped float array."""
    arr = np.asarray(positions, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DomainError("positions must be a 2-d (n, p) array")
    if p is not None and arr.shape[1] != p:
        raise DomainError(f"positions have {arr.shape[1]} columns, expected {p}")
    return wrap_angles(arr)


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}", key=name)
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}", key=name)
    return value


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ValueError(f"{seed!r} cannot be used to seed a numpy Generator")
