"""Argument checks and the exception types shared across the package."""

from __future__ import annotations

import math
import numbers


class MeshValidationError(ValueError):
    """A mesh violates a structural or geometric invariant.

    ``entity`` names the offending object, e.g. ``"cell 12"``.
    """

    def __init__(self, message: str, entity: str | None = None):
        super().__init__(f"{entity}: {message}" if entity else message)
        self.entity = entity


class MeshDegenerateError(MeshValidationError):
    """A generated cell has non-positive area."""


class CFLViolationError(RuntimeError):
    """A time step would break the convex-combination form of the update."""

    def __init__(self, message: str, cell: int | None = None, step: int | None = None):
        super().__init__(message)
        self.cell = cell
        self.step = step


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_real(value, name: str, *, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    v = float(value)
    if math.isnan(v):
        raise ValueError(f"{name} must not be NaN")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ValueError(f"{name} must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ValueError(f"{name} must be {'<' if hi_open else '<='} {hi}, got {v}")
    return v


def check_xi(xi) -> float:
    return check_real(xi, "xi", lo=0.0, hi=1.0, hi_open=True)


def check_box(domain) -> tuple[float, float, float, float]:
    """Normalise ``(xmin, xmax, ymin, ymax)`` and reject degenerate boxes."""
    try:
        x0, x1, y0, y1 = (float(v) for v in domain)
    except (TypeError, ValueError):
        raise ValueError(f"domain must be (xmin, xmax, ymin, ymax), got {domain!r}") from None
    if not all(math.isfinite(v) for v in (x0, x1, y0, y1)) or x1 <= x0 or y1 <= y0:
        raise ValueError(f"degenerate domain {domain!r}")
    return x0, x1, y0, y1
