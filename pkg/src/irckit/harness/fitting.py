"""Least-squares curve fits for load measurements."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MODELS = ("linear", "quadratic")


class DegenerateInput(Exception):
    """Too few points, or no variance to fit against."""


@dataclass
class FitResult:
    model: str
    coefficients: tuple[float, ...]  # highest degree first
    r_squared: float

    def describe(self) -> str:
        names = ("a", "b", "c")
        terms = ", ".join(f"{n}={c:.6g}" for n, c in zip(names, self.coefficients))
        return f"{self.model}: {terms}, r2={self.r_squared:.4f}"


def fit(xs: Sequence[float], ys: Sequence[float], model: str) -> FitResult:
    """Ordinary least squares for y = a*x + b or y = a*x^2 + b*x + c."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    if len(xs) != len(ys):
        raise ValueError("x and y lengths differ")
    if len(xs) < 3:
        raise DegenerateInput(f"need at least 3 points, got {len(xs)}")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInput("zero variance in input")
    degree = 1 if model == "linear" else 2
    coeffs = np.polyfit(x, y, degree)
    predicted = np.polyval(coeffs, x)
    ss_res = float(np.sum((y - predicted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    return FitResult(model, tuple(float(c) for c in coeffs), 1.0 - ss_res / ss_tot)
