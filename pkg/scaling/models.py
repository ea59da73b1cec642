"""Fit results and estimates."""

import math

import numpy as np
from pydantic import BaseModel, field_validator

# Exact synthetic data gives zero scatter; errors are floored here so that
# every reported error stays positive.
ERROR_FLOOR = float(np.finfo(np.float64).eps)


def floor_error(std_error: float, value: float) -> float:
    floor = ERROR_FLOOR * max(1.0, abs(value))
    if not math.isfinite(std_error):
        return std_error
    return max(std_error, floor)


class Estimate(BaseModel):
    value: float
    std_error: float = 0.0

    def __str__(self) -> str:
        return f"{self.value:.4f} +/- {self.std_error:.4f}"


class FitResult(BaseModel):
    """An exponent with its error and the fit that produced it.

    Attributes:
        exponent: The fitted (or rescaled) slope.
        std_error: Positive standard error of `exponent`.
        intercept: Constant term of the fit (omega_1).
        correction: (omega_2, omega_3) of the exponential correction, None for linear fits.
        window: (lo, hi) of the abscissa range that entered the fit.
        residual_rms: Root mean square of the (weighted) residuals.
        n_points: Number of fitted points.
        method: How the exponent and its error were obtained.
    """

    exponent: float
    std_error: float
    intercept: float = 0.0
    correction: tuple[float, float] | None = None
    window: tuple[float, float]
    residual_rms: float
    n_points: int
    method: str = "wls"

    @field_validator("std_error")
    @classmethod
    def positive_error(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"std_error must be positive, got {value}")
        return value

    @field_validator("residual_rms")
    @classmethod
    def finite_residual(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("residual_rms must be finite")
        return value

    @property
    def estimate(self) -> Estimate:
        return Estimate(value=self.exponent, std_error=self.std_error)

    def key_values(self) -> dict[str, float | int]:
        return {
            "exponent": self.exponent,
            "std_error": self.std_error,
            "window_lo": self.window[0],
            "window_hi": self.window[1],
            "n_points": self.n_points,
            "residual_rms": self.residual_rms,
        }
