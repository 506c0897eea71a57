"""Technology scaling models: router area, clock speedup, and least-squares fitting.

The area factor captures how much router logic shrinks between two nodes
(quadratic scaling damped by a non-scaling offset); the clock factor is an
empirical sigmoid for the achievable speedup.  Both can be fitted to synthesis
samples with a damped nonlinear least-squares solver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import least_squares


class TechModelError(ValueError):
    """Raised for invalid parameters or degenerate fit inputs."""


@dataclass(frozen=True)
class AreaParams:
    """Area model parameters: `alpha` weighs the quadratically scaling logic,
    `alpha_hat` the constant (non-scaling) remainder."""

    alpha: float
    alpha_hat: float

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise TechModelError(f"alpha must be > 0, got {self.alpha}")
        if self.alpha_hat < 0:
            raise TechModelError(f"alpha_hat must be >= 0, got {self.alpha_hat}")


@dataclass(frozen=True)
class ClockParams:
    """Sigmoid clock-speedup parameters: asymptote `beta`, amplitude `beta_hat`,
    steepness `beta_tilde`, midpoint `beta_bar`."""

    beta: float
    beta_hat: float
    beta_tilde: float
    beta_bar: float

    def __post_init__(self) -> None:
        if self.beta < 1:
            raise TechModelError(f"beta must be >= 1, got {self.beta}")
        if self.beta_hat <= 0:
            raise TechModelError(f"beta_hat must be > 0, got {self.beta_hat}")
        if self.beta_tilde <= 0:
            raise TechModelError(f"beta_tilde must be > 0, got {self.beta_tilde}")


@dataclass(frozen=True)
class FitResult:
    params: Union[AreaParams, ClockParams]
    rmse: float

    def __post_init__(self) -> None:
        if self.rmse < 0:
            raise TechModelError("rmse must be >= 0")


# Reference parameter sets fitted to commercial general-purpose (GP) and
# ultra-low-voltage (ULV) node families; useful as realistic defaults.
GP_AREA_PARAMS = AreaParams(alpha=3462.7, alpha_hat=29.8)
ULV_AREA_PARAMS = AreaParams(alpha=13.2, alpha_hat=0.124)
GP_CLOCK_PARAMS = ClockParams(beta=32.85, beta_hat=7.88, beta_tilde=0.76, beta_bar=1.26)
ULV_CLOCK_PARAMS = ClockParams(beta=77.45, beta_hat=2.48, beta_tilde=0.76, beta_bar=2.77)


def relative_scaling(tau_coarse: float, tau_fine: float) -> float:
    """Feature-size ratio of a coarser node to a finer one; always >= 1."""
    if tau_fine <= 0 or tau_coarse <= 0:
        raise TechModelError("feature sizes must be positive")
    if tau_coarse < tau_fine:
        raise TechModelError(
            f"expected tau_coarse >= tau_fine, got {tau_coarse} < {tau_fine}"
        )
    return tau_coarse / tau_fine


def area_scaling(xi: float, params: AreaParams) -> float:
    """Relative router-area shrink between nodes whose feature-size ratio is xi."""
    if xi < 1:
        raise TechModelError(f"xi must be >= 1, got {xi}")
    a, ah = params.alpha, params.alpha_hat
    return (a + ah) / (a / (xi * xi) + ah)


def clock_scaling(xi: float, params: ClockParams) -> float:
    """Clock speedup between nodes whose feature-size ratio is xi (sigmoid in xi)."""
    if xi < 1:
        raise TechModelError(f"xi must be >= 1, got {xi}")
    p = params
    return p.beta / (1.0 + p.beta_hat * math.exp(-p.beta_tilde * (xi - p.beta_bar)))


def scaled_router_count(base: int, s_f: float) -> int:
    """Lower bound on routers that fit in the same area in a finer node."""
    if base < 1:
        raise TechModelError(f"base must be >= 1, got {base}")
    if s_f < 1:
        raise TechModelError(f"s_f must be >= 1, got {s_f}")
    return math.floor(base * s_f)


# -- fitting ---------------------------------------------------------------
#
# Both models are over-parameterized for curve fitting: the area factor only
# depends on the ratio alpha / alpha_hat (any common rescaling gives the same
# curve), and in the clock sigmoid the pair (beta_hat, beta_bar) enters only
# through beta_hat * exp(beta_tilde * beta_bar).  The fitters therefore work in
# a canonical gauge -- alpha + alpha_hat = 1 and beta_bar = 1 -- and
# `canonical_area_params` / `canonical_clock_params` map arbitrary parameters
# into that gauge for comparison.


def canonical_area_params(p: AreaParams) -> AreaParams:
    total = p.alpha + p.alpha_hat
    return AreaParams(alpha=p.alpha / total, alpha_hat=p.alpha_hat / total)


def canonical_clock_params(p: ClockParams) -> ClockParams:
    return ClockParams(
        beta=p.beta,
        beta_hat=p.beta_hat * math.exp(p.beta_tilde * (p.beta_bar - 1.0)),
        beta_tilde=p.beta_tilde,
        beta_bar=1.0,
    )


def _check_samples(samples: Sequence[tuple[float, float]], minimum: int) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) < minimum:
        raise TechModelError(f"need at least {minimum} samples, got {len(samples)}")
    xs = np.asarray([s[0] for s in samples], dtype=float)
    ys = np.asarray([s[1] for s in samples], dtype=float)
    if len(set(xs.tolist())) < 2:
        raise TechModelError("samples are degenerate: all xi values identical")
    return xs, ys


def _rmse(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residuals**2)))


def _multi_start(residuals, starts, bounds) -> np.ndarray:
    best = None
    for theta0 in starts:
        try:
            res = least_squares(residuals, theta0, bounds=bounds, xtol=1e-15, ftol=1e-15)
        except Exception:
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise TechModelError("fit failed for all starting points")
    return best.x


def fit_area(samples: Sequence[tuple[float, float]]) -> FitResult:
    """Least-squares fit of the area model to (xi, s_f) samples.

    Returns canonical parameters with alpha + alpha_hat = 1; the single
    identifiable degree of freedom is the constant (non-scaling) share
    alpha_hat.  Multi-start damped least squares keeps the best of 8
    deterministic starting points.
    """
    xs, ys = _check_samples(samples, 3)

    def residuals(theta: np.ndarray) -> np.ndarray:
        (u,) = theta  # u = alpha_hat share of the total
        return 1.0 / ((1.0 - u) / (xs * xs) + u) - ys

    starts = [(u0,) for u0 in (1e-6, 0.01, 0.05, 0.1, 0.2, 0.4, 0.7, 0.95)]
    (u,) = _multi_start(residuals, starts, ([0.0], [1.0 - 1e-12]))
    params = AreaParams(alpha=float(1.0 - u), alpha_hat=float(u))
    return FitResult(params=params, rmse=_rmse(residuals(np.asarray([u]))))


def fit_clock(
    samples: Sequence[tuple[float, float]], beta_fixed: Optional[float] = None
) -> FitResult:
    """Least-squares fit of the clock sigmoid to (xi, c_f) samples.

    With `beta_fixed` the asymptote is pinned (useful when no samples exist
    near saturation) and only the remaining parameters are fitted.  Returns
    canonical parameters with beta_bar = 1.
    """
    xs, ys = _check_samples(samples, 3 if beta_fixed is not None else 4)

    def model(beta, bh, bt):
        return beta / (1.0 + bh * np.exp(-bt * (xs - 1.0)))

    if beta_fixed is not None:
        if beta_fixed < 1:
            raise TechModelError(f"beta_fixed must be >= 1, got {beta_fixed}")

        def residuals(theta: np.ndarray) -> np.ndarray:
            bh, bt = theta
            return model(beta_fixed, bh, bt) - ys

        starts = [(2.0, 0.5), (8.0, 0.8), (1.0, 1.0), (4.0, 0.3),
                  (2.5, 0.7), (20.0, 1.5), (0.5, 0.2), (50.0, 1.0)]
        lo, hi = [1e-12, 1e-12], [np.inf, np.inf]
        theta = _multi_start(residuals, starts, (lo, hi))
        bh, bt = theta
        params = ClockParams(beta=float(beta_fixed), beta_hat=float(bh),
                             beta_tilde=float(bt), beta_bar=1.0)
        return FitResult(params=params, rmse=_rmse(residuals(theta)))

    beta0 = 1.1 * float(np.max(ys))  # asymptote starts just above the data

    def residuals(theta: np.ndarray) -> np.ndarray:
        beta, bh, bt = theta
        return model(beta, bh, bt) - ys

    starts = [(beta0, 2.0, 0.5), (beta0, 8.0, 0.8), (beta0 * 2, 1.0, 1.0),
              (beta0, 4.0, 0.3), (beta0 * 1.5, 2.5, 0.7), (beta0, 20.0, 1.5),
              (beta0 * 3, 0.5, 0.2), (beta0, 50.0, 1.0)]
    lo, hi = [1.0, 1e-12, 1e-12], [np.inf, np.inf, np.inf]
    theta = _multi_start(residuals, starts, (lo, hi))
    beta, bh, bt = theta
    params = ClockParams(beta=float(max(beta, 1.0)), beta_hat=float(bh),
                         beta_tilde=float(bt), beta_bar=1.0)
    return FitResult(params=params, rmse=_rmse(residuals(theta)))


# -- CSV interfaces --------------------------------------------------------


def load_samples_csv(path) -> list[tuple[float, float]]:
    """Read fit samples from a CSV with columns `xi` and `value`."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"xi", "value"} <= set(reader.fieldnames):
            missing = {"xi", "value"} - set(reader.fieldnames or [])
            raise TechModelError(f"sample CSV is missing column(s): {sorted(missing)}")
        samples = [(float(row["xi"]), float(row["value"])) for row in reader]
    if not samples:
        raise TechModelError("sample CSV contains no rows")
    return samples


def write_fit_csv(path, result: FitResult, curve_xs: Sequence[float]) -> None:
    """Write fitted parameters plus predicted curve samples for plotting."""
    params = result.params
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "value"])
        if isinstance(params, AreaParams):
            writer.writerow(["alpha", repr(params.alpha)])
            writer.writerow(["alpha_hat", repr(params.alpha_hat)])
            predict = lambda x: area_scaling(x, params)  # noqa: E731
        else:
            writer.writerow(["beta", repr(params.beta)])
            writer.writerow(["beta_hat", repr(params.beta_hat)])
            writer.writerow(["beta_tilde", repr(params.beta_tilde)])
            writer.writerow(["beta_bar", repr(params.beta_bar)])
            predict = lambda x: clock_scaling(x, params)  # noqa: E731
        writer.writerow(["rmse", repr(result.rmse)])
        writer.writerow([])
        writer.writerow(["xi", "predicted"])
        for x in curve_xs:
            writer.writerow([repr(float(x)), repr(predict(float(x)))])
