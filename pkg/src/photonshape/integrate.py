"""Adaptive embedded Runge-Kutta integration.

A single Dormand-Prince 5(4) stepper drives every continuous-time solve in
the toolkit: the single-excitation oracle, the master equation, and the
between-jump segments of Monte Carlo trajectories. Sharing one stepper keeps
oracle-vs-master comparisons free of method bias, and the dense-output
interpolant lets the Monte Carlo loop localize quantum jumps inside a step
without shrinking the step size.

Default tolerances are rtol=1e-8, atol=1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import IntegratorError

RTOL_DEFAULT = 1e-8
ATOL_DEFAULT = 1e-10

# Dormand-Prince 5(4) tableau. The 7th stage is FSAL.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B5 - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
# Quartic dense-output coefficients (Shampine's interpolant for this pair).
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_MAX_STEPS = 2_000_000


class DormandPrince:
    """Stateful adaptive stepper over a complex state vector.

    After each accepted step, `interpolate` evaluates the quartic dense
    output anywhere inside that step.
    """

    def __init__(
        self,
        rhs: Callable[[float, np.ndarray], np.ndarray],
        t0: float,
        y0: np.ndarray,
        rtol: float = RTOL_DEFAULT,
        atol: float = ATOL_DEFAULT,
        h0: float | None = None,
    ) -> None:
        self.rhs = rhs
        self.t = float(t0)
        self.y = np.array(y0, dtype=complex)
        self.rtol = rtol
        self.atol = atol
        self.k1 = np.asarray(rhs(self.t, self.y), dtype=complex)
        self.h = h0 if h0 is not None else self._initial_step()
        self._t_old = self.t
        self._h_last = 0.0
        self._Q = None  # dense-output matrix of the last accepted step
        self._y_old = self.y.copy()
        self.n_steps = 0

    def _initial_step(self) -> float:
        scale = self.atol + self.rtol * np.abs(self.y)
        d0 = np.sqrt(np.mean(np.abs(self.y / scale) ** 2))
        d1 = np.sqrt(np.mean(np.abs(self.k1 / scale) ** 2))
        if d0 < 1e-5 or d1 < 1e-5:
            return 1e-12
        return 0.01 * d0 / d1

    def _error_norm(self, err: np.ndarray, y_new: np.ndarray) -> float:
        scale = self.atol + self.rtol * np.maximum(np.abs(self.y), np.abs(y_new))
        return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))

    def step(self, t_limit: float) -> None:
        """Advance by one accepted step, never past t_limit."""
        if t_limit <= self.t:
            raise IntegratorError("t_limit must exceed current time")
        span = t_limit - self.t
        h = min(self.h, span)
        k = np.empty((7, self.y.size), dtype=complex)
        for attempt in range(100):
            self.n_steps += 1
            if self.n_steps > _MAX_STEPS:
                raise IntegratorError("step budget exhausted")
            k[0] = self.k1
            for i in range(1, 7):
                yi = self.y + h * (_A[i] @ k[:i])
                k[i] = self.rhs(self.t + _C[i] * h, yi)
            y_new = self.y + h * (_B5 @ k)
            err = h * (_E @ k)
            enorm = self._error_norm(err, y_new)
            if enorm <= 1.0:
                factor = _MAX_FACTOR if enorm == 0 else min(
                    _MAX_FACTOR, _SAFETY * enorm ** -0.2
                )
                self._t_old = self.t
                self._y_old = self.y
                self._h_last = h
                self._Q = k.T @ _P
                self.t = self.t + h
                self.y = y_new
                self.k1 = k[6]  # FSAL
                self.h = h * factor
                return
            h *= max(_MIN_FACTOR, _SAFETY * enorm ** -0.2)
            if h < 1e-18 * max(abs(t_limit), 1e-30) + 1e-30:
                raise IntegratorError(f"step size underflow at t={self.t}")
        raise IntegratorError("too many rejected step attempts")

    def interpolate(self, t_query) -> np.ndarray:
        """Dense output inside the last accepted step (vectorized over t)."""
        if self._Q is None or self._h_last == 0.0:
            raise IntegratorError("no accepted step to interpolate")
        theta = (np.asarray(t_query, dtype=float) - self._t_old) / self._h_last
        powers = np.vstack([theta, theta**2, theta**3, theta**4])
        return (self._y_old[:, None] + self._h_last * (self._Q @ powers)).T


def integrate_to_grid(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    tgrid: np.ndarray,
    rtol: float = RTOL_DEFAULT,
    atol: float = ATOL_DEFAULT,
) -> np.ndarray:
    """Integrate y' = rhs(t, y) and sample the solution on tgrid.

    Returns an array of shape (len(tgrid), len(y0)), complex. Grid points are
    filled from the dense interpolant of whichever accepted step covers them,
    so the step sequence is controlled by error estimates alone.
    """
    tgrid = np.asarray(tgrid, dtype=float)
    out = np.empty((tgrid.size, np.size(y0)), dtype=complex)
    out[0] = y0
    stepper = DormandPrince(rhs, tgrid[0], y0, rtol=rtol, atol=atol)
    idx = 1
    t_end = tgrid[-1]
    while idx < tgrid.size:
        stepper.step(t_end)
        while idx < tgrid.size and tgrid[idx] <= stepper.t + 1e-30:
            out[idx] = stepper.interpolate(tgrid[idx])[0]
            idx += 1
    return out
