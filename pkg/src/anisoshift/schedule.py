"""Geometric residual-shift noise schedule.

Timesteps are 1-based: ``alpha_bar[t]`` for ``t = 1..T``. Index 0 of every
array holds the ``t = 0`` boundary value (``alpha_bar[0] = 0``) so that
``sch.alpha_bar[t]`` reads naturally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

PAPER = "paper"
EXACT_POSTERIOR = "exact_posterior"
VARIANCE_MODES = (PAPER, EXACT_POSTERIOR)


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    kappa: float
    p: float
    alpha_bar_1: float
    alpha_bar_T: float
    alpha_bar: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def settings(self):
        """The constructor inputs, enough to rebuild the schedule."""
        return {
            "T": self.T,
            "kappa": self.kappa,
            "p": self.p,
            "alpha_bar_1": self.alpha_bar_1,
            "alpha_bar_T": self.alpha_bar_T,
        }

    def check_t(self, t):
        if not 1 <= t <= self.T:
            raise IndexError(f"timestep {t} outside 1..{self.T}")

    def reverse_std_coeff(self, t, mode=PAPER):
        return reverse_std_coeff(self, t, mode)

    def marginal_std_coeff(self, t):
        """kappa * sqrt(alpha_bar_t): std multiplier of the direct marginal."""
        self.check_t(t)
        return self.kappa * math.sqrt(self.alpha_bar[t])

    def table(self, mode=PAPER):
        return [
            {
                "t": t,
                "alpha_bar": float(self.alpha_bar[t]),
                "alpha": float(self.alpha[t]),
                "beta": float(self.beta[t]),
                "reverse_std_coeff": self.reverse_std_coeff(t, mode),
            }
            for t in range(1, self.T + 1)
        ]


def build_geometric_schedule(T=6, alpha_bar_1=0.001, alpha_bar_T=0.999, p=0.3, kappa=0.5):
    """alpha_bar_t = a1 * (aT / a1) ** (((t - 1) / (T - 1)) ** p)."""
    if not isinstance(T, (int, np.integer)) or T < 2:
        raise ConfigurationError("T", "must be an integer >= 2")
    if not 0 < alpha_bar_1 < alpha_bar_T < 1:
        bad = "alpha_bar_1" if not 0 < alpha_bar_1 < 1 else "alpha_bar_T"
        raise ConfigurationError(bad, "need 0 < alpha_bar_1 < alpha_bar_T < 1")
    if p <= 0:
        raise ConfigurationError("p", "must be positive")
    if kappa <= 0:
        raise ConfigurationError("kappa", "must be positive")

    T = int(T)
    ratio = alpha_bar_T / alpha_bar_1
    abar = np.zeros(T + 1)
    for t in range(1, T + 1):
        abar[t] = alpha_bar_1 * ratio ** (((t - 1) / (T - 1)) ** p)
    # pin the endpoints so they match the configured bounds bit-for-bit
    abar[1], abar[T] = alpha_bar_1, alpha_bar_T
    alpha = np.diff(abar, prepend=0.0)
    alpha[0] = 0.0
    beta = np.zeros(T + 1)
    beta[1:] = alpha[1:] / abar[1:]
    beta[1] = 1.0

    for arr in (abar, alpha, beta):
        arr.setflags(write=False)
    return NoiseSchedule(T, float(kappa), float(p), float(alpha_bar_1), float(alpha_bar_T),
                         abar, alpha, beta)


def reverse_std_coeff(sch, t, mode=PAPER):
    """Scalar multiplying the guidance field to give the reverse-step std.

    ``paper``: kappa * sqrt(beta_t * (1 - beta_t)).
    ``exact_posterior``: kappa * sqrt(beta_t * alpha_bar_{t-1}), the true
    Gaussian posterior of the forward process.
    """
    sch.check_t(t)
    b = sch.beta[t]
    if mode == PAPER:
        var = b * (1.0 - b)
    elif mode == EXACT_POSTERIOR:
        var = b * sch.alpha_bar[t - 1]
    else:
        raise ValueError(f"unknown variance mode {mode!r}")
    return sch.kappa * math.sqrt(max(var, 0.0))
