"""Synthetic signals with known scaling, and their analytic oracles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CASCADE_ASSIGNMENTS = ("left-heavy", "random")


@dataclass(frozen=True)
class CascadeSpec:
    levels: int = 16
    multiplier: float = 0.75
    assignment: str = "left-heavy"
    seed: int | None = None

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError("cascade levels must be an integer >= 1")
        if not 0.5 < self.multiplier < 1:
            raise ValueError("cascade multiplier must lie strictly inside (0.5, 1)")
        if self.assignment not in CASCADE_ASSIGNMENTS:
            raise ValueError(f"assignment must be one of {CASCADE_ASSIGNMENTS}")


@dataclass(frozen=True)
class FgnSpec:
    hurst: float
    length: int
    seed: int | None = None

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ValueError("hurst must lie strictly inside (0, 1)")
        if int(self.length) != self.length or self.length < 2:
            raise ValueError("fGn length must be an integer >= 2")


def gen_white_noise(n: int, seed=None) -> np.ndarray:
    if n < 2:
        raise ValueError("n must be at least 2")
    return np.random.default_rng(seed).standard_normal(n)


def fgn_autocovariance(hurst: float, lags) -> np.ndarray:
    k = np.abs(np.asarray(lags, dtype=np.float64))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def gen_fgn(spec: FgnSpec) -> np.ndarray:
    """Unit-variance fractional Gaussian noise by circulant embedding
    (Davies-Harte). Exact in distribution.
    """
    n = int(spec.length)
    gamma = fgn_autocovariance(spec.hurst, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])  # length 2n
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        raise RuntimeError("circulant embedding is not positive semi-definite")
    eig = np.clip(eig, 0.0, None)
    m = row.size
    rng = np.random.default_rng(spec.seed)
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return (np.fft.fft(np.sqrt(eig) * w) / np.sqrt(m)).real[:n]


def gen_binomial_cascade(spec: CascadeSpec) -> np.ndarray:
    """Conservative binomial cascade of length ``2**levels`` summing to 1.

    ``left-heavy`` hands the multiplier to the left child at every split;
    ``random`` picks the heavier child per node from ``spec.seed``.
    """
    a = spec.multiplier
    rng = np.random.default_rng(spec.seed) if spec.assignment == "random" else None
    mass = np.ones(1)
    for _ in range(spec.levels):
        if rng is None:
            left = np.full(mass.size, a)
        else:
            left = np.where(rng.random(mass.size) < 0.5, a, 1.0 - a)
        nxt = np.empty(2 * mass.size)
        nxt[0::2] = mass * left
        nxt[1::2] = mass * (1.0 - left)
        mass = nxt
    return mass


def cascade_tau_oracle(a: float, q) -> np.ndarray:
    """tau(q) = -log2(a^q + (1-a)^q) for the binomial cascade."""
    q = np.asarray(q, dtype=np.float64)
    return -np.log2(a**q + (1.0 - a) ** q)


def cascade_hurst_oracle(a: float, q) -> np.ndarray:
    """Generalized Hurst exponent of the binomial cascade; h(0) is the
    limit -log2(a(1-a))/2.
    """
    q = np.asarray(q, dtype=np.float64)
    safe_q = np.where(q == 0, 1.0, q)
    h = (cascade_tau_oracle(a, safe_q) + 1.0) / safe_q
    return np.where(q == 0, -np.log2(a * (1.0 - a)) / 2.0, h)


def cascade_alpha_oracle(a: float, q) -> np.ndarray:
    """Exact d tau / dq."""
    q = np.asarray(q, dtype=np.float64)
    b = 1.0 - a
    num = a**q * np.log(a) + b**q * np.log(b)
    return -num / ((a**q + b**q) * np.log(2.0))


def cascade_width_limit(a: float) -> float:
    """Width of the full spectrum, alpha(-inf) - alpha(+inf) = log2(a/(1-a))."""
    return float(np.log2(a / (1.0 - a)))


def legendre_spectrum(q, tau) -> tuple[np.ndarray, np.ndarray]:
    """Numeric Legendre transform: alpha = d tau/dq by central differences,
    f = q alpha - tau.
    """
    q = np.asarray(q, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    alpha = np.gradient(tau, q, edge_order=2)
    return alpha, q * alpha - tau


def cascade_oracle_width(a: float, q) -> float:
    """Spread of singularity strengths reached on a finite q grid."""
    alpha, _ = legendre_spectrum(q, cascade_tau_oracle(a, q))
    return float(alpha.max() - alpha.min())
