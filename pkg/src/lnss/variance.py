"""Variance discount factor, Q-value variance bounds and stability metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"invalid discount: gamma={gamma!r} must lie in (0, 1)")


def psi(gamma: float, N: int) -> float:
    """Factor by which an N-step surrogate reward shrinks the variance bound.

    ``psi = ((g - 1)/(g**N - 1))**2 * (g**(2N) - 1)/(g**2 - 1)``.  It equals 1
    at ``N = 1`` and decreases towards ``(1 - g)/(1 + g)`` as N grows.
    """
    _check_gamma(gamma)
    if N < 1:
        raise ValueError("N must be >= 1")
    if N == 1:
        return 1.0
    a = (gamma - 1.0) / (gamma**N - 1.0)
    return a * a * (gamma ** (2 * N) - 1.0) / (gamma * gamma - 1.0)


def psi_factored(gamma: float, N: int) -> float:
    """Same quantity as :func:`psi`, written as ``(g-1)/(g+1) * (1 + 2/(g**N - 1))``."""
    _check_gamma(gamma)
    if N < 1:
        raise ValueError("N must be >= 1")
    return (gamma - 1.0) / (gamma + 1.0) * (1.0 + 2.0 / (gamma**N - 1.0))


def psi_limit(gamma: float) -> float:
    _check_gamma(gamma)
    return (1.0 - gamma) / (1.0 + gamma)


@dataclass
class PsiCurve:
    gamma: float
    points: list[tuple[int, float]] = field(default_factory=list)

    @classmethod
    def compute(cls, gamma: float, N_max: int) -> PsiCurve:
        return cls(gamma, [(N, psi(gamma, N)) for N in range(1, N_max + 1)])


def psi_table(gammas, N_max: int) -> list[tuple[float, int, float]]:
    """Rows ``(gamma, N, psi)`` for every gamma and ``N = 1..N_max``."""
    rows = []
    for g in gammas:
        rows.extend((g, N, p) for N, p in PsiCurve.compute(g, N_max).points)
    return rows


def variance_bound(gamma: float, B: float, iterations: int, psi_factor: float = 1.0) -> np.ndarray:
    """Upper bound on the Q variance after each of ``iterations`` backups.

    Element ``i-1`` is ``psi_factor * B * sum_{t=1..i} gamma**(2(t-1))``.
    """
    if B < 0:
        raise ValueError("B must be non-negative")
    if not np.isfinite(B):
        raise ValueError("B must be finite")
    _check_gamma(gamma)
    terms = (gamma**2) ** np.arange(iterations)
    return psi_factor * B * np.cumsum(terms)


@dataclass
class VarianceTrace:
    empirical_var: np.ndarray
    bound: np.ndarray
    standard_error: np.ndarray

    @property
    def iterations(self) -> int:
        return len(self.empirical_var)

    def within_bound(self, n_se: float = 3.0) -> np.ndarray:
        return self.empirical_var <= self.bound + n_se * self.standard_error


def parse_dist(spec: str):
    """Parse ``uniform``, ``const:<c>`` or ``bern:<p>`` into ``(sampler, variance)``.

    ``bern:<p>`` draws 0/1 with success probability p.  The sampler has the
    signature ``sampler(rng, size) -> ndarray``.
    """
    spec = spec.strip()
    if spec == "uniform":
        return (lambda rng, size: rng.random(size)), 1.0 / 12.0
    kind, _, arg = spec.partition(":")
    if kind == "const":
        c = float(arg)
        return (lambda rng, size: np.full(size, c)), 0.0
    if kind == "bern":
        p = float(arg)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli probability out of range: {p}")
        return (lambda rng, size: (rng.random(size) < p).astype(np.float64)), p * (1.0 - p)
    raise ValueError(f"unknown reward distribution {spec!r}")


def _shifted_var(x: np.ndarray) -> float:
    # shifting by one sample makes the variance of identical values exactly zero
    return float(np.var(x - x[0]))


def _variance_se(var: np.ndarray, trials: int) -> np.ndarray:
    # standard error of a sample variance under a normal approximation
    return var * np.sqrt(2.0 / (trials - 1))


def simulate_q_iteration(
    gamma: float,
    N: int,
    trials: int = 10_000,
    iterations: int = 200,
    dist: str = "uniform",
    seed: int = 0,
) -> tuple[VarianceTrace, VarianceTrace]:
    """Monte Carlo check of the single-step and LNSS Q-variance bounds.

    Runs ``trials`` independent replicates of ``Q <- r + gamma * Q`` and of
    ``QQ <- r' + gamma * QQ`` from zero, where each ``r'`` is the surrogate
    reward of ``N`` fresh IID rewards.  Returns one trace per recursion with
    the cross-replicate variance after every backup and the analytic bound.
    """
    if trials < 100:
        raise ValueError("insufficient replicates: need at least 100 trials")
    _check_gamma(gamma)
    sampler, B = parse_dist(dist)
    rng_single, rng_lnss = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))

    weights = gamma ** np.arange(N) * ((gamma - 1.0) / (gamma**N - 1.0))
    q = np.zeros(trials)
    qq = np.zeros(trials)
    var_q = np.empty(iterations)
    var_qq = np.empty(iterations)
    for i in range(iterations):
        q = sampler(rng_single, trials) + gamma * q
        window = sampler(rng_lnss, (trials, N))
        qq = window @ weights + gamma * qq
        var_q[i] = _shifted_var(q)
        var_qq[i] = _shifted_var(qq)

    return (
        VarianceTrace(var_q, variance_bound(gamma, B, iterations), _variance_se(var_q, trials)),
        VarianceTrace(var_qq, variance_bound(gamma, B, iterations, psi(gamma, N)), _variance_se(var_qq, trials)),
    )


def _population_cv(values) -> float:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("empty sequence")
    m = v.mean()
    if m == 0:
        raise ValueError("CV undefined: zero mean")
    return float(np.std(v - v[0]) / abs(m))


def coefficient_of_variation(values) -> float:
    """Population standard deviation over absolute mean."""
    return _population_cv(values)


def q_std_percentage(q_values) -> float:
    """``100 * std(Q) / |mean(Q)|`` over a set of Q estimates."""
    return 100.0 * _population_cv(q_values)
