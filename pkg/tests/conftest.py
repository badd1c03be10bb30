"""Shared test oracles: finite differences, brute-force rank statistics,
quadrature integrals, and copula pair sampling.  These deliberately avoid the
library code paths they are used to check."""

import math

import numpy as np
from scipy import special
from scipy.integrate import simpson

from trafficvine.bicop import SIGN_SYMMETRIC, Family, PairCopula, cdf, hinv, pdf

#: three parameter settings per family used across the calculus suites
SETTINGS = {
    Family.INDEPENDENCE: [()],
    Family.GAUSSIAN: [(-0.5,), (0.3,), (0.8,)],
    Family.STUDENT_T: [(-0.4, 3.5), (0.5, 5.0), (0.8, 10.0)],
    Family.CLAYTON: [(0.8,), (2.0,), (5.0,)],
    Family.GUMBEL: [(1.2,), (2.0,), (4.0,)],
    Family.FRANK: [(-8.0,), (2.0,), (5.0,)],
    Family.JOE: [(1.3,), (2.0,), (4.0,)],
    Family.BB1: [(1.2, 0.4), (1.5, 1.0), (2.0, 0.7)],
    Family.BB7: [(0.8, 1.2), (1.5, 1.5), (2.5, 2.0)],
}


def rotations_for(family: Family):
    return (0,) if family in SIGN_SYMMETRIC else (0, 90, 180, 270)


def all_configs():
    for family, settings in SETTINGS.items():
        for params in settings:
            for rot in rotations_for(family):
                yield PairCopula(family, rot, params)


def fd_mixed_pdf(c: PairCopula, u1, u2, h=1e-4):
    """Mixed second central difference of the CDF (step chosen to balance
    truncation against roundoff on the capped corner densities)."""
    return (
        cdf(c, u1 + h, u2 + h)
        - cdf(c, u1 + h, u2 - h)
        - cdf(c, u1 - h, u2 + h)
        + cdf(c, u1 - h, u2 - h)
    ) / (4.0 * h * h)


def fd_hfunc(c: PairCopula, u, v, which, h=1e-6):
    """First central difference of the CDF in the conditioning argument."""
    if which == 1:
        return (cdf(c, u, v + h) - cdf(c, u, v - h)) / (2.0 * h)
    return (cdf(c, v + h, u) - cdf(c, v - h, u)) / (2.0 * h)


def tau_concordance_quadrature(c: PairCopula, n=128):
    """4 * int C dC - 1 on a Gauss-Legendre grid in normal-scores space."""
    x, w = np.polynomial.legendre.leggauss(n)
    z = 8.5 * x
    wz = 8.5 * w
    u = special.ndtr(z)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    u1 = np.repeat(u, n)
    u2 = np.tile(u, n)
    cv = cdf(c, u1, u2).reshape(n, n)
    pv = pdf(c, u1, u2).reshape(n, n)
    wp = wz * phi
    return 4.0 * float(wp @ (cv * pv) @ wp) - 1.0


def pdf_mass(c: PairCopula, m=241, zmax=8.5):
    """Integral of the copula density over the unit square (Simpson rule on a
    uniform normal-scores grid; tails beyond zmax carry ~1e-17 mass)."""
    z = np.linspace(-zmax, zmax, m)
    u = special.ndtr(z)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    u1 = np.repeat(u, m)
    u2 = np.tile(u, m)
    vals = pdf(c, u1, u2).reshape(m, m)
    inner = simpson(vals * phi[None, :], x=z, axis=1)
    return float(simpson(inner * phi, x=z))


def sample_pair(c: PairCopula, n: int, seed: int) -> np.ndarray:
    """Draw (n, 2) copula samples by conditional inversion."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    w = rng.random((n, 2))
    return np.column_stack([w[:, 0], hinv(c, w[:, 1], w[:, 0], which=2)])


def mc_concordance(c: PairCopula, n: int, seed: int) -> float:
    """Monte-Carlo concordance-minus-discordance over disjoint sample pairs."""
    u = sample_pair(c, n, seed)
    a = u[0::2, 0] - u[1::2, 0]
    b = u[0::2, 1] - u[1::2, 1]
    return float(np.mean(np.sign(a) * np.sign(b)))


def tau_brute(x, y) -> float:
    """O(n^2) pair enumeration of tau-b: (N_C - N_D) over the geometric mean
    of pairs not tied in each coordinate (both-tied pairs excluded)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, 1)
    prod = dx[iu] * dy[iu]
    n_c = int(np.sum(prod > 0))
    n_d = int(np.sum(prod < 0))
    n_1 = int(np.sum((dx[iu] == 0) & (dy[iu] != 0)))
    n_2 = int(np.sum((dy[iu] == 0) & (dx[iu] != 0)))
    return (n_c - n_d) / math.sqrt((n_c + n_d + n_1) * (n_c + n_d + n_2))
