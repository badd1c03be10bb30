"""Bivariate copula families: CDF, density, h-functions, inverses, tau mappings.

All families are implemented in their unrotated ("base") form, which is
exchangeable for every supported family; 90/180/270 degree rotations are
applied as argument/result transforms on top.  Inputs on the copula scale are
clamped to [EPS, 1-EPS] and densities are capped at PDF_CAP so log-likelihoods
stay finite at the boundary singularities of the closed-form expressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, special

EPS = 1e-10         # clamp margin for copula-scale arguments
PDF_CAP = 1e10      # density cap at boundary singularities
HINV_TOL = 1e-10    # bisection tolerance for numerical h-inverses
HINV_MAX_ITER = 100

ROTATIONS = (0, 90, 180, 270)


class Family(str, Enum):
    """Supported bivariate copula families."""

    INDEPENDENCE = "independence"
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    FRANK = "frank"
    JOE = "joe"
    BB1 = "bb1"
    BB7 = "bb7"


#: number of free parameters per family
N_PARAMS = {
    Family.INDEPENDENCE: 0,
    Family.GAUSSIAN: 1,
    Family.STUDENT_T: 2,
    Family.CLAYTON: 1,
    Family.GUMBEL: 1,
    Family.FRANK: 1,
    Family.JOE: 1,
    Family.BB1: 2,
    Family.BB7: 2,
}

#: families that already cover negative dependence and are radially symmetric;
#: rotations are redundant for them and get normalized away (90/270 negate the
#: dependence parameter, 180 is the identity).
SIGN_SYMMETRIC = frozenset(
    {Family.INDEPENDENCE, Family.GAUSSIAN, Family.STUDENT_T, Family.FRANK}
)

#: canonical ordering used for deterministic candidate/report sorting
FAMILY_ORDER = tuple(Family)


class DomainError(ValueError):
    """Parameter or argument outside the admissible domain."""


def _check_params(family: Family, params: tuple[float, ...]) -> None:
    if len(params) != N_PARAMS[family]:
        raise DomainError(
            f"{family.value} takes {N_PARAMS[family]} parameter(s), got {len(params)}"
        )
    if not all(math.isfinite(p) for p in params):
        raise DomainError(f"{family.value} parameters must be finite: {params}")
    if family is Family.GAUSSIAN:
        if not -1.0 < params[0] < 1.0:
            raise DomainError(f"gaussian rho must lie in (-1, 1), got {params[0]}")
    elif family is Family.STUDENT_T:
        rho, nu = params
        if not -1.0 < rho < 1.0:
            raise DomainError(f"student_t rho must lie in (-1, 1), got {rho}")
        if not nu > 2.0:
            raise DomainError(f"student_t nu must exceed 2, got {nu}")
    elif family is Family.CLAYTON:
        if not params[0] > 0.0:
            raise DomainError(f"clayton delta must be positive, got {params[0]}")
    elif family is Family.GUMBEL:
        if not params[0] >= 1.0:
            raise DomainError(f"gumbel delta must be >= 1, got {params[0]}")
    elif family is Family.FRANK:
        if params[0] == 0.0:
            raise DomainError("frank delta must be nonzero")
    elif family is Family.JOE:
        if not params[0] >= 1.0:
            raise DomainError(f"joe delta must be >= 1, got {params[0]}")
    elif family is Family.BB1:
        delta, theta = params
        if not delta >= 1.0:
            raise DomainError(f"bb1 delta must be >= 1, got {delta}")
        if not theta > 0.0:
            raise DomainError(f"bb1 theta must be positive, got {theta}")
    elif family is Family.BB7:
        delta, theta = params
        if not delta > 0.0:
            raise DomainError(f"bb7 delta must be positive, got {delta}")
        if not theta >= 1.0:
            raise DomainError(f"bb7 theta must be >= 1, got {theta}")


@dataclass(frozen=True)
class PairCopula:
    """A bivariate copula: family, rotation in degrees, and parameter vector.

    Instances are immutable; every operation on them is a pure function, safe
    for concurrent use.  For the sign-symmetric families (independence,
    gaussian, student_t, frank) a requested rotation is normalized into the
    parameters: 180 is dropped (radial symmetry) and 90/270 negate the
    dependence parameter.
    """

    family: Family
    rotation: int = 0
    params: tuple[float, ...] = ()

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if self.rotation not in ROTATIONS:
            raise DomainError(f"rotation must be one of {ROTATIONS}, got {self.rotation}")
        params = tuple(float(p) for p in self.params)
        _check_params(family, params)
        if family in SIGN_SYMMETRIC and self.rotation != 0:
            if self.rotation in (90, 270) and params:
                params = (-params[0],) + params[1:]
                _check_params(family, params)
            object.__setattr__(self, "rotation", 0)
        object.__setattr__(self, "params", params)

    @property
    def n_params(self) -> int:
        return N_PARAMS[self.family]

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "rotation": self.rotation,
            "params": list(self.params),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PairCopula":
        try:
            family = Family(obj["family"])
        except ValueError:
            raise DomainError(f"unknown copula family {obj.get('family')!r}") from None
        return cls(family, int(obj.get("rotation", 0)), tuple(obj.get("params", ())))

    def __str__(self):
        p = ", ".join(f"{v:.6g}" for v in self.params)
        rot = f", rot {self.rotation}" if self.rotation else ""
        return f"{self.family.value}({p}){rot}"


def independence() -> PairCopula:
    return PairCopula(Family.INDEPENDENCE)


# ---------------------------------------------------------------------------
# input handling

def _prep(x, name: str):
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return np.clip(arr, EPS, 1.0 - EPS)


def _ret(value, *inputs):
    """Return a python float if every input was scalar, else an ndarray."""
    if all(np.ndim(x) == 0 for x in inputs):
        return float(value)
    return np.asarray(value, dtype=float)


def _sanitize_pdf(vals):
    vals = np.asarray(vals, dtype=float)
    vals = np.where(np.isfinite(vals), vals, PDF_CAP)
    return np.clip(vals, 0.0, PDF_CAP)


# ---------------------------------------------------------------------------
# base (rotation 0) implementations; all families here are exchangeable

_GL_X, _GL_W = np.polynomial.legendre.leggauss(160)
_Z_LO = -9.0


def _elliptical_cdf(u1, u2, cond_in_z):
    # C(u1,u2) = integral_0^a h(b | w) dw with a = min(u), b = max(u), rewritten
    # through w = Phi(z).  The integrand is analytic and Gaussian-tailed in z,
    # so a single Gauss-Legendre panel on [Z_LO, Phi^-1(a)] is accurate and,
    # crucially, a smooth function of (u1, u2) -- finite differences of the
    # result stay clean.
    a = np.minimum(u1, u2)
    b = np.maximum(u1, u2)
    z1 = special.ndtri(a)
    half = (z1 - _Z_LO) / 2.0
    z = _Z_LO + np.multiply.outer(half, _GL_X + 1.0)
    w = np.multiply.outer(half, _GL_W)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    vals = cond_in_z(z, b)
    return np.sum(vals * phi * w, axis=-1)


def _gauss_cdf0(rho, u1, u2):
    s = math.sqrt(1.0 - rho * rho)

    def cond(z, b):
        y = special.ndtri(b)
        return special.ndtr((y[..., None] - rho * z) / s)

    return _elliptical_cdf(u1, u2, cond)


def _gauss_pdf0(rho, u1, u2):
    x = special.ndtri(u1)
    y = special.ndtri(u2)
    r2 = 1.0 - rho * rho
    expo = -(rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
    return np.exp(expo) / math.sqrt(r2)


def _gauss_h0(rho, u, v):
    s = math.sqrt(1.0 - rho * rho)
    return special.ndtr((special.ndtri(u) - rho * special.ndtri(v)) / s)


def _gauss_hinv0(rho, p, v):
    s = math.sqrt(1.0 - rho * rho)
    return special.ndtr(special.ndtri(p) * s + rho * special.ndtri(v))


def _t_cdf0(rho, nu, u1, u2):
    r2 = 1.0 - rho * rho

    def cond(z, b):
        x = special.stdtrit(nu, special.ndtr(z))
        y = special.stdtrit(nu, b)
        scale = np.sqrt((nu + 1.0) / ((nu + x * x) * r2))
        return special.stdtr(nu + 1.0, (y[..., None] - rho * x) * scale)

    return _elliptical_cdf(u1, u2, cond)


def _t_pdf0(rho, nu, u1, u2):
    x = special.stdtrit(nu, u1)
    y = special.stdtrit(nu, u2)
    r2 = 1.0 - rho * rho
    log_c = (
        math.lgamma((nu + 2.0) / 2.0)
        + math.lgamma(nu / 2.0)
        - 2.0 * math.lgamma((nu + 1.0) / 2.0)
        - 0.5 * math.log(r2)
    )
    log_c = log_c + (nu + 1.0) / 2.0 * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
    q = (x * x - 2.0 * rho * x * y + y * y) / (nu * r2)
    log_c = log_c - (nu + 2.0) / 2.0 * np.log1p(q)
    return np.exp(log_c)


def _t_h0(rho, nu, u, v):
    x = special.stdtrit(nu, u)
    y = special.stdtrit(nu, v)
    scale = np.sqrt((nu + 1.0) / ((nu + y * y) * (1.0 - rho * rho)))
    return special.stdtr(nu + 1.0, (x - rho * y) * scale)


def _t_hinv0(rho, nu, p, v):
    y = special.stdtrit(nu, v)
    scale = np.sqrt((nu + 1.0) / ((nu + y * y) * (1.0 - rho * rho)))
    x = special.stdtrit(nu + 1.0, p) / scale + rho * y
    return special.stdtr(nu, x)


def _clayton_log_s(delta, u1, u2):
    # log(u1^-d + u2^-d - 1) computed stably for large delta
    a = -delta * np.log1p(u1 - 1.0)
    b = -delta * np.log1p(u2 - 1.0)
    m = np.maximum(a, b)
    return m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))


def _clayton_cdf0(delta, u1, u2):
    return np.exp(-_clayton_log_s(delta, u1, u2) / delta)


def _clayton_pdf0(delta, u1, u2):
    log_s = _clayton_log_s(delta, u1, u2)
    log_c = (
        math.log1p(delta)
        - (1.0 + delta) * (np.log(u1) + np.log(u2))
        - (2.0 + 1.0 / delta) * log_s
    )
    return np.exp(log_c)


def _clayton_h0(delta, u, v):
    log_s = _clayton_log_s(delta, u, v)
    log_h = -(delta + 1.0) * np.log(v) - (1.0 + 1.0 / delta) * log_s
    return np.exp(log_h)


def _clayton_hinv0(delta, p, v):
    t = np.power(p, -delta / (1.0 + delta)) - 1.0
    return np.power(1.0 + t * np.power(v, -delta), -1.0 / delta)


def _gumbel_pieces(delta, u1, u2):
    l1 = -np.log1p(u1 - 1.0)
    l2 = -np.log1p(u2 - 1.0)
    s = np.power(l1, delta) + np.power(l2, delta)
    root = np.power(s, 1.0 / delta)
    return l1, l2, s, root


def _gumbel_cdf0(delta, u1, u2):
    return np.exp(-_gumbel_pieces(delta, u1, u2)[3])


def _gumbel_pdf0(delta, u1, u2):
    l1, l2, s, root = _gumbel_pieces(delta, u1, u2)
    # c = C/(u1 u2) * (l1 l2)^(d-1) * s^(2/d - 2) * (root + d - 1)
    log_c = (
        -root
        + l1
        + l2
        + (delta - 1.0) * (np.log(l1) + np.log(l2))
        + (1.0 / delta - 2.0) * np.log(s)
        + np.log(root + delta - 1.0)
    )
    return np.exp(log_c)


def _gumbel_h0(delta, u, v):
    _, lv, s, root = _gumbel_pieces(delta, u, v)
    log_h = -root + lv + (delta - 1.0) * np.log(lv) + (1.0 / delta - 1.0) * np.log(s)
    return np.exp(log_h)


def _frank_cdf0(delta, u1, u2):
    a1 = np.expm1(-delta * u1)
    a2 = np.expm1(-delta * u2)
    d = math.expm1(-delta)
    return -np.log1p(a1 * a2 / d) / delta


def _frank_pdf0(delta, u1, u2):
    a1 = np.expm1(-delta * u1)
    a2 = np.expm1(-delta * u2)
    d = math.expm1(-delta)
    den = d + a1 * a2
    return -delta * d * np.exp(-delta * (u1 + u2)) / (den * den)


def _frank_h0(delta, u, v):
    au = np.expm1(-delta * u)
    av = np.expm1(-delta * v)
    d = math.expm1(-delta)
    return np.exp(-delta * v) * au / (d + au * av)


def _frank_hinv0(delta, p, v):
    av = np.expm1(-delta * v)
    d = math.expm1(-delta)
    au = p * d / (np.exp(-delta * v) - p * av)
    return -np.log1p(au) / delta


# The Joe/BB1/BB7 generator algebra is written in expm1/log1p form, the
# derivatives at C = psi(s) are evaluated directly from s, and the density /
# h-function assemble in log space: composing psi-then-phi' loses all
# precision near the corners, and the raw power products overflow there long
# before the true density does.

def _joe_funcs(delta):
    def phi(t):
        # -log(1 - (1-t)^delta); (1-t)^delta is exact as a standalone double,
        # so log1p keeps phi accurate where it is tiny (t -> 1)
        return -np.log1p(-np.exp(delta * np.log1p(-t)))

    def log_abs_phi_p(t):
        log_d = np.log(-np.expm1(delta * np.log1p(-t)))
        return math.log(delta) + (delta - 1.0) * np.log1p(-t) - log_d

    def c_of_s(s):
        # C = 1 - (1 - e^-s)^(1/delta)
        return -np.expm1(np.log(-np.expm1(-s)) / delta)

    def log_abs_phi_p_at_c(s):
        log_f = np.log(-np.expm1(-s))  # log (1-C)^delta
        return math.log(delta) + (delta - 1.0) / delta * log_f + s

    def log_phi_pp_at_c(s):
        log_f = np.log(-np.expm1(-s))
        t2 = 2.0 * math.log(delta) + 2.0 * (delta - 1.0) / delta * log_f + 2.0 * s
        if delta == 1.0:
            return t2
        t1 = (
            math.log(delta * (delta - 1.0))
            + (delta - 2.0) / delta * log_f
            + s
        )
        return np.logaddexp(t1, t2)

    return phi, log_abs_phi_p, c_of_s, log_abs_phi_p_at_c, log_phi_pp_at_c


def _bb1_funcs(delta, theta):
    def log_g(t):
        # log(t^-theta - 1)
        return np.log(np.expm1(-theta * np.log1p(t - 1.0)))

    def phi(t):
        return np.exp(delta * log_g(t))

    def log_phi(t):
        return delta * log_g(t)

    def log_abs_phi_p(t):
        return (
            math.log(delta * theta)
            - (theta + 1.0) * np.log1p(t - 1.0)
            + (delta - 1.0) * log_g(t)
        )

    def _log1p_y(log_s):
        # log(1 + s^(1/delta)) without overflow
        log_y = log_s / delta
        return np.where(log_y > 300.0, log_y, np.log1p(np.exp(np.minimum(log_y, 300.0))))

    def c_of_log_s(log_s):
        return np.exp(-_log1p_y(log_s) / theta)

    def log_abs_phi_p_at_c(log_s):
        return (
            math.log(delta * theta)
            + (theta + 1.0) / theta * _log1p_y(log_s)
            + (delta - 1.0) / delta * log_s
        )

    def log_phi_pp_at_c(log_s):
        log_y = log_s / delta
        # core = theta (delta - 1) + y (1 + delta theta), all terms positive
        log_core = np.logaddexp(
            math.log(theta * (delta - 1.0)) if delta > 1.0 else -np.inf,
            math.log(1.0 + delta * theta) + log_y,
        )
        return (
            math.log(delta * theta)
            + (delta - 2.0) / delta * log_s
            + (theta + 2.0) / theta * _log1p_y(log_s)
            + log_core
        )

    return log_phi, log_abs_phi_p, c_of_log_s, log_abs_phi_p_at_c, log_phi_pp_at_c


def _bb7_funcs(delta, theta):
    def log_t_theta(t):
        # log(1 - (1-t)^theta) via log1p of the exactly-representable power
        return np.log1p(-np.exp(theta * np.log1p(-t)))

    def phi(t):
        return np.expm1(-delta * log_t_theta(t))

    def log_abs_phi_p(t):
        return (
            math.log(delta * theta)
            + (-delta - 1.0) * log_t_theta(t)
            + (theta - 1.0) * np.log1p(-t)
        )

    def _lam(s):
        return np.log1p(s)

    def _log_f(s):
        # log (1-C)^theta = log(1 - (1+s)^(-1/delta))
        return np.log(-np.expm1(-_lam(s) / delta))

    def c_of_s(s):
        return -np.expm1(_log_f(s) / theta)

    def log_abs_phi_p_at_c(s):
        return (
            math.log(delta * theta)
            + (delta + 1.0) / delta * _lam(s)
            + (theta - 1.0) / theta * _log_f(s)
        )

    def log_phi_pp_at_c(s):
        log_f = _log_f(s)
        # core = theta - 1 + (1 + delta theta) (1-C)^theta, terms nonnegative
        log_core = np.logaddexp(
            math.log(theta - 1.0) if theta > 1.0 else -np.inf,
            math.log(1.0 + delta * theta) + log_f,
        )
        return (
            math.log(delta * theta)
            + (delta + 2.0) / delta * _lam(s)
            + (theta - 2.0) / theta * log_f
            + log_core
        )

    return phi, log_abs_phi_p, c_of_s, log_abs_phi_p_at_c, log_phi_pp_at_c


def _parts_cdf0(family, params, u1, u2):
    if family is Family.BB1:
        log_phi, _, c_of_log_s, _, _ = _bb1_funcs(*params)
        log_s = np.logaddexp(log_phi(u1), log_phi(u2))
        return c_of_log_s(log_s)
    funcs = _joe_funcs(*params) if family is Family.JOE else _bb7_funcs(*params)
    phi = funcs[0]
    return funcs[2](phi(u1) + phi(u2))


def _parts_pdf0(family, params, u1, u2):
    if family is Family.BB1:
        log_phi, log_pp, _, log_pc, log_ppc = _bb1_funcs(*params)
        s_arg = np.logaddexp(log_phi(u1), log_phi(u2))
    else:
        funcs = _joe_funcs(*params) if family is Family.JOE else _bb7_funcs(*params)
        phi, log_pp, _, log_pc, log_ppc = funcs
        s_arg = phi(u1) + phi(u2)
    log_pdf = (
        log_ppc(s_arg) + log_pp(u1) + log_pp(u2) - 3.0 * log_pc(s_arg)
    )
    return np.exp(log_pdf)


def _parts_h0(family, params, u, v):
    if family is Family.BB1:
        log_phi, log_pp, _, log_pc, _ = _bb1_funcs(*params)
        s_arg = np.logaddexp(log_phi(u), log_phi(v))
    else:
        funcs = _joe_funcs(*params) if family is Family.JOE else _bb7_funcs(*params)
        phi, log_pp, _, log_pc, _ = funcs
        s_arg = phi(u) + phi(v)
    return np.exp(log_pp(v) - log_pc(s_arg))


def _base_cdf(family, params, u1, u2):
    if family is Family.INDEPENDENCE:
        return u1 * u2
    if family is Family.GAUSSIAN:
        return _gauss_cdf0(params[0], u1, u2)
    if family is Family.STUDENT_T:
        return _t_cdf0(params[0], params[1], u1, u2)
    if family is Family.CLAYTON:
        return _clayton_cdf0(params[0], u1, u2)
    if family is Family.GUMBEL:
        return _gumbel_cdf0(params[0], u1, u2)
    if family is Family.FRANK:
        return _frank_cdf0(params[0], u1, u2)
    return _parts_cdf0(family, params, u1, u2)


def _base_pdf(family, params, u1, u2):
    if family is Family.INDEPENDENCE:
        return np.ones_like(u1)
    if family is Family.GAUSSIAN:
        return _gauss_pdf0(params[0], u1, u2)
    if family is Family.STUDENT_T:
        return _t_pdf0(params[0], params[1], u1, u2)
    if family is Family.CLAYTON:
        return _clayton_pdf0(params[0], u1, u2)
    if family is Family.GUMBEL:
        return _gumbel_pdf0(params[0], u1, u2)
    if family is Family.FRANK:
        return _frank_pdf0(params[0], u1, u2)
    return _parts_pdf0(family, params, u1, u2)


def _base_h(family, params, u, v):
    # conditional CDF of the variable carrying `u` given the other one at `v`;
    # the base families are exchangeable so one function covers both directions
    if family is Family.INDEPENDENCE:
        return u * np.ones_like(v)
    if family is Family.GAUSSIAN:
        return _gauss_h0(params[0], u, v)
    if family is Family.STUDENT_T:
        return _t_h0(params[0], params[1], u, v)
    if family is Family.CLAYTON:
        return _clayton_h0(params[0], u, v)
    if family is Family.GUMBEL:
        return _gumbel_h0(params[0], u, v)
    if family is Family.FRANK:
        return _frank_h0(params[0], u, v)
    return _parts_h0(family, params, u, v)


_CLOSED_HINV = {
    Family.INDEPENDENCE,
    Family.GAUSSIAN,
    Family.STUDENT_T,
    Family.CLAYTON,
    Family.FRANK,
}


def _base_hinv(family, params, p, v):
    if family is Family.INDEPENDENCE:
        return p * np.ones_like(v)
    if family is Family.GAUSSIAN:
        return _gauss_hinv0(params[0], p, v)
    if family is Family.STUDENT_T:
        return _t_hinv0(params[0], params[1], p, v)
    if family is Family.CLAYTON:
        return _clayton_hinv0(params[0], p, v)
    if family is Family.FRANK:
        return _frank_hinv0(params[0], p, v)
    raise AssertionError(f"no closed-form h-inverse for {family}")


# ---------------------------------------------------------------------------
# public operations (rotation-aware)

def cdf(c: PairCopula, u1, u2):
    """Copula CDF C(u1, u2).

    Grounded, with uniform margins and 2-increasing; inputs are clamped to
    [EPS, 1-EPS] before evaluation.
    """
    a1 = _prep(u1, "u1")
    a2 = _prep(u2, "u2")
    with np.errstate(all="ignore"):
        if c.rotation == 0:
            val = _base_cdf(c.family, c.params, a1, a2)
        elif c.rotation == 90:
            val = a2 - _base_cdf(c.family, c.params, 1.0 - a1, a2)
        elif c.rotation == 180:
            val = a1 + a2 - 1.0 + _base_cdf(c.family, c.params, 1.0 - a1, 1.0 - a2)
        else:
            val = a1 - _base_cdf(c.family, c.params, a1, 1.0 - a2)
    return _ret(np.clip(val, 0.0, 1.0), u1, u2)


def pdf(c: PairCopula, u1, u2):
    """Copula density c(u1, u2) >= 0, capped at PDF_CAP near singularities."""
    a1 = _prep(u1, "u1")
    a2 = _prep(u2, "u2")
    with np.errstate(all="ignore"):
        if c.rotation == 0:
            val = _base_pdf(c.family, c.params, a1, a2)
        elif c.rotation == 90:
            val = _base_pdf(c.family, c.params, 1.0 - a1, a2)
        elif c.rotation == 180:
            val = _base_pdf(c.family, c.params, 1.0 - a1, 1.0 - a2)
        else:
            val = _base_pdf(c.family, c.params, a1, 1.0 - a2)
    return _ret(_sanitize_pdf(val), u1, u2)


def hfunc(c: PairCopula, u, v, which: int):
    """Conditional CDF h.

    ``which=1`` evaluates h(u1 | u2) = dC/du2 at u1=u given u2=v;
    ``which=2`` evaluates h(u2 | u1) = dC/du1 at u2=u given u1=v.
    """
    if which not in (1, 2):
        raise DomainError(f"which must be 1 or 2, got {which}")
    au = _prep(u, "u")
    av = _prep(v, "v")
    fam, par = c.family, c.params
    with np.errstate(all="ignore"):
        if c.rotation == 0:
            val = _base_h(fam, par, au, av)
        elif c.rotation == 90:
            if which == 1:
                val = 1.0 - _base_h(fam, par, 1.0 - au, av)
            else:
                val = _base_h(fam, par, au, 1.0 - av)
        elif c.rotation == 180:
            val = 1.0 - _base_h(fam, par, 1.0 - au, 1.0 - av)
        else:
            if which == 1:
                val = _base_h(fam, par, au, 1.0 - av)
            else:
                val = 1.0 - _base_h(fam, par, 1.0 - au, av)
    return _ret(np.clip(val, 0.0, 1.0), u, v)


def _hinv_bisect(c: PairCopula, p, v, which: int):
    lo = np.full(np.broadcast(p, v).shape, EPS)
    hi = np.full_like(lo, 1.0 - EPS)
    for _ in range(HINV_MAX_ITER):
        mid = 0.5 * (lo + hi)
        val = hfunc(c, mid, v, which)
        below = val < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < HINV_TOL:
            break
    return 0.5 * (lo + hi)


def hinv(c: PairCopula, p, v, which: int):
    """Inverse of :func:`hfunc` in its first argument.

    Returns u with hfunc(c, u, v, which) = p.  Closed form where available,
    otherwise bisection on [0, 1] (monotone, always converges).
    """
    if which not in (1, 2):
        raise DomainError(f"which must be 1 or 2, got {which}")
    ap = _prep(p, "p")
    av = _prep(v, "v")
    fam, par = c.family, c.params
    if fam not in _CLOSED_HINV:
        val = _hinv_bisect(c, ap, av, which)
        return _ret(np.clip(val, 0.0, 1.0), p, v)
    with np.errstate(all="ignore"):
        if c.rotation == 0:
            val = _base_hinv(fam, par, ap, av)
        elif c.rotation == 90:
            if which == 1:
                val = 1.0 - _base_hinv(fam, par, 1.0 - ap, av)
            else:
                val = _base_hinv(fam, par, ap, 1.0 - av)
        elif c.rotation == 180:
            val = 1.0 - _base_hinv(fam, par, 1.0 - ap, 1.0 - av)
        else:
            if which == 1:
                val = _base_hinv(fam, par, ap, 1.0 - av)
            else:
                val = 1.0 - _base_hinv(fam, par, 1.0 - ap, av)
    return _ret(np.clip(val, 0.0, 1.0), p, v)


# ---------------------------------------------------------------------------
# Kendall's tau <-> parameters

def _debye1(x: float) -> float:
    """First Debye function D1(x) = (1/x) * int_0^x t/(exp(t)-1) dt, x > 0."""

    def integrand(t):
        if t < 1e-8:
            return 1.0 - t / 2.0
        return t / math.expm1(t)

    val, _ = integrate.quad(integrand, 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val / x


def _frank_tau(delta: float) -> float:
    ad = abs(delta)
    tau = 1.0 - 4.0 / ad * (1.0 - _debye1(ad))
    return math.copysign(tau, delta)


def _joe_tau(delta: float) -> float:
    if delta == 1.0:
        return 0.0
    k = np.arange(1, 2_000_001, dtype=float)
    terms = 1.0 / (k * (delta * k + 2.0) * (delta * (k - 1.0) + 2.0))
    return float(1.0 - 4.0 * terms.sum())


_TAU_QUAD_X, _TAU_QUAD_W = np.polynomial.legendre.leggauss(128)


def _tau_quadrature(c: PairCopula) -> float:
    # tau = 1 - 4 * int int dC/du1 * dC/du2 du1 du2, evaluated on a
    # Gauss-Legendre grid in normal-scores space (the h-functions are bounded
    # and the substitution removes the corner boundary layers).
    z = 8.5 * _TAU_QUAD_X
    w = 8.5 * _TAU_QUAD_W
    u = special.ndtr(z)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    u1 = np.repeat(u, u.size)
    u2 = np.tile(u, u.size)
    h21 = hfunc(c, u2, u1, which=2).reshape(u.size, u.size)
    h12 = hfunc(c, u1, u2, which=1).reshape(u.size, u.size)
    wphi = w * phi
    integral = float(wphi @ (h21 * h12) @ wphi)
    return 1.0 - 4.0 * integral


def tau_from_params(c: PairCopula) -> float:
    """Model Kendall's tau implied by the copula parameters.

    Closed forms where known (each is pinned against the concordance-integral
    oracle in the test suite); BB7 falls back to deterministic 2-D quadrature.
    The sign flips for 90/270 rotations.
    """
    fam, par = c.family, c.params
    if fam is Family.INDEPENDENCE:
        return 0.0
    if fam in (Family.GAUSSIAN, Family.STUDENT_T):
        base = 2.0 / math.pi * math.asin(par[0])
    elif fam is Family.CLAYTON:
        base = par[0] / (par[0] + 2.0)
    elif fam is Family.GUMBEL:
        base = 1.0 - 1.0 / par[0]
    elif fam is Family.FRANK:
        base = _frank_tau(par[0])
    elif fam is Family.JOE:
        base = _joe_tau(par[0])
    elif fam is Family.BB1:
        base = 1.0 - 2.0 / (par[0] * (par[1] + 2.0))
    else:
        base = _tau_quadrature(PairCopula(fam, 0, par))
    if c.rotation in (90, 270):
        return -base
    return base


_ONE_PARAM_INVERTIBLE = (
    Family.GAUSSIAN,
    Family.CLAYTON,
    Family.GUMBEL,
    Family.FRANK,
    Family.JOE,
)

_POSITIVE_ONLY = (Family.CLAYTON, Family.GUMBEL, Family.JOE, Family.BB1, Family.BB7)


def _invert_tau_bisect(tau_fn, target: float, lo: float, hi: float) -> float:
    flo, fhi = tau_fn(lo), tau_fn(hi)
    if not flo <= target <= fhi:
        raise DomainError(f"tau={target} outside the reachable range [{flo:.4f}, {fhi:.4f}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tau_fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def params_from_tau(family: Family, rotation: int, tau: float) -> PairCopula:
    """Build a one-parameter copula whose model tau equals ``tau``.

    The tau sign must be compatible with the rotation: nonnegative for 0/180,
    nonpositive for 90/270.  Near-independence taus are clamped just inside the
    parameter domain (e.g. Gumbel delta -> 1 + 1e-6).
    """
    family = Family(family)
    if rotation not in ROTATIONS:
        raise DomainError(f"rotation must be one of {ROTATIONS}, got {rotation}")
    if not -1.0 < tau < 1.0 or not math.isfinite(tau):
        raise DomainError(f"|tau| must be < 1, got {tau}")
    if family not in _ONE_PARAM_INVERTIBLE:
        raise DomainError(f"params_from_tau supports one-parameter families, not {family.value}")
    if rotation in (90, 270) and tau > 0.0:
        raise DomainError(f"rotation {rotation} requires tau <= 0, got {tau}")
    if rotation in (0, 180) and family in _POSITIVE_ONLY and tau < 0.0:
        raise DomainError(f"{family.value} at rotation {rotation} requires tau >= 0, got {tau}")

    if family is Family.GAUSSIAN:
        work = -abs(tau) if rotation in (90, 270) else tau
        return PairCopula(family, 0, (math.sin(math.pi * work / 2.0),))
    if family is Family.FRANK:
        work = -abs(tau) if rotation in (90, 270) else tau
        if abs(work) < 1e-8:
            return PairCopula(family, 0, (math.copysign(1e-6, work if work != 0 else 1.0),))
        mag = _invert_tau_bisect(_frank_tau, abs(work), 1e-6, 300.0)
        return PairCopula(family, 0, (math.copysign(mag, work),))

    t = abs(tau)
    if family is Family.CLAYTON:
        delta = max(2.0 * t / (1.0 - t), 1e-6)
    elif family is Family.GUMBEL:
        delta = max(1.0 / (1.0 - t), 1.0 + 1e-6)
    else:  # JOE
        if t < 1e-8:
            delta = 1.0 + 1e-6
        else:
            delta = _invert_tau_bisect(_joe_tau, t, 1.0 + 1e-6, 1000.0)
    return PairCopula(family, rotation, (delta,))


def loglik(c: PairCopula, u: np.ndarray) -> float:
    """Sum of log densities over an (n, 2) copula-scale sample."""
    u = np.asarray(u, dtype=float)
    dens = pdf(c, u[:, 0], u[:, 1])
    return float(np.sum(np.log(np.clip(dens, 1e-300, PDF_CAP))))
