"""Pair-copula calculus: identities, oracles, tau mappings, fitting."""

import numpy as np
import pytest
from conftest import (
    SETTINGS,
    all_configs,
    fd_hfunc,
    fd_mixed_pdf,
    mc_concordance,
    pdf_mass,
    sample_pair,
    tau_concordance_quadrature,
)

from trafficvine.bicop import (
    DomainError,
    Family,
    PairCopula,
    cdf,
    hfunc,
    hinv,
    params_from_tau,
    pdf,
    tau_from_params,
)
from trafficvine.fitting import default_candidates, fit_pair

GRID = np.linspace(0.1, 0.9, 9)
U1, U2 = np.meshgrid(GRID, GRID)
U1, U2 = U1.ravel(), U2.ravel()


# ---------------------------------------------------------------------------
# construction and domains

def test_param_domains_rejected():
    bad = [
        (Family.CLAYTON, (0.0,)),
        (Family.CLAYTON, (-1.0,)),
        (Family.GUMBEL, (0.9,)),
        (Family.FRANK, (0.0,)),
        (Family.JOE, (0.5,)),
        (Family.BB1, (0.5, 1.0)),
        (Family.BB1, (1.5, 0.0)),
        (Family.BB7, (0.0, 2.0)),
        (Family.BB7, (1.0, 0.5)),
        (Family.GAUSSIAN, (1.0,)),
        (Family.STUDENT_T, (0.5, 2.0)),
        (Family.INDEPENDENCE, (1.0,)),
        (Family.GAUSSIAN, ()),
    ]
    for family, params in bad:
        with pytest.raises(DomainError):
            PairCopula(family, 0, params)
    with pytest.raises(DomainError):
        PairCopula(Family.CLAYTON, 45, (1.0,))


def test_sign_symmetric_rotation_normalization():
    assert PairCopula(Family.GAUSSIAN, 90, (0.5,)) == PairCopula(Family.GAUSSIAN, 0, (-0.5,))
    assert PairCopula(Family.FRANK, 270, (3.0,)) == PairCopula(Family.FRANK, 0, (-3.0,))
    assert PairCopula(Family.FRANK, 180, (3.0,)) == PairCopula(Family.FRANK, 0, (3.0,))
    assert PairCopula(Family.STUDENT_T, 90, (0.4, 5.0)) == PairCopula(
        Family.STUDENT_T, 0, (-0.4, 5.0)
    )
    assert PairCopula(Family.INDEPENDENCE, 180).rotation == 0


def test_inputs_outside_unit_square_rejected():
    c = PairCopula(Family.CLAYTON, 0, (2.0,))
    for u1, u2 in [(-0.1, 0.5), (0.5, 1.2), (np.nan, 0.5)]:
        with pytest.raises(DomainError):
            cdf(c, u1, u2)
    with pytest.raises(DomainError):
        hfunc(c, 0.5, 0.5, 3)


# ---------------------------------------------------------------------------
# pinned reference values

def test_cdf_examples():
    assert cdf(PairCopula(Family.INDEPENDENCE), 0.3, 0.7) == pytest.approx(0.21, abs=1e-12)
    # Clayton delta=1 at (0.5, 0.5): (2 + 2 - 1)^-1
    assert cdf(PairCopula(Family.CLAYTON, 0, (1.0,)), 0.5, 0.5) == pytest.approx(
        1.0 / 3.0, abs=1e-12
    )
    # Gumbel delta=1 is the independence copula
    g = PairCopula(Family.GUMBEL, 0, (1.0,))
    for u1, u2 in [(0.2, 0.9), (0.5, 0.5), (0.83, 0.11)]:
        assert cdf(g, u1, u2) == pytest.approx(u1 * u2, abs=1e-12)


def test_pdf_examples():
    assert pdf(PairCopula(Family.INDEPENDENCE), 0.42, 0.77) == pytest.approx(1.0)
    c = PairCopula(Family.CLAYTON, 0, (2.0,))
    assert pdf(c, 0.5, 0.5) == pytest.approx(fd_mixed_pdf(c, 0.5, 0.5), abs=1e-4)
    assert pdf_mass(PairCopula(Family.FRANK, 0, (5.0,))) == pytest.approx(1.0, abs=1e-3)


def test_hfunc_examples():
    ind = PairCopula(Family.INDEPENDENCE)
    for v in (0.1, 0.5, 0.9):
        assert hfunc(ind, 0.37, v, 1) == pytest.approx(0.37, abs=1e-12)
    c = PairCopula(Family.CLAYTON, 0, (2.0,))
    assert hfunc(c, 0.3, 0.6, 1) == pytest.approx(fd_hfunc(c, 0.3, 0.6, 1), abs=1e-5)
    for cop in all_configs():
        for which in (1, 2):
            assert hfunc(cop, 0.0, 0.5, which) <= 1e-9
            assert hfunc(cop, 1.0, 0.5, which) >= 1.0 - 1e-9


def test_hinv_examples():
    ind = PairCopula(Family.INDEPENDENCE)
    assert hinv(ind, 0.25, 0.9, 2) == pytest.approx(0.25, abs=1e-12)
    g = PairCopula(Family.GUMBEL, 0, (3.0,))
    u, v = 0.42, 0.77
    assert hinv(g, hfunc(g, u, v, 1), v, 1) == pytest.approx(u, abs=1e-8)
    c = PairCopula(Family.CLAYTON, 0, (1.5,))
    u_sol = hinv(c, 0.5, 0.5, 1)
    assert hfunc(c, u_sol, 0.5, 1) == pytest.approx(0.5, abs=1e-8)


# ---------------------------------------------------------------------------
# calculus invariants across every family, setting, rotation

@pytest.mark.parametrize("cop", list(all_configs()), ids=str)
def test_boundary_identities(cop):
    u = np.linspace(0.01, 0.99, 99)
    assert np.max(np.abs(cdf(cop, u, np.ones_like(u)) - u)) < 1e-9
    assert np.max(np.abs(cdf(cop, np.ones_like(u), u) - u)) < 1e-9
    assert np.max(cdf(cop, u, np.zeros_like(u))) < 1e-9
    assert np.max(cdf(cop, np.zeros_like(u), u)) < 1e-9


@pytest.mark.parametrize("cop", list(all_configs()), ids=str)
def test_two_increasing(cop):
    g = np.linspace(0.05, 0.95, 10)
    cg = cdf(cop, *np.meshgrid(g, g, indexing="ij"))
    rect = cg[1:, 1:] - cg[:-1, 1:] - cg[1:, :-1] + cg[:-1, :-1]
    assert rect.min() >= -1e-9


@pytest.mark.parametrize("cop", list(all_configs()), ids=str)
def test_pdf_matches_fd_of_cdf(cop):
    approx = fd_mixed_pdf(cop, U1, U2)
    exact = pdf(cop, U1, U2)
    rel = np.abs(approx - exact) / np.maximum(np.abs(exact), 1e-8)
    assert rel.max() < 1e-3


@pytest.mark.parametrize("cop", list(all_configs()), ids=str)
def test_hfunc_matches_fd_of_cdf(cop):
    h1 = hfunc(cop, U1, U2, 1)
    h2 = hfunc(cop, U2, U1, 2)
    assert np.max(np.abs(h1 - fd_hfunc(cop, U1, U2, 1))) < 1e-4
    assert np.max(np.abs(h2 - fd_hfunc(cop, U2, U1, 2))) < 1e-4
    # nondecreasing in the free argument
    order = np.argsort(U1[U2 == U2[0]])
    for v in (0.2, 0.8):
        vals = hfunc(cop, GRID, np.full_like(GRID, v), 1)
        assert np.all(np.diff(vals) >= -1e-12)


@pytest.mark.parametrize("cop", list(all_configs()), ids=str)
def test_hinv_roundtrip(cop):
    for which in (1, 2):
        p = hfunc(cop, U1, U2, which)
        u_back = hinv(cop, p, U2, which)
        assert np.max(np.abs(u_back - U1)) < 1e-7


@pytest.mark.parametrize(
    "family", [f for f in Family if f is not Family.INDEPENDENCE], ids=lambda f: f.value
)
def test_rotation_coherence(family):
    params = SETTINGS[family][1 if len(SETTINGS[family]) > 1 else 0]
    base = PairCopula(family, 0, params)
    rot90 = PairCopula(family, 90, params)
    rot180 = PairCopula(family, 180, params)
    assert tau_from_params(rot90) == pytest.approx(-tau_from_params(base), abs=1e-9)
    pts = np.linspace(0.15, 0.85, 6)
    assert pdf(rot180, pts, pts[::-1]) == pytest.approx(
        pdf(base, 1.0 - pts, 1.0 - pts[::-1]), rel=1e-9
    )


# ---------------------------------------------------------------------------
# tau <-> parameters

def test_tau_closed_forms_match_concordance_integral():
    cases = [
        PairCopula(Family.INDEPENDENCE),
        PairCopula(Family.GAUSSIAN, 0, (-0.5,)),
        PairCopula(Family.STUDENT_T, 0, (0.5, 5.0)),
        PairCopula(Family.CLAYTON, 0, (2.0,)),
        PairCopula(Family.GUMBEL, 0, (2.0,)),
        PairCopula(Family.FRANK, 0, (-8.0,)),
        PairCopula(Family.JOE, 0, (2.0,)),
        PairCopula(Family.BB1, 0, (1.5, 1.0)),
        PairCopula(Family.BB7, 0, (1.5, 1.5)),
    ]
    for cop in cases:
        assert tau_from_params(cop) == pytest.approx(
            tau_concordance_quadrature(cop), abs=1e-3
        )


def test_tau_examples():
    assert tau_from_params(PairCopula(Family.INDEPENDENCE)) == 0.0
    clay = PairCopula(Family.CLAYTON, 0, (2.0,))
    gum = PairCopula(Family.GUMBEL, 0, (2.0,))
    assert tau_from_params(clay) == pytest.approx(0.5, abs=1e-12)
    assert tau_from_params(gum) == pytest.approx(0.5, abs=1e-12)
    assert tau_concordance_quadrature(clay) == pytest.approx(0.5, abs=1e-3)
    assert mc_concordance(clay, 1_000_000, seed=11) == pytest.approx(0.5, abs=0.005)
    assert mc_concordance(gum, 1_000_000, seed=12) == pytest.approx(0.5, abs=0.005)


def test_params_from_tau_examples():
    clay = params_from_tau(Family.CLAYTON, 0, 0.5)
    assert clay.params[0] == pytest.approx(2.0, abs=1e-9)
    gum0 = params_from_tau(Family.GUMBEL, 0, 0.0)
    assert gum0.params[0] == pytest.approx(1.0 + 1e-6, abs=1e-12)
    frank = params_from_tau(Family.FRANK, 0, 0.3)
    assert tau_from_params(frank) == pytest.approx(0.3, abs=1e-6)
    joe = params_from_tau(Family.JOE, 180, 0.4)
    assert tau_from_params(joe) == pytest.approx(0.4, abs=1e-6)
    neg = params_from_tau(Family.CLAYTON, 90, -0.5)
    assert tau_from_params(neg) == pytest.approx(-0.5, abs=1e-6)


def test_params_from_tau_errors():
    with pytest.raises(DomainError):
        params_from_tau(Family.CLAYTON, 0, -0.3)  # incompatible sign
    with pytest.raises(DomainError):
        params_from_tau(Family.GUMBEL, 90, 0.3)
    with pytest.raises(DomainError):
        params_from_tau(Family.CLAYTON, 0, 1.0)  # |tau| >= 1
    with pytest.raises(DomainError):
        params_from_tau(Family.BB1, 0, 0.5)  # two-parameter family
    with pytest.raises(DomainError):
        params_from_tau(Family.STUDENT_T, 0, 0.5)


@pytest.mark.parametrize("family", list(SETTINGS), ids=lambda f: f.value)
def test_tau_vs_mc_concordance(family):
    # model tau against a 1e6-draw Monte-Carlo concordance estimate
    for i, params in enumerate(SETTINGS[family]):
        cop = PairCopula(family, 0, params)
        est = mc_concordance(cop, 1_000_000, seed=100 + i)
        assert abs(tau_from_params(cop) - est) < 0.01


# ---------------------------------------------------------------------------
# fitting

def test_fit_independence_on_iid_uniforms():
    wins = 0
    for seed in range(20):
        rng = np.random.Generator(np.random.Philox(key=1000 + seed))
        u = rng.random((2000, 2))
        selected, _ = fit_pair(u, criterion="bic")
        wins += selected.family is Family.INDEPENDENCE
    assert wins >= 19  # >= 95% of 20 seeds


def test_fit_recovers_clayton():
    u = sample_pair(PairCopula(Family.CLAYTON, 0, (3.0,)), 5000, seed=3)
    selected, report = fit_pair(u)
    assert selected.family is Family.CLAYTON
    assert selected.rotation == 0
    assert tau_from_params(selected) == pytest.approx(0.6, abs=0.03)
    assert report.criterion == "aic"
    assert any(f.family is Family.INDEPENDENCE for f in report.candidates)


def test_fit_negative_dependence_selects_negative_model():
    u = sample_pair(PairCopula(Family.CLAYTON, 90, (2.5,)), 4000, seed=5)
    selected, _ = fit_pair(u)
    assert tau_from_params(selected) < -0.3
    if selected.family not in (Family.GAUSSIAN, Family.FRANK, Family.STUDENT_T):
        assert selected.rotation in (90, 270)
    else:
        assert selected.params[0] < 0


@pytest.mark.parametrize("family", list(SETTINGS), ids=lambda f: f.value)
def test_fit_consistency_tau_recovery(family):
    # n = 1e4 samples from a known copula; refit recovers the model tau
    params = SETTINGS[family][1 if len(SETTINGS[family]) > 1 else 0]
    cop = PairCopula(family, 0, params)
    u = sample_pair(cop, 10_000, seed=17)
    selected, _ = fit_pair(u)
    assert tau_from_params(selected) == pytest.approx(
        tau_from_params(cop), abs=0.03
    )


def test_fit_report_is_deterministically_ordered():
    u = sample_pair(PairCopula(Family.GUMBEL, 0, (2.0,)), 800, seed=9)
    _, r1 = fit_pair(u)
    _, r2 = fit_pair(u)
    keys1 = [(f.family, f.rotation) for f in r1.candidates]
    keys2 = [(f.family, f.rotation) for f in r2.candidates]
    assert keys1 == keys2 == sorted(keys1, key=lambda fr: (list(Family).index(fr[0]), fr[1]))


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_pair(np.full((5, 2), 0.5))
    with pytest.raises(ValueError):
        fit_pair(np.array([[0.0, 0.5]] * 20))
    with pytest.raises(ValueError):
        fit_pair(np.random.default_rng(0).random((100, 2)), criterion="waic")


def test_default_candidates_sign_pruning():
    pos = default_candidates(0.4)
    neg = default_candidates(-0.4)
    assert (Family.CLAYTON, 180) in pos and (Family.CLAYTON, 90) not in pos
    assert (Family.CLAYTON, 90) in neg and (Family.CLAYTON, 0) not in neg
    assert (Family.GAUSSIAN, 0) in pos and (Family.GAUSSIAN, 0) in neg


def test_near_independence_limits():
    # each family's documented independence limit has density ~ 1 everywhere
    near_one = [
        PairCopula(Family.GUMBEL, 0, (1.0,)),
        PairCopula(Family.JOE, 0, (1.0,)),
        PairCopula(Family.CLAYTON, 0, (1e-8,)),
        PairCopula(Family.FRANK, 0, (1e-8,)),
        PairCopula(Family.GAUSSIAN, 0, (0.0,)),
        PairCopula(Family.BB1, 0, (1.0, 1e-8)),
        PairCopula(Family.BB7, 0, (1e-8, 1.0)),
    ]
    grid = np.linspace(0.1, 0.9, 5)
    g1, g2 = (a.ravel() for a in np.meshgrid(grid, grid))
    for cop in near_one:
        assert np.max(np.abs(pdf(cop, g1, g2) - 1.0)) < 1e-5, cop
        assert abs(tau_from_params(cop)) < 1e-5, cop


def test_extreme_args_stay_in_range():
    for cop in all_configs():
        for which in (1, 2):
            assert 0.0 <= hfunc(cop, 1e-12, 0.5, which) <= 1.0
            assert 0.0 <= hinv(cop, 1e-12, 0.999, which) <= 1.0
            assert 0.0 <= hinv(cop, 1.0, 1e-12, which) <= 1.0
        assert 0.0 <= cdf(cop, 1e-12, 1.0) <= 1.0
        assert 0.0 <= pdf(cop, 1e-12, 1e-12) <= 1e10
