"""Recurrence extension and spectral certification on hand-checked cases.

The quadratic-formula values for (d=3, h=1, n0=1) and the closed form
d_n = (1+n) 2^n for the tangent case (4, 4, 1) serve as independent
oracles for the root-finding route.
"""

import pytest
from mpmath import mp, mpf, sqrt

from projdyn.specdeg import (
    AsymptoticsReport,
    DegenerateLambda,
    DegreeRecurrence,
    InsufficientData,
    NonPositiveDegree,
    PrecisionExhausted,
    char_poly_roots,
    check_asymptotics,
    check_growth_bounds,
    check_sn_identity,
    extend_degrees,
)

S311 = DegreeRecurrence(3, 1, 1)
S441 = DegreeRecurrence(4, 4, 1)
S201 = DegreeRecurrence(2, 0, 1)


@pytest.fixture(autouse=True)
def _dps50():
    old = mp.dps
    mp.dps = 50
    yield
    mp.dps = old


# -- parameter validation ---------------------------------------------------------


@pytest.mark.parametrize("bad", [(1, 1, 1), (3, -1, 1), (3, 1, 0), (2.5, 0, 1)])
def test_recurrence_parameter_validation(bad):
    with pytest.raises(ValueError):
        DegreeRecurrence(*bad)


def test_charpoly_coefficients():
    assert S311.charpoly() == (1, -3, 1)
    assert DegreeRecurrence(5, 5, 2).charpoly() == (1, -5, 0, 5)
    assert S201.charpoly() == (1, -2, 0)


# -- extension --------------------------------------------------------------------


def test_extend_lagged_case():
    assert extend_degrees(S311, 5) == [1, 3, 8, 21, 55, 144]


def test_extend_stable_case():
    assert extend_degrees(S201, 4) == [1, 2, 4, 8, 16]


def test_extend_boundary_uses_initial_segment():
    # first lagged step: d_2 = d*d_1 - h*d_0 = 9 - 1
    assert extend_degrees(S311, 2) == [1, 3, 8]
    # lag two: d_3 = d*d_2 - h*d_0
    assert extend_degrees(DegreeRecurrence(2, 1, 2), 3) == [1, 2, 4, 7]


def test_extend_tangent_closed_form():
    degs = extend_degrees(S441, 12)
    assert degs == [(1 + n) * 2**n for n in range(13)]


def test_extend_rejects_collapse():
    with pytest.raises(NonPositiveDegree):
        extend_degrees(DegreeRecurrence(2, 3, 1), 5)


def test_extend_rejects_negative_length():
    with pytest.raises(ValueError):
        extend_degrees(S311, -1)


def test_extend_zero_length():
    assert extend_degrees(S311, 0) == [1]


# -- spectral certification --------------------------------------------------------


def test_dominant_root_vs_quadratic_formula():
    rep = char_poly_roots(S311, 128)
    oracle = (3 + sqrt(5)) / 2
    assert abs(rep.lambda_ - oracle) < mpf(10) ** -30
    assert rep.r == 1
    assert abs(rep.rho - (3 - sqrt(5)) / (3 + sqrt(5))) < mpf(10) ** -30
    assert rep.charpoly == (1, -3, 1)
    assert rep.precision_bits == 128


def test_subexponential_coefficient_vs_formula():
    rep = char_poly_roots(S311, 128)
    assert len(rep.Q_fit) == 1
    assert abs(rep.Q_fit[0] - (3 + sqrt(5)) / (2 * sqrt(5))) < mpf(10) ** -30


def test_double_root_at_one_is_degenerate():
    with pytest.raises(DegenerateLambda):
        char_poly_roots(DegreeRecurrence(2, 1, 1), 128)


def test_complex_dominant_pair_is_degenerate():
    # t^3 - 2t^2 + 2 has its largest-modulus roots off the real axis
    with pytest.raises(DegenerateLambda):
        char_poly_roots(DegreeRecurrence(2, 2, 2), 128)


def test_root_at_one_with_dominant_above():
    # P(1) = 0 here, yet the dominant root is 2; the exact decision
    # must not reject on the sign of P(1) alone
    rep = char_poly_roots(DegreeRecurrence(3, 2, 1), 128)
    assert abs(rep.lambda_ - 2) < mpf(10) ** -30
    assert rep.r == 1
    assert abs(rep.rho - mpf(1) / 2) < mpf(10) ** -30


def test_positive_p_at_one_with_dominant_above():
    # P(1) = 1 > 0 while two real roots exceed 1
    spec = DegreeRecurrence(5, 5, 2)
    rep = char_poly_roots(spec, 128)
    lam = rep.lambda_
    assert lam > mpf("4.78") and lam < mpf("4.79")
    assert abs(lam**3 - 5 * lam**2 + 5) < mpf(10) ** -30
    assert rep.r == 1
    # independent Newton refinement from a seed past the root
    newton = mp.findroot(lambda t: t**3 - 5 * t**2 + 5, mpf(5))
    assert abs(lam - newton) < mpf(10) ** -30


def test_tangent_double_root():
    rep = char_poly_roots(S441, 128)
    assert rep.lambda_ == 2
    assert rep.r == 2
    assert rep.rho == 0
    q = rep.Q_fit
    assert len(q) == 2
    assert abs(q[0] - 1) < mpf(10) ** -30 and abs(q[1] - 1) < mpf(10) ** -30


def test_stable_case_spectrum():
    rep = char_poly_roots(S201, 128)
    assert rep.lambda_ == 2
    assert rep.r == 1
    assert rep.rho == 0
    assert rep.Q_fit == (mpf(1),)


def test_precision_floor():
    with pytest.raises(ValueError):
        char_poly_roots(S311, 32)


# -- asymptotics --------------------------------------------------------------------


def test_tail_fit_agrees_with_initial_condition_fit():
    rep = char_poly_roots(S311, 128)
    ar = check_asymptotics(extend_degrees(S311, 30), rep)
    assert abs(ar.Q[0] - rep.Q_fit[0]) < mpf(10) ** -25


def test_residuals_start_at_subdominant_share():
    rep = char_poly_roots(S311, 128)
    ar = check_asymptotics(extend_degrees(S311, 30), rep)
    assert abs(ar.max_residual - mpf("0.14589803375031546")) < mpf(10) ** -9
    assert ar.max_residual == ar.residuals[0]
    assert float(ar) == float(ar.max_residual)


def test_residuals_decay_geometrically():
    rep = char_poly_roots(S311, 128)
    ar = check_asymptotics(extend_degrees(S311, 30), rep)
    for n in range(20):
        assert ar.residuals[n + 1] <= rep.rho * ar.residuals[n] * mpf("1.05")


def test_tangent_case_residuals_vanish():
    ar = check_asymptotics(extend_degrees(S441, 30), char_poly_roots(S441, 128))
    assert ar.max_residual == 0
    assert [float(q) for q in ar.Q] == [1.0, 1.0]


def test_stable_case_residuals_vanish():
    ar = check_asymptotics(extend_degrees(S201, 15), char_poly_roots(S201, 128))
    assert ar.max_residual == 0


def test_asymptotics_needs_ten_values():
    rep = char_poly_roots(S311, 128)
    with pytest.raises(InsufficientData):
        check_asymptotics(extend_degrees(S311, 5), rep)


def test_asymptotics_rejects_foreign_sequence():
    rep = char_poly_roots(S311, 128)
    degs = extend_degrees(S311, 12)
    degs[7] += 1
    with pytest.raises(ValueError):
        check_asymptotics(degs, rep)


# -- growth bounds ------------------------------------------------------------------


def test_growth_constants_lagged():
    rep = char_poly_roots(S311, 128)
    c1, c2 = check_growth_bounds(extend_degrees(S311, 300), rep.lambda_)
    # hand value: the n = 1 term (d_2 - lam d_1)/d_1 = (7 - 3 sqrt 5)/6
    assert abs(c1 - (7 - 3 * sqrt(5)) / 6) < mpf(10) ** -20
    lam = rep.lambda_
    assert c2 < lam / (lam - 1) + mpf(10) ** -20
    assert c2 > lam / (lam - 1) - mpf(10) ** -6


def test_growth_constants_stable():
    c1, c2 = check_growth_bounds(extend_degrees(S201, 20), mpf(2))
    assert c1 == 0
    assert c2 < 2


@pytest.mark.slow
def test_growth_constants_long_range():
    rep = char_poly_roots(S311, 128)
    c1, c2 = check_growth_bounds(extend_degrees(S311, 10**4), rep.lambda_)
    assert c1 < mpf("0.05") and c2 < mpf("1.62")


def test_growth_needs_ten_values():
    with pytest.raises(ValueError):
        check_growth_bounds([1, 3, 8], mpf(2))


# -- telescoping identity ------------------------------------------------------------


def test_sn_identity_lagged():
    rep = char_poly_roots(S311, 128)
    worst = check_sn_identity(S311, rep.lambda_, extend_degrees(S311, 25), 20)
    assert worst < mpf(10) ** -9
    assert worst < mpf(10) ** -30


def test_sn_identity_exact_roots():
    assert check_sn_identity(S441, mpf(2), extend_degrees(S441, 25), 20) == 0
    assert check_sn_identity(S201, mpf(2), extend_degrees(S201, 25), 20) == 0


def test_sn_identity_bounds_checked():
    with pytest.raises(ValueError):
        check_sn_identity(S311, mpf(2), extend_degrees(S311, 5), 20)


# -- convergence of the root to the degree growth rate -------------------------------


def test_degree_root_gap_honest_profile():
    rep = char_poly_roots(S311, 128)
    lam = rep.lambda_
    degs = extend_degrees(S311, 60)
    gaps = [abs(mpf(degs[n]) ** (mpf(1) / n) - lam) for n in range(1, 61)]
    # the n-th root converges like log(n)/n: still above 0.01 at n = 20
    assert gaps[19] > mpf("0.0207") and gaps[19] < mpf("0.0208")
    first = next(n for n in range(1, 61) if gaps[n - 1] < mpf("0.01"))
    assert first == 42
    # shrinks on average even though not monotonically step by step
    early = sum(gaps[:20]) / 20
    late = sum(gaps[20:40]) / 20
    assert late < early


# -- cross-module agreement -----------------------------------------------------------


def test_recurrence_matches_symbolic_iteration():
    from projdyn.mapiter import infer_qas, iterate_degrees, make_map
    from projdyn.polycore import parse_poly

    names = ("z", "w", "t")
    f = make_map(
        [
            parse_poly("z^2*t + z*w^2 - 2*w^2*t", names),
            parse_poly("z^2*w + z*t^2 - 2*w^2*t", names),
            parse_poly("2*z*w*t - 2*w^2*t", names),
        ]
    )
    trace = iterate_degrees(f, 4)
    cert = infer_qas(trace).certificate
    spec = DegreeRecurrence(cert.d, cert.h, cert.n0)
    assert extend_degrees(spec, 4) == list(trace.degrees)
