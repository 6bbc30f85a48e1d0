"""Tests for the normalized family: construction, preflight checks, generation."""

import dataclasses
from fractions import Fraction

import mpmath as mp
import pytest

from projdyn import (
    FAIL,
    PASS,
    UNKNOWN,
    CommonFactor,
    DegreeConstraintViolated,
    DegreeRecurrence,
    GenerationExhausted,
    HomPoly,
    NormalizationViolated,
    ParseError,
    build_family_map,
    char_poly_roots,
    check_coprimality,
    check_intersection_conditions,
    check_rank_and_pencil,
    extend_degrees,
    family_to_text,
    infer_qas,
    iterate_degrees,
    parse_family_text,
    parse_poly,
    point_class,
    poly_to_text,
    random_family,
    run_preflight,
    same_up_to_scalar,
    sample_divisor_points,
)
import projdyn.family2 as family2
from projdyn.family2 import _jacobian_rows_at_one

V = ("z", "w", "t")


def pp(text):
    return parse_poly(text, V)


@pytest.fixture(scope="module")
def reference():
    """Extraction drops the expected divisor pattern after two steps."""
    return build_family_map(pp("z"), pp("w^2"), pp("t^2"), pp("z*w"), pp("w^2*t"))


@pytest.fixture(scope="module")
def stable():
    """Certifiably quasi-stable; every preflight check passes."""
    return build_family_map(
        pp("z"), pp("w^2 + z*t"), pp("t^2 + z*w"), pp("2*w*t"), pp("2*w^2*t")
    )


@pytest.fixture(scope="module")
def twisted():
    """Sampling at points misses the bad pencil member; the kernel finds it."""
    return build_family_map(pp("z - 2*w"), pp("w^2"), pp("t^2"), pp("z*w"), pp("-w^2*t"))


@pytest.fixture(scope="module")
def line_fail():
    """Both difference forms vanish at [±sqrt2 : 1 : 0]; decided exactly."""
    return build_family_map(
        pp("z^2 - 2*w^2"),
        pp("z*w + z^2 - 2*w^2 + w*t"),
        pp("z*w + z^2 - 2*w^2 + t^2"),
        pp("z*w"),
        pp("z^2*w^2 - 2*w^4 + z^3*t - z^2*w*t"),
    )


@pytest.fixture(scope="module")
def chart_unknown():
    """Both difference forms vanish at [±sqrt2 : 1 : 1]; intervals cannot decide."""
    return build_family_map(
        pp("z^2 - 2*w^2"),
        pp("z*w*t - z^3 + z^2*w + 2*z*w^2 - w^3 - t^3"),
        pp("z*w*t - z^3 + z^2*t + 2*z*w^2 - 2*w^3"),
        pp("z*w*t"),
        pp("z^3*w*t - 2*z*w^3*t + w*z^4 - t*z^4"),
    )


# -- construction -------------------------------------------------------------


def test_reference_components_and_recurrence(reference):
    texts = [poly_to_text(c, V) for c in reference.map.components]
    assert texts == ["z*w^2 - w^2*t", "z*t^2 - w^2*t", "z^2*w - w^2*t"]
    assert reference.recurrence == DegreeRecurrence(d=3, h=1, n0=1)
    assert reference.names == V


def test_build_rejects_wrong_r_degree():
    with pytest.raises(DegreeConstraintViolated):
        build_family_map(pp("z"), pp("w^2"), pp("t^2"), pp("z*w"), pp("w^2*t^2"))


def test_build_rejects_mismatched_q_degrees():
    with pytest.raises(DegreeConstraintViolated):
        build_family_map(pp("z"), pp("w^2"), pp("t^2"), pp("w"), pp("w^2*t"))


def test_build_rejects_zero_form():
    with pytest.raises(DegreeConstraintViolated):
        build_family_map(pp("z"), HomPoly.zero(3), pp("t^2"), pp("z*w"), pp("w^2*t"))


def test_build_rejects_uncalibrated_r():
    with pytest.raises(NormalizationViolated):
        build_family_map(pp("z"), pp("w^2"), pp("t^2"), pp("z*w"), pp("2*w^2*t"))


def test_build_rejects_r_vanishing_at_one():
    with pytest.raises(NormalizationViolated):
        build_family_map(pp("z"), pp("w^2"), pp("t^2"), pp("z*w"), pp("w^2*t - w*t^2"))


def test_build_rejects_shared_component_factor():
    # every component P*Qj - R is divisible by w
    with pytest.raises(CommonFactor):
        build_family_map(pp("z"), pp("w^2"), pp("w*t"), pp("z*w"), pp("w^2*t"))


# -- coprimality check --------------------------------------------------------


def test_coprimality_reference_passes(reference):
    assert check_coprimality(reference) == PASS


def test_coprimality_fails_on_shared_difference_factor():
    # Q2 - Q1 = (z-w)(z+w) and Q3 - Q1 = (z-w)(z+2w) share z - w
    inst = build_family_map(
        pp("z"), pp("w^2"), pp("z^2"), pp("z^2 + z*w - w^2"), pp("w^2*t")
    )
    assert check_coprimality(inst) == FAIL


def test_coprimality_checks_p_against_r(reference):
    # sharing a factor between P and R cannot survive construction (it
    # would divide every component), so exercise the clause directly
    tampered = dataclasses.replace(reference, R=pp("z*w*t"))
    assert check_coprimality(tampered) == FAIL


# -- intersection check -------------------------------------------------------


def test_intersection_reference_exact_points(reference):
    rep = check_intersection_conditions(reference, precision=96)
    assert rep.verdict == PASS
    assert rep.rational_points == (
        (Fraction(0), Fraction(1), Fraction(0)),
        (Fraction(0), Fraction(0), Fraction(1)),
    )
    assert rep.boxed_points == 0
    assert rep.failure_witnesses == ()
    assert rep.unresolved == 0


def test_intersection_twisted_passes(twisted):
    rep = check_intersection_conditions(twisted, precision=96)
    assert rep.verdict == PASS
    assert rep.rational_points == (
        (Fraction(2), Fraction(1), Fraction(0)),
        (Fraction(0), Fraction(0), Fraction(1)),
    )


def test_intersection_line_failure_is_exact(line_fail):
    rep = check_intersection_conditions(line_fail, precision=96)
    assert rep.verdict == FAIL
    # the witness records the minimal polynomial z^2 - 2 of the bad points
    assert rep.failure_witnesses == (
        ("line", (Fraction(-2), Fraction(0), Fraction(1))),
    )
    assert rep.rational_points == ((Fraction(0), Fraction(0), Fraction(1)),)
    assert rep.boxed_points == 2


def test_intersection_unknown_when_intervals_straddle(chart_unknown):
    rep = check_intersection_conditions(chart_unknown, precision=96)
    assert rep.verdict == UNKNOWN
    assert rep.failure_witnesses == ()
    assert rep.unresolved == 2
    assert rep.rational_points == ((Fraction(0), Fraction(0), Fraction(1)),)


def test_intersection_fails_fast_without_finiteness():
    inst = build_family_map(
        pp("z"), pp("w^2"), pp("z^2"), pp("z^2 + z*w - w^2"), pp("w^2*t")
    )
    rep = check_intersection_conditions(inst, precision=96)
    assert rep.verdict == FAIL
    assert rep.rational_points == ()
    assert rep.boxed_points == 0


# -- rank and pencil ----------------------------------------------------------


def test_jacobian_rows_and_rank_reference(reference):
    rows = _jacobian_rows_at_one(reference)
    assert rows == [
        [Fraction(1), Fraction(0), Fraction(-1)],
        [Fraction(1), Fraction(-2), Fraction(1)],
        [Fraction(2), Fraction(-1), Fraction(-1)],
    ]
    rank, _ = check_rank_and_pencil(reference, samples=5, seed=0)
    assert rank.rank == 2
    assert rank.verdict == PASS


def test_rank_never_exceeds_two(reference, stable, twisted, line_fail, chart_unknown):
    for inst in (reference, stable, twisted, line_fail, chart_unknown):
        rank, _ = check_rank_and_pencil(inst, samples=3, seed=1)
        assert rank.rank <= 2


def test_pencil_reference_witness(reference):
    _, pencil = check_rank_and_pencil(reference, samples=10, seed=0)
    assert pencil.verdict == FAIL
    assert pencil.witness == (0, 0, 1)  # Q3 = z*w is divisible by P = z
    assert pencil.method == "kernel"


def test_pencil_twisted_witness_found_exactly(twisted):
    # 2*Q1 - Q3 = 2w^2 - zw = -w(z - 2w): no axis or random point sampling
    # is guaranteed to hit this member, the kernel solve always does
    _, pencil = check_rank_and_pencil(twisted, samples=10, seed=0)
    assert pencil.verdict == FAIL
    assert pencil.witness == (2, 0, -1)
    assert pencil.method == "kernel"


def test_pencil_stable_passes_with_exact_kernel(stable):
    _, pencil = check_rank_and_pencil(stable, samples=10, seed=0)
    assert pencil.verdict == PASS
    assert pencil.witness is None
    assert pencil.method == "kernel"


def test_pencil_pass_is_only_sampled_for_nonlinear_p(line_fail):
    _, pencil = check_rank_and_pencil(line_fail, samples=10, seed=0)
    assert pencil.verdict == PASS
    assert pencil.method == "randomized"


# -- preflight aggregation ----------------------------------------------------


def test_preflight_reference_fails_overall(reference):
    rep = run_preflight(reference, precision=96, samples=10, seed=0)
    assert rep.coprimality == PASS
    assert rep.intersection == PASS
    assert rep.rank == 2
    assert rep.rank_verdict == PASS
    assert rep.pencil == FAIL
    assert rep.overall == FAIL


def test_preflight_stable_passes_overall(stable):
    rep = run_preflight(stable, precision=96, samples=10, seed=0)
    assert rep == family2.PreflightReport(
        coprimality=PASS,
        intersection=PASS,
        rank=2,
        rank_verdict=PASS,
        pencil=PASS,
        overall=PASS,
    )


def test_preflight_unknown_propagates(chart_unknown):
    rep = run_preflight(chart_unknown, precision=96, samples=10, seed=0)
    assert rep.intersection == UNKNOWN
    assert rep.overall == UNKNOWN


def test_preflight_passing_instance_is_certified_stable(stable):
    trace = iterate_degrees(stable.map, 3)
    res = infer_qas(trace)
    assert res.verdict == "QAS"
    assert res.certificate.n0 == 1
    assert same_up_to_scalar(res.certificate.H, stable.P)
    assert list(trace.degrees) == extend_degrees(stable.recurrence, 3)


# -- structural invariants ----------------------------------------------------


def test_divisor_collapses_to_fixed_point(reference):
    one = (Fraction(1), Fraction(1), Fraction(1))
    pts = sample_divisor_points(reference, 100, seed=5)
    assert len(pts) == 100
    for pt in pts:
        pc = point_class(reference.map, pt)
        assert pc.indeterminate or pc.image == one


def test_center_point_is_always_indeterminate(
    reference, stable, twisted, line_fail, chart_unknown
):
    one = (Fraction(1), Fraction(1), Fraction(1))
    for inst in (reference, stable, twisted, line_fail, chart_unknown):
        assert point_class(inst.map, one).indeterminate


def test_divisor_points_on_quadratic_p(line_fail):
    pts = sample_divisor_points(line_fail, 5, seed=7)
    for pt in pts:
        assert line_fail.P.evaluate(pt) == 0


# -- random generation --------------------------------------------------------


def test_random_family_is_deterministic():
    a = random_family(1, 2, 4, seed=11)
    b = random_family(1, 2, 4, seed=11)
    assert a.map.components == b.map.components
    assert family_to_text(a) == family_to_text(b)


def test_random_family_recurrence_and_growth():
    inst = random_family(1, 2, 4, seed=11)
    assert inst.recurrence == DegreeRecurrence(d=3, h=1, n0=1)
    assert check_coprimality(inst) == PASS
    rep = char_poly_roots(inst.recurrence)
    with mp.workdps(60):
        assert abs(rep.lambda_ - (3 + mp.sqrt(5)) / 2) < mp.mpf(10) ** -30


def test_random_family_varies_with_seed():
    texts = {family_to_text(random_family(1, 2, 4, seed=s)) for s in range(4)}
    assert len(texts) > 1


def test_random_family_rejects_degenerate_degrees():
    with pytest.raises(ValueError):
        random_family(0, 2, 4, seed=0)
    with pytest.raises(ValueError, match="degenerates"):
        random_family(1, 1, 4, seed=0)
    with pytest.raises(ValueError):
        random_family(1, 2, 0, seed=0)


def test_random_family_exhaustion(monkeypatch):
    monkeypatch.setattr(
        family2, "random_hompoly", lambda rng, nv, deg, mt, cb: HomPoly.zero(3)
    )
    with pytest.raises(GenerationExhausted):
        random_family(1, 2, 3, seed=0)


def test_random_family_bigger_degrees():
    inst = random_family(2, 2, 3, seed=4)
    assert inst.recurrence == DegreeRecurrence(d=4, h=2, n0=1)
    assert check_coprimality(inst) == PASS


# -- family files -------------------------------------------------------------


def test_family_file_roundtrip(stable, tmp_path):
    path = tmp_path / "stable.family"
    family2.save_family(stable, path)
    loaded = family2.load_family(path)
    assert loaded.map.components == stable.map.components
    assert loaded.P == stable.P
    assert loaded.R == stable.R


def test_family_text_contains_map_and_forms(reference):
    text = family_to_text(reference)
    lines = text.splitlines()
    assert lines[0].startswith("vars ")
    assert sum(1 for l in lines if l.startswith("map ")) == 3
    for key in ("P ", "Q1 ", "Q2 ", "Q3 ", "R "):
        assert sum(1 for l in lines if l.startswith(key)) == 1


def test_family_file_parses_without_map_lines(reference):
    text = family_to_text(reference)
    stripped = "\n".join(l for l in text.splitlines() if not l.startswith("map "))
    inst = parse_family_text(stripped)
    assert inst.map.components == reference.map.components


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda ls: [l for l in ls if not l.startswith("R ")], "missing lines"),
        (lambda ls: ls + ["P z"], "duplicate"),
        (lambda ls: ["P z"] + ls, "vars line"),
        (lambda ls: ls + ["orbit z"], "unexpected directive"),
    ],
)
def test_family_file_rejects_malformed(reference, mutate, fragment):
    lines = family_to_text(reference).splitlines()
    with pytest.raises(ParseError, match=fragment):
        parse_family_text("\n".join(mutate(lines)))


def test_family_file_rejects_inconsistent_map_lines(reference, stable):
    # map lines from one instance, forms from another
    ref_lines = family_to_text(reference).splitlines()
    stable_lines = family_to_text(stable).splitlines()
    mixed = [l for l in stable_lines if l.startswith(("vars", "map "))] + [
        l for l in ref_lines if l.startswith(("P ", "Q1 ", "Q2 ", "Q3 ", "R "))
    ]
    with pytest.raises(ParseError, match="disagree"):
        parse_family_text("\n".join(mixed))
