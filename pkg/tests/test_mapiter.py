"""Iteration, extraction, and stability inference on pinned examples.

Expected degree sequences and extracted factors were computed once
with the slow PRS-only GCD path and are frozen here as exact values.
"""

import pytest

from projdyn.polycore import (
    ArityMismatch,
    DegreeMismatch,
    HomPoly,
    ParseError,
    parse_poly,
    poly_to_text,
)
from projdyn.mapiter import (
    AllZero,
    IndexOutOfRange,
    NotDominant,
    ZeroVector,
    certificate_digest,
    compose_extract,
    infer_qas,
    iterate_degrees,
    load_map,
    make_map,
    map_to_text,
    parse_map_text,
    point_class,
    save_map,
    verify_lifting_recurrence,
)

NAMES = ("z", "w", "t")


def p(text):
    return parse_poly(text, NAMES)


def mk(*texts):
    return make_map([p(s) for s in texts])


@pytest.fixture(scope="module")
def cubic_extracting():
    """Cubic map whose second iterate drops degree by two."""
    return mk("z*w^2 - w^2*t", "z*t^2 - w^2*t", "z^2*w - w^2*t")


@pytest.fixture(scope="module")
def cubic_lag1():
    """Cubic map with a persistent degree-one extraction pattern."""
    return mk(
        "z^2*t + z*w^2 - 2*w^2*t",
        "z^2*w + z*t^2 - 2*w^2*t",
        "2*z*w*t - 2*w^2*t",
    )


# -- construction ----------------------------------------------------------------


def test_common_factor_is_divided_out():
    f = mk("z^2", "z*w", "z*t")
    assert f.degree == 1
    assert f.normalization.primitive == p("z")
    assert [poly_to_text(c, NAMES) for c in f.components] == ["z", "w", "t"]


def test_identity_map_is_legal():
    f = mk("z", "w", "t")
    assert f.degree == 1
    assert f.k == 2


def test_repeated_component_is_not_dominant():
    with pytest.raises(NotDominant):
        mk("z^2", "z*w", "z*w")


def test_zero_component_is_not_dominant():
    with pytest.raises(NotDominant):
        make_map([p("z^2"), p("w^2"), HomPoly.zero(3)])


def test_mixed_degrees_rejected():
    with pytest.raises(DegreeMismatch):
        mk("z^2", "z*w", "t")


def test_all_zero_rejected():
    with pytest.raises(AllZero):
        make_map([HomPoly.zero(3)] * 3)


def test_component_count_must_match_arity():
    with pytest.raises(ArityMismatch):
        make_map([p("z^2"), p("w^2")])


def test_constant_scaling_is_normalized():
    f = mk("6*z^2", "6*w^2", "6*t^2")
    assert poly_to_text(f.components[0], NAMES) == "z^2"
    assert f.normalization.content == 6


# -- trace structure -------------------------------------------------------------


def test_trace_starts_at_identity(cubic_extracting):
    tr = iterate_degrees(cubic_extracting, 2)
    assert [poly_to_text(c, NAMES) for c in tr.lifting(0)] == ["z", "w", "t"]
    assert tr.degrees[0] == 1


def test_trace_accessors_bounds(cubic_extracting):
    tr = iterate_degrees(cubic_extracting, 3)
    assert tr.depth == 3
    with pytest.raises(IndexOutOfRange):
        tr.E(0)
    with pytest.raises(IndexOutOfRange):
        tr.E(4)
    with pytest.raises(IndexOutOfRange):
        tr.lifting(4)


def test_iterate_rejects_nonpositive_depth(cubic_extracting):
    with pytest.raises(ValueError):
        iterate_degrees(cubic_extracting, 0)


def test_extraction_reconstructs_composition(cubic_lag1):
    f = cubic_lag1
    tr = iterate_degrees(f, 3)
    for n in range(1, 4):
        raw = [c.compose(tr.lifting(n - 1)) for c in f.components]
        e = tr.E(n)
        for r, comp in zip(raw, tr.lifting(n)):
            assert r == e.primitive * comp * e.content


def test_degree_bookkeeping(cubic_extracting):
    tr = iterate_degrees(cubic_extracting, 4)
    d = cubic_extracting.degree
    for n in range(1, 5):
        assert tr.degrees[n] == d * tr.degrees[n - 1] - tr.E(n).primitive.degree


# -- degree-dropping cubic: frozen values ----------------------------------------


def test_extracting_cubic_degree_sequence(cubic_extracting):
    tr = iterate_degrees(cubic_extracting, 4)
    assert tr.degrees == (1, 3, 7, 16, 37)


def test_extracting_cubic_first_factors(cubic_extracting):
    tr = iterate_degrees(cubic_extracting, 4)
    e1, e2, e3, e4 = (tr.E(n) for n in range(1, 5))
    assert e1.primitive.degree == 0 and e1.content == 1
    assert e2.content == -1
    assert e2.primitive == p("z*w")
    assert e3.content == 1
    assert e3.primitive == p("z^2*w*t^2 - z*w^3*t - z*w*t^3 + w^3*t^2")
    assert e4.primitive.degree == 11
    assert len(e4.primitive.terms) == 25
    assert max(e4.primitive.terms)[0] == (6, 3, 2)


def test_extracting_cubic_is_not_quasi_stable(cubic_extracting):
    res = infer_qas(iterate_degrees(cubic_extracting, 4))
    assert res.verdict == "NotQAS"
    assert res.witness == 3
    assert res.n0 == 1
    assert res.H == p("z*w")
    assert res.certificate is None


@pytest.mark.slow
def test_extracting_cubic_depth_five(cubic_extracting):
    tr = iterate_degrees(cubic_extracting, 5)
    assert tr.degrees == (1, 3, 7, 16, 37, 86)
    e5 = tr.E(5)
    assert e5.primitive.degree == 25
    assert len(e5.primitive.terms) == 159
    assert max(e5.primitive.terms)[0] == (13, 10, 2)


# -- lag-one quasi-stable cubic: frozen values -----------------------------------


def test_lag1_degree_sequence(cubic_lag1):
    tr = iterate_degrees(cubic_lag1, 4)
    assert tr.degrees == (1, 3, 8, 21, 55)


def test_lag1_certificate(cubic_lag1):
    res = infer_qas(iterate_degrees(cubic_lag1, 4))
    assert res.verdict == "QAS"
    cert = res.certificate
    assert cert.n0 == 1
    assert cert.H == p("z")
    assert cert.h == 1
    assert cert.d == 3
    assert cert.verified_to == 4
    assert cert.degrees == (1, 3, 8, 21, 55)


def test_lag1_extraction_pattern(cubic_lag1):
    tr = iterate_degrees(cubic_lag1, 4)
    assert tr.E(2).primitive == p("z")
    # E_n = H(F_{n-2}) with H = z picks out the first component
    assert tr.E(3).primitive == tr.lifting(1)[0]
    assert tr.E(4).primitive == tr.lifting(2)[0]
    assert all(tr.E(n).content == 1 for n in range(1, 5))


def test_lag1_power_divisor_recurrence(cubic_lag1):
    f = cubic_lag1
    tr = iterate_degrees(f, 4)
    cert = infer_qas(tr).certificate
    for n in (2, 3, 4):
        assert verify_lifting_recurrence(f, cert, tr, n)


def test_power_divisor_recurrence_bounds(cubic_lag1):
    f = cubic_lag1
    tr = iterate_degrees(f, 4)
    cert = infer_qas(tr).certificate
    with pytest.raises(IndexOutOfRange):
        verify_lifting_recurrence(f, cert, tr, 1)
    with pytest.raises(IndexOutOfRange):
        verify_lifting_recurrence(f, cert, tr, 5)


def test_power_divisor_recurrence_detects_mismatch(cubic_lag1):
    f = cubic_lag1
    tr = iterate_degrees(f, 4)
    cert = infer_qas(tr).certificate
    wrong = type(cert)(
        n0=cert.n0,
        H=p("w"),
        h=1,
        d=cert.d,
        verified_to=cert.verified_to,
        degrees=cert.degrees,
    )
    assert not verify_lifting_recurrence(f, wrong, tr, 2)


def test_lag1_depth_two_is_inconclusive(cubic_lag1):
    res = infer_qas(iterate_degrees(cubic_lag1, 2))
    assert res.verdict == "Inconclusive"
    assert res.n0 == 1
    assert res.H == p("z")


def test_infer_needs_depth_two(cubic_lag1):
    with pytest.raises(ValueError):
        infer_qas(iterate_degrees(cubic_lag1, 1))


# -- stable maps -----------------------------------------------------------------


def test_monomial_square_is_stable():
    tr = iterate_degrees(mk("z^2", "w^2", "t^2"), 3)
    assert tr.degrees == (1, 2, 4, 8)
    assert infer_qas(tr).verdict == "AS"


def test_identity_is_stable():
    tr = iterate_degrees(mk("z", "w", "t"), 3)
    assert tr.degrees == (1, 1, 1, 1)
    assert infer_qas(tr).verdict == "AS"


def test_generic_cubic_is_stable():
    tr = iterate_degrees(mk("z^3 + w^3", "w^3 + t^3", "z*w*t"), 3)
    assert tr.degrees == (1, 3, 9, 27)
    assert infer_qas(tr).verdict == "AS"


# -- compose_extract hints -------------------------------------------------------


def test_wrong_hint_is_harmless(cubic_lag1):
    f = cubic_lag1
    tr = iterate_degrees(f, 2)
    e_plain, next_plain = compose_extract(f, tr.lifting(1))
    e_wrong, next_wrong = compose_extract(f, tr.lifting(1), hint=p("w*t"))
    assert e_plain.primitive == e_wrong.primitive
    assert e_plain.content == e_wrong.content
    assert next_plain == next_wrong


def test_correct_hint_matches_full_gcd(cubic_lag1):
    f = cubic_lag1
    tr = iterate_degrees(f, 3)
    e_hint, nxt = compose_extract(f, tr.lifting(2), hint=f.components[0])
    assert e_hint.primitive == tr.E(3).primitive
    assert nxt == tr.lifting(3)


# -- point classes ---------------------------------------------------------------


def test_indeterminate_point(cubic_extracting):
    assert point_class(cubic_extracting, (1, 1, 1)).indeterminate


def test_image_point_scaled_to_first_nonzero(cubic_extracting):
    pc = point_class(cubic_extracting, (0, 1, 1))
    assert not pc.indeterminate
    assert pc.image == (1, 1, 1)


def test_image_point_fractions():
    pc = point_class(mk("z^2", "w^2", "t^2"), (2, 1, 1))
    from fractions import Fraction

    assert pc.image == (1, Fraction(1, 4), Fraction(1, 4))


def test_zero_vector_rejected(cubic_extracting):
    with pytest.raises(ZeroVector):
        point_class(cubic_extracting, (0, 0, 0))


def test_point_arity_checked(cubic_extracting):
    with pytest.raises(ArityMismatch):
        point_class(cubic_extracting, (1, 2))


# -- map files -------------------------------------------------------------------

MAP_TEXT = """\
# lag-one extracting cubic
vars z w t

map z^2*t + z*w^2 - 2*w^2*t
map z^2*w + z*t^2 - 2*w^2*t   # second component
map 2*z*w*t - 2*w^2*t
"""


def test_parse_map_text_with_comments(cubic_lag1):
    f = parse_map_text(MAP_TEXT)
    assert f.components == cubic_lag1.components
    assert f.names == NAMES


def test_map_text_round_trip(cubic_lag1):
    again = parse_map_text(map_to_text(cubic_lag1))
    assert again.components == cubic_lag1.components


def test_map_file_round_trip(tmp_path, cubic_lag1):
    path = tmp_path / "map.txt"
    save_map(cubic_lag1, path)
    assert load_map(path).components == cubic_lag1.components


@pytest.mark.parametrize(
    "bad",
    [
        "map z\nmap w\nmap t",
        "vars z w t\nmap z\nmap w",
        "vars z w t\nbogus line",
        "vars z\nmap z",
        "vars z w t\nvars z w t\nmap z\nmap w\nmap t",
    ],
)
def test_map_text_errors(bad):
    with pytest.raises(ParseError):
        parse_map_text(bad)


# -- digest ----------------------------------------------------------------------


def test_digest_frozen_and_stable(cubic_lag1):
    tr = iterate_degrees(cubic_lag1, 3)
    h = infer_qas(tr).certificate.H
    d = certificate_digest(tr, h)
    assert d == "fe2b1ea9a5d694804bec8e782fa522a8c0091b7d5d06aa53229675a2f7162c60"
    assert certificate_digest(iterate_degrees(cubic_lag1, 3), h) == d


def test_digest_depends_on_divisor(cubic_lag1):
    tr = iterate_degrees(cubic_lag1, 3)
    assert certificate_digest(tr, p("z")) != certificate_digest(tr, None)
