import textwrap

import pytest

from flexbeam.model import BreakKind, Problem
from flexbeam.problem_spec import SpecError, parse_text

GOOD = textwrap.dedent("""\
    [problem]
    kind = F1

    [params]
    mu = 10
    gamma = 0.5
    alpha = 0.02
    beta = 0.015

    [datum]
    w = 0.1*x**2

    [loads]
    f_r = 1
    f_p = sin(3*x)

    [mesh]
    n = 32

    [breaks]
    list = crack@0.25, crease@-0.5
""")


def test_parse_good():
    s = parse_text(GOOD)
    assert s.problem is Problem.F1 and not s.constrained
    assert s.params.mu == 10 and s.params.eta == 1.0
    assert s.n == 32
    assert [(b.x, b.kind) for b in s.breaks] == [(-0.5, BreakKind.CREASE), (0.25, BreakKind.CRACK)]
    assert s.w(1.0) == pytest.approx(0.1)
    assert s.loads.f_p(0.5) == pytest.approx(0.9974949866)


def test_round_trip_through_text():
    s = parse_text(GOOD)
    t = parse_text(s.to_text())
    assert t.echo() == s.echo()


def test_with_value():
    s = parse_text(GOOD).with_value("params.beta", 0.012)
    assert s.params.beta == 0.012


def _error(text):
    with pytest.raises(SpecError) as exc:
        parse_text(text)
    return str(exc.value)


def test_bad_number_names_line_and_field():
    msg = _error(GOOD.replace("mu = 10", "mu = ten"))
    assert msg.startswith("line 5: [params] mu")


def test_unknown_field():
    msg = _error(GOOD.replace("n = 32", "nodes = 32"))
    assert "line 18: [mesh] nodes" in msg


def test_bad_expression():
    msg = _error(GOOD.replace("w = 0.1*x**2", "w = 0.1*y"))
    assert "line 11: [datum] w" in msg


def test_param_violation_is_reported():
    from flexbeam.model import ParamViolation

    with pytest.raises(ParamViolation):
        parse_text(GOOD.replace("alpha = 0.02", "alpha = 0.05"))


def test_bad_break():
    assert "[breaks] list" in _error(GOOD.replace("crack@0.25", "fracture@0.25"))
    assert "[breaks] list" in _error(GOOD.replace("crack@0.25", "hinge@0.25"))


def test_missing_kind():
    assert "kind" in _error("[params]\nmu = 1\n")


def test_sweep_field_checked():
    assert "[sweep] field" in _error(GOOD + "\n[sweep]\nfield = params.nu\nvalues = 1\n")


def test_spline_datum_and_sample_loads():
    text = GOOD.replace("w = 0.1*x**2", "knots = -2, 0, 2\nvalues = 0, 0.1, 0").replace(
        "f_p = sin(3*x)", "f_p_knots = -1, 1\nf_p_values = 0, 2")
    s = parse_text(text)
    assert s.w(0.0) == pytest.approx(0.1)
    assert s.loads.f_p(0.0) == pytest.approx(1.0)


def test_shipped_instances():
    from flexbeam.problem_spec import SpecError, load_instance, shipped_instances

    assert shipped_instances() == ["compliance_crack", "compliance_crease", "compliance_smooth"]
    s = load_instance("compliance_crease")
    assert s.problem is Problem.E1 and [(b.x, b.kind) for b in s.breaks] == [(0.0, BreakKind.CREASE)]
    assert s.w(1.0) == pytest.approx(0.45)
    with pytest.raises(SpecError):
        load_instance("nope")
