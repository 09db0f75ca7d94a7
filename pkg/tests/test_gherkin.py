import pytest
from hypothesis import given, settings

from sdvtest.gherkin import (
    EmptyDocument,
    Feature,
    LeadingAnd,
    Scenario,
    Step,
    UnknownKeyword,
    parse_feature,
    render_feature,
    requirement_trace,
    split_tags,
)
from strategies import features


def _normalized(text):
    lines = [" ".join(line.split()) for line in text.strip().splitlines()]
    return "\n".join(line for line in lines if line) + "\n"


def test_hvac_scenario_structure(hvac_feature):
    [scenario] = hvac_feature.scenarios
    assert hvac_feature.name == "Unnamed"
    assert scenario.name == "HVAC adjustment intervention (Req_CPDS_04)"
    assert [s.kind for s in scenario.steps] == ["given", "given", "when", "when", "then"]
    assert [s.req_tags for s in scenario.steps] == [
        ("Req_CPDS_01.6",), ("Req_CPDS_04.1",), ("Req_CPDS_04.1",), ("Req_CPDS_04.2",), ("Req_CPDS_04.2",)]
    assert [s.keyword_literal for s in scenario.steps] == ["Given", "And", "When", "And", "Then"]


def test_render_matches_normalized_source(hvac_text, hvac_feature):
    rendered = render_feature(hvac_feature)
    body = rendered.split("\n\n", 1)[1]
    assert _normalized(body) == _normalized(hvac_text)
    assert parse_feature(rendered) == hvac_feature


def test_empty_scenario():
    feature = parse_feature("Scenario: empty\n")
    assert [(s.name, s.steps) for s in feature.scenarios] == [("empty", ())]
    assert render_feature(feature) == "Feature: Unnamed\n\nScenario: empty\n"


def test_leading_and():
    with pytest.raises(LeadingAnd) as info:
        parse_feature("Feature: F\nScenario: s\n  And x is true\n")
    assert info.value.line == 3


@pytest.mark.parametrize("line", ["But x is true", "Examples:", "| a | b |", '"""', "Background:", "@smoke",
                                  "Whenever x"])
def test_unsupported_constructs(line):
    with pytest.raises(UnknownKeyword):
        parse_feature(f"Feature: F\nScenario: s\n  Given a is true\n  {line}\n")


def test_empty_document():
    with pytest.raises(EmptyDocument):
        parse_feature("# nothing\n\n")


def test_feature_header_without_scenarios():
    assert parse_feature("Feature: Lonely\n  some description\n") == Feature("Lonely")


def test_two_tags_in_order():
    step = Step("Given", "given", "x is true", ("Req_A_1", "Req_B_2"))
    text = render_feature(Feature("F", (Scenario("s", (step,)),)))
    assert "Given x is true [Req_A_1] [Req_B_2]" in text


def test_tag_extraction_only_strips_trailing_tags():
    assert split_tags("  a [Req_X_1] b [Req_Y_2]  [Req_Z_3] ") == ("a [Req_X_1] b", ("Req_Y_2", "Req_Z_3"))
    assert split_tags("a [not_a_tag]") == ("a [not_a_tag]", ())


def test_comments_and_indentation_ignored():
    feature = parse_feature("Feature: F\n# note\n      Scenario: s\n\tGiven a is true\n  # mid\n Then a is true\n")
    assert [s.text for s in feature.scenarios[0].steps] == ["a is true", "a is true"]


def test_requirement_trace(hvac_feature):
    name = hvac_feature.scenarios[0].name
    assert requirement_trace(hvac_feature) == {
        "Req_CPDS_01.6": [(name, 0)],
        "Req_CPDS_04.1": [(name, 1), (name, 2)],
        "Req_CPDS_04.2": [(name, 3), (name, 4)],
    }


def test_trace_empty_and_shared():
    assert requirement_trace(parse_feature("Scenario: s\nGiven a is true\n")) == {}
    feature = parse_feature("Scenario: a\nGiven x is true [Req_A_1]\nScenario: b\nThen x is true [Req_A_1]\n")
    assert requirement_trace(feature) == {"Req_A_1": [("a", 0), ("b", 0)]}


@settings(max_examples=100, deadline=None)
@given(features())
def test_round_trip(feature):
    assert parse_feature(render_feature(feature)) == feature


@settings(max_examples=50, deadline=None)
@given(features())
def test_and_resolution(feature):
    for scenario in parse_feature(render_feature(feature)).scenarios:
        last = None
        for step in scenario.steps:
            if step.keyword_literal == "And":
                assert step.kind == last
            else:
                last = step.kind
