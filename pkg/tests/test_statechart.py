import pytest
from hypothesis import given, settings

from sdvtest.cli import shipped
from sdvtest.statechart import (
    ChartSyntaxError,
    DuplicateState,
    SignalEvent,
    Timeout,
    UnknownState,
    extract_signals,
    parse_statechart,
    render_statechart,
    validate_reachability,
)
from strategies import charts

CPDS_SIGNALS = {
    "IgnitionOff", "IsChildDetected", "IsDriverNotified", "HasDriverAcknowledged", "HVACAutoOverride",
    "HornActive", "LightsActive", "DoorsUnlocked", "CaregiverNotified", "EmergencyContacted",
}


def test_short_form_timeout():
    chart = parse_statechart("chart X initial DriverNotified\n"
                             "state DriverNotified { after 300s -> InitialWarning }\nstate InitialWarning")
    assert len(chart.transitions) == 1
    t = chart.transitions[0]
    assert (t.source, t.target, t.trigger) == ("DriverNotified", "InitialWarning", Timeout(300))


def test_minimal_chart():
    chart = parse_statechart("chart X initial A state A")
    assert [s.name for s in chart.states] == ["A"] and chart.transitions == ()


def test_unknown_state():
    with pytest.raises(UnknownState):
        parse_statechart("chart X\ninitial A\nstate A\ntransition A -> Foo after 1s\n")


def test_unknown_initial():
    with pytest.raises(UnknownState):
        parse_statechart("chart X initial Nope state A")


def test_duplicate_state():
    with pytest.raises(DuplicateState):
        parse_statechart("chart X initial A state A state A")


def test_syntax_error_reports_line_and_expectation():
    with pytest.raises(ChartSyntaxError) as info:
        parse_statechart("chart X\ninitial A\nstate A\ntransition A -> A on S != true\n")
    assert info.value.line == 4 and info.value.expected
    with pytest.raises(ChartSyntaxError) as info:
        parse_statechart("chart X\ninitial A\nstate A\n\ntransition A -> A on S true\n")
    assert (info.value.line, info.value.expected) == (5, "'=='")


def test_zero_timeout_rejected():
    with pytest.raises(ChartSyntaxError):
        parse_statechart("chart X initial A state A transition A -> A after 0s")


def test_full_form_with_actions():
    chart = parse_statechart('chart X initial A state A state B\n'
                             'transition A -> B on Go == true do Lamp = 1, Msg = "hi there"\n')
    t = chart.transitions[0]
    assert t.trigger == SignalEvent("Go", True)
    assert [(a.signal_name, a.literal) for a in t.actions] == [("Lamp", 1), ("Msg", "hi there")]


def test_composite_entry_goes_to_first_child(chart):
    assert chart.enter("Escalation") == "Escalation.InitialWarning"
    assert chart.label_of("Escalation.LightsHorn") == "escalation"
    assert chart.label_of("Escalation.HvacIntervention") == "HVAC override"


def test_single_event_extraction():
    chart = parse_statechart("chart X initial A state A state B transition A -> B on IsChildDetected == true")
    [sig] = extract_signals(chart)
    assert sig.name == "IsChildDetected" and sig.roles == {"event"}


def test_timeout_only_chart_has_no_signals():
    chart = parse_statechart("chart X initial A state A state B transition A -> B after 5s transition B -> A after 5s")
    assert extract_signals(chart) == []


def test_shipped_chart_signals(chart):
    names = [s.name for s in extract_signals(chart)]
    assert len(names) == len(set(names)) == 10
    assert set(names) == CPDS_SIGNALS
    assert names[:2] == ["IgnitionOff", "IsChildDetected"]


def test_occurrence_locators_are_real(chart):
    index = chart.state_index()
    total = sum(len(t.actions) + isinstance(t.trigger, SignalEvent) for t in chart.transitions)
    total += sum(len(s.entry_actions) for s in index.values())
    signals = extract_signals(chart)
    assert len(signals) <= total
    for sig in signals:
        for (kind, ref), _role in sig.occurrences:
            if kind == "transition":
                assert 0 <= ref < len(chart.transitions)
            else:
                assert ref in index


def test_reachability_examples(chart):
    chain = parse_statechart("chart X initial A state A state B state C "
                             "transition A -> B after 1s transition B -> C after 1s")
    assert validate_reachability(chain) == []
    assert validate_reachability(parse_statechart("chart X initial A state A state B")) == ["B"]
    assert validate_reachability(chart) == []


def test_extraction_is_stable():
    text = shipped("cpds.chart").read_text()
    assert extract_signals(parse_statechart(text)) == extract_signals(parse_statechart(text))


def test_shipped_chart_round_trips(chart):
    assert parse_statechart(render_statechart(chart)) == chart


def test_defaults_declared(chart):
    assert chart.default_of("IsChildDetected") is False
    assert chart.default_of("Unknown") is None


@settings(max_examples=100, deadline=None)
@given(charts())
def test_render_parse_round_trip(chart):
    assert parse_statechart(render_statechart(chart)) == chart
