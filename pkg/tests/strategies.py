"""Hypothesis strategies shared by the property tests."""

from hypothesis import strategies as st

from sdvtest.gherkin import Feature, Scenario, Step
from sdvtest.runner import format_duration
from sdvtest.statechart import KEYWORDS, Action, SignalEvent, State, StateChart, Timeout, Transition

ident = st.from_regex(r"[A-Z][A-Za-z0-9]{0,6}", fullmatch=True).filter(lambda s: s.lower() not in KEYWORDS)
literal = st.one_of(
    st.booleans(),
    st.integers(-1000, 1000),
    st.text(st.characters(codec="ascii", exclude_categories=["Cc"]), max_size=8),
)


@st.composite
def state_trees(draw, depth=2):
    names = draw(st.lists(ident, min_size=1, max_size=4, unique=True))
    states = []
    for name in names:
        children = draw(state_trees(depth - 1)) if depth > 0 and draw(st.booleans()) else ()
        entry = tuple(draw(st.lists(st.builds(Action, ident, literal), max_size=2)))
        label = draw(st.none() | st.text(st.characters(codec="ascii", exclude_categories=["Cc"]), min_size=1, max_size=10))
        states.append(State(name, tuple(children), entry, label))
    return tuple(states)


def _full_names(states, prefix=""):
    for s in states:
        yield prefix + s.name
        yield from _full_names(s.children, prefix + s.name + ".")


@st.composite
def charts(draw):
    states = draw(state_trees())
    names = list(_full_names(states))
    trigger = st.one_of(st.builds(Timeout, st.integers(1, 3600)), st.builds(SignalEvent, ident, literal))
    transitions = draw(st.lists(
        st.builds(Transition, st.sampled_from(names), st.sampled_from(names), trigger,
                  st.lists(st.builds(Action, ident, literal), max_size=3).map(tuple)),
        max_size=8,
    ))
    defaults = draw(st.lists(st.tuples(ident, literal), max_size=3, unique_by=lambda d: d[0]))
    return StateChart(draw(ident), states, tuple(transitions), draw(st.sampled_from(names)), tuple(defaults))


# -- Gherkin over the canonical step grammar ---------------------------------

PATHS = (
    ("Vehicle.Cabin.ChildPresenceDetection.IsChildDetected", "boolean"),
    ("Vehicle.Cabin.Infotainment.HVAC.AutoOverrideActive", "boolean"),
    ("Vehicle.Body.IsIgnitionOff", "boolean"),
    ("Vehicle.Cabin.Seat.Row2.PassengerSide.IsOccupied", "boolean"),
)

durations = st.one_of(st.integers(1, 59), st.integers(1, 10).map(lambda m: m * 60)).map(format_duration)
context = st.sampled_from(["escalation", "HVAC override", "notification"])


@st.composite
def canonical_text(draw, kind):
    path, _ = draw(st.sampled_from(PATHS))
    value = "true" if draw(st.booleans()) else "false"
    forms = [f"{path} is {value}", f"{path} is set to {value}", f"{path} is reset to {value}"]
    if kind != "then":
        forms += [f"after {draw(durations)}", f"no acknowledgment within {draw(durations)} of {draw(context)}"]
    if kind == "when":
        # acknowledgment window must exceed the default 60 s delay
        window = format_duration(draw(st.integers(2, 5)) * 60)
        forms.append(f"acknowledges within {window} of {draw(context)}")
    return draw(st.sampled_from(forms))


tag = st.from_regex(r"Req_[A-Z]{2,4}_[0-9][0-9](\.[0-9])?", fullmatch=True)


@st.composite
def scenarios(draw, name=None):
    steps = []
    for kind in ("given", "when", "then"):
        for i in range(draw(st.integers(0, 3))):
            keyword = "And" if i else kind.capitalize()
            steps.append(Step(keyword, kind, draw(canonical_text(kind)), tuple(draw(st.lists(tag, max_size=2)))))
    title = name or draw(st.from_regex(r"[A-Za-z][A-Za-z0-9 ()_.]{0,30}[A-Za-z0-9)]", fullmatch=True))
    return Scenario(title, tuple(steps))


@st.composite
def features(draw):
    name = draw(st.from_regex(r"[A-Za-z][A-Za-z0-9 ]{0,20}[A-Za-z0-9]", fullmatch=True))
    return Feature(name, tuple(draw(st.lists(scenarios(), max_size=4))))
