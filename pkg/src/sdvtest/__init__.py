"""Generate VSS-grounded Gherkin tests from statecharts and run them in virtual time."""

from sdvtest.broker import Broker, ChangeEvent
from sdvtest.cpds import Cpds, CpdsConfig, CpdsStage, MutantNoResetCpds
from sdvtest.gherkin import Feature, Scenario, Step, parse_feature, render_feature, requirement_trace
from sdvtest.generate import Requirement, emit_feature, emit_runner_script, parse_requirements, plan_scenarios
from sdvtest.mapping import Clarification, Mapping, map_signal, score, tokenize
from sdvtest.runner import TestReport, bind_step, run_feature, run_scenario
from sdvtest.statechart import StateChart, extract_signals, parse_statechart, render_statechart
from sdvtest.vss import Catalog, SignalNode, leaves, load_catalog, resolve

__version__ = "0.1.0"

__all__ = [
    "Broker",
    "Catalog",
    "ChangeEvent",
    "Clarification",
    "Cpds",
    "CpdsConfig",
    "CpdsStage",
    "Feature",
    "Mapping",
    "MutantNoResetCpds",
    "Requirement",
    "Scenario",
    "SignalNode",
    "StateChart",
    "Step",
    "TestReport",
    "bind_step",
    "emit_feature",
    "emit_runner_script",
    "extract_signals",
    "leaves",
    "load_catalog",
    "map_signal",
    "parse_feature",
    "parse_requirements",
    "parse_statechart",
    "plan_scenarios",
    "render_feature",
    "render_statechart",
    "requirement_trace",
    "resolve",
    "run_feature",
    "run_scenario",
    "score",
    "tokenize",
]
