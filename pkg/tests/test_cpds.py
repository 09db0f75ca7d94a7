import pytest

from sdvtest import cpds
from sdvtest.broker import Broker, UnknownPath
from sdvtest.cli import shipped
from sdvtest.cpds import (
    ESCALATION_ORDER,
    STAGE_ACTIONS,
    AlreadyAttached,
    Cpds,
    CpdsConfig,
    CpdsStage,
    MutantNoResetCpds,
)
from sdvtest.vss import load_catalog


def start(catalog, sut_cls=Cpds, config=None, via_seat=True):
    broker = Broker(catalog)
    sut = sut_cls(config)
    sut.attach(broker)
    broker.set(cpds.REAR_SEATS[0] if via_seat else cpds.MOTION_DETECTED, True)
    broker.set(cpds.IGNITION_OFF, True)
    return broker, sut


def test_attach_on_shipped_catalog(catalog):
    sut = Cpds()
    sut.attach(Broker(catalog))
    assert sut.stage == CpdsStage.STANDBY


def test_attach_requires_overlay():
    core = load_catalog([shipped("vss_core.catalog").read_text()])
    with pytest.raises(UnknownPath) as info:
        Cpds().attach(Broker(core))
    assert info.value.path == cpds.IS_CHILD_DETECTED


def test_double_attach(catalog):
    sut = Cpds()
    sut.attach(Broker(catalog))
    with pytest.raises(AlreadyAttached):
        sut.attach(Broker(catalog))


@pytest.mark.parametrize("via_seat", [True, False])
def test_notification_at_evaluation_boundary(catalog, via_seat):
    broker, sut = start(catalog, via_seat=via_seat)
    broker.advance(9)
    assert broker.get(cpds.IS_DRIVER_NOTIFIED) is False
    broker.advance(1)
    assert broker.get(cpds.IS_DRIVER_NOTIFIED) is True
    assert broker.get(cpds.IS_CHILD_DETECTED) is True
    assert sut.stage == CpdsStage.DRIVER_NOTIFIED


def test_empty_cabin_goes_back_to_standby(catalog):
    broker = Broker(catalog)
    sut = Cpds()
    sut.attach(broker)
    broker.set(cpds.IGNITION_OFF, True)
    assert sut.stage == CpdsStage.EVALUATING
    broker.advance(10)
    assert sut.stage == CpdsStage.STANDBY and broker.get(cpds.IS_CHILD_DETECTED) is False


def test_ignition_back_on_cancels_evaluation(catalog):
    broker, sut = start(catalog)
    broker.advance(5)
    broker.set(cpds.IGNITION_OFF, False)
    broker.advance(100)
    assert sut.stage == CpdsStage.STANDBY and broker.get(cpds.IS_DRIVER_NOTIFIED) is False


def test_escalation_boundary(catalog):
    broker, sut = start(catalog)
    broker.advance(10)
    t0 = broker.now
    broker.advance(299)
    assert (broker.now - t0, sut.stage) == (299, CpdsStage.DRIVER_NOTIFIED)
    broker.advance(1)
    assert sut.stage == CpdsStage.INITIAL_WARNING


def test_stage_monotonicity(catalog):
    broker, sut = start(catalog)
    broker.advance(10)
    seen = [sut.stage]
    for _ in range(len(ESCALATION_ORDER)):
        broker.advance(300)
        seen.append(sut.stage)
    assert seen == [CpdsStage.DRIVER_NOTIFIED, *ESCALATION_ORDER]
    stage_log = [l for l in broker.event_log if cpds.STAGE_SIGNAL in l]
    assert [l.rsplit("->", 1)[1] for l in stage_log] == [
        "Evaluating", "DriverNotified", *(s.value for s in ESCALATION_ORDER)]


def test_stage_actions(catalog):
    broker, sut = start(catalog)
    broker.advance(10 + 300)
    for stage in ESCALATION_ORDER[1:]:
        broker.advance(300)
        assert sut.stage == stage
        for path, value in STAGE_ACTIONS[stage]:
            assert broker.get(path) == value


def test_exhaustion_returns_to_standby(catalog):
    broker = Broker(catalog)
    for door in cpds.DOOR_LOCKS:
        broker.set(door, True)
    sut = Cpds()
    sut.attach(broker)
    broker.set(cpds.REAR_SEATS[0], True)
    broker.set(cpds.IGNITION_OFF, True)
    broker.advance(10 + 300 * len(ESCALATION_ORDER))
    assert sut.stage == CpdsStage.EMERGENCY_CONTACTED
    assert not any(broker.get(d) for d in cpds.DOOR_LOCKS)
    broker.advance(300)
    assert sut.stage == CpdsStage.STANDBY
    assert broker.get(cpds.IS_CHILD_DETECTED) is True
    for stage in ESCALATION_ORDER:
        for path, _ in STAGE_ACTIONS[stage]:
            assert broker.get(path) == (path in cpds.DOOR_LOCKS)


def test_ack_during_hvac(catalog):
    broker, sut = start(catalog)
    broker.advance(10 + 900)
    assert sut.stage == CpdsStage.HVAC_INTERVENTION
    broker.set(cpds.HAS_DRIVER_ACKNOWLEDGED, True)
    assert sut.stage == CpdsStage.STANDBY
    assert broker.get(cpds.IS_CHILD_DETECTED) is False
    assert broker.get(cpds.HVAC_OVERRIDE) is False
    assert broker.get(cpds.HORN) is False


def test_mutant_keeps_detection(catalog):
    broker, sut = start(catalog, MutantNoResetCpds)
    broker.advance(910)
    broker.set(cpds.HAS_DRIVER_ACKNOWLEDGED, True)
    assert sut.stage == CpdsStage.STANDBY
    assert broker.get(cpds.IS_CHILD_DETECTED) is True


def test_stale_ack_does_not_hide_next_cycle(catalog):
    broker, sut = start(catalog)
    broker.advance(10)
    broker.set(cpds.HAS_DRIVER_ACKNOWLEDGED, True)
    broker.set(cpds.IGNITION_OFF, False)
    broker.set(cpds.IGNITION_OFF, True)
    broker.advance(10)
    assert sut.stage == CpdsStage.DRIVER_NOTIFIED
    broker.set(cpds.HAS_DRIVER_ACKNOWLEDGED, True)
    assert sut.stage == CpdsStage.STANDBY


def test_custom_windows(catalog):
    config = CpdsConfig(evaluation_window=3, response_window=20,
                        stage_order=(CpdsStage.LIGHTS_HORN, CpdsStage.EMERGENCY_CONTACTED),
                        stage_windows={CpdsStage.LIGHTS_HORN: 7})
    broker, sut = start(catalog, config=config)
    broker.advance(3 + 20)
    assert sut.stage == CpdsStage.LIGHTS_HORN
    broker.advance(6)
    assert sut.stage == CpdsStage.LIGHTS_HORN
    broker.advance(1)
    assert sut.stage == CpdsStage.EMERGENCY_CONTACTED


@pytest.mark.parametrize("kwargs", [
    {"response_window": 0}, {"evaluation_window": -1}, {"stage_order": ()},
    {"stage_order": (CpdsStage.LIGHTS_HORN, CpdsStage.LIGHTS_HORN)}, {"stage_order": (CpdsStage.STANDBY,)},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        CpdsConfig(**kwargs)


def test_redundant_sets_are_harmless(catalog):
    broker, sut = start(catalog)
    broker.set(cpds.IGNITION_OFF, True)
    broker.set(cpds.REAR_SEATS[1], True)
    broker.advance(10)
    assert sut.stage == CpdsStage.DRIVER_NOTIFIED
    broker.set(cpds.HAS_DRIVER_ACKNOWLEDGED, True)
    broker.set(cpds.HAS_DRIVER_ACKNOWLEDGED, False)
    broker.set(cpds.HAS_DRIVER_ACKNOWLEDGED, True)
    assert sut.stage == CpdsStage.STANDBY
