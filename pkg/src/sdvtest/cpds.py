"""Reference Child Presence Detection System used as the system under test.

Ignition off starts an evaluation; a detected child triggers a driver
notification and then one escalation stage per expired response window.
Driver acknowledgment at any point clears the detection, restores every
actuator the system touched, and returns to standby.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from sdvtest.broker import Broker, ChangeEvent, UnknownPath
from sdvtest.errors import SdvTestError

log = logging.getLogger(__name__)

CPD = "Vehicle.Cabin.ChildPresenceDetection"
IGNITION_OFF = "Vehicle.Body.IsIgnitionOff"
IS_CHILD_DETECTED = f"{CPD}.IsChildDetected"
IS_DRIVER_NOTIFIED = f"{CPD}.IsDriverNotified"
HAS_DRIVER_ACKNOWLEDGED = f"{CPD}.HasDriverAcknowledged"
HVAC_OVERRIDE = "Vehicle.Cabin.Infotainment.HVAC.AutoOverrideActive"
MOTION_DETECTED = f"{CPD}.IsOccupantMotionDetected"
HORN = "Vehicle.Body.Horn.IsActive"
HAZARD_LIGHTS = "Vehicle.Body.Lights.Hazard.IsSignaling"
CAREGIVER_NOTIFIED = f"{CPD}.IsCaregiverNotified"
DOORS_UNLOCKED = f"{CPD}.AreDoorsUnlocked"
EMERGENCY_CONTACTED = f"{CPD}.IsEmergencyContacted"
DOOR_LOCKS = tuple(
    f"Vehicle.Cabin.Door.{row}.{side}.IsLocked"
    for row in ("Row1", "Row2")
    for side in ("DriverSide", "PassengerSide")
)
REAR_SEATS = tuple(
    f"Vehicle.Cabin.Seat.Row2.{pos}.IsOccupied" for pos in ("DriverSide", "Middle", "PassengerSide")
)

STAGE_SIGNAL = "Cpds.Stage"
TIMER_ID = "cpds.stage"


class CpdsError(SdvTestError):
    pass


class AlreadyAttached(CpdsError):
    pass


class CpdsStage(str, enum.Enum):
    STANDBY = "Standby"
    EVALUATING = "Evaluating"
    DRIVER_NOTIFIED = "DriverNotified"
    INITIAL_WARNING = "InitialWarning"
    LIGHTS_HORN = "LightsHorn"
    HVAC_INTERVENTION = "HvacIntervention"
    CAREGIVER_NOTIFIED = "CaregiverNotified"
    DOORS_UNLOCKED = "DoorsUnlocked"
    EMERGENCY_CONTACTED = "EmergencyContacted"

    def __str__(self) -> str:
        return self.value


ESCALATION_ORDER = (
    CpdsStage.INITIAL_WARNING,
    CpdsStage.LIGHTS_HORN,
    CpdsStage.HVAC_INTERVENTION,
    CpdsStage.CAREGIVER_NOTIFIED,
    CpdsStage.DOORS_UNLOCKED,
    CpdsStage.EMERGENCY_CONTACTED,
)

STAGE_ACTIONS: dict[CpdsStage, tuple[tuple[str, bool], ...]] = {
    CpdsStage.INITIAL_WARNING: (),
    CpdsStage.LIGHTS_HORN: ((HORN, True), (HAZARD_LIGHTS, True)),
    CpdsStage.HVAC_INTERVENTION: ((HVAC_OVERRIDE, True),),
    CpdsStage.CAREGIVER_NOTIFIED: ((CAREGIVER_NOTIFIED, True),),
    CpdsStage.DOORS_UNLOCKED: ((DOORS_UNLOCKED, True),) + tuple((p, False) for p in DOOR_LOCKS),
    CpdsStage.EMERGENCY_CONTACTED: ((EMERGENCY_CONTACTED, True),),
}


@dataclass(frozen=True)
class CpdsConfig:
    evaluation_window: int = 10
    response_window: int = 300
    stage_order: tuple[CpdsStage, ...] = ESCALATION_ORDER
    seat_inputs: tuple[str, ...] = REAR_SEATS
    detection_input: str = MOTION_DETECTED
    stage_windows: dict[CpdsStage, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.evaluation_window <= 0 or self.response_window <= 0:
            raise ValueError("windows must be positive")
        order = tuple(CpdsStage(s) for s in self.stage_order)
        if not order:
            raise ValueError("stage_order must not be empty")
        if len(set(order)) != len(order):
            raise ValueError("stage_order contains duplicates")
        if any(s not in STAGE_ACTIONS for s in order):
            raise ValueError("stage_order may only hold escalation stages")
        object.__setattr__(self, "stage_order", order)

    def window(self, stage: CpdsStage) -> int:
        """Response window that starts when ``stage`` is entered."""
        return self.stage_windows.get(stage, self.response_window)


class Cpds:
    """Event-driven CPDS attached to one :class:`Broker`."""

    clears_detection_on_ack = True

    def __init__(self, config: CpdsConfig | None = None):
        self.config = config or CpdsConfig()
        self.broker: Broker | None = None
        self.stage = CpdsStage.STANDBY
        self._restore: dict[str, object] = {}

    def required_signals(self) -> list[str]:
        paths = [IS_CHILD_DETECTED, IS_DRIVER_NOTIFIED, HAS_DRIVER_ACKNOWLEDGED, IGNITION_OFF]
        paths += list(self.config.seat_inputs) + [self.config.detection_input]
        for stage in self.config.stage_order:
            paths += [p for p, _ in STAGE_ACTIONS[stage]]
        return list(dict.fromkeys(paths))

    def attach(self, broker: Broker) -> None:
        if self.broker is not None:
            raise AlreadyAttached("this CPDS instance is already attached to a broker")
        for path in self.required_signals():
            node = broker.catalog.nodes.get(path)
            if node is None or not node.is_leaf:
                raise UnknownPath(path)
        self.broker = broker
        broker.subscribe(IGNITION_OFF, self._on_ignition)
        for path in (*self.config.seat_inputs, self.config.detection_input):
            broker.subscribe(path, self._on_occupancy)
        broker.subscribe(HAS_DRIVER_ACKNOWLEDGED, self._on_ack)
        self.stage = CpdsStage.STANDBY

    # helpers
    def _enter(self, stage: CpdsStage) -> None:
        if stage != self.stage:
            self.broker.record(STAGE_SIGNAL, self.stage.value, stage.value)
            self.stage = stage

    def _set(self, path: str, value) -> None:
        if path != IS_CHILD_DETECTED:
            self._restore.setdefault(path, self.broker.get(path))
        self.broker.set(path, value)

    def _restore_outputs(self) -> None:
        restore, self._restore = self._restore, {}
        for path, value in reversed(list(restore.items())):
            self.broker.set(path, value)

    def _arm(self, delay: int, callback) -> None:
        self.broker.cancel(TIMER_ID)
        self.broker.schedule(delay, TIMER_ID, callback, owner=self)

    def child_present(self) -> bool:
        b = self.broker
        return any(b.get(p) for p in self.config.seat_inputs) or bool(b.get(self.config.detection_input))

    # reactions
    def _on_ignition(self, event: ChangeEvent) -> None:
        if event.new_value and self.stage == CpdsStage.STANDBY:
            self._enter(CpdsStage.EVALUATING)
            self._arm(self.config.evaluation_window, self._evaluate)
        elif not event.new_value and self.stage == CpdsStage.EVALUATING:
            self.broker.cancel(TIMER_ID)
            self._enter(CpdsStage.STANDBY)

    def _on_occupancy(self, event: ChangeEvent) -> None:
        # occupancy appearing in a parked vehicle re-arms the evaluation
        if (
            event.new_value
            and self.stage == CpdsStage.STANDBY
            and self.broker.get(IGNITION_OFF)
            and not self.broker.get(IS_CHILD_DETECTED)
        ):
            self._enter(CpdsStage.EVALUATING)
            self._arm(self.config.evaluation_window, self._evaluate)

    def _evaluate(self) -> None:
        if not self.child_present():
            self._enter(CpdsStage.STANDBY)
            return
        self.broker.set(IS_CHILD_DETECTED, True)
        # a stale acknowledgment must not swallow this cycle's notification
        self.broker.set(HAS_DRIVER_ACKNOWLEDGED, False)
        self._set(IS_DRIVER_NOTIFIED, True)
        self._enter(CpdsStage.DRIVER_NOTIFIED)
        self._arm(self.config.window(CpdsStage.DRIVER_NOTIFIED), self._escalate)

    def _escalate(self) -> None:
        order = self.config.stage_order
        if self.stage == CpdsStage.DRIVER_NOTIFIED:
            nxt = order[0]
        else:
            i = order.index(self.stage)
            if i + 1 == len(order):
                self._finish()
                return
            nxt = order[i + 1]
        self._enter(nxt)
        for path, value in STAGE_ACTIONS[nxt]:
            self._set(path, value)
        self._arm(self.config.window(nxt), self._escalate)

    def _finish(self) -> None:
        # escalation exhausted: outputs released, detection kept until acknowledged
        self._restore_outputs()
        self._enter(CpdsStage.STANDBY)

    def _on_ack(self, event: ChangeEvent) -> None:
        if not event.new_value:
            return
        if self.stage == CpdsStage.STANDBY and not self.broker.get(IS_CHILD_DETECTED):
            return
        self.broker.cancel(TIMER_ID)
        if self.clears_detection_on_ack:
            self.broker.set(IS_CHILD_DETECTED, False)
        self._restore_outputs()
        self._enter(CpdsStage.STANDBY)


class MutantNoResetCpds(Cpds):
    """Test double that forgets to clear the detection flag on acknowledgment."""

    clears_detection_on_ack = False


SUTS = {
    "reference": Cpds,
    "mutant-no-reset": MutantNoResetCpds,
}
