from __future__ import annotations
from collections import Counter, defaultdict
from enum import Enum
from typing import Any, Callable, DefaultDict, Dict, List, Optional, Union, TYPE_CHECKING
from dataclasses import dataclass, field
from abc import ABC, abstractmethod
import logging

if TYPE_CHECKING:
    from .nodes import NetworkSnapshot


class EventType(Enum):
    '''
    Everything the engine announces while a run progresses.
    '''

    # Clock
    INTERVAL_START = "interval_start"
    RUN_END = "run_end"

    # Cell state
    POWER_CHANGED = "power_changed"
    CELL_SLEEP = "cell_sleep"
    CELL_WAKE = "cell_wake"
    COMMAND_REJECTED = "command_rejected"

    # UE state
    HANDOVER = "handover"


@dataclass(frozen=True)
class Event:
    """Something that happened at simulation time `t_s` to a cell and/or a UE."""
    type: EventType
    t_s: float = 0.0
    cell_id: Optional[int] = None
    ue_id: Optional[int] = None
    data: Dict[str, Any] = field(default_factory=dict)


Handler = Callable[[Event], None]


class EventBus:
    """
    Per-run dispatcher keyed by EventType.

    Handlers run synchronously in subscription order at the simulation time of
    the event. A failing handler is logged and counted; it never stops the run
    or the remaining handlers. `counts` tallies every published event by type.
    """

    def __init__(self):
        self._handlers: DefaultDict[EventType, List[Handler]] = defaultdict(list)
        self.counts: Counter = Counter()
        self.handler_errors = 0

    def subscribe(self, event_type: EventType, handler: Handler) -> None:
        if not isinstance(event_type, EventType):
            raise TypeError(f"Expected an EventType, got {event_type!r}")
        self._handlers[event_type].append(handler)
        logging.debug(f"Subscribed {getattr(handler, '__qualname__', handler)} to {event_type.value}")

    def unsubscribe(self, event_type: EventType, handler: Handler) -> None:
        handlers = self._handlers.get(event_type, [])
        if handler in handlers:
            handlers.remove(handler)

    def subscribers(self, event_type: EventType) -> int:
        return len(self._handlers.get(event_type, ()))

    def emit(self, event: Event) -> None:
        self.counts[event.type] += 1
        handlers = self._handlers.get(event.type)
        if not handlers:
            return
        # handlers may unsubscribe while being called
        for handler in list(handlers):
            try:
                handler(event)
            except Exception as e:
                self.handler_errors += 1
                logging.error(f"t={event.t_s}: {event.type.value} handler failed "
                              f"(cell={event.cell_id}, ue={event.ue_id}): {e}")

    def publish(self, event_type: EventType, t_s: float, cell_id: Optional[int] = None,
                ue_id: Optional[int] = None, **data: Any) -> Event:
        """Build the event from its fields, emit it and return it."""
        event = Event(event_type, float(t_s), cell_id, ue_id, data)
        self.emit(event)
        return event


# ------------------------------------------------------------------------ #
# RIC commands
# ------------------------------------------------------------------------ #
@dataclass(frozen=True)
class SetPower:
    cell_id: int
    p_tx_w: float


@dataclass(frozen=True)
class Sleep:
    cell_id: int


@dataclass(frozen=True)
class Wake:
    cell_id: int
    p_tx_w: float


Command = Union[SetPower, Sleep, Wake]


class RicHook(ABC):
    """
    Base class for controllers that steer cells while a run is in progress.

    `on_interval` is called once per loop interval, before any metric of that
    interval is computed, with a read-only snapshot of the whole network. The
    commands it returns are validated and applied by the engine in order.
    Hooks that also want to react to individual events override
    `_register_listeners` / `_unregister_listeners`.
    """

    def __init__(self):
        self.event_bus: Optional[EventBus] = None

    def attach(self, event_bus: EventBus):
        """Called when the hook is added to a simulation"""
        self.event_bus = event_bus
        self._register_listeners()

    def detach(self):
        """Called when the run ends"""
        if self.event_bus:
            self._unregister_listeners()
            self.event_bus = None

    @abstractmethod
    def on_interval(self, snapshot: NetworkSnapshot) -> List[Command]:
        """Return the commands to apply at this interval"""

    def _register_listeners(self):
        pass

    def _unregister_listeners(self):
        pass
