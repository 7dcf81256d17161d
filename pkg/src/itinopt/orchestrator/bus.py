"""In-process publish/subscribe bus.

Delivery contract:

* at-least-once to every subscriber active at publish time;
* FIFO per (publisher, topic): a publisher stamps sequence numbers and
  enqueues under one lock, and each subscription drains its own queue on a
  single worker thread;
* asynchronous: ``publish`` only enqueues.

Handlers must be idempotent on ``(request_id, publisher, sequence)``; the
``redeliveries`` and ``delay`` hooks exist so tests can inject duplicate and
late deliveries.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass
from typing import Callable

from ..exceptions import TopicClosed

logger = logging.getLogger(__name__)

Handler = Callable[["BusEvent"], None]

_STOP = object()


@dataclass(frozen=True)
class BusEvent:
    topic: str
    request_id: str
    payload: str
    sequence: int = 0
    publisher: str = ""

    @property
    def dedup_key(self) -> tuple[str, str, int]:
        return (self.request_id, self.publisher, self.sequence)


class Subscription:
    def __init__(self, bus: "MessageBus", topic: str, handler: Handler, name: str):
        self.bus = bus
        self.topic = topic
        self.handler = handler
        self.name = name
        self.delivered = 0
        self.last_error: str | None = None
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._run, name=f"bus-{name}", daemon=True)
        self._thread.start()

    @property
    def depth(self) -> int:
        return self._queue.qsize()

    def _put(self, event: BusEvent) -> None:
        self._queue.put(event)

    def _run(self) -> None:
        while True:
            event = self._queue.get()
            if event is _STOP:
                return
            if self.bus.delay is not None:
                pause = self.bus.delay(event)
                if pause:
                    time.sleep(pause)
            try:
                self.handler(event)
            except Exception as exc:  # handler faults must not kill the worker
                self.last_error = f"{type(exc).__name__}: {exc}"
                logger.exception("handler %s failed on %s", self.name, event.topic)
            self.delivered += 1

    def cancel(self, wait: bool = False) -> None:
        self.bus._remove(self)
        self._queue.put(_STOP)
        if wait:
            self._thread.join()


class Publisher:
    """Named event source stamping a strictly increasing sequence per topic."""

    def __init__(self, bus: "MessageBus", name: str):
        self.bus = bus
        self.name = name
        self._seq: dict[str, int] = {}
        self._lock = threading.Lock()

    def publish(self, topic: str, request_id: str, payload: str) -> BusEvent:
        with self._lock:
            seq = self._seq.get(topic, 0) + 1
            self._seq[topic] = seq
            event = BusEvent(topic, request_id, payload, seq, self.name)
            self.bus.publish(event)
        return event


class MessageBus:
    def __init__(
        self,
        redeliveries: Callable[[BusEvent], int] | None = None,
        delay: Callable[[BusEvent], float] | None = None,
    ):
        self.redeliveries = redeliveries
        self.delay = delay
        self._subs: dict[str, list[Subscription]] = {}
        self._lock = threading.Lock()
        self._closed = False
        self.published = 0

    def publisher(self, name: str) -> Publisher:
        return Publisher(self, name)

    def subscribe(self, topic: str, handler: Handler, name: str | None = None) -> Subscription:
        if not topic:
            raise ValueError("topic must be non-empty")
        with self._lock:
            if self._closed:
                raise TopicClosed(f"bus is shut down; cannot subscribe to {topic!r}")
            sub = Subscription(self, topic, handler, name or f"{topic}#{len(self._subs.get(topic, []))}")
            self._subs.setdefault(topic, []).append(sub)
        return sub

    def publish(self, event: BusEvent) -> None:
        if not event.topic:
            raise ValueError("topic must be non-empty")
        with self._lock:
            if self._closed:
                raise TopicClosed(f"bus is shut down; cannot publish to {event.topic!r}")
            subs = list(self._subs.get(event.topic, ()))
            copies = 1 + (self.redeliveries(event) if self.redeliveries else 0)
            for sub in subs:
                for _ in range(copies):
                    sub._put(event)
            self.published += 1

    def _remove(self, sub: Subscription) -> None:
        with self._lock:
            subs = self._subs.get(sub.topic, [])
            if sub in subs:
                subs.remove(sub)

    def depth(self) -> int:
        with self._lock:
            return sum(s.depth for subs in self._subs.values() for s in subs)

    def subscriptions(self) -> list[Subscription]:
        with self._lock:
            return [s for subs in self._subs.values() for s in subs]

    def shutdown(self, wait: bool = True) -> None:
        with self._lock:
            self._closed = True
            subs = [s for v in self._subs.values() for s in v]
            self._subs.clear()
        for s in subs:
            s._queue.put(_STOP)
        if wait:
            for s in subs:
                s._thread.join(timeout=5)
