"""Brokerless in-process pub/sub: bounded queues with drop-oldest overflow.

Each pipeline stage publishes to one topic and consumes from one inbox.
Overflow never blocks the publisher: the oldest message is dropped and
counted, and surviving messages keep their order.
"""

from __future__ import annotations

import threading
from collections import deque


class Closed(Exception):
    """The channel was closed and is drained."""


class Empty(Exception):
    """No message arrived within the timeout."""


class DropOldestQueue:
    """Thread-safe bounded queue that drops the oldest entry when full."""

    def __init__(self, maxsize: int = 64):
        if maxsize < 1:
            raise ValueError("maxsize must be >= 1")
        self.maxsize = maxsize
        self._items: deque = deque()
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self._closed = False
        self.dropped = 0

    def put(self, item) -> None:
        with self._ready:
            if self._closed:
                return
            if len(self._items) >= self.maxsize:
                self._items.popleft()
                self.dropped += 1
            self._items.append(item)
            self._ready.notify()

    def get(self, timeout: float | None = None):
        with self._ready:
            if not self._items:
                self._ready.wait(timeout)
            if self._items:
                return self._items.popleft()
            if self._closed:
                raise Closed
            raise Empty

    def close(self) -> None:
        with self._ready:
            self._closed = True
            self._ready.notify_all()

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


class Topic:
    """Fan-out point: every subscriber gets its own bounded inbox."""

    def __init__(self, name: str, maxsize: int = 64):
        self.name = name
        self.maxsize = maxsize
        self._subscribers: list[DropOldestQueue] = []
        self._lock = threading.Lock()

    def subscribe(self, maxsize: int | None = None) -> DropOldestQueue:
        queue = DropOldestQueue(maxsize or self.maxsize)
        with self._lock:
            self._subscribers.append(queue)
        return queue

    def unsubscribe(self, queue: DropOldestQueue) -> None:
        with self._lock:
            if queue in self._subscribers:
                self._subscribers.remove(queue)
        queue.close()

    def publish(self, message) -> None:
        with self._lock:
            subscribers = list(self._subscribers)
        for queue in subscribers:
            queue.put(message)

    def close(self) -> None:
        with self._lock:
            subscribers = list(self._subscribers)
        for queue in subscribers:
            queue.close()

    @property
    def dropped(self) -> int:
        with self._lock:
            return sum(q.dropped for q in self._subscribers)


class Bus:
    """Named topics, one per stage output."""

    def __init__(self, maxsize: int = 64):
        self.maxsize = maxsize
        self._topics: dict[str, Topic] = {}
        self._lock = threading.Lock()

    def topic(self, name: str) -> Topic:
        with self._lock:
            if name not in self._topics:
                self._topics[name] = Topic(name, self.maxsize)
            return self._topics[name]

    def close(self) -> None:
        with self._lock:
            topics = list(self._topics.values())
        for topic in topics:
            topic.close()

    def dropped_counts(self) -> dict:
        with self._lock:
            return {name: topic.dropped for name, topic in self._topics.items()}
