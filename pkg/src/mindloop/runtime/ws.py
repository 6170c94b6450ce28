"""WebSocket bridge between the pipeline and the browser console.

Serves on a local address; every connected client first receives a config
snapshot, then live control frames and cue messages. Clients can adjust
thresholds/mappings (applied atomically between transfer ticks) and report
game events, which are injected as session markers for offline scoring.
The broadcaster is fire-and-forget: slow or absent clients never stall the
pipeline.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading

import websockets

from ..signal_core.types import Marker
from .channels import Closed, Empty
from .pipeline import PipelineHandle

log = logging.getLogger(__name__)


class FrameBroadcaster:
    """Runs a websocket server beside the pipeline in its own thread."""

    def __init__(self, handle: PipelineHandle, host: str = "127.0.0.1",
                 port: int = 8765, cue_map: dict | None = None,
                 cue_duration_ms: int = 3000):
        self.handle = handle
        self.host = host
        self.port = port
        self.cue_map = cue_map or {}
        self.cue_duration_ms = cue_duration_ms
        self._clients: set = set()
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._started = threading.Event()
        self._stopping = asyncio.Event()

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name="mindloop-ws")
        self._thread.start()
        if not self._started.wait(5.0):
            raise RuntimeError("websocket server failed to start")

    def stop(self) -> None:
        if self._loop is not None:
            self._loop.call_soon_threadsafe(self._stopping.set)
        if self._thread is not None:
            self._thread.join(5.0)

    def _run(self) -> None:
        asyncio.run(self._serve())

    async def _serve(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stopping = asyncio.Event()
        async with websockets.serve(self._handler, self.host, self.port):
            self._started.set()
            pump_frames = asyncio.create_task(self._pump_control())
            pump_markers = asyncio.create_task(self._pump_markers())
            await self._stopping.wait()
            pump_frames.cancel()
            pump_markers.cancel()

    # -- pipeline -> clients -------------------------------------------------

    async def _pump_control(self) -> None:
        queue = self.handle.subscribe_control()
        while True:
            message = await self._loop.run_in_executor(None, _poll, queue)
            if message is _CLOSED:
                return
            if message is None:
                continue
            await self._broadcast(message.payload.to_wire())

    async def _pump_markers(self) -> None:
        queue = self.handle.subscribe_markers()
        while True:
            marker = await self._loop.run_in_executor(None, _poll, queue)
            if marker is _CLOSED:
                return
            if marker is None:
                continue
            cue_class = self.cue_map.get(marker.label)
            if cue_class is not None:
                await self._broadcast({"type": "cue", "class": cue_class,
                                       "duration_ms": self.cue_duration_ms})

    async def _broadcast(self, payload: dict) -> None:
        if not self._clients:
            return
        text = json.dumps(payload)
        dead = []
        for client in list(self._clients):
            try:
                await client.send(text)
            except Exception:
                dead.append(client)
        for client in dead:
            self._clients.discard(client)

    # -- clients -> pipeline ---------------------------------------------------

    async def _handler(self, websocket) -> None:
        self._clients.add(websocket)
        try:
            await websocket.send(json.dumps(self.handle.config_snapshot()))
            async for raw in websocket:
                try:
                    self._dispatch(json.loads(raw))
                except Exception as exc:
                    log.warning("bad client message: %s", exc)
                    await websocket.send(json.dumps(
                        {"type": "error", "message": str(exc)}))
                else:
                    if json.loads(raw).get("type") in ("set_threshold",
                                                       "set_mapping"):
                        await self._broadcast(self.handle.config_snapshot())
        except websockets.ConnectionClosed:
            pass
        finally:
            self._clients.discard(websocket)

    def _dispatch(self, message: dict) -> None:
        kind = message.get("type")
        if kind == "set_threshold":
            self.handle.update_threshold(message["class"],
                                         float(message["value"]))
        elif kind == "set_mapping":
            self.handle.update_mapping(message["class"], message["action"])
        elif kind == "game_event":
            self.handle.inject_marker(
                Marker(float(message["ts"]), f"game:{message['event']}"))
        else:
            raise ValueError(f"unknown message type {kind!r}")


_CLOSED = object()


def _poll(queue):
    try:
        return queue.get(timeout=0.1)
    except Empty:
        return None
    except Closed:
        return _CLOSED
