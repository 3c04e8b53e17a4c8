"""Local WebSocket streaming service.

One producer loop turns frames into GazeUpdates and broadcasts them as JSON;
any number of clients subscribe and may drive a calibration session with
control messages (calib_start / target / calib_abort / calib_end). Slow
consumers never block the loop: each client has a bounded queue with a
drop-oldest policy and its drop count is reported in-band.
"""

from __future__ import annotations

import asyncio
import socket
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import AsyncIterator, Dict, Iterable, Iterator, Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import calibration as calib
from .dataset import Frame
from .errors import PortInUse
from .imio import encode_jpeg_base64, read_rgb
from .pipeline import Pipeline, evaluate_session, fit_session

QUEUE_SIZE = 256
PREVIEW_MIN_INTERVAL_S = 0.1  # preview frames throttled to <= 10/s


class DirectoryFrameSource:
    """Frames from a directory of images, sorted by name; timestamps are
    synthetic 30-fps milliseconds so replays are deterministic."""

    def __init__(self, directory: str | Path, repeat: int = 1):
        self.paths = sorted(Path(directory).glob("*.png")) \
            + sorted(Path(directory).glob("*.jpg"))
        self.repeat = repeat

    def __iter__(self) -> Iterator[Frame]:
        n = 0
        for _ in range(self.repeat):
            for path in self.paths:
                yield Frame(read_rgb(path), source_id=path.name, timestamp=n * 33)
                n += 1


class CameraFrameSource:
    """Frames from a local camera via OpenCV capture."""

    def __init__(self, index: int = 0):
        self.index = index

    def __iter__(self) -> Iterator[Frame]:
        import cv2

        cap = cv2.VideoCapture(self.index)
        if not cap.isOpened():
            raise RuntimeError(f"cannot open camera {self.index}")
        try:
            while True:
                ok, bgr = cap.read()
                if not ok:
                    break
                yield Frame(bgr[:, :, ::-1].copy(), source_id=f"cam{self.index}",
                            timestamp=int(time.time() * 1000))
        finally:
            cap.release()


class _ClientSlot:
    def __init__(self):
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=QUEUE_SIZE)
        self.drops = 0
        self.reported_drops = 0


class Hub:
    """Fan-out of producer messages to per-client bounded queues."""

    def __init__(self):
        self.clients: Dict[int, _ClientSlot] = {}
        self._next_id = 0

    def register(self) -> tuple[int, _ClientSlot]:
        self._next_id += 1
        slot = _ClientSlot()
        self.clients[self._next_id] = slot
        return self._next_id, slot

    def unregister(self, client_id: int) -> None:
        self.clients.pop(client_id, None)

    def broadcast(self, message: dict) -> None:
        for slot in self.clients.values():
            if slot.queue.full():
                try:
                    slot.queue.get_nowait()
                    slot.drops += 1
                except asyncio.QueueEmpty:
                    pass
            slot.queue.put_nowait(message)


class TrackerService:
    """The FastAPI app plus the producer loop and calibration control."""

    def __init__(self, pipeline: Pipeline,
                 frame_source: Optional[Iterable[Frame]] = None,
                 frame_interval: float = 0.0,
                 session_out: str | Path = "session.jsonl",
                 model_out: str | Path = "calibration_model.json",
                 send_previews: bool = False):
        self.pipeline = pipeline
        self.frame_source = frame_source
        self.frame_interval = frame_interval
        self.session_out = Path(session_out)
        self.model_out = Path(model_out)
        self.send_previews = send_previews
        self.hub = Hub()
        self._producer_task: Optional[asyncio.Task] = None
        self.app = self._build_app()

    def _build_app(self) -> FastAPI:
        @asynccontextmanager
        async def lifespan(app: FastAPI) -> AsyncIterator[None]:
            if self.frame_source is not None:
                self._producer_task = asyncio.create_task(self._produce())
            yield
            if self._producer_task is not None:
                self._producer_task.cancel()
                try:
                    await self._producer_task
                except (asyncio.CancelledError, Exception):
                    pass

        app = FastAPI(lifespan=lifespan)
        app.state.service = self

        @app.websocket("/ws")
        async def ws_endpoint(websocket: WebSocket):
            await self._handle_client(websocket)

        return app

    async def _produce(self) -> None:
        last_preview = 0.0
        for frame in self.frame_source:
            update = await asyncio.to_thread(self.pipeline.run_frame, frame)
            self.hub.broadcast(update.to_message())
            now = time.monotonic()
            if self.send_previews and now - last_preview >= PREVIEW_MIN_INTERVAL_S:
                last_preview = now
                self.hub.broadcast({"type": "frame",
                                    "jpeg_b64": encode_jpeg_base64(frame.pixels)})
            if self.frame_interval > 0:
                await asyncio.sleep(self.frame_interval)
        self.hub.broadcast({"type": "end"})

    def _layout_message(self) -> dict:
        geometry = self.pipeline.geometry
        targets = calib.calibration_targets(geometry)
        return {
            "type": "layout",
            "resolution": list(geometry.resolution),
            "targets": [{
                "index": t.index, "row": t.row, "col": t.col,
                "cx": t.center[0], "cy": t.center[1],
                "side": t.square_side, "color": list(t.color),
                "dwell": t.dwell,
            } for t in targets],
        }

    def _handle_control(self, message: dict) -> Optional[dict]:
        """Apply one control message; returns a broadcast reply or None."""
        kind = message.get("type")
        recorder = self.pipeline.recorder
        if kind == "calib_start":
            recorder.start()
            return {"type": "calib_started"}
        if kind == "target":
            index = message.get("index")
            if not isinstance(index, int) or not 1 <= index <= calib.TARGET_COUNT:
                return {"type": "error",
                        "message": f"target index must be 1..{calib.TARGET_COUNT}"}
            recorder.set_target(index)
            return None
        if kind == "calib_abort":
            recorder.active = False
            recorder.samples = []
            recorder.target = None
            return {"type": "calib_aborted"}
        if kind == "calib_end":
            samples = recorder.end(self.session_out)
            return self.finish_calibration(samples)
        return {"type": "error", "message": f"unknown control type {kind!r}"}

    def finish_calibration(self, samples) -> dict:
        """Persist, fit, evaluate; one shared path for service and CLI replay."""
        geometry = self.pipeline.geometry
        reply = {"type": "report", "session": str(self.session_out),
                 "samples": len(samples), "model": None,
                 "cells": None, "mean_deg": None}
        try:
            model = fit_session(samples, geometry)
        except Exception as exc:
            reply["error"] = str(exc)
            return reply
        calib.save_model(self.model_out, model)
        self.pipeline.model = model
        reply["model"] = str(self.model_out)
        try:
            grid = evaluate_session(samples, model, geometry)
        except Exception as exc:
            reply["error"] = str(exc)
            return reply
        reply["cells"] = [[float(v) for v in row] for row in grid.cells]
        reply["mean_deg"] = grid.mean_deg
        return reply

    async def _handle_client(self, websocket: WebSocket) -> None:
        await websocket.accept()
        client_id, slot = self.hub.register()
        await websocket.send_json(self._layout_message())

        async def sender():
            while True:
                message = await slot.queue.get()
                if slot.drops > slot.reported_drops:
                    slot.reported_drops = slot.drops
                    await websocket.send_json({"type": "drops",
                                               "count": slot.drops})
                await websocket.send_json(message)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                message = await websocket.receive_json()
                reply = self._handle_control(message)
                if reply is not None:
                    self.hub.broadcast(reply)
        except (WebSocketDisconnect, Exception):
            pass
        finally:
            send_task.cancel()
            self.hub.unregister(client_id)


def check_port_free(port: int, host: str = "127.0.0.1") -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise PortInUse(f"port {port} is already in use on {host}") from exc
    finally:
        probe.close()


def serve(service: TrackerService, port: int, host: str = "127.0.0.1") -> None:
    """Run the service until interrupted. Raises PortInUse up front."""
    import uvicorn

    check_port_free(port, host)
    uvicorn.run(service.app, host=host, port=port, log_level="warning")
