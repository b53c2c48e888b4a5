"""Interactive playground service.

Serves the browser client as static assets and runs one session per
service over a persistent WebSocket. Frames are newline-terminated JSON
documents streamed at the control rate; client messages are queued and
drained once per cycle. A control rate of 0 runs in lockstep: the loop
waits for one client message (JSON ``null`` means "no input") per cycle,
which scripted clients use for deterministic drives.
"""

from __future__ import annotations

import asyncio
import json
import time
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .environment import Environment
from .evaluation import default_input_weights, input_metric
from .session import (
    ModeMismatchError,
    Session,
    SessionConfig,
    SessionFinishedError,
    parse_input,
)

__all__ = ["PlaygroundService", "create_app", "serve_playground"]

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>assistance playground</title></head>
<body>
<h1>assistance playground</h1>
<p>The browser client is not built. Run <code>npm install &amp;&amp; npm run build</code>
in the frontend directory and restart with <code>--ui-dir</code> pointing at its
<code>dist/</code> output. The WebSocket endpoint is live at <code>/ws</code>.</p>
</body></html>
"""


class PlaygroundService:
    """One session, one client at a time; state survives reconnects."""

    def __init__(self, env: Environment, session_config: SessionConfig,
                 log_dir=None):
        self.env = env
        self.session_config = session_config
        self.log_dir = Path(log_dir) if log_dir is not None else Path.cwd()
        self.session: Session | None = None
        self.log_path: Path | None = None
        self.client_attached = False

    def get_session(self) -> Session:
        if self.session is None:
            self.session = Session(self.env, self.session_config)
            stamp = int(time.time())
            self.log_path = self.log_dir / f"session-{stamp}-{self.session_config.seed}.log"
        return self.session

    def flush_log(self) -> None:
        """Write the session log; called on session end, disconnect, and
        shutdown so an interrupted session still leaves a parseable file."""
        if self.session is None or self.log_path is None:
            return
        weights = default_input_weights(self.session_config.arbiter)
        metric = input_metric(self.session.log, weights)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.session.log.write(self.log_path, extra_totals={"input_metric": metric})


def _frame_text(payload: dict) -> str:
    return json.dumps(payload) + "\n"


async def _next_input(ws: WebSocket, period: float):
    """Gather this cycle's client messages; return the last meaningful one.

    Timed mode (period > 0) accumulates messages for one frame period so
    stale inputs are superseded. Lockstep mode (period <= 0) blocks for
    exactly one message; clients send JSON ``null`` to mean "no input".
    """
    queue: list[str] = []
    if period > 0:
        deadline = time.monotonic() + period
        while True:
            timeout = deadline - time.monotonic()
            if timeout <= 0:
                break
            try:
                queue.append(await asyncio.wait_for(ws.receive_text(), timeout=timeout))
            except asyncio.TimeoutError:
                break
    else:
        queue.append(await ws.receive_text())
    latest = None
    for text in queue:
        if text.strip() not in ("", "null"):
            latest = text
    return latest


def create_app(service: PlaygroundService, ui_dir=None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app):
        yield
        service.flush_log()

    app = FastAPI(lifespan=lifespan)

    @app.get("/healthz")
    async def healthz():
        return JSONResponse({"status": "ok"})

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if service.client_attached:
            await ws.send_text(_frame_text({"error": "busy", "detail": "one client per session"}))
            await ws.close()
            return
        service.client_attached = True
        session = service.get_session()
        period = (1.0 / service.session_config.control_rate_hz
                  if service.session_config.control_rate_hz > 0 else 0.0)
        try:
            await ws.send_text(_frame_text(session.snapshot().to_payload()))
            while not session.done:
                text = await _next_input(ws, period)
                human_input = None
                if text is not None:
                    try:
                        human_input = parse_input(json.loads(text))
                    except (ValueError, TypeError) as exc:
                        await ws.send_text(_frame_text({"error": "bad_input", "detail": str(exc)}))
                        continue
                try:
                    frame = session.step(human_input)
                except ModeMismatchError as exc:
                    await ws.send_text(_frame_text({"error": "mode_mismatch", "detail": str(exc)}))
                    continue
                except ValueError as exc:
                    await ws.send_text(_frame_text({"error": "bad_input", "detail": str(exc)}))
                    continue
                except SessionFinishedError:
                    break
                await ws.send_text(_frame_text(frame.to_payload()))
            service.flush_log()
        except WebSocketDisconnect:
            # Client gone: pause in place, keep the session for reconnects.
            service.flush_log()
        finally:
            service.client_attached = False

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/")
        async def index():
            return HTMLResponse(_FALLBACK_PAGE)

    return app


def serve_playground(bind: str, env: Environment, session_config: SessionConfig,
                     log_dir=None, ui_dir=None) -> None:
    """Run the playground service until interrupted (blocking)."""
    import uvicorn

    host, _, port = bind.partition(":")
    service = PlaygroundService(env, session_config, log_dir=log_dir)
    app = create_app(service, ui_dir=ui_dir)
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")
    finally:
        service.flush_log()
