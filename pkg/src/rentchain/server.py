"""Uvicorn hosting helpers: foreground serving and an in-process background
server used by the bench harness and end-to-end tests."""

from __future__ import annotations

import socket
import threading
import time

import uvicorn

from .gateway import Platform, PlatformConfig, create_app


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _time_scaler(platform: Platform, scale: float, stop: threading.Event) -> None:
    # map wall-clock onto simulated time: every wall second advances scale sim-seconds
    while not stop.wait(1.0):
        platform.advance_time(scale)


class BackgroundServer:
    """Run the gateway in a daemon thread; `base_url` is ready after start()."""

    def __init__(self, platform: Platform, host: str = "127.0.0.1", port: int | None = None):
        self.platform = platform
        self.host = host
        self.port = port or free_port()
        self.base_url = f"http://{self.host}:{self.port}"
        config = uvicorn.Config(
            create_app(platform), host=self.host, port=self.port, log_level="warning"
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def start(self, timeout: float = 15.0) -> "BackgroundServer":
        self._thread.start()
        deadline = time.time() + timeout
        while not self._server.started:
            if time.time() > deadline or not self._thread.is_alive():
                raise RuntimeError("gateway server failed to start")
            time.sleep(0.02)
        return self

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)

    def __enter__(self) -> "BackgroundServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve_forever(config: PlatformConfig) -> None:
    platform = Platform(config)
    app = create_app(platform)
    stop = threading.Event()
    if config.time_scale > 0:
        threading.Thread(
            target=_time_scaler, args=(platform, config.time_scale, stop), daemon=True
        ).start()
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    finally:
        stop.set()
