import threading

import pytest
import uvicorn

from fecs_server.app import create_app
from fecs_server.checkpoint import ensure_toy_checkpoint
from fecs_server.service import ServerConfig, ToyService, load_service
from fecs_server.toylm import load_toy_model


@pytest.fixture(scope="session")
def toy_checkpoint() -> str:
    return ensure_toy_checkpoint()


@pytest.fixture(scope="session")
def toy_service(toy_checkpoint) -> ToyService:
    return load_service(ServerConfig(model=toy_checkpoint))


@pytest.fixture(scope="session")
def toy_parts(toy_checkpoint):
    return load_toy_model(toy_checkpoint)


class _ServerThread:
    def __init__(self, service):
        app = create_app(service, ServerConfig(model="inline"))
        config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self) -> str:
        self.thread.start()
        while not self.server.started:
            if not self.thread.is_alive():
                raise RuntimeError("server thread died during startup")
        host, port = self.server.servers[0].sockets[0].getsockname()[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture(scope="session")
def server_url(toy_service):
    runner = _ServerThread(toy_service)
    url = runner.start()
    yield url
    runner.stop()
