"""Run the HTTP service (configuration from environment variables)."""

from __future__ import annotations

import os

import uvicorn

from .service import ServiceConfig, build_state, create_app


def make_app():
    state = build_state(ServiceConfig.from_env())
    app = create_app(state)
    static_dir = os.environ.get("IDEASMITH_STATIC_DIR", "frontend/dist")
    if os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def main() -> None:
    uvicorn.run(
        make_app(),
        host=os.environ.get("IDEASMITH_HOST", "127.0.0.1"),
        port=int(os.environ.get("IDEASMITH_PORT", "8000")),
    )


if __name__ == "__main__":
    main()
