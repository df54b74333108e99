from typing import Callable, Optional

import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import RedirectResponse

from . import __version__
from .problems import colloid_dudx0
from .reports import COMMANDS, Report
from .config import RunConfig
from .tool_registry import ToolRegistry


class Toolset:
    """
    Tool server over FastAPI.

    Every tool is a POST endpoint ``/<tool>`` with its OpenAPI schema at
    ``/schema/<tool>``; the interactive docs live at ``/docs``.
    """

    def __init__(self, title: str = "quasibvp tools", version: str = __version__):
        self.app = FastAPI(
            title=title,
            version=version,
            description="Boundary value problems on [0, inf) solved on quasi-uniform grids.",
        )
        self.app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_credentials=True,
            allow_methods=["*"],
            allow_headers=["*"],
        )
        self.tool_registry = ToolRegistry(self.app)

        @self.app.get("/", include_in_schema=False)
        async def root():
            return RedirectResponse(url="/docs")

    def examples(self, **kwargs):
        """
        A decorator to add example values for parameters in the OpenAPI schema.

        Usage:
            @toolset.add()
            @toolset.examples(u0=7.0)
            def dudx0(u0: float) -> float:
                ...
        """
        def decorator(func):
            self.tool_registry.add_examples(func.__name__, kwargs)
            return func
        return decorator

    def add(self, _tool_name: Optional[str] = None) -> Callable:
        """
        A decorator to add a function as a tool.

        Raises:
            ValueError: If a tool with the same name already exists.
            TypeError: If a parameter or the return value is not annotated.
        """
        def decorator(func: Callable) -> Callable:
            self.tool_registry.register_function_tool(func, _tool_name)
            return func
        return decorator

    def add_report(self, name: str, command: Callable[[RunConfig], Report]) -> None:
        self.tool_registry.register_report_tool(name, command)

    def serve(self, host: str = "127.0.0.1", port: int = 8000):
        """Run the server with uvicorn."""
        self.app._host = host
        self.app._port = port
        print("\n--- Starting quasibvp tool server ---")
        print(f"➡️  Interactive API docs (Swagger UI): http://{host}:{port}/docs")
        uvicorn.run(self.app, host=host, port=port)


def build_toolset() -> Toolset:
    """The report commands plus the closed-form missing initial condition, as tools."""
    toolset = Toolset()
    for name, command in COMMANDS.items():
        toolset.add_report(name, command)

    @toolset.add()
    @toolset.examples(u0=7.0)
    def dudx0(u0: float) -> float:
        """
        Exact du/dx(0) of the colloid problem.

        :param u0: left boundary value, positive
        :return: -2 sqrt(cosh(u0) - 1)
        """
        return colloid_dudx0(u0)

    return toolset
