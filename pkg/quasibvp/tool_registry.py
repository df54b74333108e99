import inspect
import json
import logging
import os
from typing import Any, Callable, Dict, Optional, Type

from fastapi import FastAPI, HTTPException
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .config import OUTPUT_FIELDS, RunConfig, build_run_config
from .errors import ConfigurationError
from .reports import Report, report_document
from .schema_generator import SchemaGenerator

logger = logging.getLogger(__name__)

RESERVED_NAMES = ["openapi", "docs", "redoc", "schema"]


class ToolRegistry:
    """Manages tool registration and endpoint creation."""

    def __init__(self, app: FastAPI):
        self.app = app
        self.tools: Dict[str, Callable] = {}
        self.input_models: Dict[str, Type[BaseModel]] = {}
        self.example_map: Dict[str, Dict[str, Any]] = {}

    def add_examples(self, tool_name: str, examples: Dict[str, Any]):
        """Add example values for a tool's parameters."""
        self.example_map[tool_name] = examples

    def _check_name(self, tool_name: str):
        if tool_name in self.tools:
            raise ValueError(f"Tool '{tool_name}' already exists. Please use a different name.")
        if tool_name in RESERVED_NAMES:
            raise ValueError(f"Tool name '{tool_name}' is reserved. Please choose a different name.")

    def register_function_tool(self, func: Callable, tool_name: Optional[str] = None) -> str:
        """Register a Python function as a tool; its parameters form the request body."""
        actual_tool_name = tool_name or func.__name__
        self._check_name(actual_tool_name)

        input_model = SchemaGenerator.create_input_model_from_function(func, actual_tool_name, self.example_map)
        return_model = inspect.signature(func).return_annotation
        if return_model is inspect.Signature.empty or return_model is None:
            raise TypeError("Tool function must have a return type annotation")

        self.input_models[actual_tool_name] = input_model
        self.tools[actual_tool_name] = func
        _, _, description = SchemaGenerator.parse_rst_docstring(func.__doc__)

        self._create_tool_endpoint(actual_tool_name, func, input_model, description)
        self._create_schema_endpoint(actual_tool_name, input_model, description)
        logger.info(f"[ToolRegistry.register_function_tool] tool '{actual_tool_name}' added")
        return actual_tool_name

    def register_report_tool(self, tool_name: str, command: Callable[[RunConfig], Report]) -> str:
        """
        Register a report command; the request body holds the RunConfig fields
        and the response is the JSON document of the report.
        """
        self._check_name(tool_name)
        input_model = SchemaGenerator.create_input_model_from_model(RunConfig, tool_name, exclude=OUTPUT_FIELDS)
        _, _, description = SchemaGenerator.parse_rst_docstring(command.__doc__)

        def run_command(**settings) -> Dict[str, Any]:
            return report_document(command(build_run_config(overrides=settings)))

        self.input_models[tool_name] = input_model
        self.tools[tool_name] = run_command
        self._create_tool_endpoint(tool_name, run_command, input_model, description)
        self._create_schema_endpoint(tool_name, input_model, description)
        logger.info(f"[ToolRegistry.register_report_tool] tool '{tool_name}' added")
        return tool_name

    def _create_tool_endpoint(self, tool_name: str, func: Callable, input_model: Type[BaseModel], description: str):
        """Create the main tool endpoint."""
        @self.app.post(
            f"/{tool_name}",
            name=tool_name,
            tags=["Tools"],
            description=description,
            summary=f"Tool: {tool_name}",
        )
        async def endpoint(data: input_model):  # type: ignore
            try:
                if inspect.iscoroutinefunction(func):
                    return await func(**data.model_dump())
                return await run_in_threadpool(func, **data.model_dump())
            except ConfigurationError as e:
                raise HTTPException(status_code=422, detail=str(e))
            except Exception as e:
                logger.error(f"[ToolRegistry.endpoint] {tool_name} failed: {e}")
                raise HTTPException(status_code=500, detail=str(e))

    def _create_schema_endpoint(self, tool_name: str, input_model: Type[BaseModel], description: str):
        """Create the schema endpoint for the tool."""
        @self.app.get(
            f"/schema/{tool_name}",
            name=f"schema_{tool_name}",
            tags=["Schemas"],
            description=description,
            summary=f"Schema for tool: {tool_name}",
            response_class=PlainTextResponse,
        )
        async def schema_endpoint():
            temp_app = FastAPI(
                title=f"Schema for {tool_name}",
                version=self.app.version,
                description=description,
            )

            async def temp_ep(input: input_model):  # type: ignore
                return None

            temp_app.post(
                f"/{tool_name}",
                name=tool_name,
                tags=["Tools"],
                description=description,
                summary=f"Tool: {tool_name}",
            )(temp_ep)

            schema = temp_app.openapi()
            url = os.environ.get("TOOL_URL")
            if url is None:
                host = getattr(self.app, "_host", "127.0.0.1")
                port = getattr(self.app, "_port", 8000)
                url = f"http://{host}:{port}"
            schema["servers"] = [{"url": url, "description": "Current server address"}]
            return PlainTextResponse(json.dumps(schema, indent=2))
