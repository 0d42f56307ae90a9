"""Reference planner client for the tampbench wire protocol."""

from .adapter import Adapter, AdapterConfig, serve_planner

__version__ = "0.1.0"
