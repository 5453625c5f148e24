"""Federated SQL query engine over document, wide-column, and key-value stores."""

from ._core import (  # noqa: F401
    Engine,
    __version__,
)

__all__ = ["Engine", "__version__"]
