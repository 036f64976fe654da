"""The platform's two back-end services and the rental-process orchestration."""

from .config import PlatformConfig
from .platform import Platform
from .app import create_app

__all__ = ["PlatformConfig", "Platform", "create_app"]
