"""HTTP review service: paper submission, analysis retrieval, a durable
human-correction log, rule management, and background retraining."""

from .state import ServiceConfig, ServiceState, load_config, replay_views
from .app import create_app

__all__ = ["ServiceConfig", "ServiceState", "create_app", "load_config", "replay_views"]
