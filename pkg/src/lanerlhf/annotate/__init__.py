from .server import AnnotationState, create_app, serve

__all__ = ["AnnotationState", "create_app", "serve"]
