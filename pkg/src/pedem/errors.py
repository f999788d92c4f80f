"""Exception types shared across the pipeline."""


class PedemError(Exception):
    pass


class InvalidInputError(PedemError, ValueError):
    pass


class BehindCameraError(PedemError):
    """Point lies at or behind the image plane, or a ray solution runs backwards."""


class DegenerateGeometryError(PedemError):
    """Rays are (numerically) parallel, so they have no unique closest point."""


class NoParallaxError(PedemError):
    """No keypoint of a skeleton pair could be triangulated."""


class IngestionError(PedemError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(PedemError):
    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
