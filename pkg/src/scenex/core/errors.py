"""Exception hierarchy shared by every scenex module."""


class SceneXError(Exception):
    """Base class for all scenex errors."""


class DegenerateViewError(SceneXError, ValueError):
    """Camera cannot be constructed (eye == target, forward parallel to up, zero extent)."""


class EmptyCloudError(SceneXError, ValueError):
    """An operation needs at least one point."""


class InsufficientReferenceError(SceneXError, ValueError):
    """Fewer than two reference pixels are available for depth rescaling."""


class DegenerateScaleError(SceneXError, ValueError):
    """Estimated depth is constant over the reference pixels."""


class NoClusterError(SceneXError, ValueError):
    """Density clustering found no cluster large enough to keep."""


class EmptyMaskError(SceneXError, ValueError):
    """The inpaint mask has no positive weight left."""


class MisclassificationError(SceneXError, ValueError):
    """A wall object is not adjacent to any wall."""


class OversizeError(SceneXError, ValueError):
    """A scaled small-object asset does not fit on its support."""


class AnnotationError(SceneXError, ValueError):
    """Annotator output contained no parseable object line."""


class PromptBuildError(SceneXError, ValueError):
    """Inventory-limit reply could not be turned into a prompt pair."""


class EmptyCatalogError(SceneXError, ValueError):
    """Asset retrieval was asked to search an empty catalog."""


class UsageError(SceneXError, ValueError):
    """Invalid configuration or command-line usage."""


class SceneValidationError(SceneXError, ValueError):
    """A finished scene violates one of its invariants.

    The individual problems are kept on ``problems``.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        summary = "; ".join(self.problems[:5])
        if len(self.problems) > 5:
            summary += f"; ... ({len(self.problems) - 5} more)"
        super().__init__(f"scene failed validation: {summary}")


class ServiceError(SceneXError, RuntimeError):
    """An external perception service failed or timed out."""
