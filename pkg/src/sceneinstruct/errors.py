"""Exception hierarchy shared across the engine."""


class SceneInstructError(Exception):
    """Base class for all engine errors."""


class CorpusError(SceneInstructError):
    """A corpus file violates its schema or an invariant."""


class GenerationError(SceneInstructError):
    """A generator cannot satisfy its preconditions on the given inputs."""


class CompositionError(SceneInstructError):
    """A requested quota cannot be met by the available corpus."""


class SequenceError(SceneInstructError):
    """A token layout violates the wrapped-slot or segment-order contract."""


class ProjectorError(SceneInstructError):
    """Projector inputs violate shape or finiteness contracts."""


class ConfigError(SceneInstructError):
    """Invalid configuration file or option value."""


class BackendError(SceneInstructError):
    """Chat backend transport failure after exhausting the retry budget."""
