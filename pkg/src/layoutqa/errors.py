"""Exception hierarchy shared across the package."""


class LayoutQAError(Exception):
    """Base class for all package-specific errors."""


class LayoutParseError(LayoutQAError):
    """A layout-element file could not be parsed."""


class IntegrityError(LayoutQAError):
    """Input data violates a uniqueness or linkage constraint."""


class IndexBuildError(LayoutQAError):
    """Index construction failed."""


class StoreError(LayoutQAError):
    """A persisted store is missing, corrupt, or of an unsupported version."""


class ConfigurationError(LayoutQAError):
    """A configuration value is inconsistent with the data it is used on."""


class ProviderError(LayoutQAError):
    """A chat/embedding backend failed after exhausting retries."""


class MockScriptError(ProviderError):
    """A mock provider received a prompt no scripted rule matches."""


class TemplateError(LayoutQAError):
    """Unknown template name or unbound placeholder."""


class RewriteError(LayoutQAError):
    """Query rewriting failed."""


class PipelineError(LayoutQAError):
    """An answer-pipeline stage failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class ClaimExtractionError(LayoutQAError):
    """No claims could be parsed from a judge response."""


class JudgeError(LayoutQAError):
    """The coverage judge returned an out-of-set or unparseable decision."""


class MetricError(LayoutQAError):
    """A metric could not be computed from its inputs."""


class SamplingError(LayoutQAError):
    """No cluster satisfies the requested sample size."""


class SynthesisError(LayoutQAError):
    """Synthetic QA generation aborted; carries any pairs produced so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = list(partial or [])
