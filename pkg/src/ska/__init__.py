"""Collaborative concept-annotation workbench.

Round-based multi-annotator concept tagging over sectioned textbooks:
a phase state machine per round, missed-concept peer review, discussion
resolutions, a versioned codebook, agreement analytics, and canonical
corpus export.
"""
from .agreement import PhaseLabel
from .config import WorkbenchConfig, load_config
from .corpus import (
    AnnotationPhase,
    ConceptAnnotation,
    IngestConfig,
    NormalizedConcept,
    Section,
    Span,
    Textbook,
    ingest_textbook,
    normalize,
)
from .errors import DomainError
from .protocol import Annotator, Round, RoundPhase
from .store import Workbench

__version__ = "0.1.0"

__all__ = [
    "AnnotationPhase",
    "Annotator",
    "ConceptAnnotation",
    "DomainError",
    "IngestConfig",
    "NormalizedConcept",
    "PhaseLabel",
    "Round",
    "RoundPhase",
    "Section",
    "Span",
    "Textbook",
    "Workbench",
    "WorkbenchConfig",
    "__version__",
    "ingest_textbook",
    "load_config",
    "normalize",
]
