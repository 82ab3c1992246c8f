"""Generate Slidev presentations from text+image documents with reviewing model agents."""

from .config import RunConfig, build_models, load_config
from .ingest import SourceDocument, ingest_bundle, ingest_bypass
from .modelio import Models, ScriptedClient
from .pipeline import PipelineRun, run_pipeline
from .review import LoopBudget, code_review_loop, page_review_loop
from .slidev import LayoutConstraints, SlidevDeck, parse, serialize, validate_static

__version__ = "0.1.0"

__all__ = [
    "LayoutConstraints", "LoopBudget", "Models", "PipelineRun", "RunConfig", "ScriptedClient",
    "SlidevDeck", "SourceDocument", "build_models", "code_review_loop", "ingest_bundle", "ingest_bypass",
    "load_config", "page_review_loop", "parse", "run_pipeline", "serialize", "validate_static",
]
