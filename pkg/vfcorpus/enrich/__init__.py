from .document import EnrichedDiff, EnrichedLine, EnrichedSection, LineTag
from .pipeline import enrich_commit, enrich_diff, stripped_commit_diff
from .representations import Representation, render_representation, representation_document
from .slicing import EnrichmentLevel, backward_slice, control_flow_enclosure, forward_slice
