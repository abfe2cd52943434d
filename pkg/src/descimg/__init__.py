"""descimg: web site classification from ordered descriptive-image evidence."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    ALL_METRICS,
    FUSION_METRICS,
    PER_IMAGE,
    ClassLabel,
    LabelSet,
    MetricId,
    ScoreMatrix,
    WebSiteRecord,
    validate_matrix,
)
from .aggregate import (  # noqa: F401
    FusedScores,
    average_reorder,
    classify_site,
    fuse,
    one_hot,
)
