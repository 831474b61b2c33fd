"""Design-space exploration for annotated HTML pages.

Parse a page carrying explore-* markup into a discrete search space,
search it with a pairwise-feedback genetic algorithm, schedule the
comparisons to raters, and reproduce the search-vs-uniform-sampling
experiments with synthetic raters.
"""

from .markup import (
    DesignSpec,
    Diagnostic,
    DuplicateId,
    ExploreAttribute,
    JointArityMismatch,
    MalformedMarkup,
    MarkupError,
    OptionValue,
    UnknownChildId,
    parse,
    parse_joint,
    spec_from_json,
    spec_to_json,
    validate,
)
from .genome import (
    GeneSchema,
    active_genes,
    build_schema,
    decode,
    encode,
    export_designs,
    render,
    space_size,
)
from .engine import (
    ComparisonResult,
    Evolution,
    GAConfig,
    Individual,
    OddPopulation,
    apply_feedback,
    crossover,
    diff_mask,
    initialize,
    mutate,
    next_generation,
    pair_population,
    top_designs,
)

__version__ = "0.1.0"
