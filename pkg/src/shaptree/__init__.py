"""Interaction trees for cooperative-game value models.

The package measures how groups of input positions work together: it fuses a
group into one compound player, compares the compound's contribution against
its members' solo contributions, and grows a binary tree by greedily merging
the adjacent pair whose interaction is densest.
"""
from .bridge import BridgeError, ExternalModelClient, bits_to_mask, mask_to_bits
from .estimator import InteractionTreeExplainer
from .evaluation import (
    AuditReport,
    CohesionResult,
    SpanScores,
    SpanSet,
    SuiteReport,
    cohesion_score,
    instability_curve,
    nonadjacency_audit,
    run_andor_suite,
    shuffle_span,
    unlabeled_span_scores,
)
from .game import (
    Coalition,
    CoalitionStructure,
    EvaluationError,
    GameContext,
    PlayerSet,
    TooManyPlayersError,
    reduce_game,
)
from .interaction import (
    BetweenDecomposition,
    between_benefit,
    between_decomposition,
    elementary_components,
    fused_contribution,
    interaction_benefit,
)
from .metrics import (
    BenefitCache,
    MergeCandidate,
    inter_ratio,
    merge_candidate,
    modeled_density,
    nonadjacent_density,
    unmodeled_density,
)
from .models import (
    AdditiveBigramModel,
    AdditiveModel,
    CallableModel,
    GroundTruthTree,
    TwoLevelBooleanModel,
    ValueModel,
    builtin_model,
    composition_from_index,
    generate_andor_suite,
    model_from_config,
    suite_manifest,
    toy_text_model,
)
from .shapley import (
    SamplingConfig,
    ShapleyEstimate,
    derive_seed,
    exact_shapley,
    instability,
    instability_from_vectors,
    sampled_shapley,
    shapley_value,
)
from .tree import (
    STRATEGIES,
    InteractionTree,
    TreeNode,
    TreeRecipe,
    TreeSchemaError,
    build_tree,
    canonical_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveBigramModel",
    "AdditiveModel",
    "AuditReport",
    "BenefitCache",
    "BetweenDecomposition",
    "BridgeError",
    "CallableModel",
    "Coalition",
    "CoalitionStructure",
    "CohesionResult",
    "EvaluationError",
    "ExternalModelClient",
    "GameContext",
    "GroundTruthTree",
    "InteractionTree",
    "InteractionTreeExplainer",
    "MergeCandidate",
    "PlayerSet",
    "STRATEGIES",
    "SamplingConfig",
    "ShapleyEstimate",
    "SpanScores",
    "SpanSet",
    "SuiteReport",
    "TooManyPlayersError",
    "TreeNode",
    "TreeRecipe",
    "TreeSchemaError",
    "TwoLevelBooleanModel",
    "ValueModel",
    "between_benefit",
    "between_decomposition",
    "bits_to_mask",
    "build_tree",
    "builtin_model",
    "canonical_strategy",
    "cohesion_score",
    "composition_from_index",
    "derive_seed",
    "elementary_components",
    "exact_shapley",
    "fused_contribution",
    "generate_andor_suite",
    "instability",
    "instability_curve",
    "instability_from_vectors",
    "inter_ratio",
    "interaction_benefit",
    "mask_to_bits",
    "merge_candidate",
    "model_from_config",
    "modeled_density",
    "nonadjacency_audit",
    "nonadjacent_density",
    "reduce_game",
    "run_andor_suite",
    "sampled_shapley",
    "shapley_value",
    "shuffle_span",
    "suite_manifest",
    "toy_text_model",
    "unlabeled_span_scores",
    "unmodeled_density",
    "__version__",
]
