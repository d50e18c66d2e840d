"""Transaction graph types, synthetic generator, partitioning and I/O."""

from .generator import desk_config, generate_dataset, table1_config
from .types import (
    EDGE_DIM,
    EDGE_FEATURES,
    NODE_DIM,
    NODE_FEATURES,
    GeneratorConfig,
    JurisdictionPartition,
    LocalView,
    ScenarioKind,
    ThreatScenario,
    Transactions,
    TransactionGraph,
)
