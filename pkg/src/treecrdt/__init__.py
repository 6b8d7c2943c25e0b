"""Replicated tree data types and a deterministic convergence harness."""

from .clocks import (
    DeliveryBuffer,
    Envelope,
    LamportStamp,
    ReplicaClock,
    ReplicaId,
    Tag,
    VectorClock,
    deliverable,
)
from .demos import DEMOS
from .errors import (
    IllegalCombo,
    InvalidInterval,
    KindMismatch,
    PreconditionViolation,
    ScenarioError,
    SeveralBlowup,
    TreeCrdtError,
)
from .edges import EdgeTree
from .graph import GraphTree, IncrementalTwoPhaseGraph, TreeOp
from .harness import (
    ComboSpec,
    ConvergenceReport,
    Scenario,
    Simulation,
    StepRecord,
    check_convergence,
    legal_combos,
    make_tree,
    oracle_membership,
    parse_combo,
    parse_scenario,
    random_scenario,
    run_scenario,
    serialize_scenario,
    tree_validity,
)
from .lookup import Instance, LookupTree
from .ordered import (
    EdgePositionedEdgeTree,
    EdgePositionedGraphTree,
    EdgePositionedWordTree,
    NodePositionedTree,
    PathStep,
    PositionedNode,
    SeqPos,
    WootrEdgeTree,
    WootrGraphTree,
    WootrWordTree,
)
from .paths import (
    EPSILON,
    IncrementalWordTree,
    ProbeCounter,
    WordTree,
    connect_paths,
    is_prefix_closed,
    parse_path,
    path_images,
)
from .policies import (
    CONNECT_POLICIES,
    MAP_POLICIES,
    EdgeInfo,
    HistoryGraph,
    RootedGraph,
    connect,
    get_connected,
    map_to_tree,
)
from .positions import DIGIT_BASE, UPI_MAX, UPI_MIN, Upi, upi_at, upi_between
from .render import Path, render, sort_key
from .sets import (
    ADD,
    FLAVORS,
    KINDS,
    RMV,
    CounterSet,
    GSet,
    LwwSet,
    ObservedRemoveSet,
    SetCrdt,
    SetOp,
    TwoPhaseSet,
    make_set,
)
from .wootr import (
    BEGIN,
    END,
    WOOTR_KINDS,
    WootrBound,
    WootrElement,
    WootrSequence,
    WootrTriple,
    wootr_closure,
    wootr_order,
)

__all__ = [
    "ADD",
    "RMV",
    "KINDS",
    "FLAVORS",
    "CONNECT_POLICIES",
    "MAP_POLICIES",
    "BEGIN",
    "END",
    "WOOTR_KINDS",
    "DIGIT_BASE",
    "UPI_MAX",
    "UPI_MIN",
    "ComboSpec",
    "ConvergenceReport",
    "CounterSet",
    "DEMOS",
    "DeliveryBuffer",
    "EPSILON",
    "EdgeInfo",
    "EdgePositionedEdgeTree",
    "EdgePositionedGraphTree",
    "EdgePositionedWordTree",
    "EdgeTree",
    "Envelope",
    "GSet",
    "GraphTree",
    "HistoryGraph",
    "IllegalCombo",
    "IncrementalTwoPhaseGraph",
    "IncrementalWordTree",
    "Instance",
    "LookupTree",
    "ProbeCounter",
    "RootedGraph",
    "TreeOp",
    "WordTree",
    "connect",
    "connect_paths",
    "get_connected",
    "is_prefix_closed",
    "map_to_tree",
    "parse_path",
    "path_images",
    "InvalidInterval",
    "KindMismatch",
    "LamportStamp",
    "LwwSet",
    "NodePositionedTree",
    "ObservedRemoveSet",
    "Path",
    "PathStep",
    "PositionedNode",
    "PreconditionViolation",
    "ReplicaClock",
    "ReplicaId",
    "Scenario",
    "ScenarioError",
    "SeqPos",
    "SetCrdt",
    "SetOp",
    "SeveralBlowup",
    "Simulation",
    "StepRecord",
    "Tag",
    "TreeCrdtError",
    "TwoPhaseSet",
    "Upi",
    "VectorClock",
    "WootrBound",
    "WootrElement",
    "WootrEdgeTree",
    "WootrGraphTree",
    "WootrSequence",
    "WootrTriple",
    "WootrWordTree",
    "check_convergence",
    "deliverable",
    "legal_combos",
    "make_set",
    "make_tree",
    "oracle_membership",
    "parse_combo",
    "parse_scenario",
    "random_scenario",
    "render",
    "run_scenario",
    "serialize_scenario",
    "sort_key",
    "tree_validity",
    "upi_at",
    "upi_between",
    "wootr_closure",
    "wootr_order",
]
