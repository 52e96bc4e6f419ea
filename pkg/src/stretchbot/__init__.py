"""Simulated adaptive stretching coach.

Library surface: pose rules and hold timers, affect fusion, the knowledge
graph with fallback retrieval, context/prompt assembly, reasoner parsing and
verification, the routine state machine, and deterministic scenario replay.
"""

from .affect import (
    ChannelPrediction,
    FusedEmotion,
    ReliabilityWeights,
    fuse_emotions,
    single_channel_passthrough,
)
from .config import SessionConfig, load_config
from .context import (
    ContextPackage,
    DetectedObject,
    PromptBundle,
    Turn,
    assemble_context,
    render_prompt,
)
from .knowledge import (
    ConceptNetClient,
    FixtureFallbackClient,
    KnowledgeGraph,
    RetrievedKnowledge,
    load_default_knowledge_graph,
    load_knowledge_graph,
    retrieve_relations,
    serialize_for_prompt,
)
from .pose import (
    HoldState,
    LandmarkFrame,
    LateralHoldState,
    PoseParameters,
    check_arms_overhead,
    evaluate_exercise_frame,
    toe_touch_distance,
    trunk_lean_angle,
    update_hold,
)
from .reasoner import (
    ActionCommand,
    HttpReasonerClient,
    MockReasonerClient,
    ReasonerReply,
    VerifierReport,
    extract_command,
    parse_reply,
    request_decision,
    verify,
)
from .routine import (
    ExecutionEvent,
    ExercisePrimitive,
    RoutineScript,
    SessionState,
    adaptation_hooks,
    apply_command,
    default_routine_script,
    on_pose_event,
)
from .scenario import Scenario, load_scenario, replay_scenario
from .session import SessionEngine, SimClock, WallClock

__version__ = "0.1.0"
