"""Deep-RL scheduling agent for the ``ipps`` engine.

The agent talks to the engine exclusively through its wire protocol
(stdio or TCP) and CLI: states arrive as heterogeneous-graph snapshots,
actions go back as operation/machine assignments or waits.  A
graph-attention encoder feeds actor and critic heads trained with PPO.
"""

from .batch import PackedBatch
from .checkpoint import load_checkpoint, load_policy, save_checkpoint
from .config import PolicyConfig
from .driver import (ActionStats, EpisodeResult, Transition,
                     policy_decider, run_episodes)
from .endpoint import Endpoint, generate_instance_file
from .errors import ServerError, SnapshotError, TrainingAborted
from .hgat import HGATEncoder
from .infer import InferenceResult, run_client, run_inference
from .policy import ActorCritic
from .ppo import PPO, gradient_check
from .snapshot import Hello, Snapshot, decode_state, parse_hello
from .train import TrainResult, TrainSettings, train

__version__ = "0.1.0"

__all__ = [
    "ActionStats", "ActorCritic", "Endpoint", "EpisodeResult",
    "HGATEncoder", "Hello", "InferenceResult", "PPO", "PackedBatch",
    "PolicyConfig", "ServerError", "Snapshot", "SnapshotError",
    "TrainResult", "TrainSettings", "TrainingAborted", "Transition",
    "decode_state", "generate_instance_file", "gradient_check",
    "load_checkpoint", "load_policy", "parse_hello", "policy_decider",
    "run_client", "run_episodes", "run_inference", "save_checkpoint",
    "train", "__version__",
]
