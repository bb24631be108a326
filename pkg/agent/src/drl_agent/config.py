"""Policy and PPO hyper-parameters, embedded verbatim in checkpoints."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

__all__ = ["PolicyConfig"]


@dataclass(frozen=True)
class PolicyConfig:
    """Everything needed to rebuild the network and its training rule.

    Architecture: a heterogeneous graph-attention encoder (``hidden_dim``
    wide, one entry of ``heads`` per layer, mean pooling for the graph
    embedding, jumping-knowledge max across layers) feeding actor and
    critic MLPs.  Training: PPO with a clipped surrogate whose clip range
    grows ``eps_clip * clip_multi**k`` up to ``clip_ub`` over updates and
    an entropy bonus decaying by ``entropy_discount`` per update.  Every
    default can be overridden; checkpoints store the full record.
    """

    hidden_dim: int = 64
    heads: tuple[int, ...] = (2, 2, 2)
    pooling: str = "mean"
    jumping_knowledge: str = "max"
    actor_hidden: tuple[int, int] = (64, 32)
    critic_hidden: tuple[int, int] = (64, 32)
    leaky_slope: float = 0.2
    normalize: bool = True

    lr: float = 5e-4
    betas: tuple[float, float] = (0.9, 0.999)
    gamma: float = 0.99
    eps_clip: float = 0.3
    clip_multi: float = 1.002
    clip_ub: float = 0.5
    k_epochs: int = 3
    minibatch: int = 512
    vf_coeff: float = 0.5
    entropy_coeff: float = 0.05
    entropy_discount: float = 0.997
    update_interval: int = 5
    instance_change_interval: int = 20
    advantage_norm: bool = True
    return_scale: float | str = "auto"

    def __post_init__(self):
        if not self.heads:
            raise ValueError("need at least one attention layer")
        for h in self.heads:
            if h < 1 or self.hidden_dim % h:
                raise ValueError(
                    f"hidden_dim {self.hidden_dim} must divide evenly into "
                    f"{h} heads")
        if self.pooling != "mean":
            raise ValueError(f"unsupported pooling {self.pooling!r}")
        if self.jumping_knowledge != "max":
            raise ValueError(
                f"unsupported jumping_knowledge {self.jumping_knowledge!r}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma {self.gamma} out of (0, 1]")
        if self.clip_ub < self.eps_clip:
            raise ValueError("clip_ub below the starting eps_clip")
        for name in ("update_interval", "instance_change_interval",
                     "k_epochs", "minibatch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if isinstance(self.return_scale, str) and self.return_scale != "auto":
            raise ValueError("return_scale must be 'auto' or a number")

    @property
    def n_layers(self) -> int:
        return len(self.heads)

    def clip_at(self, k: int) -> float:
        """Clip range in effect after ``k`` completed updates."""
        return min(self.eps_clip * self.clip_multi ** k, self.clip_ub)

    def entropy_at(self, k: int) -> float:
        """Entropy coefficient in effect after ``k`` completed updates."""
        return self.entropy_coeff * self.entropy_discount ** k

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        kwargs = dict(data)
        for key in ("heads", "actor_hidden", "critic_hidden", "betas"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)
