"""Hyperparameter records, one per model family."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


class _Params:
    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"{cls.__name__}: unknown hyperparameters {sorted(unknown)}")
        return cls(**values)


@dataclass(frozen=True)
class TopPopularParams(_Params):
    pass


@dataclass(frozen=True)
class ItemKNNParams(_Params):
    topK: int = 100
    shrink: float = 10.0
    icm_weight: float = 1.0

    def __post_init__(self):
        if self.topK < 1:
            raise ValueError("topK must be >= 1")
        if self.shrink < 0 or self.icm_weight < 0:
            raise ValueError("shrink and icm_weight must be >= 0")


@dataclass(frozen=True)
class RP3betaParams(_Params):
    topK: int = 100
    alpha: float = 1.0
    beta: float = 0.5

    def __post_init__(self):
        if self.topK < 1:
            raise ValueError("topK must be >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")


@dataclass(frozen=True)
class EASEParams(_Params):
    l2: float = 500.0

    def __post_init__(self):
        if not self.l2 > 0:
            raise ValueError(f"EASE l2 must be > 0, got {self.l2}")


@dataclass(frozen=True)
class FunkSVDParams(_Params):
    f: int = 64
    learn_rate: float = 0.01
    reg: float = 0.01
    epochs: int = 50
    seed: int = 0
    # share of each epoch's samples drawn from unobserved pairs with target 0
    negative_quota: float = 0.0

    def __post_init__(self):
        if self.f < 1 or self.epochs < 1:
            raise ValueError("f and epochs must be >= 1")
        if self.learn_rate <= 0 or self.reg < 0:
            raise ValueError("learn_rate must be > 0 and reg >= 0")
        if not 0.0 <= self.negative_quota < 1.0:
            raise ValueError("negative_quota must be in [0, 1)")


@dataclass(frozen=True)
class NMFParams(_Params):
    f: int = 64
    iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.f < 1 or self.iterations < 1:
            raise ValueError("f and iterations must be >= 1")
