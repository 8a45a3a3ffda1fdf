"""Monte-Carlo detection estimation and its exact cross-check.

estimate_detection runs independent seeded scenario trials (trial i
uses seed base_seed + i, so any subset of trials can be replayed in
any order) and reports the empirical detection rate next to the exact
per-trial probability.

The exact probability is not taken on faith from a formula: it is
recomputed by brute force, enumerating every ordered tag pair the
scenario can produce and applying the same match rule the engine uses.
For the probabilistic scenarios the probe tag ranges over all 2^ts
values and the victim tag over the non-reserved values, and the
enumeration lands on exactly (2^ts - 1) / 2^ts.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .arena import PolicyKind, TagPolicy
from .errors import UsageError
from .scenarios import Scenario, ScenarioKind, scenario_runner
from .sim import Simulator
from .tagspace import MtConfig, tags_match


@dataclass(frozen=True)
class DetectionReport:
    kind: str
    trials: int
    detections: int
    rate: float
    theoretical: float | None
    config: dict

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "trials": self.trials,
            "detections": self.detections,
            "rate": self.rate,
            "theoretical": self.theoretical,
            "config": self.config,
        }

    def render(self) -> str:
        theo = "-" if self.theoretical is None else f"{self.theoretical:.6f}"
        return (f"kind={self.kind} trials={self.trials} detections={self.detections}"
                f" rate={self.rate:.6f} theoretical={theo}")


def theoretical_detection(kind: ScenarioKind, cfg: MtConfig,
                          policy: TagPolicy | None = None,
                          reuse_forced: bool | None = None) -> Fraction | None:
    """Exact per-trial detection probability, by enumeration.

    Returns None where no closed verdict applies (Sampled policies mix
    protected and unprotected allocations).
    """
    policy = policy or TagPolicy.random()
    if policy.kind is PolicyKind.SAMPLED:
        return None
    usable = cfg.usable_tags
    if kind in (ScenarioKind.HEAP_USE_AFTER_FREE, ScenarioKind.NON_LINEAR_OVERFLOW):
        if kind is ScenarioKind.HEAP_USE_AFTER_FREE:
            if reuse_forced is None:
                reuse_forced = cfg.quarantine_capacity == 0
            if not reuse_forced:
                # dangling access hits the retag, which free picked to
                # differ from the live tag
                return _enumerate(cfg, [(live, retag) for live in usable
                                        for retag in usable if retag != live])
        # probe tag over the full tag space, victim tag non-reserved
        return _enumerate(cfg, [(probe, victim) for probe in range(cfg.n_tags)
                                for victim in usable])
    if kind in (ScenarioKind.LINEAR_OVERFLOW, ScenarioKind.LINEAR_UNDERFLOW):
        if policy.kind is PolicyKind.ADJACENT_DISTINCT:
            pairs = [(mine, other) for mine in usable for other in usable if other != mine]
        else:
            pairs = [(mine, other) for mine in usable for other in usable]
        return _enumerate(cfg, pairs)
    if kind is ScenarioKind.USE_AFTER_RETURN or kind is ScenarioKind.USE_AFTER_SCOPE:
        # exit retag is drawn from the tags not used by any covered slot
        return _enumerate(cfg, [(slot, retag) for slot in usable
                                for retag in usable if retag != slot])
    if kind is ScenarioKind.INTRA_GRANULE_OVERFLOW:
        return Fraction(1) if cfg.precision_ext else Fraction(0)
    if kind is ScenarioKind.UNINITIALIZED_READ:
        return Fraction(1) if cfg.zero_on_tag else Fraction(0)
    raise UsageError(f"unknown scenario kind {kind!r}")


def _enumerate(cfg: MtConfig, pairs) -> Fraction:
    detected = 0
    total = 0
    for probe, mem in pairs:
        total += 1
        if not tags_match(probe, mem, cfg):
            detected += 1
    return Fraction(detected, total)


def estimate_detection(kind: ScenarioKind, cfg: MtConfig, trials: int, seed: int = 0,
                       policy: TagPolicy | None = None) -> DetectionReport:
    """Empirical detection rate over ``trials`` independent instances.

    For heap-use-after-free, reuse is forced whenever the quarantine is
    off, making the trial probabilistic; with a quarantine the dead
    chunk cannot be reused, so the plain deterministic variant runs
    instead.
    """
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    policy = policy or TagPolicy.random()
    reuse_depth = 0
    if kind is ScenarioKind.HEAP_USE_AFTER_FREE and cfg.quarantine_capacity == 0:
        reuse_depth = 1
    # trial i is exactly run_scenario(Scenario(..., seed=seed + i)); the
    # prototype is reusable because runners draw only from sim.rng
    runner = scenario_runner(kind)
    proto = Scenario(kind=kind, reuse_depth=reuse_depth, policy=policy)
    detections = 0
    for i in range(trials):
        if runner(Simulator(cfg, seed=seed + i), proto).detected:
            detections += 1
    theo = theoretical_detection(kind, cfg, policy=policy,
                                 reuse_forced=reuse_depth > 0)
    config = cfg.to_dict()
    config["policy"] = policy.kind.value
    config["seed"] = seed
    return DetectionReport(
        kind=kind.value,
        trials=trials,
        detections=detections,
        rate=detections / trials,
        theoretical=None if theo is None else float(theo),
        config=config,
    )
