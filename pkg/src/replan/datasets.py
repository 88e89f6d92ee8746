"""Experience dataset generation from scripted and perturbed rollouts."""

from __future__ import annotations

import numpy as np

from .core import ExperienceDataset, ExperienceTuple
from .envs import (
    EnvAction,
    EnvInstance,
    EnvKind,
    execute,
    hidden_values,
    object_id,
    scripted_action,
)

Theta = float | str


def candidate_actions(kind: EnvKind) -> list[EnvAction]:
    """The scripted action for every table theta (the hypothesis set)."""
    return [
        scripted_action(EnvInstance.create(kind, theta)) for theta in hidden_values(kind)
    ]


def failing_actions(kind: EnvKind, theta: Theta) -> list[EnvAction]:
    """Hypothesis-set actions that fail under ``theta``, in table order."""
    env = EnvInstance.create(kind, theta)
    return [
        action for action in candidate_actions(kind) if not execute(env, action).success
    ]


def build_dataset(
    kind: EnvKind,
    per_theta_success: int = 1,
    per_theta_fail: int = 10,
    seed: int = 0,
) -> tuple[ExperienceDataset, list[Theta]]:
    """Roll out interactions for every table theta.

    Per theta: ``per_theta_success`` scripted successes first (the first
    one becomes the object's canonical entry), then ``per_theta_fail``
    failures executing wrong-hypothesis actions (sampled without
    replacement until exhausted, then cycled).
    """
    if per_theta_success < 1:
        raise ValueError("need at least one success per theta")
    rng = np.random.default_rng(seed)
    tuples: list[ExperienceTuple] = []
    thetas: list[Theta] = []
    for theta in hidden_values(kind):
        env = EnvInstance.create(kind, theta)
        oid = object_id(kind, theta)
        good = execute(env, scripted_action(env))
        if not good.success:
            raise AssertionError(f"scripted action failed for {oid}")
        for _ in range(per_theta_success):
            tuples.append(ExperienceTuple(good.video, oid, True))
            thetas.append(theta)
        pool = failing_actions(kind, theta)
        for j in range(per_theta_fail):
            if not pool:
                break
            if j % len(pool) == 0:
                order = rng.permutation(len(pool))
            action = pool[int(order[j % len(pool)])]
            outcome = execute(env, action)
            if outcome.success:
                raise AssertionError(f"failing action succeeded for {oid}")
            tuples.append(ExperienceTuple(outcome.video, oid, False))
            thetas.append(theta)
    dataset = ExperienceDataset(tuple(tuples))
    dataset.validate()
    return dataset, thetas


def subsample_dataset(
    dataset: ExperienceDataset,
    thetas: list[Theta],
    fraction: float,
    seed: int = 0,
) -> tuple[ExperienceDataset, list[Theta]]:
    """Keep each object's first success plus a deterministic fraction of the rest."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    if fraction == 1.0:
        return dataset, list(thetas)
    rng = np.random.default_rng(seed)
    keep = np.zeros(len(dataset), dtype=bool)
    for idxs in dataset.by_object.values():
        first_success = next(i for i in idxs if dataset.tuples[i].success)
        keep[first_success] = True
        rest = [i for i in idxs if i != first_success]
        n_keep = int(round(fraction * len(rest)))
        if n_keep > 0:
            chosen = rng.permutation(len(rest))[:n_keep]
            for c in chosen:
                keep[rest[int(c)]] = True
    kept = [i for i in range(len(dataset)) if keep[i]]
    sub = ExperienceDataset(tuple(dataset.tuples[i] for i in kept))
    sub.validate()
    return sub, [thetas[i] for i in kept]
