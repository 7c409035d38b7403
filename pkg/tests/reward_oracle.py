"""Standalone reward evaluator used as a cross-check oracle in tests.

Transliterated from the component definitions with plain scalar loops and
stdlib math only. Shares no code with the package on purpose: if the env's
vectorized reward engine drifts, these two must disagree. Inputs are plain
lists and floats; table data arrives as lists, never as package objects.
"""

import math


def forward_score(v_obs, speed, n_f=5, alpha=0.9):
    """Speed times the discounted two-armed sum around the forward beam."""
    n = len(v_obs)
    total = 0.0
    for k in range(n_f + 1):
        total += (alpha ** k) * (v_obs[(0 + k) % n] + v_obs[(0 - k) % n])
    return speed * total


def obstacle_score(v_obs, safe_ranges, n_o=12, alpha=0.9, floor=1e-3):
    """Discounted log of the smallest clearance gaps, ascending order."""
    gaps = sorted(v_obs[i] - safe_ranges[i] for i in range(len(v_obs)))
    total = 0.0
    for k in range(min(n_o + 1, len(gaps))):
        total += (alpha ** k) * math.log(max(gaps[k], floor))
    return total


def middle_score(v_obs, left_pos, right_pos, n_m=5, alpha=0.9):
    """Negated discounted absolute differences of mirrored side pairs."""
    n = len(v_obs)
    total = 0.0
    for k in range(n_m + 1):
        total += (alpha ** k) * abs(v_obs[(right_pos - k) % n] - v_obs[(left_pos + k) % n])
    return -total


def time_score(alpha4=-1.0):
    return alpha4


def blended_score(v_obs, safe_ranges, left_pos, right_pos, speed, mode="fomt",
                  weights=(1.0, 1.0, 1.0, 1.0), n_f=5, n_o=12, n_m=5,
                  alpha1=0.9, alpha2=0.9, alpha3=0.9, alpha4=-1.0, floor=1e-3):
    """Running-step reward under one of the ablation modes."""
    c1, c2, c3, c4 = weights
    if mode == "ft":
        c2, c3 = 0.0, 0.0
    elif mode == "fot":
        c3 = 0.0
    elif mode != "fomt":
        raise ValueError(f"oracle has no mode '{mode}'")
    return (c1 * forward_score(v_obs, speed, n_f, alpha2)
            + c2 * obstacle_score(v_obs, safe_ranges, n_o, alpha1, floor)
            + c3 * middle_score(v_obs, left_pos, right_pos, n_m, alpha3)
            + c4 * time_score(alpha4))


def waypoint_score(prev_distance, distance, c5=100.0):
    """Progress payment: scaled reduction of distance to the active waypoint."""
    return c5 * (prev_distance - distance)


def geometric_sum(alpha, n):
    """Closed form for sum_{k=0..n} alpha^k, used to pin worked examples."""
    return (1.0 - alpha ** (n + 1)) / (1.0 - alpha)
