"""Rate-based UE pairing: probability screening without instantaneous CSI,
extreme-rate pair construction, and minimal power allocation on admitted
pairs.

The screening model assumes independent exponential channel gains (Rayleigh
power) and strong-first SIC: the strong UE must meet its SINR threshold under
the weak UE's interference, the weak UE after cancellation. CSI (pilot gains)
is drawn only for pairs whose screening probability clears the threshold.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class PairingError(ValueError):
    pass


@dataclass(frozen=True)
class RateDemand:
    ue_id: int
    rate: float       # bits/symbol; SINR threshold is 2^rate - 1
    mean_gain: float  # mean of the exponential gain distribution

    def __post_init__(self):
        # zero rate is tolerated (vacuous demand); negative or non-finite is not
        if self.rate < 0 or not math.isfinite(self.rate):
            raise PairingError(f"ue {self.ue_id}: rate must be nonnegative and finite")
        if not (self.mean_gain > 0) or not math.isfinite(self.mean_gain):
            raise PairingError(f"ue {self.ue_id}: mean_gain must be positive and finite")


@dataclass(frozen=True)
class PairDecision:
    strong: int                       # ue_id decoded first
    weak: int
    probability: float                # screening estimate, no instantaneous CSI
    screened_in: bool
    admitted: bool                    # screened in and power-feasible
    gains: tuple[float, float] | None   # (strong, weak), present after pilots
    powers: tuple[float, float] | None  # (strong, weak), present if feasible


@dataclass(frozen=True)
class WorkflowResult:
    decisions: tuple[PairDecision, ...]
    csi_acquisitions: int             # pairs that reached the pilot step
    unpaired: int | None              # median ue_id for odd-sized input
    log: tuple[str, ...]


def _theta(rate: float) -> float:
    return 2.0**rate - 1.0


def success_probability(strong: RateDemand, weak: RateDemand, power_budget: float) -> float:
    """Probability both rate demands are met with strong-first SIC.

    Both UEs are assumed to transmit at the power budget; gains are
    independent exponentials with the configured means. Closed form of
    P[ A >= theta_s (B + 1) and B >= theta_w ] for A, B exponential.
    """
    if not math.isfinite(power_budget) or power_budget < 0:
        raise PairingError("power_budget must be finite and nonnegative")
    th_s, th_w = _theta(strong.rate), _theta(weak.rate)
    alpha = strong.mean_gain * power_budget  # mean of A = g_s p
    beta = weak.mean_gain * power_budget     # mean of B = g_w p
    if th_s == 0.0 and th_w == 0.0:
        return 1.0
    if alpha == 0.0 and th_s > 0.0:
        return 0.0
    if beta == 0.0 and th_w > 0.0:
        return 0.0
    expo = 0.0
    if th_s > 0.0:
        expo -= th_s * (1.0 + th_w) / alpha
    if th_w > 0.0:
        expo -= th_w / beta
    scale = alpha / (alpha + beta * th_s) if th_s > 0.0 else 1.0
    return float(scale * math.exp(expo))


def mc_success_probability(
    strong: RateDemand, weak: RateDemand, power_budget: float,
    n_samples: int = 10**6, seed: int = 0,
):
    """Sampling estimate of the same two-constraint event, with its standard error."""
    rng = np.random.default_rng(np.random.SeedSequence([0x9A12, seed]))
    a = rng.exponential(strong.mean_gain * power_budget, n_samples)
    b = rng.exponential(weak.mean_gain * power_budget, n_samples)
    th_s, th_w = _theta(strong.rate), _theta(weak.rate)
    hits = (a >= th_s * (b + 1.0)) & (b >= th_w)
    p = float(np.mean(hits))
    se = math.sqrt(max(p * (1.0 - p), 1e-300) / n_samples)
    return p, se


def pair_by_rates(demands: list[RateDemand]):
    """Pair the highest remaining rate with the lowest: (r1, rN), (r2, rN-1), ...

    Ties break on ue_id, so the result is invariant under input permutation.
    Odd-sized input leaves the median demand unpaired.
    """
    if len(demands) < 2:
        raise PairingError("need at least two rate demands to pair")
    ordered = sorted(demands, key=lambda d: (-d.rate, d.ue_id))
    pairs = []
    i, j = 0, len(ordered) - 1
    while i < j:
        pairs.append((ordered[i], ordered[j]))
        i, j = i + 1, j - 1
    unpaired = ordered[i] if i == j else None
    return pairs, unpaired


def allocate_powers(g_strong, g_weak, r_strong, r_weak, p_max):
    """Minimal powers meeting both demands with strong-first SIC, or None.

    The weak UE is granted exactly its threshold after cancellation; the
    strong UE must clear its threshold over the weak UE's interference plus
    noise. Returns (p_strong, p_weak) or None when either exceeds p_max.
    """
    if g_strong <= 0 or g_weak <= 0:
        return None
    th_s, th_w = _theta(r_strong), _theta(r_weak)
    p_weak = th_w / g_weak
    p_strong = th_s * (g_weak * p_weak + 1.0) / g_strong
    if p_strong > p_max or p_weak > p_max:
        return None
    return p_strong, p_weak


def run_pairing_workflow(
    demands: list[RateDemand],
    threshold: float,
    power_budget: float = 1.0,
    seed: int = 0,
) -> WorkflowResult:
    """Execute the five pairing steps over all extreme-rate candidate pairs.

    Pilot gains are drawn (and counted) only for pairs whose screening
    probability reaches the threshold; admitted pairs additionally get a
    feasible power allocation and a timing-synchronization log entry.
    """
    if not 0.0 <= threshold <= 1.0:
        raise PairingError(f"threshold {threshold} outside [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([0x9A13, seed]))
    pairs, unpaired = pair_by_rates(demands)
    decisions = []
    log = [f"step1: collected {len(demands)} rate demands"]
    csi = 0
    for a, b in pairs:
        strong, weak = (a, b) if a.mean_gain >= b.mean_gain else (b, a)
        prob = success_probability(strong, weak, power_budget)
        log.append(
            f"step2: pair ({strong.ue_id},{weak.ue_id}) success probability {prob:.6f}"
        )
        if prob < threshold:
            decisions.append(
                PairDecision(
                    strong=strong.ue_id, weak=weak.ue_id, probability=prob,
                    screened_in=False, admitted=False, gains=None, powers=None,
                )
            )
            continue
        csi += 1
        g_s = float(rng.exponential(strong.mean_gain))
        g_w = float(rng.exponential(weak.mean_gain))
        log.append(f"step3: pilots from ({strong.ue_id},{weak.ue_id})")
        powers = allocate_powers(g_s, g_w, strong.rate, weak.rate, power_budget)
        if powers is None:
            log.append(f"step4: pair ({strong.ue_id},{weak.ue_id}) infeasible")
        else:
            log.append(
                f"step4: pair ({strong.ue_id},{weak.ue_id}) powers "
                f"({powers[0]:.6f},{powers[1]:.6f})"
            )
            log.append(f"step5: sync signal to ({strong.ue_id},{weak.ue_id})")
        decisions.append(
            PairDecision(
                strong=strong.ue_id, weak=weak.ue_id, probability=prob,
                screened_in=True, admitted=powers is not None,
                gains=(g_s, g_w), powers=powers,
            )
        )
    if unpaired is not None:
        log.append(f"unpaired median ue {unpaired.ue_id}")
    return WorkflowResult(
        decisions=tuple(decisions),
        csi_acquisitions=csi,
        unpaired=unpaired.ue_id if unpaired is not None else None,
        log=tuple(log),
    )


def load_demands_csv(path) -> list[RateDemand]:
    """Read demands from a CSV with header ue_id, rate, mean_gain."""
    demands = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"ue_id", "rate", "mean_gain"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise PairingError(
                f"{path}: header must contain {sorted(required)}, "
                f"got {reader.fieldnames}"
            )
        for line_no, row in enumerate(reader, start=2):
            try:
                demands.append(
                    RateDemand(
                        ue_id=int(row["ue_id"]),
                        rate=float(row["rate"]),
                        mean_gain=float(row["mean_gain"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise PairingError(f"{path}: line {line_no}: {exc}") from exc
    return demands
