"""Monte Carlo experiment engine: BLER sweeps, HARQ episode batches, pairing
workflow runs, all driven by a JSON-serializable config with per-trial RNG
substreams keyed by (master seed, point index, trial index).

Determinism contract: results are byte-identical across repeated runs and
across worker counts. Trials are processed in fixed-size batches; early
stopping decisions happen on batch boundaries only, and reductions are either
integer sums or fixed-order gathers, so the executed trial set and the final
rows never depend on scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
import types
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, coding, harq, pairing, phy, rx, seqdesign
from .coding import CodeConfig
from .phy import ChannelModel, FrameConfig, ModScheme, MuMimo, NomaWsma, UeTxConfig

WORKERS_ENV = "WSMALINK_WORKERS"


class SimError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration

@dataclass(frozen=True)
class SignatureSpec:
    pi: str = "tsc"            # tsc | coherence | chordal
    seed: int = 0
    iters: int = 5000
    file: str | None = None    # signature JSON overrides generation


@dataclass(frozen=True)
class HarqSpec:
    protocol: str = "smart"
    backend: str = "accum_snr"
    max_retx: int = 4
    horizon: int = 20
    rates: tuple[float, ...] = (1.0, 1.0)
    powers: tuple[float, ...] = (1.0, 1.0)
    gain_values: tuple[tuple[float, ...], ...] = ((2.0,), (1.0,))
    gain_probs: tuple[tuple[float, ...], ...] = ((1.0,), (1.0,))
    gain_process: str = "per_episode"
    rx_adaptation: bool = False
    decode_cost_unit: float = 4.0
    pool_gain_values: tuple[float, ...] = ()
    pool_gain_probs: tuple[float, ...] = ()
    pool_power: float = 1.0
    pool_rate: float = 1.0

    def episode_config(self) -> harq.EpisodeConfig:
        pool = None
        if self.pool_gain_values:
            pool = harq.GainDist(self.pool_gain_values, self.pool_gain_probs)
        return harq.EpisodeConfig(
            protocol=self.protocol,
            backend=self.backend,
            max_retx=self.max_retx,
            horizon=self.horizon,
            rates=tuple(self.rates),
            powers=tuple(self.powers),
            gains=tuple(
                harq.GainDist(tuple(v), tuple(p))
                for v, p in zip(self.gain_values, self.gain_probs)
            ),
            gain_process=self.gain_process,
            rx_adaptation=self.rx_adaptation,
            decode_cost_unit=self.decode_cost_unit,
            pool_gain=pool,
            pool_power=self.pool_power,
            pool_rate=self.pool_rate,
        )


@dataclass(frozen=True)
class PairingSpec:
    demands_file: str | None = None
    # inline demands as (ue_id, rate, mean_gain) rows; used when no file given
    demands: tuple[tuple[float, float, float], ...] = ()
    threshold: float = 0.5
    power_budget: float = 1.0

    def load(self) -> list[pairing.RateDemand]:
        if self.demands_file:
            return pairing.load_demands_csv(self.demands_file)
        if not self.demands:
            raise SimError("pairing scenario needs demands or demands_file")
        return [
            pairing.RateDemand(ue_id=int(u), rate=r, mean_gain=g)
            for u, r, g in self.demands
        ]


SCENARIOS = ("bler_noma", "bler_mumimo", "harq", "pairing")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; the JSON config file mirrors these fields."""

    scenario: str = "bler_noma"
    label: str = "run"
    snr_db: tuple[float, ...] = (0.0,)
    trials: int = 1000
    seed: int = 1
    k_users: int = 6
    spread_length: int = 4
    groups: int = 1
    users_per_group: int = 6
    receive_antennas: int = 4
    n_prb: int = 6
    data_symbols: int = 12
    modulation: str = "qpsk"
    tbs_bytes: int = 20
    code: CodeConfig = field(default_factory=CodeConfig)
    channel_model: str = "block_flat"
    est_error_var: float = 0.0
    receiver: str = "mmse"
    signature: SignatureSpec = field(default_factory=SignatureSpec)
    harq: HarqSpec = field(default_factory=HarqSpec)
    pairing: PairingSpec = field(default_factory=PairingSpec)
    early_stop_errors: int = 200
    batch_trials: int = 256

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise SimError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.trials < 1:
            raise SimError("trials must be >= 1")
        if self.batch_trials < 1:
            raise SimError("batch_trials must be >= 1")
        if self.scenario == "bler_mumimo" and self.k_users != self.groups * self.users_per_group:
            raise SimError(
                f"MU-MIMO needs k_users == groups * users_per_group, got "
                f"{self.k_users} != {self.groups} * {self.users_per_group}"
            )
        if self.receiver not in ("mmse", "sic"):
            raise SimError(f"receiver must be mmse or sic, got {self.receiver!r}")
        if self.channel_model not in ("block_flat", "per_re"):
            raise SimError(f"unknown channel_model {self.channel_model!r}")
        if self.modulation not in ("qpsk", "qam16"):
            raise SimError(f"unknown modulation {self.modulation!r}")


def _type_of(cls, name):
    return typing.get_type_hints(cls)[name]


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union or origin is types.UnionType:
        last_err = None
        for alt in typing.get_args(tp):
            if alt is type(None):
                if value is None:
                    return None
                continue
            try:
                return _coerce(value, alt, path)
            except (TypeError, ValueError) as exc:
                last_err = exc
        raise SimError(f"{path}: cannot interpret {value!r}: {last_err}")
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise SimError(f"{path}: expected an object for {tp.__name__}")
        return _dataclass_from_dict(tp, value, path)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise SimError(f"{path}: expected a list")
        inner = typing.get_args(tp)[0]
        return tuple(_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value))
    if tp is bool:
        if isinstance(value, bool):
            return value
        raise SimError(f"{path}: expected a boolean, got {value!r}")
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise SimError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SimError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise SimError(f"{path}: expected a string, got {value!r}")
        return value
    raise SimError(f"{path}: unsupported config type {tp}")


def _dataclass_from_dict(cls, d, path=""):
    names = {f.name for f in dataclasses.fields(cls)}
    for key in d:
        if key not in names:
            raise SimError(f"unknown config key {path + '.' if path else ''}{key}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in d:
            sub = f"{path}.{f.name}" if path else f.name
            kwargs[f.name] = _coerce(d[f.name], _type_of(cls, f.name), sub)
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise SimError(str(exc)) from exc


def config_from_dict(d: dict) -> ExperimentConfig:
    return _dataclass_from_dict(ExperimentConfig, d)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def convert(obj):
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: convert(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return [convert(v) for v in obj]
        return obj

    return convert(cfg)


def _parse_override_value(raw: str, tp, path):
    origin = typing.get_origin(tp)
    if origin is typing.Union or origin is types.UnionType:
        if raw in ("null", "none", "None"):
            return None
        for alt in typing.get_args(tp):
            if alt is not type(None):
                return _parse_override_value(raw, alt, path)
    if tp is bool:
        if raw.lower() in ("true", "1"):
            return True
        if raw.lower() in ("false", "0"):
            return False
        raise SimError(f"{path}: expected true/false, got {raw!r}")
    if tp is int:
        try:
            return int(raw)
        except ValueError as exc:
            raise SimError(f"{path}: expected an integer, got {raw!r}") from exc
    if tp is float:
        try:
            return float(raw)
        except ValueError as exc:
            raise SimError(f"{path}: expected a number, got {raw!r}") from exc
    if tp is str:
        return raw
    if origin is tuple:
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SimError(f"{path}: expected a JSON list, got {raw!r}") from exc
    raise SimError(f"{path}: cannot override values of type {tp}")


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply dotted-key overrides like ``trials=10`` or ``code.kind=uncoded``."""
    d = config_to_dict(cfg)
    for ov in overrides:
        if "=" not in ov:
            raise SimError(f"override {ov!r} is not key=value")
        key, raw = ov.split("=", 1)
        parts = key.split(".")
        cls, node = ExperimentConfig, d
        for p in parts[:-1]:
            names = {f.name for f in dataclasses.fields(cls)}
            if p not in names:
                raise SimError(f"unknown config key {key!r}")
            tp = _type_of(cls, p)
            if not dataclasses.is_dataclass(tp):
                raise SimError(f"{key}: {p} is not a config section")
            cls, node = tp, node[p]
        leaf = parts[-1]
        names = {f.name for f in dataclasses.fields(cls)}
        if leaf not in names:
            raise SimError(f"unknown config key {key!r}")
        node[leaf] = _parse_override_value(raw, _type_of(cls, leaf), key)
    return config_from_dict(d)


def load_config_file(path):
    """Read a config file holding one config object or {"runs": [...]}.

    Relative ``pairing.demands_file`` paths are resolved against the config
    file's directory.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise SimError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SimError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if isinstance(raw, dict) and "runs" in raw:
        extra = set(raw) - {"runs"}
        if extra:
            raise SimError(f"{path}: unknown top-level keys {sorted(extra)}")
        configs = [config_from_dict(r) for r in raw["runs"]]
    else:
        configs = [config_from_dict(raw)]
    base = os.path.dirname(os.path.abspath(path))
    out = []
    for cfg in configs:
        f = cfg.pairing.demands_file
        if f and not os.path.isabs(f):
            resolved = os.path.normpath(os.path.join(base, f))
            cfg = apply_overrides(cfg, [f"pairing.demands_file={resolved}"])
        out.append(cfg)
    return out


# ---------------------------------------------------------------------------
# Results

BLER_COLUMNS = ["scenario", "snr_db", "ue", "trials", "errors", "bler", "ci_lo", "ci_hi"]
HARQ_COLUMNS = [
    "scenario", "protocol", "ue", "episodes", "mean_retx", "retx_ci_lo",
    "retx_ci_hi", "mean_delay", "throughput", "fairness", "decode_cost",
]
PAIRING_COLUMNS = [
    "scenario", "trial", "strong", "weak", "probability", "screened_in",
    "admitted", "p_strong", "p_weak", "csi_acquisitions",
]
_COLUMNS = {"bler": BLER_COLUMNS, "harq": HARQ_COLUMNS, "pairing": PAIRING_COLUMNS}


@dataclass(frozen=True)
class ResultSet:
    """Rows plus the exact config echo; wall clock is diagnostic only and is
    excluded from equality and serialization so identical runs produce
    identical files."""

    kind: str
    rows: tuple[dict, ...]
    config: dict
    version: str = __version__
    truncated: bool = False
    wall_clock_s: float = field(default=0.0, compare=False)

    def experiment_config(self) -> ExperimentConfig:
        return config_from_dict(self.config)


def wilson_interval(errors: int, trials: int, z: float = 1.96):
    """95% score interval for a binomial proportion; valid at low counts."""
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def persist(results: ResultSet, path) -> list[str]:
    """Write results; '.json' and '.csv' suffixes select one format, any other
    path writes both <path>.json and <path>.csv. Returns the files written."""
    path = str(path)
    written = []
    if path.endswith(".json"):
        targets = [(path, "json")]
    elif path.endswith(".csv"):
        targets = [(path, "csv")]
    else:
        targets = [(path + ".json", "json"), (path + ".csv", "csv")]
    for target, kind in targets:
        try:
            if kind == "json":
                payload = {
                    "kind": results.kind,
                    "version": results.version,
                    "truncated": results.truncated,
                    "config": results.config,
                    "rows": list(results.rows),
                }
                with open(target, "w") as fh:
                    json.dump(payload, fh, indent=1, sort_keys=True)
                    fh.write("\n")
            else:
                with open(target, "w", newline="") as fh:
                    writer = csv.DictWriter(fh, fieldnames=_COLUMNS[results.kind])
                    writer.writeheader()
                    for row in results.rows:
                        writer.writerow({k: row.get(k) for k in _COLUMNS[results.kind]})
        except OSError as exc:
            raise SimError(f"cannot write {target}: {exc}") from exc
        written.append(target)
    return written


def load(path) -> ResultSet:
    """Read a JSON result file back; parse errors carry line and field names."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise SimError(f"result file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SimError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    missing = {"kind", "version", "truncated", "config", "rows"} - set(raw)
    if missing:
        raise SimError(f"{path}: missing result fields {sorted(missing)}")
    if raw["kind"] not in _COLUMNS:
        raise SimError(f"{path}: unknown result kind {raw['kind']!r}")
    return ResultSet(
        kind=raw["kind"],
        rows=tuple(raw["rows"]),
        config=raw["config"],
        version=raw["version"],
        truncated=raw["truncated"],
    )


# ---------------------------------------------------------------------------
# BLER sweeps

def build_frame(cfg: ExperimentConfig) -> FrameConfig:
    if cfg.scenario == "bler_noma":
        if cfg.signature.file:
            sigs = seqdesign.load(cfg.signature.file)
        else:
            sigs = seqdesign.generate(
                cfg.k_users, cfg.spread_length,
                seqdesign.PiKind(cfg.signature.pi),
                seed=cfg.signature.seed, iters=cfg.signature.iters,
            )
        mode = NomaWsma(sigs)
    else:
        mode = MuMimo(groups=cfg.groups, users_per_group=cfg.users_per_group)
    return FrameConfig(
        mode=mode,
        n_prb=cfg.n_prb,
        data_symbols=cfg.data_symbols,
        receive_antennas=cfg.receive_antennas,
    )


def _ue_configs(cfg: ExperimentConfig, power: float) -> list[UeTxConfig]:
    mod = ModScheme(cfg.modulation)
    return [
        UeTxConfig(
            power=power, signature_index=k, modulation=mod,
            tbs_bytes=cfg.tbs_bytes, code=cfg.code,
        )
        for k in range(cfg.k_users)
    ]


def run_bler_trial(
    frame: FrameConfig, cfg: ExperimentConfig, snr_db: float,
    point_idx: int, trial_idx: int,
) -> np.ndarray:
    """One frame: channel, transport blocks, composition, detection, CRCs."""
    ss = np.random.SeedSequence([cfg.seed, point_idx, trial_idx])
    ch_seed, est_seed, bits_seed, noise_seed = ss.spawn(4)
    power = 10.0 ** (snr_db / 10.0)
    ues = _ue_configs(cfg, power)
    ch = phy.draw_channel(frame, ChannelModel(cfg.channel_model), ch_seed)
    ch = phy.estimate_channel(ch, cfg.est_error_var, est_seed)
    bits_rng = np.random.default_rng(bits_seed)
    tbs, streams = [], []
    target = frame.symbols_per_ue * ues[0].modulation.bits_per_symbol
    for k in range(cfg.k_users):
        info = bits_rng.integers(0, 2, ues[k].info_bits).astype(np.uint8)
        tbs.append(info)
        streams.append(phy.modulate(coding.encode(info, cfg.code, target), ues[k].modulation))
    y = phy.compose_received(frame, ues, streams, ch, 1.0, noise_seed)
    if cfg.receiver == "sic":
        outcomes = rx.sic_decode(frame, ues, y, ch, 1.0)
    else:
        outcomes = rx.mmse_decode_frame(frame, ues, y, ch, 1.0)
    errors = np.zeros(cfg.k_users, dtype=np.int64)
    for o in outcomes:
        if cfg.code.crc_bits:
            errors[o.ue] = 0 if o.crc_pass else 1
        else:
            errors[o.ue] = 0 if np.array_equal(o.bits, tbs[o.ue]) else 1
    return errors


def _bler_batch(cfg: ExperimentConfig, point_idx: int, snr_db: float, lo: int, hi: int):
    frame = build_frame(cfg)
    errors = np.zeros(cfg.k_users, dtype=np.int64)
    for t in range(lo, hi):
        errors += run_bler_trial(frame, cfg, snr_db, point_idx, t)
    return errors


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


class _Executor:
    """Batch runner that keeps results in submission order, serial or pooled."""

    def __init__(self, workers: int):
        self.workers = workers
        self.pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    def map_ordered(self, fn, jobs):
        if self.pool is None:
            for job in jobs:
                yield fn(*job)
        else:
            window = 2 * self.workers
            jobs = list(jobs)
            futures = []
            idx = 0
            while idx < len(jobs) or futures:
                while idx < len(jobs) and len(futures) < window:
                    futures.append(self.pool.submit(fn, *jobs[idx]))
                    idx += 1
                done = futures.pop(0)
                yield done.result()

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _batch_bounds(trials: int, batch: int):
    edges = list(range(0, trials, batch)) + [trials]
    return list(zip(edges[:-1], edges[1:]))


def run_bler_sweep(cfg: ExperimentConfig, workers: int | None = None) -> ResultSet:
    """Per-SNR-point Monte Carlo with deterministic batched early stopping.

    A point stops once every UE has accumulated ``early_stop_errors`` block
    errors (0 disables) or ``trials`` is exhausted; the executed set depends
    only on batch boundaries, never on the worker count.
    """
    if cfg.scenario not in ("bler_noma", "bler_mumimo"):
        raise SimError(f"run_bler_sweep cannot run scenario {cfg.scenario!r}")
    build_frame(cfg)  # validate geometry before any trial runs
    t0 = time.monotonic()
    ex = _Executor(resolve_workers(workers))
    rows = []
    truncated = False
    try:
        for point_idx, snr_db in enumerate(cfg.snr_db):
            errors = np.zeros(cfg.k_users, dtype=np.int64)
            done = 0
            bounds = _batch_bounds(cfg.trials, cfg.batch_trials)
            jobs = [(cfg, point_idx, snr_db, lo, hi) for lo, hi in bounds]
            for (lo, hi), batch_errors in zip(
                bounds, ex.map_ordered(_bler_batch, jobs)
            ):
                errors += batch_errors
                done = hi
                if cfg.early_stop_errors and np.all(errors >= cfg.early_stop_errors):
                    break
            for ue in range(cfg.k_users):
                lo_ci, hi_ci = wilson_interval(int(errors[ue]), done)
                rows.append(
                    {
                        "scenario": cfg.scenario,
                        "snr_db": snr_db,
                        "ue": ue,
                        "trials": done,
                        "errors": int(errors[ue]),
                        "bler": errors[ue] / done,
                        "ci_lo": lo_ci,
                        "ci_hi": hi_ci,
                    }
                )
    except KeyboardInterrupt:
        truncated = True
    finally:
        ex.close()
    return ResultSet(kind="bler", rows=tuple(rows), config=config_to_dict(cfg),
                     truncated=truncated, wall_clock_s=time.monotonic() - t0)


# ---------------------------------------------------------------------------
# HARQ experiments

def _harq_batch(cfg: ExperimentConfig, lo: int, hi: int):
    ep_cfg = cfg.harq.episode_config()
    out = []
    for ep in range(lo, hi):
        m = harq.run_episode(ep_cfg, seed=(cfg.seed, ep))
        out.append(
            (
                [
                    (s.mean_retx, s.mean_delay, s.throughput, s.terminated, s.delivered)
                    for s in m.per_ue
                ],
                m.fairness,
                m.decode_cost_total,
            )
        )
    return out


def _mean_ci(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None, None
    mean = float(np.mean(vals))
    if len(vals) < 2:
        return mean, mean, mean
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return mean, mean - 1.96 * se, mean + 1.96 * se


def run_harq_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ResultSet:
    """Independent episodes aggregated into per-UE means with 95% intervals."""
    if cfg.scenario != "harq":
        raise SimError(f"run_harq_experiment cannot run scenario {cfg.scenario!r}")
    cfg.harq.episode_config()  # validate protocol parameters up front
    t0 = time.monotonic()
    ex = _Executor(resolve_workers(workers))
    truncated = False
    per_episode = []
    try:
        bounds = _batch_bounds(cfg.trials, cfg.batch_trials)
        jobs = [(cfg, lo, hi) for lo, hi in bounds]
        for batch in ex.map_ordered(_harq_batch, jobs):
            per_episode.extend(batch)
    except KeyboardInterrupt:
        truncated = True
    finally:
        ex.close()
    rows = []
    n_ues = len(per_episode[0][0]) if per_episode else 0
    fairness = float(np.mean([f for _, f, _ in per_episode])) if per_episode else None
    cost = float(np.mean([c for _, _, c in per_episode])) if per_episode else None
    for ue in range(n_ues):
        retx, lo_ci, hi_ci = _mean_ci([ep[0][ue][0] for ep in per_episode])
        delay, _, _ = _mean_ci([ep[0][ue][1] for ep in per_episode])
        tput, _, _ = _mean_ci([ep[0][ue][2] for ep in per_episode])
        rows.append(
            {
                "scenario": cfg.scenario,
                "protocol": cfg.harq.protocol,
                "ue": ue,
                "episodes": len(per_episode),
                "mean_retx": retx,
                "retx_ci_lo": lo_ci,
                "retx_ci_hi": hi_ci,
                "mean_delay": delay,
                "throughput": tput,
                "fairness": fairness,
                "decode_cost": cost,
            }
        )
    return ResultSet(kind="harq", rows=tuple(rows), config=config_to_dict(cfg),
                     truncated=truncated, wall_clock_s=time.monotonic() - t0)


# ---------------------------------------------------------------------------
# Pairing experiments

def run_pairing_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ResultSet:
    if cfg.scenario != "pairing":
        raise SimError(f"run_pairing_experiment cannot run scenario {cfg.scenario!r}")
    t0 = time.monotonic()
    demands = cfg.pairing.load()
    rows = []
    for trial in range(cfg.trials):
        res = pairing.run_pairing_workflow(
            demands, cfg.pairing.threshold, cfg.pairing.power_budget,
            seed=int(np.random.SeedSequence([cfg.seed, trial]).generate_state(1)[0]),
        )
        for d in res.decisions:
            rows.append(
                {
                    "scenario": cfg.scenario,
                    "trial": trial,
                    "strong": d.strong,
                    "weak": d.weak,
                    "probability": d.probability,
                    "screened_in": d.screened_in,
                    "admitted": d.admitted,
                    "p_strong": d.powers[0] if d.powers else None,
                    "p_weak": d.powers[1] if d.powers else None,
                    "csi_acquisitions": res.csi_acquisitions,
                }
            )
    return ResultSet(kind="pairing", rows=tuple(rows), config=config_to_dict(cfg),
                     wall_clock_s=time.monotonic() - t0)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ResultSet:
    if cfg.scenario in ("bler_noma", "bler_mumimo"):
        return run_bler_sweep(cfg, workers)
    if cfg.scenario == "harq":
        return run_harq_experiment(cfg, workers)
    return run_pairing_experiment(cfg, workers)
