"""Seeded synthetic authentication traffic with injected lateral movement.

Benign users log in inside a small per-user home set of hosts and servers
during their working hours; a sprinkle of file/process activity rides along.
Injected chains walk a compromised account through a path of distinct
devices the user never touches, hop by hop inside a short window; every hop
lands in the label set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InsufficientHosts
from .logs import LabelSet, LogRecord, normalize_stream, serialize_record


@dataclass(frozen=True)
class ScenarioConfig:
    n_users: int = 40
    n_hosts: int = 80
    n_servers: int = 8
    days: int = 7
    benign_events: int = 2000
    malicious_chains: int = 10
    chain_length: int = 4
    chain_window: int = 900
    quiet_margin: int = 7200  # keep chains this far from the user's benign logins
    seed: int = 0

    def validate(self) -> "ScenarioConfig":
        for name in ("n_users", "n_hosts", "n_servers", "days",
                     "benign_events", "malicious_chains"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.chain_length < 3:
            raise ConfigError(f"chain_length must be >= 3, got {self.chain_length}")
        if self.chain_window > 86400:
            raise ConfigError("chain_window must fit within one simulated day")
        return self

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n_users", "n_hosts", "n_servers", "days", "benign_events",
            "malicious_chains", "chain_length", "chain_window",
            "quiet_margin", "seed")}


def _names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i:04d}" for i in range(n)]


def assign_home_sets(cfg: ScenarioConfig) -> dict[str, list[str]]:
    """Deterministic per-user device assignment: 1-3 hosts plus 1-2 servers.

    The first assigned host doubles as the user's primary workstation.
    """
    rng = np.random.default_rng([cfg.seed, 0])
    hosts = _names("H", cfg.n_hosts)
    servers = _names("S", cfg.n_servers)
    homes = {}
    for user in _names("U", cfg.n_users):
        k_h = int(rng.integers(1, 4))
        k_s = int(rng.integers(1, 3))
        picked_h = [hosts[i] for i in rng.choice(cfg.n_hosts, size=k_h, replace=False)]
        picked_s = [servers[i] for i in rng.choice(cfg.n_servers, size=min(k_s, cfg.n_servers),
                                                   replace=False)]
        homes[user] = picked_h + picked_s
    return homes


def _work_window(rng, day: int) -> tuple[int, int]:
    start = day * 86400 + int(rng.integers(7, 10)) * 3600
    return start, start + int(rng.integers(8, 11)) * 3600


# Benign traffic authenticates over ticket/negotiation protocols; the
# injected chains run NTLM network logons, the classic pass-the-hash shape.
_BENIGN_AUTH = (("Kerberos", 0.85), ("Negotiate", 0.10), ("MsV1_0", 0.05))
_BENIGN_LOGON = (("Network", 0.70), ("Interactive", 0.20), ("RemoteInteractive", 0.10))


def _weighted(rng, pairs):
    names = [p[0] for p in pairs]
    probs = [p[1] for p in pairs]
    return names[int(rng.choice(len(names), p=probs))]


def generate_benign_logs(cfg: ScenarioConfig) -> list[LogRecord]:
    """Exactly ``benign_events`` records; about 5% are object accesses."""
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 1])
    homes = assign_home_sets(cfg)
    users = list(homes)
    files = _names("F", max(20, cfg.n_users))
    procs = _names("P", max(10, cfg.n_users // 2))

    records = []
    for _ in range(cfg.benign_events):
        user = users[int(rng.integers(len(users)))]
        home = homes[user]
        day = int(rng.integers(cfg.days))
        lo, hi = _work_window(rng, day)
        t = int(rng.integers(lo, hi))
        if rng.random() < 0.05:
            device = home[int(rng.integers(len(home)))]
            creating = rng.random() < 0.3
            pool = procs if creating else files
            records.append(LogRecord(
                t=t, src_user=user, dst_user=user,
                src_device=device, dst_device=device,
                auth_type="Unknown", logon_type="Unknown", orientation="Unknown",
                outcome="Success",
                interaction="creation" if creating else "access",
                object=pool[int(rng.integers(len(pool)))],
            ))
            continue
        src = home[0]
        dst = home[int(rng.integers(len(home)))]
        if len(home) > 1 and dst == src:
            dst = home[1 + int(rng.integers(len(home) - 1))]
        records.append(LogRecord(
            t=t, src_user=user, dst_user=user, src_device=src, dst_device=dst,
            auth_type=_weighted(rng, _BENIGN_AUTH),
            logon_type=_weighted(rng, _BENIGN_LOGON),
            orientation="LogOn",
            outcome="Success" if rng.random() < 0.97 else "Failure",
            interaction="login",
        ))
    return records


def inject_lateral_movement(records: list[LogRecord],
                            cfg: ScenarioConfig) -> tuple[list[LogRecord], LabelSet]:
    """Append seeded attack chains and return the merged, re-normalized stream.

    Each chain walks chain_length distinct off-home devices within
    chain_window seconds, starting from the user's own workstation. Every
    chain hop is keyed into the returned LabelSet.
    """
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 2])
    homes = assign_home_sets(cfg)
    users = list(homes)
    all_devices = _names("H", cfg.n_hosts) + _names("S", cfg.n_servers)

    if cfg.malicious_chains <= len(users):
        chosen = [users[i] for i in rng.choice(len(users), size=cfg.malicious_chains,
                                               replace=False)]
    else:
        chosen = [users[int(i)] for i in rng.integers(0, len(users), size=cfg.malicious_chains)]

    benign_times: dict[str, list[int]] = {}
    for rec in records:
        if rec.interaction == "login":
            benign_times.setdefault(rec.src_user, []).append(rec.t)
    for seq in benign_times.values():
        seq.sort()

    def _quiet_start(user: str) -> int:
        # place the chain away from the user's own benign logins so nearby
        # benign events do not inherit the chain as subgraph context
        times = benign_times.get(user, [])
        candidate = None
        for _ in range(200):
            day = int(rng.integers(cfg.days))
            lo, hi = _work_window(rng, day)
            candidate = int(rng.integers(lo, hi))
            lo_bound = candidate - cfg.quiet_margin
            hi_bound = candidate + cfg.chain_window + cfg.quiet_margin
            if not any(lo_bound <= t <= hi_bound for t in times):
                return candidate
        return candidate

    bad_records = []
    label_keys = set()
    for user in chosen:
        pool = [d for d in all_devices if d not in homes[user]]
        if len(pool) < cfg.chain_length:
            raise InsufficientHosts(
                f"need {cfg.chain_length} off-home devices, only {len(pool)} available")
        path = [pool[i] for i in rng.choice(len(pool), size=cfg.chain_length, replace=False)]
        t = _quiet_start(user)
        max_gap = max(2, cfg.chain_window // cfg.chain_length)
        prev = homes[user][0]
        for dst in path:
            t += int(rng.integers(1, max_gap))
            rec = LogRecord(
                t=t, src_user=user, dst_user=user, src_device=prev, dst_device=dst,
                auth_type="NTLM", logon_type="Network", orientation="LogOn",
                outcome="Success", interaction="login",
            )
            bad_records.append(rec)
            label_keys.add((rec.t, rec.src_user, rec.src_device, rec.dst_device))
            prev = dst
    merged = normalize_stream(list(records) + bad_records)
    return merged, LabelSet(label_keys)


def generate_scenario(cfg: ScenarioConfig) -> tuple[list[LogRecord], LabelSet]:
    """Benign traffic plus injected chains, normalized and labeled."""
    return inject_lateral_movement(generate_benign_logs(cfg), cfg)


def write_scenario(cfg: ScenarioConfig, records_path: str, labels_path: str) -> tuple[int, int]:
    """Emit generic JSONL records plus a 4-field red-team style label file."""
    records, labels = generate_scenario(cfg)
    with open(records_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(serialize_record(rec) + "\n")
    with open(labels_path, "w", encoding="utf-8") as fh:
        for key in sorted(labels.entries):
            fh.write(f"{key[0]},{key[1]},{key[2]},{key[3]}\n")
    return len(records), len(labels)


def off_home_rule_recall(records: list[LogRecord], labels: LabelSet,
                         homes: dict[str, list[str]]) -> float:
    """Recall of the scripted baseline that flags logins outside the user's
    home set; used to certify that generated data is learnable."""
    caught = 0
    for rec in records:
        if rec.interaction != "login":
            continue
        key = (rec.t, rec.src_user, rec.src_device, rec.dst_device)
        if key in labels and rec.dst_device not in homes.get(rec.src_user, ()):
            caught += 1
    return caught / max(1, len(labels))
