#!/usr/bin/env python3
"""Time-aware subgraph generation around target authentication events.

Generates a small labeled scenario, then walks through what the sampler does
for one benign and one malicious event: neighborhood union, window filter,
parallel-edge merging with interaction counts, and top-k pruning.
"""

from authgraph import build_hamg, generate_time_aware_subgraph
from authgraph.sampling import SamplerConfig
from authgraph.synth import ScenarioConfig, generate_scenario

cfg = ScenarioConfig(n_users=12, n_hosts=24, n_servers=3, days=3,
                     benign_events=900, malicious_chains=4, chain_length=4,
                     chain_window=600, seed=5)
records, labels = generate_scenario(cfg)
graph, events = build_hamg(records, labels)
print(f"scenario: {len(records)} records -> {graph.num_nodes} nodes, "
      f"{graph.num_edges} edges, {len(events)} events "
      f"({sum(e.label for e in events)} malicious)")

sampler = SamplerConfig(tau=1800, k=150)


def describe(event):
    sub = generate_time_aware_subgraph(graph, event, sampler)
    kind = "MALICIOUS" if event.label else "benign"
    print(f"\n{kind} event t={event.t}: "
          f"{graph.node(event.U).name} -> {graph.node(event.D).name}")
    print(f"  subgraph: {sub.n_nodes} nodes ({int(sub.core_flags.sum())} core), "
          f"{sub.n_edges} merged edges")
    for i in range(sub.n_edges):
        na = graph.node(int(sub.node_ids[sub.edge_src[i]])).name
        nb = graph.node(int(sub.node_ids[sub.edge_dst[i]])).name
        ntlm = " NTLM" if sub.edge_feat[i][5] else ""
        print(f"    {na:>8} -> {nb:<8}  T={int(sub.edge_T[i])}  "
              f"|t_repr - t| = {abs(int(sub.edge_t_repr[i]) - event.t):>5}s{ntlm}")


benign = next(e for e in events if e.label == 0)
malicious = next(e for e in events if e.label == 1)
describe(benign)
describe(malicious)

print("\nnote how the malicious subgraph contains the whole NTLM hop chain of")
print("the compromised account, clustered tightly around the event time.")
