"""Seeded synthetic LMP panels for tests, demos and benchmarks.

Generator, per node ``n`` in cluster ``c`` and hour ``h`` (local = UTC):

* day-ahead price: a daily shape ``35 + 12 sin(2 pi (h - 9) / 24)`` plus a
  seasonal term, an AR(1) cluster factor, a fixed node offset and small
  node noise; rounded to cents.
* delta: an hour-of-day bias shared by the cluster, a node bias, a
  cluster-level AR(1) factor, Student-t(3) node noise, and rare spikes
  (probability 0.5%) of either sign with magnitude 40-200 $/MWh; rounded
  to cents.  Day-ahead prices above the node's typical level are mildly
  associated with positive deltas, so bid prices carry information.
* real-time price: day-ahead minus delta.

Identical arguments give bit-identical panels.
"""
from __future__ import annotations

import numpy as np

from .market_data import PricePanel


def make_synthetic_panel(n_nodes: int = 20, days: int = 730, start: str = "2019-01-01",
                         seed: int = 20240601, n_clusters: int = 5, tz: str = "UTC",
                         zero_delta: bool = False) -> PricePanel:
    rng = np.random.default_rng(seed)
    H = days * 24
    hours = np.datetime64(start, "h") + np.arange(H).astype("timedelta64[h]")
    hod = np.arange(H) % 24
    day = np.arange(H) // 24

    shape = 35.0 + 12.0 * np.sin(2 * np.pi * (hod - 9) / 24.0) + 6.0 * np.cos(2 * np.pi * day / 365.0)
    cluster = np.arange(n_nodes) % n_clusters

    def ar1(n, phi, sigma):
        e = rng.normal(0.0, sigma, size=(n, H))
        out = np.empty_like(e)
        out[:, 0] = e[:, 0]
        for t in range(1, H):
            out[:, t] = phi * out[:, t - 1] + e[:, t]
        return out

    da_factor = ar1(n_clusters, 0.9, 2.0)
    d_factor = ar1(n_clusters, 0.6, 2.5)
    hod_bias = rng.normal(0.0, 2.0, size=(n_clusters, 24))

    offset = rng.normal(0.0, 4.0, size=n_nodes)
    da = shape[None, :] + da_factor[cluster] + offset[:, None] + rng.normal(0.0, 1.0, size=(n_nodes, H))

    node_bias = rng.normal(0.0, 1.5, size=n_nodes)
    noise = rng.standard_t(3, size=(n_nodes, H)) * 3.0
    spikes = rng.random((n_nodes, H)) < 0.005
    spike = np.where(rng.random((n_nodes, H)) < 0.5, -1.0, 1.0) * rng.uniform(40.0, 200.0, (n_nodes, H))
    level = da - (shape[None, :] + offset[:, None])
    delta = (hod_bias[cluster][:, hod] + node_bias[:, None] + d_factor[cluster] + noise
             + 0.3 * level + np.where(spikes, spike, 0.0))

    da = np.round(da, 2)
    delta = np.zeros_like(da) if zero_delta else np.round(delta, 2)
    rt = np.round(da - delta, 2)
    nodes = tuple(f"N{i:03d}" for i in range(n_nodes))
    return PricePanel(nodes, hours, da, rt, tz)


def write_panel_csv(panel: PricePanel, path) -> None:
    """Long-format CSV in the default ingest schema."""
    with open(path, "w") as fh:
        fh.write("node,timestamp,da_lmp,rt_lmp\n")
        stamps = [f"{h}:00:00Z" for h in panel.hours.astype(str)]
        for i, n in enumerate(panel.nodes):
            for k, ts in enumerate(stamps):
                if not panel.missing[i, k]:
                    fh.write(f"{n},{ts},{panel.da[i, k]:.2f},{panel.rt[i, k]:.2f}\n")
