"""JSON graph files and CSV writers.

Graph file: ``{"n": int, "edges": [[tail, head, conductance], ...],
"directed": bool}`` with 1-based vertex ids.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .graph import OrientedNetwork
from .errors import InvalidNetwork


def network_to_json(net: OrientedNetwork) -> dict:
    return {
        "n": net.n,
        "edges": [[t + 1, h + 1, float(c)] for (t, h), c in zip(net.edges, net.conductance)],
        "directed": net.directed,
    }


def network_from_json(payload: dict) -> OrientedNetwork:
    try:
        n = int(payload["n"])
        directed = bool(payload.get("directed", False))
        rows = payload["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidNetwork(f"malformed graph payload: {exc}") from exc
    edges, cond = [], []
    for row in rows:
        if len(row) not in (2, 3):
            raise InvalidNetwork(f"edge entry must be [tail, head] or [tail, head, c], got {row}")
        t, h = int(row[0]) - 1, int(row[1]) - 1
        if not directed and t > h:
            t, h = h, t
        edges.append((t, h))
        cond.append(float(row[2]) if len(row) == 3 else 1.0)
    return OrientedNetwork(n, tuple(edges), cond, directed)


def save_network(net: OrientedNetwork, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(network_to_json(net), indent=1) + "\n", encoding="utf-8")


def load_network(path: str | Path) -> OrientedNetwork:
    return network_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def write_json(payload, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_csv(header: list[str], rows, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
