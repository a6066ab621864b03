"""The three benchmark networks: bundled, cached, or downloaded on request.

Les Miserables ships with the package.  The co-authorship and Enron graphs are
fetched from their original hosts into a cache directory; a SHA-256 of each
download is pinned in ``<cache>/checksums.json`` on first fetch and verified
afterwards, and the loaded graph is always checked against the expected node and
edge counts.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import urllib.request
import zipfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .graph import Graph, largest_connected_component, load_edge_list, load_gml


@dataclass(frozen=True)
class Dataset:
    name: str
    filename: str
    fmt: str
    n: int
    m: int
    lcc: bool = False
    url: str | None = None
    zip_member: str | None = None
    sha256: str | None = None


DATASETS = {
    "lesmis": Dataset("lesmis", "lesmis.txt", "edgelist", 77, 254),
    "netscience": Dataset(
        "netscience", "netscience.gml", "gml", 379, 914, lcc=True,
        url="http://www-personal.umich.edu/~mejn/netdata/netscience.zip",
        zip_member="netscience.gml",
    ),
    "enron": Dataset(
        "enron", "email-Enron.txt.gz", "edgelist", 33696, 180811, lcc=True,
        url="https://snap.stanford.edu/data/email-Enron.txt.gz",
    ),
}


class DatasetUnavailable(FileNotFoundError):
    pass


def cache_dir() -> Path:
    root = os.environ.get("SYMSPEC_CACHE") or Path.home() / ".cache" / "symspec"
    return Path(root)


def _search_paths(ds: Dataset) -> list[Path]:
    paths = []
    if os.environ.get("SYMSPEC_DATA"):
        paths.append(Path(os.environ["SYMSPEC_DATA"]) / ds.filename)
    paths.append(cache_dir() / ds.filename)
    return paths


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _verify_checksum(ds: Dataset, path: Path) -> None:
    pins_file = cache_dir() / "checksums.json"
    pins = json.loads(pins_file.read_text()) if pins_file.exists() else {}
    digest = _sha256(path)
    expected = ds.sha256 or pins.get(ds.name)
    if expected is None:
        pins[ds.name] = digest
        pins_file.parent.mkdir(parents=True, exist_ok=True)
        pins_file.write_text(json.dumps(pins, indent=2, sort_keys=True) + "\n")
    elif expected != digest:
        raise ValueError(f"checksum mismatch for {path}: {digest} != {expected}")


def fetch(name: str, offline: bool = False) -> Path:
    """Local path of dataset ``name``, downloading into the cache unless ``offline``."""
    ds = DATASETS[name]
    if ds.url is None:
        return Path(str(resources.files("symspec").joinpath("data", ds.filename)))
    for p in _search_paths(ds):
        if p.exists():
            return p
    if offline:
        raise DatasetUnavailable(
            f"{name} not found in {[str(p) for p in _search_paths(ds)]} and offline mode is on"
        )
    target = cache_dir() / ds.filename
    target.parent.mkdir(parents=True, exist_ok=True)
    try:
        with urllib.request.urlopen(ds.url, timeout=60) as resp:
            payload = resp.read()
    except OSError as exc:
        raise DatasetUnavailable(f"could not download {name} from {ds.url}: {exc}") from exc
    if ds.zip_member:
        with zipfile.ZipFile(io.BytesIO(payload)) as zf:
            payload = zf.read(ds.zip_member)
    target.write_bytes(payload)
    _verify_checksum(ds, target)
    return target


def load_dataset(name: str, offline: bool = False) -> Graph:
    """Load ``name`` (largest component where the benchmark uses one) and check its size."""
    ds = DATASETS[name]
    path = fetch(name, offline)
    if ds.url is not None:
        _verify_checksum(ds, path)
    if ds.fmt == "gml":
        g = load_gml(str(path))
    elif str(path).endswith(".gz"):
        import gzip

        with gzip.open(path, "rt", encoding="utf-8") as fh:
            g = load_edge_list(fh)
    else:
        g = load_edge_list(str(path))
    if ds.lcc:
        g = largest_connected_component(g)
    if (g.n, g.m) != (ds.n, ds.m):
        raise ValueError(f"{name}: expected n={ds.n}, m={ds.m}, got n={g.n}, m={g.m}")
    return g


def lesmis() -> Graph:
    return load_dataset("lesmis")
