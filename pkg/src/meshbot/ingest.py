"""Candidate meshes from a text-to-3D service or from disk, with acceptance filters.

The service protocol is deliberately small:

* ``POST <endpoint>/v1/generate`` with ``{"prompt": ..., "num_candidates": n}``
  and an ``Authorization: Bearer <key>`` header answers
  ``{"candidates": [{"id": ..., "format": "stl", "url": ...}, ...]}``.
* each ``url`` (absolute, or relative to the endpoint) serves the mesh bytes.
"""
from __future__ import annotations

import hashlib
import json
import os
import urllib.error
import urllib.parse
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError, GeometryError, IngestionError
from .mesh import TriangleMesh, best_vertical_symmetry, connected_component_count, load_mesh, parse_mesh
from .mesh.mass import scale_to_volume
from .mesh.repair import validate_and_repair
from .mesh.slicing import cross_section
from .segmentation import canonicalize, find_separation_planes

PROMPT_TEMPLATE = "Quadrupedal walking robot resembling a {description}"
API_KEY_ENV = "TEXT2ROBOT_API_KEY"
ENDPOINT_ENV = "TEXT2ROBOT_ENDPOINT"
SYMMETRY_THRESHOLD = 0.90
DEFAULT_CANDIDATES = 4
MESH_FORMATS = ("stl", "obj")


@dataclass(frozen=True)
class PromptSpec:
    user_description: str
    candidate_count: int = DEFAULT_CANDIDATES

    def __post_init__(self):
        words = self.user_description.split()
        if not 1 <= len(words) <= 3:
            raise ConfigError("the description must be one to three words")
        if self.candidate_count < 1:
            raise ConfigError("ask for at least one candidate")

    @property
    def rendered_prompt(self) -> str:
        return PROMPT_TEMPLATE.format(description=" ".join(self.user_description.split()))


@dataclass
class CandidateReport:
    name: str
    components: int = 0
    connectivity: bool = False
    symmetry_score: float = 0.0
    symmetry_threshold: float = SYMMETRY_THRESHOLD
    symmetry: bool = False
    legs_detected: int = 0
    legs: bool = False
    path: str | None = None
    notes: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.connectivity and self.symmetry and self.legs

    def to_dict(self) -> dict:
        return {**asdict(self), "accepted": self.accepted}


def count_legs(mesh: TriangleMesh) -> int:
    """Leg loops seen on the two separation planes, at most two per plane."""
    try:
        planes = find_separation_planes(mesh)
    except GeometryError:
        return 0
    return sum(min(cross_section(mesh, p).n_loops, 2) for p in planes)


def check_candidate(mesh: TriangleMesh, name: str, threshold: float = SYMMETRY_THRESHOLD) -> CandidateReport:
    """Connectivity, bilateral symmetry and leg count on an upright mesh."""
    rep = CandidateReport(name, symmetry_threshold=threshold)
    try:
        mesh, repair = validate_and_repair(mesh)
    except GeometryError as exc:
        rep.notes.append(f"repair failed: {exc}")
        return rep
    if not repair.is_empty:
        rep.notes.append("repaired before checking")
    rep.components = connected_component_count(mesh)
    rep.connectivity = rep.components == 1
    # legs are found with a fixed slice step, so compare candidates at robot size
    canon, _ = canonicalize(scale_to_volume(mesh))
    rep.symmetry_score, _ = best_vertical_symmetry(canon)
    rep.symmetry = rep.symmetry_score >= threshold
    rep.legs_detected = count_legs(canon) if rep.connectivity else 0
    rep.legs = rep.legs_detected == 4
    return rep


def _content_name(data: bytes, fmt: str) -> str:
    return f"{hashlib.sha256(data).hexdigest()[:16]}.{fmt}"


def _filter_payloads(payloads, out_dir: Path, threshold: float, workers: int = 1) -> list[CandidateReport]:
    """payloads: list of (name, bytes, format). Accepted meshes are written to out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(item):
        name, data, fmt = item
        try:
            mesh = parse_mesh(data, fmt)
        except GeometryError as exc:
            rep = CandidateReport(name, symmetry_threshold=threshold)
            rep.notes.append(f"unreadable mesh: {exc}")
            return rep
        rep = check_candidate(mesh, name, threshold)
        if rep.accepted:
            path = out_dir / _content_name(data, fmt)
            if not path.exists() or path.read_bytes() != data:
                path.write_bytes(data)
            rep.path = str(path)
        return rep

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(one, payloads))


def write_ingest_report(reports, out_dir, prompt: str | None = None) -> Path:
    path = Path(out_dir) / "ingest_report.json"
    body = {"prompt": prompt, "accepted": sum(r.accepted for r in reports),
            "candidates": [r.to_dict() for r in reports]}
    path.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n")
    return path


def ingest_local(paths, out_dir, threshold: float = SYMMETRY_THRESHOLD) -> list[CandidateReport]:
    payloads = []
    for p in map(Path, paths):
        if not p.exists():
            raise FileNotFoundError(f"no such mesh file: {p}")
        fmt = p.suffix.lower().lstrip(".")
        if fmt not in MESH_FORMATS:
            load_mesh(p)  # raises the format error
        payloads.append((p.name, p.read_bytes(), fmt))
    reports = _filter_payloads(payloads, Path(out_dir) / "candidates", threshold)
    write_ingest_report(reports, out_dir)
    return reports


@dataclass
class ServiceConfig:
    endpoint: str
    api_key: str
    timeout: float = 120.0
    workers: int = 4

    @classmethod
    def from_env(cls, endpoint: str | None = None, environ=None, **kw) -> "ServiceConfig":
        """The credential comes only from the environment; the endpoint may come from config."""
        environ = os.environ if environ is None else environ
        key = environ.get(API_KEY_ENV, "")
        if not key:
            raise ConfigError(f"{API_KEY_ENV} is not set")
        endpoint = endpoint or environ.get(ENDPOINT_ENV, "")
        if not endpoint:
            raise ConfigError(f"no service endpoint: set {ENDPOINT_ENV} or ingestion.endpoint")
        if urllib.parse.urlparse(endpoint).scheme not in ("http", "https"):
            raise ConfigError(f"endpoint must be an http(s) URL, got {endpoint!r}")
        return cls(endpoint.rstrip("/"), key, **kw)


def _http(req: urllib.request.Request, timeout: float) -> bytes:
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode("utf-8", "replace")[:300]
        raise IngestionError(f"service answered {exc.code} for {req.full_url}: {detail}") from exc
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise IngestionError(f"could not reach {req.full_url}: {exc}") from exc


def request_candidates(spec: PromptSpec, service: ServiceConfig) -> list:
    body = json.dumps({"prompt": spec.rendered_prompt, "num_candidates": spec.candidate_count}).encode()
    req = urllib.request.Request(f"{service.endpoint}/v1/generate", data=body, method="POST",
                                 headers={"Content-Type": "application/json",
                                          "Authorization": f"Bearer {service.api_key}"})
    raw = _http(req, service.timeout)
    try:
        listing = json.loads(raw)
        candidates = listing["candidates"]
        assert isinstance(candidates, list)
    except (ValueError, KeyError, TypeError, AssertionError) as exc:
        raise IngestionError(f"unexpected generate response: {raw[:200]!r}") from exc
    return candidates


def download_candidate(cand: dict, service: ServiceConfig) -> tuple[str, bytes, str]:
    try:
        name, url = str(cand["id"]), cand["url"]
    except (KeyError, TypeError) as exc:
        raise IngestionError(f"candidate entry lacks id or url: {cand!r}") from exc
    fmt = str(cand.get("format", Path(urllib.parse.urlparse(url).path).suffix.lstrip("."))).lower()
    if fmt not in MESH_FORMATS:
        raise IngestionError(f"candidate {name} has unsupported format {fmt!r}")
    full = urllib.parse.urljoin(service.endpoint + "/", url)
    req = urllib.request.Request(full, headers={"Authorization": f"Bearer {service.api_key}"})
    return name, _http(req, service.timeout), fmt


def ingest_remote(spec: PromptSpec, service: ServiceConfig, out_dir,
                  threshold: float = SYMMETRY_THRESHOLD) -> list[CandidateReport]:
    candidates = request_candidates(spec, service)
    with ThreadPoolExecutor(max_workers=max(1, service.workers)) as pool:
        payloads = list(pool.map(lambda c: download_candidate(c, service), candidates))
    reports = _filter_payloads(payloads, Path(out_dir) / "candidates", threshold, service.workers)
    write_ingest_report(reports, out_dir, spec.rendered_prompt)
    return reports
