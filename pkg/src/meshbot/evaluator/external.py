"""External evaluator protocol.

Requests and responses are single JSON objects, one per line, tagged
``"schema": 1``. Two transports are supported:

* ``subprocess``: the request line is written to a child process's stdin and
  the response is read from its stdout. A nonzero exit is an error.
* ``directory``: the request is dropped as ``<dir>/requests/<id>.json`` and
  the response is awaited as ``<dir>/responses/<id>.json``.
"""
from __future__ import annotations

import json
import math
import os
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import EvaluationError, EvaluationTimeout, ProtocolSchemaError
from ..model.assembly import KineticRobotModel
from .reward import PREFERENCES, CommandProfile, compute_fitness
from .search import EvaluationResult

SCHEMA = 1
RESPONSE_FIELDS = ("mean_episode_reward", "velocity_term_sum", "energy_term_sum", "fitness")


@dataclass
class Endpoint:
    kind: str = "subprocess"              # or "directory"
    command: list = field(default_factory=list)
    directory: str | None = None
    timeout: float = 3600.0
    retries: int = 1
    poll: float = 0.02
    max_in_flight: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self):
        if self.kind not in ("subprocess", "directory"):
            raise ValueError("endpoint kind must be 'subprocess' or 'directory'")
        if self.kind == "subprocess" and not self.command:
            raise ValueError("a subprocess endpoint needs a command")
        if self.kind == "directory" and not self.directory:
            raise ValueError("a directory endpoint needs a directory")

    @classmethod
    def from_dict(cls, d: dict) -> "Endpoint":
        d = dict(d)
        if isinstance(d.get("command"), str):
            d["command"] = d["command"].split()
        return cls(**d)


def make_request(request_id: str, urdf: str, command: CommandProfile, preference: str, seed: int) -> dict:
    if preference not in PREFERENCES:
        raise ValueError(f"preference must be one of {PREFERENCES}")
    return {"schema": SCHEMA, "id": request_id, "urdf": str(urdf), "command": command.to_dict(),
            "preference": preference, "seed": int(seed)}


def validate_request(req: dict) -> None:
    if not isinstance(req, dict) or req.get("schema") != SCHEMA:
        raise ProtocolSchemaError("request must be an object with schema 1")
    for key in ("id", "urdf", "command", "preference", "seed"):
        if key not in req:
            raise ProtocolSchemaError(f"request is missing {key!r}")
    if req["preference"] not in PREFERENCES:
        raise ProtocolSchemaError(f"unknown preference {req['preference']!r}")


def parse_response(text: str, request_id: str | None = None) -> dict:
    """Decode and check one response line; raises ProtocolSchemaError."""
    try:
        resp = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise ProtocolSchemaError(f"response is not JSON: {exc}") from exc
    if not isinstance(resp, dict):
        raise ProtocolSchemaError("response must be a JSON object")
    if resp.get("schema") != SCHEMA:
        raise ProtocolSchemaError(f"unsupported response schema {resp.get('schema')!r}")
    if request_id is not None and resp.get("id") != request_id:
        raise ProtocolSchemaError(f"response id {resp.get('id')!r} does not match {request_id!r}")
    if "error" in resp:
        raise EvaluationError(f"evaluator reported: {resp['error']}")
    for key in RESPONSE_FIELDS:
        if key not in resp:
            raise ProtocolSchemaError(f"response is missing {key!r}")
        val = resp[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ProtocolSchemaError(f"response field {key!r} must be a finite number")
    return resp


def _exchange_subprocess(ep: Endpoint, line: str) -> str:
    try:
        proc = subprocess.run(ep.command, input=line + "\n", capture_output=True, text=True, timeout=ep.timeout)
    except subprocess.TimeoutExpired as exc:
        raise EvaluationTimeout(f"evaluator exceeded {ep.timeout} s") from exc
    except OSError as exc:
        raise EvaluationError(f"could not start evaluator: {exc}") from exc
    if proc.returncode != 0:
        raise EvaluationError(f"evaluator exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}")
    lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines:
        raise ProtocolSchemaError("evaluator wrote no response")
    return lines[-1]


def _exchange_directory(ep: Endpoint, request_id: str, line: str) -> str:
    root = Path(ep.directory)
    req_dir, resp_dir = root / "requests", root / "responses"
    req_dir.mkdir(parents=True, exist_ok=True)
    resp_dir.mkdir(parents=True, exist_ok=True)
    resp_path = resp_dir / f"{request_id}.json"
    resp_path.unlink(missing_ok=True)
    tmp = req_dir / f".{request_id}.tmp"
    tmp.write_text(line + "\n")
    tmp.replace(req_dir / f"{request_id}.json")
    deadline = time.monotonic() + ep.timeout
    while time.monotonic() < deadline:
        if resp_path.exists():
            text = resp_path.read_text()
            resp_path.unlink(missing_ok=True)
            return text.strip()
        time.sleep(ep.poll)
    (req_dir / f"{request_id}.json").unlink(missing_ok=True)
    raise EvaluationTimeout(f"no response for {request_id} within {ep.timeout} s")


def exchange(ep: Endpoint, request: dict) -> dict:
    """One request/response round trip with the retry policy applied."""
    validate_request(request)
    line = json.dumps(request, sort_keys=True)
    errors, last = [], None
    for attempt in range(ep.retries + 1):
        try:
            if ep.kind == "subprocess":
                text = _exchange_subprocess(ep, line)
            else:
                text = _exchange_directory(ep, request["id"], line)
            return parse_response(text, request["id"])
        except EvaluationError as exc:
            errors.append(f"attempt {attempt + 1}: {type(exc).__name__}: {exc}")
            last = exc
    raise type(last)("; ".join(errors))


def result_from_response(resp: dict, preference: str, seed: int) -> EvaluationResult:
    """Fitness is recomputed locally from the sums so the preference rule is ours."""
    reward, vel, energy = (float(resp[k]) for k in RESPONSE_FIELDS[:3])
    res = EvaluationResult(reward, vel, energy, compute_fitness(reward, vel, -energy, preference), None, seed,
                           preference, float(resp.get("forward_velocity", 0.0)), int(resp.get("evaluations", 1)))
    res.extra["reported_fitness"] = float(resp["fitness"])
    return res


def external_evaluate(model: KineticRobotModel, command: CommandProfile, preference: str, endpoint: Endpoint,
                      seed: int = 0, work_dir=None, strict: bool = False) -> EvaluationResult:
    """Export ``model`` and ask the external evaluator to score it.

    After the retries are spent the result is a failure marker (fitness 0), or
    an EvaluationError when ``strict`` is set.
    """
    from ..model.urdf import export_urdf

    work_dir = Path(work_dir or Path(endpoint.directory or ".") / "urdf")
    urdf = export_urdf(model, work_dir)
    request = make_request(f"{model.name}-{seed}", urdf.resolve(), command, preference, seed)
    try:
        resp = exchange(endpoint, request)
    except EvaluationError as exc:
        if strict:
            raise
        return EvaluationResult(0.0, 0.0, 0.0, 0.0, None, seed, preference, 0.0, 0, True, {"reason": str(exc)})
    return result_from_response(resp, preference, seed)


def evaluate_many(jobs, endpoint: Endpoint, **kwargs) -> list:
    """``jobs`` is a list of (model, command, preference, seed); order is preserved."""
    with ThreadPoolExecutor(max_workers=max(1, endpoint.max_in_flight)) as pool:
        futures = [pool.submit(external_evaluate, m, c, p, endpoint, s, **kwargs) for m, c, p, s in jobs]
        return [f.result() for f in futures]
