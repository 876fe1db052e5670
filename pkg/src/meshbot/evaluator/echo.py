"""Loopback evaluator used to exercise the external protocol.

    python -m meshbot.evaluator.echo [--fitness F] [--sleep S] [--mode ok|malformed|missing|crash]
    python -m meshbot.evaluator.echo --watch DIR [--max-requests N]

Reads request lines from stdin (or request files from DIR/requests) and answers
each with fixed sums and the given fitness.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path


def respond(request: dict, fitness: float, mode: str) -> str:
    if mode == "malformed":
        return "{not json"
    body = {"schema": 1, "id": request.get("id"), "mean_episode_reward": fitness, "velocity_term_sum": 0.0,
            "energy_term_sum": 0.0, "fitness": fitness, "echo": request}
    if mode == "missing":
        del body["fitness"]
    return json.dumps(body)


def serve_stdin(args) -> int:
    for line in sys.stdin:
        if not line.strip():
            continue
        if args.sleep:
            time.sleep(args.sleep)
        if args.mode == "crash":
            print("evaluator crashed", file=sys.stderr)
            return 3
        print(respond(json.loads(line), args.fitness, args.mode), flush=True)
    return 0


def serve_directory(args) -> int:
    root = Path(args.watch)
    req_dir, resp_dir = root / "requests", root / "responses"
    req_dir.mkdir(parents=True, exist_ok=True)
    resp_dir.mkdir(parents=True, exist_ok=True)
    served = 0
    deadline = time.monotonic() + args.idle_timeout
    while args.max_requests <= 0 or served < args.max_requests:
        pending = sorted(req_dir.glob("*.json"))
        if not pending:
            if time.monotonic() > deadline:
                break
            time.sleep(0.01)
            continue
        for path in pending:
            request = json.loads(path.read_text())
            path.unlink()
            if args.sleep:
                time.sleep(args.sleep)
            tmp = resp_dir / f".{path.stem}.tmp"
            tmp.write_text(respond(request, args.fitness, args.mode) + "\n")
            tmp.replace(resp_dir / path.name)
            served += 1
        deadline = time.monotonic() + args.idle_timeout
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="meshbot-echo", description=__doc__.splitlines()[0])
    ap.add_argument("--fitness", type=float, default=1.0)
    ap.add_argument("--sleep", type=float, default=0.0)
    ap.add_argument("--mode", choices=("ok", "malformed", "missing", "crash"), default="ok")
    ap.add_argument("--watch", help="serve a directory exchange instead of stdin")
    ap.add_argument("--max-requests", type=int, default=0)
    ap.add_argument("--idle-timeout", type=float, default=10.0)
    args = ap.parse_args(argv)
    return serve_directory(args) if args.watch else serve_stdin(args)


if __name__ == "__main__":
    sys.exit(main())
