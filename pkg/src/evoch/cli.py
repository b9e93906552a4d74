"""Command line entry point.

    evoch run <config>
    evoch verify <config> [--which CHECK ...]
    evoch admissibility <config>
    evoch serve [--host H] [--port P]

Commands run in-process unless ``--server URL`` (or EVOCH_SERVER) is given,
in which case the config is validated locally and sent to a running service.

Exit status: 0 success, 1 verification failure or inadmissible u0,
2 step failure (partial output written), 3 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import scenario
from .config import parse_config
from .diagnostics import TRANSPORT_CHECKS
from .errors import ConfigurationError

EXIT_CONFIG = 3
POLL_SECONDS = 0.5


def _print_admissibility(rep):
    print(f"S_R           {rep.S_R:.10g}")
    print(f"|mean(u0)|    {rep.abs_mean:.10g}")
    print(f"product       {rep.product:.10g}")
    print(f"sample times  {rep.sample_times}")
    print("admissible" if rep.admissible else "NOT admissible (need |mean(u0)| * S_R < 1)")


def _client(url):
    import httpx

    return httpx.Client(base_url=url.rstrip("/"), timeout=None)


def _remote(args, cfg):
    body = cfg.resolved()
    with _client(args.server) as c:
        if args.command == "run":
            st = c.post("/runs", json={"config": body}).raise_for_status().json()
            while st["state"] in ("queued", "running"):
                time.sleep(POLL_SECONDS)
                st = c.get(f"/runs/{st['run_id']}").raise_for_status().json()
            print(f"run {st['run_id']}: {st['state']}, {st['steps_completed']} steps, output in {st['out_dir']}")
            if st["error"]:
                print(st["error"], file=sys.stderr)
            return st["exit_status"]
        if args.command == "verify":
            out = c.post("/verify", json={"config": body, "which": args.which}).raise_for_status().json()
            print(out["table"])
            return out["exit_status"]
        rep = c.post("/admissibility", json=body).raise_for_status().json()
        _print_admissibility(argparse.Namespace(**rep))
        return 0 if rep["admissible"] else 1


def _local(args, cfg):
    if args.command == "run":
        result = scenario.run(cfg)
        last = result.records[-1] if result.records else None
        print(f"{len(result.records) - 1} steps written to {result.out_dir}")
        if last is not None:
            print(f"final t={last.time:.6g} mass={last.mass:.12g} energy={last.energy:.12g} xi={last.xi:.6g}")
        if result.error:
            print(result.error, file=sys.stderr)
        return result.status
    if args.command == "verify":
        rows, status = scenario.verify(cfg, tuple(args.which))
        print(scenario.format_verify_table(rows))
        if status:
            print(f"FAILED: an observed order is below {scenario.MIN_ORDER}", file=sys.stderr)
        return status
    rep = scenario.admissibility(cfg)
    _print_admissibility(rep)
    return 0 if rep.admissible else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="evoch", description="Cahn-Hilliard on evolving surfaces")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("run", "run a scenario and write CSV diagnostics and VTK snapshots"),
        ("verify", "check the transport identities and their convergence order"),
        ("admissibility", "report the shrinkage ratio and the admissibility verdict"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--server", default=os.environ.get("EVOCH_SERVER"), help="service URL (default: run locally)")
        if name == "verify":
            p.add_argument("--which", nargs="+", choices=TRANSPORT_CHECKS, default=list(TRANSPORT_CHECKS))
    s = sub.add_parser("serve", help="start the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        uvicorn.run("evoch.service:app", host=args.host, port=args.port)
        return 0
    try:
        cfg = parse_config(args.config)
        return _remote(args, cfg) if args.server else _local(args, cfg)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
