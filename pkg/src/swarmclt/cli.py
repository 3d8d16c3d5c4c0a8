"""Command line for swarm runs, Monte Carlo experiments, and analyses.

The CLI is a thin client of the HTTP service. Without --server it talks to an
in-process instance of the app through httpx's ASGI transport, so no server
needs to be running; with --server URL it issues the same requests over the
network. Exit codes: 0 success, 1 validation/usage error, 2 runtime error.
"""

import argparse
import asyncio
import json
import os
import sys
import time

import httpx

from ._version import VERSION

OUT_ENV = "SWARMCLT_OUT"


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message, code=1)


class ServiceClient:
    """One request at a time, in-process by default, HTTP when server is set."""

    def __init__(self, server: str = None):
        self.server = server

    def request(self, method: str, path: str, **kw) -> httpx.Response:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                return client.request(method, path, **kw)

        async def go():
            from .service.app import create_app

            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://service",
                                         timeout=None) as client:
                return await client.request(method, path, **kw)

        return asyncio.run(go())


def _check(resp: httpx.Response) -> httpx.Response:
    if resp.status_code < 400:
        return resp
    try:
        detail = resp.json().get("detail", resp.text)
    except Exception:
        detail = resp.text
    code = 1 if resp.status_code in (400, 404, 422) else 2
    raise CliError(f"service error {resp.status_code}: {detail}", code=code)


def _out_path(path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(os.environ.get(OUT_ENV, "."), path)


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise CliError(f"invalid JSON in {path}: {exc}")


def _parse_override(text: str):
    if "=" not in text:
        raise CliError(f"override must be key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(d: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = d
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = value


def _spec_dict_from_args(args) -> dict:
    """Load an experiment spec from a file or a bundled fixture name."""
    ref = args.spec
    if ref is None:
        raise CliError("mc requires --spec (a JSON file or a bundled spec name)")
    if os.path.exists(ref):
        spec = _load_json(ref)
    else:
        from .experiments import fixture_path

        try:
            spec = _load_json(str(fixture_path(ref)))
        except FileNotFoundError:
            raise CliError(f"--spec {ref!r} is neither a file nor a bundled spec")
    for item in args.set or []:
        key, value = _parse_override(item)
        _apply_override(spec, key, value)
    if args.seed is not None:
        _apply_override(spec, "base.seed", args.seed)
    if args.alpha is not None:
        _apply_override(spec, "analysis_params.alpha", args.alpha)
    if args.mode is not None:
        _apply_override(spec, "analysis_params.mode", args.mode)
    return spec


def cmd_run(args, client: ServiceClient) -> int:
    payload = _load_json(args.spec) if args.spec else {}
    if "base" in payload:                       # experiment-spec file: use its engine block
        params = payload["base"]
        objective = payload.get("objective", "himmelblau")
    elif "params" in payload:
        params = payload["params"]
        objective = payload.get("objective", "himmelblau")
    else:
        params = payload
        objective = "himmelblau"
    if not params:
        raise CliError("run requires --spec with engine parameters")
    if args.objective:
        objective = args.objective
    for item in args.set or []:
        key, value = _parse_override(item)
        _apply_override(params, key, value)
    if args.seed is not None:
        params["seed"] = args.seed
    out = args.out or "trajectory.swc"
    req = {"params": params, "objective": objective, "out": out,
           "format": args.format, "classify": args.classify}
    resp = _check(client.request("POST", "/run", json=req))
    body = resp.json()
    print(json.dumps(body, indent=2, sort_keys=True))
    return 0


def cmd_mc(args, client: ServiceClient) -> int:
    spec = _spec_dict_from_args(args)
    if args.out:
        spec["output_dir"] = args.out
    elif not spec.get("output_dir"):
        spec["output_dir"] = spec.get("name", "experiment")
    local = client.server is None
    if local and args.no_wait:
        print("in-process mode has no job store; running synchronously", file=sys.stderr)
    # in-process calls must run inline; against a server, submit and poll so
    # long experiments do not sit on one HTTP request
    req = {"spec": spec, "threads": args.threads, "wait": local}
    resp = _check(client.request("POST", "/mc", json=req))
    job = resp.json()
    if not local:
        if args.no_wait:
            print(json.dumps(job, indent=2, sort_keys=True))
            return 0
        while job["status"] in ("queued", "running"):
            time.sleep(0.5)
            job = _check(client.request("GET", f"/jobs/{job['job_id']}")).json()
    if job["status"] == "error":
        raise CliError(f"experiment failed: {job['error']}", code=2)
    result = job["result"]
    print(json.dumps({"name": result["name"], "analysis": result["analysis"],
                      "estimates": result["estimates"],
                      "warnings": result["warnings"],
                      "output_dir": spec["output_dir"]},
                     indent=2, sort_keys=True))
    return 0


def cmd_analyze(args, client: ServiceClient) -> int:
    analysis_params = {}
    for item in args.set or []:
        key, value = _parse_override(item)
        _apply_override(analysis_params, key, value)
    if args.alpha is not None:
        analysis_params["alpha"] = args.alpha
    if args.mode is not None:
        analysis_params["mode"] = args.mode
    req = {"trajectory_path": args.trajectory, "analysis": args.analysis,
           "analysis_params": analysis_params}
    resp = _check(client.request("POST", "/analyze", json=req))
    body = resp.json()
    text = json.dumps(body, indent=2, sort_keys=True)
    if args.out:
        path = _out_path(args.out)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {path}", file=sys.stderr)
    else:
        print(text)
    return 0


def cmd_regions(args, client: ServiceClient) -> int:
    resp = _check(client.request("GET", "/regions", params={"grid": args.grid}))
    path = _out_path(args.out or "regions.csv")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(resp.text)
    print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_qqplot(args, client: ServiceClient) -> int:
    req = {"csv_path": args.csv, "statistic": args.statistic, "svg": args.svg}
    resp = _check(client.request("POST", "/qqplot", json=req))
    body = resp.json()
    out = args.out or "qq.csv"
    path = _out_path(out)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("theoretical,sample\n")
        for t, s in zip(body["theoretical"], body["sample"]):
            fh.write(f"{t!r},{s!r}\n")
    print(f"wrote {path} (qq_corr={body['qq_corr']:.6f})", file=sys.stderr)
    if args.svg and body.get("svg"):
        svg_path = os.path.splitext(path)[0] + ".svg"
        with open(svg_path, "w") as fh:
            fh.write(body["svg"])
        print(f"wrote {svg_path}", file=sys.stderr)
    return 0


def cmd_serve(args, client: ServiceClient) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="swarmclt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"swarmclt {VERSION}")
    parser.add_argument("--server", default=None,
                        help="service URL; default runs the service in-process")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("run", help="run one swarm and store its trajectory")
    p.add_argument("--spec", help="JSON file with engine parameters")
    p.add_argument("--objective", help="registered objective name")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="trajectory output path")
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--classify", action="store_true",
                   help="include per-particle regime labels")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a parameter (dotted keys allowed)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment spec")
    p.add_argument("--spec", help="experiment spec JSON, or a bundled name "
                                  "(paper_osc, paper_nonosc, paper_swarm, smoke_*)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--alpha", type=float)
    p.add_argument("--mode", choices=("plugin", "known"))
    p.add_argument("--out", help="output directory for result files")
    p.add_argument("--no-wait", action="store_true",
                   help="with --server: submit and print the job id")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_mc)

    p = sub.add_parser("analyze", help="re-run an analysis on a stored trajectory")
    p.add_argument("trajectory", help="trajectory file (binary or CSV)")
    p.add_argument("--analysis", required=True,
                   choices=("Oscillatory", "NonOscillatory", "SwarmFixedStep"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--mode", choices=("plugin", "known"))
    p.add_argument("--out", help="write the stats JSON here instead of stdout")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("regions", help="export the admissibility grid as CSV")
    p.add_argument("--grid", type=int, default=200, help="grid points per axis")
    p.add_argument("--out", help="CSV path (default regions.csv)")
    p.set_defaults(fn=cmd_regions)

    p = sub.add_parser("qqplot", help="QQ data from a statistics CSV")
    p.add_argument("csv", help="h_stats.csv or any CSV with a numeric column")
    p.add_argument("--statistic", help="statistic label or column name")
    p.add_argument("--out", help="QQ CSV path (default qq.csv)")
    p.add_argument("--svg", action="store_true", help="also write an SVG scatter")
    p.set_defaults(fn=cmd_qqplot)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8472)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            parser.print_usage(sys.stderr)
            return 1
        client = ServiceClient(server=args.server)
        return args.fn(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        return 2
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:           # runtime failures map to 2 by contract
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
