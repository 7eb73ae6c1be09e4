"""Command-line client of the solver service.

Commands build a request, send it to the service (an in-process instance
by default, or a remote one via --server) and render the JSON response to
CSV.  JSON carries floats in shortest round-trip form, so the CSV written
here is byte-identical to one produced server-side.

Exit codes: 0 success, 2 usage error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import math
import sys

import httpx

from .records import (BOUNDARY_COLUMNS, FREE_ENTROPY_COLUMNS, PHASE_COLUMNS,
                      SWEEP_COLUMNS, BoundaryRow, FreeEntropyRow, PhaseCell,
                      SweepRecord, records_to_csv)

USAGE_ERROR = 2
SOLVER_ERROR = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = USAGE_ERROR):
        super().__init__(message)
        self.code = code


class ServiceClient:
    """Thin HTTP client; runs against the in-process app unless a server
    URL is given."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        return asyncio.run(self._request("POST", path, payload))

    async def _request(self, method: str, path: str, payload: dict) -> dict:
        if self.server is None:
            from .service.app import create_app
            transport = httpx.ASGITransport(app=create_app())
            base = "http://dlphase.internal"
        else:
            transport = None
            base = self.server
        try:
            async with httpx.AsyncClient(transport=transport, base_url=base,
                                         timeout=None) as client:
                resp = await client.request(method, path, json=payload)
        except httpx.HTTPError as err:
            raise CliError(f"cannot reach solver service: {err}") from err
        if resp.status_code == 409:
            raise CliError(resp.json().get("detail", "solver did not converge"),
                           code=SOLVER_ERROR)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail")
            except Exception:
                detail = resp.text
            raise CliError(f"request rejected ({resp.status_code}): {detail}")
        return resp.json()


def _records_from_payload(payload: list[dict]) -> list[SweepRecord]:
    return [SweepRecord(**item) for item in payload]


def _boundary_rows_from_payload(payload: list[dict]) -> list[BoundaryRow]:
    rows = []
    for item in payload:
        value = item["value"]
        if value is None:
            value = math.inf if item["status"] == "diverged" else math.nan
        rows.append(BoundaryRow(parameter=item["parameter"], value=value,
                                status=item["status"]))
    return rows


def _write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _read_config(path: str) -> dict:
    """Parse "key = value" lines; keys use the long flag spelling."""
    config = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected key = value")
                key, value = (part.strip() for part in line.split("=", 1))
                config[key.replace("-", "_")] = value
    except OSError as err:
        raise CliError(f"cannot read config file: {err}") from err
    return config


def _merge_config(args: argparse.Namespace, config: dict,
                  casts: dict) -> None:
    for key, value in config.items():
        if key not in casts:
            raise CliError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            try:
                setattr(args, key, casts[key](value))
            except ValueError as err:
                raise CliError(f"bad config value for {key}: {err}") from err


def _apply_defaults(args: argparse.Namespace, defaults: dict) -> None:
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


_SOLVER_CASTS = {"alpha": float, "rho": float, "gamma": float, "theta": float,
                 "sigma_x2": float, "gamma_min": float, "gamma_max": float,
                 "steps": int, "quad_order": int, "damping": float,
                 "tol": float, "max_iter": int, "which": str,
                 "rho_range": str, "alpha_grid": str, "rho_grid": str,
                 "gamma_cap": float, "format": str, "out": str,
                 "boundary_out": str, "server": str}

_SOLVER_DEFAULTS = {"sigma_x2": 1.0, "quad_order": 101, "damping": 0.5,
                    "tol": 1e-10, "max_iter": 100_000}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value file; flags take precedence")
    sub.add_argument("--server", help="URL of a running service; default runs in-process")
    sub.add_argument("--sigma-x2", dest="sigma_x2", type=float)
    sub.add_argument("--quad-order", dest="quad_order", type=int)
    sub.add_argument("--damping", type=float)
    sub.add_argument("--tol", type=float)
    sub.add_argument("--max-iter", dest="max_iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dlphase",
        description="Order parameters, free entropy, and phase boundaries "
                    "of Bayes-optimal sparse dictionary learning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="all branches at one parameter point")
    p_solve.add_argument("--alpha", type=float)
    p_solve.add_argument("--rho", type=float)
    p_solve.add_argument("--gamma", type=float)
    p_solve.add_argument("--theta", type=float)
    p_solve.add_argument("--format", choices=("csv", "json"))
    _add_common(p_solve)

    p_sweep = sub.add_parser("sweep", help="branch records on a gamma grid")
    p_sweep.add_argument("--alpha", type=float)
    p_sweep.add_argument("--rho", type=float)
    p_sweep.add_argument("--theta", type=float)
    p_sweep.add_argument("--gamma-min", dest="gamma_min", type=float)
    p_sweep.add_argument("--gamma-max", dest="gamma_max", type=float)
    p_sweep.add_argument("--steps", type=int)
    p_sweep.add_argument("--out")
    _add_common(p_sweep)

    p_fe = sub.add_parser("free-entropy", help="free-entropy branches on a gamma grid")
    p_fe.add_argument("--alpha", type=float)
    p_fe.add_argument("--rho", type=float)
    p_fe.add_argument("--theta", type=float)
    p_fe.add_argument("--gamma-min", dest="gamma_min", type=float)
    p_fe.add_argument("--gamma-max", dest="gamma_max", type=float)
    p_fe.add_argument("--steps", type=int)
    p_fe.add_argument("--out")
    _add_common(p_fe)

    p_b = sub.add_parser("boundary", help="critical lines gamma-s/gamma-f/gamma-m/rho-m")
    p_b.add_argument("--which", choices=("gamma-s", "gamma-f", "gamma-m", "rho-m"))
    p_b.add_argument("--alpha", type=float)
    p_b.add_argument("--rho", type=float)
    p_b.add_argument("--rho-range", dest="rho_range",
                     help="start:stop:count sweep of rho")
    p_b.add_argument("--gamma-cap", dest="gamma_cap", type=float)
    p_b.add_argument("--out")
    _add_common(p_b)

    p_pd = sub.add_parser("phase-diagram", help="region labels plus spinodal polyline")
    p_pd.add_argument("--alpha-grid", dest="alpha_grid", help="start:stop:count")
    p_pd.add_argument("--rho-grid", dest="rho_grid", help="start:stop:count")
    p_pd.add_argument("--out")
    p_pd.add_argument("--boundary-out", dest="boundary_out",
                      help="output for the spinodal polyline "
                           "(default: <out> with _boundary suffix)")
    _add_common(p_pd)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def _require(args: argparse.Namespace, names: list[str]) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise CliError(f"missing required flags: {flags}")


def _controls(args: argparse.Namespace) -> dict:
    return {"quad_order": args.quad_order, "damping": args.damping,
            "tol": args.tol, "max_iter": args.max_iter}


def _cmd_solve(args) -> int:
    _require(args, ["alpha", "rho", "gamma"])
    client = ServiceClient(args.server)
    payload = {"alpha": args.alpha, "rho": args.rho, "gamma": args.gamma,
               "theta": args.theta, "sigma_x2": args.sigma_x2,
               **_controls(args)}
    data = client.post("/solve", payload)
    if data["region"] == "III":
        print("note: alpha <= rho lies in region III; "
              "dictionary learning is impossible there", file=sys.stderr)
    if (args.format or "csv") == "json":
        sys.stdout.write(json.dumps(data, indent=2) + "\n")
    else:
        records = _records_from_payload(data["records"])
        sys.stdout.write(records_to_csv(records, SWEEP_COLUMNS))
    return 0


def _cmd_sweep(args) -> int:
    _require(args, ["alpha", "rho", "gamma_min", "gamma_max", "steps"])
    client = ServiceClient(args.server)
    payload = {"alpha": args.alpha, "rho": args.rho, "theta": args.theta,
               "sigma_x2": args.sigma_x2, "gamma_min": args.gamma_min,
               "gamma_max": args.gamma_max, "steps": args.steps,
               **_controls(args)}
    data = client.post("/sweep", payload)
    records = _records_from_payload(data["records"])
    _write_output(records_to_csv(records, SWEEP_COLUMNS), args.out)
    return 0


def _cmd_free_entropy(args) -> int:
    _require(args, ["alpha", "rho", "gamma_min", "gamma_max", "steps"])
    client = ServiceClient(args.server)
    payload = {"alpha": args.alpha, "rho": args.rho, "theta": args.theta,
               "sigma_x2": args.sigma_x2, "gamma_min": args.gamma_min,
               "gamma_max": args.gamma_max, "steps": args.steps,
               **_controls(args)}
    data = client.post("/free-entropy", payload)
    rows = [FreeEntropyRow(**item) for item in data["rows"]]
    _write_output(records_to_csv(rows, FREE_ENTROPY_COLUMNS), args.out)
    return 0


def _cmd_boundary(args) -> int:
    _require(args, ["which", "alpha"])
    if args.which in ("gamma-s", "gamma-m") and \
            args.rho is None and args.rho_range is None:
        raise CliError(f"{args.which} requires --rho or --rho-range")
    client = ServiceClient(args.server)
    payload = {"which": args.which, "alpha": args.alpha, "rho": args.rho,
               "rho_range": args.rho_range,
               "tol": args.tol if args.tol is not None else 1e-3,
               "sigma_x2": args.sigma_x2,
               "gamma_cap": args.gamma_cap or 1e3,
               "quad_order": args.quad_order}
    data = client.post("/boundary", payload)
    rows = _boundary_rows_from_payload(data["rows"])
    _write_output(records_to_csv(rows, BOUNDARY_COLUMNS), args.out)
    return 0


def _cmd_phase_diagram(args) -> int:
    _require(args, ["alpha_grid", "rho_grid"])
    client = ServiceClient(args.server)
    payload = {"alpha_grid": args.alpha_grid, "rho_grid": args.rho_grid,
               "sigma_x2": args.sigma_x2, "quad_order": args.quad_order,
               "boundary_tol": args.tol if args.tol is not None else 1e-3}
    data = client.post("/phase-diagram", payload)
    cells = [PhaseCell(**item) for item in data["cells"]]
    _write_output(records_to_csv(cells, PHASE_COLUMNS), args.out)
    boundary_out = args.boundary_out
    if boundary_out is None and args.out not in (None, "-"):
        stem, dot, ext = args.out.rpartition(".")
        boundary_out = f"{stem}_boundary.{ext}" if dot else f"{args.out}_boundary"
    rows = _boundary_rows_from_payload(data["boundary"])
    _write_output(records_to_csv(rows, BOUNDARY_COLUMNS), boundary_out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


_HANDLERS = {"solve": _cmd_solve, "sweep": _cmd_sweep,
             "free-entropy": _cmd_free_entropy, "boundary": _cmd_boundary,
             "phase-diagram": _cmd_phase_diagram, "serve": _cmd_serve}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            _merge_config(args, _read_config(args.config), _SOLVER_CASTS)
        if args.command != "serve":
            _apply_defaults(args, _SOLVER_DEFAULTS)
        return _HANDLERS[args.command](args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
