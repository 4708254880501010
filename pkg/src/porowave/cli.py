"""Thin command-line client of the scenario service.

By default every command talks to an in-process instance of the FastAPI app,
so no server is needed; ``--server URL`` points the same commands at a
running deployment.  Exit codes: 0 success (converged where applicable),
1 configuration/validation error, 2 solver nonconvergence.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NONCONVERGED = 2


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _load_raw_config(config_path, seed):
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as err:
        click.echo(f"config parse error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    if not isinstance(raw, dict):
        click.echo(f"config file {config_path} does not contain a mapping", err=True)
        sys.exit(EXIT_CONFIG)
    if seed is not None:
        raw["seed"] = seed
    return raw


def _post(client, path, payload):
    resp = client.post(path, json=payload)
    if resp.status_code in (400, 422):
        detail = resp.json().get("detail")
        click.echo(f"configuration rejected: {detail}", err=True)
        sys.exit(EXIT_CONFIG)
    if resp.status_code != 200:
        click.echo(f"service error {resp.status_code}: {resp.text}", err=True)
        sys.exit(EXIT_CONFIG)
    return resp.json()


def canonical_json(obj):
    """Deterministic JSON rendering used for all report artifacts."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(out_dir, name, text):
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


@click.group()
def main():
    """Periodic hysteretic porous-media wave scenarios."""


_common = [
    click.option("--out-dir", default=".", show_default=True, help="Directory for artifacts."),
    click.option("--server", default=None, help="Service base URL; default runs in-process."),
    click.option("--threads", default=1, show_default=True, type=int, help="Parallel sweep rows."),
    click.option("--seed", default=None, type=int, help="Seed recorded for randomized corpora."),
]


def common_options(cmd):
    for opt in reversed(_common):
        cmd = opt(cmd)
    return cmd


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@common_options
def run(config_path, out_dir, server, threads, seed):
    """Solve one scenario and write report.json / norms.csv / probes.csv."""
    raw = _load_raw_config(config_path, seed)
    with _client(server) as client:
        result = _post(client, "/run", {"config": raw})
    out = result["report"].get("config", {}).get("output", {})
    report_path = _write(out_dir, out.get("report_name", "report.json"), canonical_json(result["report"]))
    _write(out_dir, out.get("norms_name", "norms.csv"), result["norms_csv"])
    if result.get("probes_csv"):
        _write(out_dir, out.get("probes_name", "probes.csv"), result["probes_csv"])
    conf = result["report"]["confinement"]
    click.echo(
        f"{result['status']}: delta={result['report']['delta']:.6g} "
        f"max|p|={conf['max_abs_p']:.6g} R={conf['R']:.6g} -> {report_path}"
    )
    sys.exit(EXIT_OK if result["status"] == "converged" else EXIT_NONCONVERGED)


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--param", default="delta", show_default=True, help="Sweep parameter.")
@click.option("--values", required=True, help="Comma-separated target values.")
@common_options
def sweep(config_path, out_dir, server, threads, seed, param, values):
    """Run the scenario across amplitudes and write the combined sweep.csv."""
    if param != "delta":
        click.echo(f"unsupported sweep parameter '{param}'", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        value_list = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as err:
        click.echo(f"bad --values list: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    raw = _load_raw_config(config_path, seed)
    with _client(server) as client:
        result = _post(
            client, "/sweep", {"config": raw, "param": param, "values": value_list, "threads": threads}
        )
    out_names = raw.get("output", {}) if isinstance(raw.get("output"), dict) else {}
    csv_path = _write(out_dir, out_names.get("sweep_name", "sweep.csv"), result["csv"])
    _write(out_dir, "sweep.json", canonical_json(result))
    star = result.get("empirical_delta_star")
    click.echo(f"swept {len(value_list)} values; empirical delta* = {star} -> {csv_path}")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--server", default=None, help="Service base URL; default runs in-process.")
@click.option("--seed", default=None, type=int, help="Seed recorded for randomized corpora.")
def validate(config_path, server, seed):
    """Density/basis admissibility checks only; no solve."""
    raw = _load_raw_config(config_path, seed)
    with _client(server) as client:
        result = _post(client, "/validate", {"config": raw})
    for key, val in result["density_constants"].items():
        click.echo(f"{key} = {val:.9g}")
    click.echo(f"delta = {result['delta']:.9g}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Launch the scenario service."""
    import uvicorn

    uvicorn.run("porowave.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
