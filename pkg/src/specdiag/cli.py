"""Command line client for the diagnosis service.

Every subcommand builds a request and posts it to the HTTP API; by
default an in-process instance of the service handles it, so no server
needs to run.  Point --server (or SPECDIAG_SERVER) at a remote instance
to use one.  File reading and writing stay on the client side.

Exit codes: 0 success (for diagnose: a diagnosis was found), 1 the
input was already consistent, 2 any error.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import click
import httpx

from .ingest import detect_kb_format


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    with warnings.catch_warnings():
        # starlette nags about its preferred http client; not actionable here
        warnings.filterwarnings("ignore", message=".*testclient.*", category=UserWarning)
        from fastapi.testclient import TestClient

    from .service import create_app

    return TestClient(create_app())


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(2) from exc


def _kb_payload(path: str) -> dict:
    text = _read(path)
    return {"kb": text, "kb_format": detect_kb_format(text)}


def _post(server: str | None, endpoint: str, payload: dict) -> dict:
    try:
        with _client(server) as client:
            response = client.post(endpoint, json=payload)
    except httpx.HTTPError as exc:
        click.echo(f"error: cannot reach service: {exc}", err=True)
        raise SystemExit(2) from exc
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        click.echo(f"error: {detail}", err=True)
        raise SystemExit(2)
    return response.json()


@click.group()
@click.option(
    "--server",
    default=None,
    envvar="SPECDIAG_SERVER",
    metavar="URL",
    help="Service base URL; default runs the service in-process.",
)
@click.version_option()
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Diagnose over-constrained requirement sets against a KB."""
    ctx.obj = server


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(), help="KB file (grammar or DIMACS).")
@click.option("--reqs", "reqs_path", default=None, type=click.Path(), help="Optional requirements file.")
@click.pass_obj
def check(server: str | None, kb_path: str, reqs_path: str | None) -> None:
    """Check consistency of the KB, optionally with requirements."""
    payload = _kb_payload(kb_path)
    if reqs_path is not None:
        payload["requirements"] = _read(reqs_path)
    data = _post(server, "/check", payload)
    if data["consistent"]:
        click.echo("consistent")
        raise SystemExit(0)
    click.echo("inconsistent")
    raise SystemExit(1)


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(), help="KB file (grammar or DIMACS).")
@click.option("--reqs", "reqs_path", required=True, type=click.Path(), help="Requirements file.")
@click.option("--parallel", is_flag=True, help="Use the speculative provider.")
@click.option("--cores", type=int, default=None, help="Core budget; needs --parallel.")
@click.option("--maxgcc", type=int, default=None, help="Speculation budget per wave; needs --parallel.")
@click.option("--trace", is_flag=True, help="Stream lookup-table events.")
@click.pass_obj
def diagnose(
    server: str | None,
    kb_path: str,
    reqs_path: str,
    parallel: bool,
    cores: int | None,
    maxgcc: int | None,
    trace: bool,
) -> None:
    """Remove a preferred minimal requirement set to restore consistency."""
    if not parallel and (cores is not None or maxgcc is not None):
        raise click.UsageError("--cores and --maxgcc require --parallel")
    payload = _kb_payload(kb_path)
    payload.update(
        {
            "requirements": _read(reqs_path),
            "parallel": parallel,
            "cores": cores,
            "max_gcc": maxgcc,
            "trace": trace,
        }
    )
    data = _post(server, "/diagnose", payload)
    for line in data["trace"]:
        click.echo(line)
    if data["consistent"]:
        click.echo("consistent - empty diagnosis")
        raise SystemExit(1)
    click.echo(f"diagnosis: {' '.join(data['diagnosis'])}")
    click.echo(f"retained: {' '.join(data['retained'])}")
    click.echo(f"solver calls: {data['solver_calls']}")
    click.echo(f"lookup hits: {data['lookup_hits']}")
    click.echo(f"wall time: {data['wall_s']:.4f} s")
    raise SystemExit(0)


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(), help="KB file (grammar or DIMACS).")
@click.option("--reqs", "reqs_path", required=True, type=click.Path(), help="Requirements file.")
@click.option("--max-n", type=int, default=20, show_default=True, help="Enumeration guard on requirement count.")
@click.pass_obj
def oracle(server: str | None, kb_path: str, reqs_path: str, max_n: int) -> None:
    """List all minimal conflicts and diagnoses by brute force."""
    payload = _kb_payload(kb_path)
    payload.update({"requirements": _read(reqs_path), "max_n": max_n})
    data = _post(server, "/oracle", payload)
    if not data["conflicts"]:
        click.echo("no conflicts")
        raise SystemExit(0)
    click.echo("conflicts:")
    for ids in data["conflicts"]:
        click.echo("  {" + ", ".join(ids) + "}")
    click.echo("diagnoses:")
    for ids in data["diagnoses"]:
        click.echo("  {" + ", ".join(ids) + "}")
    click.echo("preferred: {" + ", ".join(data["preferred"]) + "}")
    raise SystemExit(0)


@main.command("gen-reqs")
@click.option("--kb", "kb_path", required=True, type=click.Path(), help="KB file (grammar or DIMACS).")
@click.option("--count", type=int, required=True, help="How many requirement sets to synthesize.")
@click.option("--card", default="1:4", show_default=True, metavar="A:B", help="Cardinality range.")
@click.option("--seed", type=int, required=True, help="RNG seed; same seed, same files.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Directory for req_<i>.txt files.")
@click.pass_obj
def gen_reqs(server: str | None, kb_path: str, count: int, card: str, seed: int, out_dir: str) -> None:
    """Synthesize requirement sets that conflict with the KB."""
    try:
        low, high = (int(part) for part in card.split(":", 1))
    except ValueError:
        raise click.UsageError(f"bad --card {card!r}, expected A:B")
    payload = _kb_payload(kb_path)
    payload.update({"count": count, "card_min": low, "card_max": high, "seed": seed})
    data = _post(server, "/gen-reqs", payload)
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    for item in data["files"]:
        (target / item["name"]).write_text(item["content"], encoding="utf-8")
        click.echo(f"{item['name']} {item['cardinality']}")
    raise SystemExit(0)


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(), help="KB file (grammar or DIMACS).")
@click.option("--reqs-dir", required=True, type=click.Path(), help="Directory of requirement files.")
@click.option("--cores", default="1", show_default=True, metavar="LIST", help="Comma-separated core counts.")
@click.option("--maxgcc", default="cores-1", show_default=True, help="Budget policy: cores-1 or fixed:<k>.")
@click.option("--repeat", type=int, default=3, show_default=True, help="Repetitions per task and core count.")
@click.option("--latency", type=float, default=0.0, show_default=True, help="Injected latency per check, milliseconds.")
@click.option("--out", "out_path", required=True, type=click.Path(), help="Raw CSV path; aggregate lands next to it.")
@click.pass_obj
def bench(
    server: str | None,
    kb_path: str,
    reqs_dir: str,
    cores: str,
    maxgcc: str,
    repeat: int,
    latency: float,
    out_path: str,
) -> None:
    """Benchmark diagnosis runtime over a directory of requirement files."""
    try:
        core_list = [int(part) for part in cores.split(",") if part.strip()]
    except ValueError:
        raise click.UsageError(f"bad --cores {cores!r}, expected e.g. 1,2,4")
    if not core_list:
        raise click.UsageError("--cores must name at least one core count")
    directory = Path(reqs_dir)
    if not directory.is_dir():
        click.echo(f"error: requirements dir not found: {reqs_dir}", err=True)
        raise SystemExit(2)
    tasks = [
        {"name": path.name, "content": path.read_text(encoding="utf-8")}
        for path in sorted(directory.iterdir())
        if path.is_file()
    ]
    if not tasks:
        click.echo(f"error: no requirement files in {reqs_dir}", err=True)
        raise SystemExit(2)
    payload = _kb_payload(kb_path)
    payload.update(
        {
            "tasks": tasks,
            "cores": core_list,
            "maxgcc": maxgcc,
            "repetitions": repeat,
            "latency_s": latency / 1000.0,
        }
    )
    data = _post(server, "/bench", payload)
    for error in data["errors"]:
        click.echo(f"warning: {error['task']}: {error['message']}", err=True)
    if not data["records"]:
        click.echo("error: no benchmark records produced", err=True)
        raise SystemExit(2)
    raw = Path(out_path)
    raw.write_text(data["raw_csv"], encoding="utf-8")
    agg = raw.with_name(raw.stem + "_aggregate" + (raw.suffix or ".csv"))
    agg.write_text(data["aggregate_csv"], encoding="utf-8")
    click.echo(f"{'card':>4} {'cores':>5} {'r_mean':>10} {'speedup':>8} {'eff':>6} {'eff_alt':>7}")
    for row in data["aggregate"]:
        s = "" if row["speedup"] is None else f"{row['speedup']:.2f}"
        e = "" if row["efficiency"] is None else f"{row['efficiency']:.2f}"
        ea = "" if row["efficiency_alt"] is None else f"{row['efficiency_alt']:.2f}"
        click.echo(
            f"{row['card']:>4} {row['cores']:>5} {row['r_mean']:>10.4f} {s:>8} {e:>6} {ea:>7}"
        )
    click.echo(f"wrote {raw} and {agg}")
    raise SystemExit(0)


if __name__ == "__main__":
    main()
