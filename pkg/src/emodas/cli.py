"""Command line interface.

Every subcommand is a thin client of the HTTP service. By default the app
runs in-process (no server needed) over an ASGI transport; ``--url`` points
the same commands at a remote instance instead. Exit codes: 0 success,
1 input/configuration problems, 2 transport failures and internal errors.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from . import __version__
from .config import load_config
from .errors import EmodasError


class CliFailure(Exception):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


def _request(args, method: str, path: str, payload: dict | None = None) -> dict:
    if args.url:
        with httpx.Client(base_url=args.url, timeout=None) as client:
            response = client.request(method, path, json=payload)
    else:
        from .service import create_app

        app = create_app(config_path=args.config)

        async def call():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://emodas.internal", timeout=None
            ) as client:
                return await client.request(method, path, json=payload)

        response = asyncio.run(call())
    if 400 <= response.status_code < 500:
        try:
            body = response.json()
            message = f"{body.get('error', 'request rejected')}: {body.get('detail', response.text)}"
        except ValueError:
            message = response.text
        raise CliFailure(message, 1)
    if response.status_code >= 500:
        raise CliFailure(f"HTTP {response.status_code}: {response.text}", 2)
    return response.json()


def cmd_build_network(args) -> int:
    data = _request(
        args,
        "POST",
        "/network/build",
        {"edges_path": args.edges, "out_path": args.out},
    )
    print(f"nodes: {data['nodes']}")
    print(f"edges: {data['edges']}")
    print(
        f"largest component: {data['largest_component_nodes']} nodes, "
        f"{data['largest_component_edges']} edges"
    )
    if data.get("out_path"):
        print(f"written: {data['out_path']}")
    return 0


def cmd_features(args) -> int:
    data = _request(
        args,
        "POST",
        "/features",
        {
            "network_path": args.network,
            "recalls_path": args.recalls,
            "lemma_map_path": args.lemma_map,
            "mask": args.mask,
            "out_path": args.out,
        },
    )
    print(
        f"{data['n_records']} records, lexicon size {data['lexicon_size']}, "
        f"vector dim {data['vector_dim']} (mask {data['mask']})"
    )
    if data["n_all_zero"]:
        print(f"warning: {data['n_all_zero']} all-zero feature vectors")
    if data.get("out_path"):
        print(f"written: {data['out_path']}")
    return 0


def cmd_train(args) -> int:
    data = _request(
        args,
        "POST",
        "/train",
        {
            "network_path": args.network,
            "recalls_path": args.recalls,
            "lemma_map_path": args.lemma_map,
            "out_path": args.out,
        },
    )
    print(f"trained on {data['n_records']} records (mask {data['mask']})")
    for construct, mse in data["final_train_mse"].items():
        print(f"  {construct}: final train MSE {mse:.4f}")
    print(f"written: {data['out_path']}")
    return 0


def cmd_cv(args) -> int:
    data = _request(
        args,
        "POST",
        "/cv",
        {
            "network_path": args.network,
            "recalls_path": args.recalls,
            "lemma_map_path": args.lemma_map,
            "mask": args.mask,
            "out_path": args.out,
        },
    )
    for row in data["rows"]:
        r2 = "undefined" if row["r2_mean"] is None else f"{row['r2_mean']:.3f}"
        r2_std = "" if row["r2_std"] is None else f" ± {row['r2_std']:.3f}"
        print(
            f"{row['construct']:<10} mask {row['mask']}: "
            f"MSE {row['mse_mean']:.3f} ± {row['mse_std']:.3f}, "
            f"R² {r2}{r2_std}"
        )
    if data.get("out_path"):
        print(f"written: {data['out_path']}")
    return 0


def _read_documents(source: str) -> list[dict]:
    if source == "-":
        lines = sys.stdin.read().splitlines()
        origin = "<stdin>"
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()
        origin = source
    documents = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CliFailure(f"{origin}:{lineno}: invalid JSON ({exc})")
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise CliFailure(
                f"{origin}:{lineno}: each line needs 'id' and 'text' fields"
            )
        documents.append({"id": str(obj["id"]), "text": str(obj["text"])})
    return documents


def cmd_score(args) -> int:
    documents = _read_documents(args.input)
    if documents:
        data = _request(
            args,
            "POST",
            "/score",
            {
                "bundle_path": args.model,
                "network_path": args.network,
                "resource_dir": args.resources,
                "threshold": args.threshold,
                "documents": documents,
            },
        )
        rows = data["documents"]
    else:
        rows = []
    out_lines = [json.dumps(row, sort_keys=True) for row in rows]
    if args.out == "-":
        for line in out_lines:
            print(line)
    else:
        Path(args.out).write_text(
            "".join(line + "\n" for line in out_lines), encoding="utf-8"
        )
        from .pipeline import write_manifest

        write_manifest(args.out, load_config(args.config))
        print(f"scored {len(rows)} documents -> {args.out}", file=sys.stderr)
    return 0


def cmd_validate(args) -> int:
    data = _request(
        args,
        "POST",
        "/validate",
        {
            "recalls_path": args.recalls,
            "vad_path": args.vad,
            "out_path": args.out,
        },
    )
    report = data["report"]
    for pair, value in report["correlations"].items():
        if "skipped" in value:
            print(f"correlation {pair}: skipped ({value['skipped']})")
        else:
            print(f"correlation {pair}: r = {value['r']:.3f} (p = {value['p']:.4g})")
    for construct, test in report["group_tests"].items():
        if "skipped" in test:
            print(f"{construct} ({test['dimension']}): skipped ({test['skipped']})")
        else:
            print(
                f"{construct} ({test['dimension']}): H = {test['h']:.3f} "
                f"(p = {test['p']:.4g}), median high {test['median_high']:.3f} "
                f"vs low {test['median_low']:.3f}"
            )
    if report.get("out_path"):
        print(f"written: {report['out_path']}")
    return 0


def cmd_selftest(args) -> int:
    data = _request(args, "POST", "/selftest")
    for check in data["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {check['name']}: {check['detail']}")
    return 0 if data["passed"] else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(config_path=args.config), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emodas",
        description="Estimate depression/anxiety/stress levels from emotional "
        "word sequences.",
    )
    parser.add_argument("--version", action="version", version=f"emodas {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON file")
    common.add_argument(
        "--url", help="remote service URL (default: run the service in-process)"
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser(
        "build-network", parents=[common], help="build the semantic network"
    )
    p.add_argument("--edges", required=True, help="cue/response/count edge list (TSV)")
    p.add_argument("--out", help="write a network cache JSON")
    p.set_defaults(func=cmd_build_network)

    p = sub.add_parser(
        "features", parents=[common], help="extract recall feature vectors"
    )
    p.add_argument("--network", required=True, help="edge list or network cache")
    p.add_argument("--recalls", required=True, help="recall CSV")
    p.add_argument("--lemma-map", dest="lemma_map", help="form→lemma TSV")
    p.add_argument("--mask", help="feature mask name")
    p.add_argument("--out", help="write the full feature table CSV")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser(
        "train", parents=[common], help="train per-construct regressors"
    )
    p.add_argument("--network", required=True)
    p.add_argument("--recalls", required=True)
    p.add_argument("--lemma-map", dest="lemma_map")
    p.add_argument("--out", required=True, help="model bundle output (.npz)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser(
        "cv", parents=[common], help="repeated k-fold cross-validation"
    )
    p.add_argument("--network", required=True)
    p.add_argument("--recalls", required=True)
    p.add_argument("--lemma-map", dest="lemma_map")
    p.add_argument("--mask", help="feature mask name")
    p.add_argument("--out", help="metrics CSV")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("score", parents=[common], help="score raw text documents")
    p.add_argument("--model", required=True, help="model bundle (.npz)")
    p.add_argument("--network", required=True)
    p.add_argument("--resources", help="parser resource directory")
    p.add_argument("--threshold", type=float, help="similarity threshold override")
    p.add_argument(
        "--input", default="-", help="JSONL documents ({'id','text'}), '-' for stdin"
    )
    p.add_argument("--out", default="-", help="JSONL output, '-' for stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser(
        "validate", parents=[common], help="corpus construct-validity report"
    )
    p.add_argument("--recalls", required=True)
    p.add_argument("--vad", help="valence/arousal TSV")
    p.add_argument("--out", help="report JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("selftest", parents=[common], help="run built-in diagnostics")
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return 1
    try:
        return args.func(args)
    except CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except EmodasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except httpx.HTTPError as exc:
        print(f"error: request failed ({exc})", file=sys.stderr)
        return 2
    except Exception as exc:  # anything unexpected is an internal error
        print(f"error: internal failure ({exc})", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
