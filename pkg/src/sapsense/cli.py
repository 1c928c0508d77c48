"""Command-line entry points.

One binary, four subcommands:

  analyze   one photo -> measurements + report on stdout
  generate  render a synthetic corpus with a manifest
  serve     run the ingestion relay until signaled
  simulate  replay a corpus against a relay as a camera would

Exit codes are stable: 0 success, 1 analysis failed, 2 bad input,
3 service error. Settings resolve config file > flags > environment >
defaults.
"""

import argparse
import json
import os
import socket
import sys
from pathlib import Path

from .chip import (CHEMICAL_ORDER, default_layout, default_scales,
                   load_layout, load_scales)
from .errors import (LayoutError, OutOfRange, PipelineError, RelayError,
                     SapsenseError)
from .imaging import AnalysisConfig, ReadingStatus, analyze
from .interpretation import ReadingContext, summarize
from .synth import CorpusSpec, generate_corpus

EXIT_OK = 0
EXIT_ANALYSIS_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_SERVICE_ERROR = 3


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _BadInput("%s %r: %s" % (what, path, exc))


class _BadInput(Exception):
    pass


def _load_layout_scales(args):
    layout = (load_layout(_read_text(args.layout, "layout file"))
              if args.layout else default_layout())
    scales = (load_scales(_read_text(args.scales, "scales file"))
              if args.scales else default_scales())
    return layout, scales


def _print_reading_table(reading, report, out):
    rows = []
    for item in report.interpretations:
        measurement = reading.measurements.get(item.chemical)
        value = ("%.3f" % measurement.value) if measurement else "-"
        rows.append((item.chemical.value, value, item.signal.value,
                     item.headline, item.suggestion))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)),
              file=out)
    print("overall: %s" % report.overall.value, file=out)
    if report.headline:
        print("headline: %s" % report.headline, file=out)


def cmd_analyze(args) -> int:
    try:
        layout, scales = _load_layout_scales(args)
        image_path = Path(args.image)
        if not image_path.exists():
            raise _BadInput("image file %r not found" % args.image)
        data = image_path.read_bytes()
    except (_BadInput, LayoutError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_INPUT

    try:
        reading = analyze(data, layout, scales, AnalysisConfig())
    except PipelineError as exc:
        print(json.dumps({"error": str(exc), "stage": exc.stage})
              if args.format == "json"
              else "analysis failed at stage %r: %s" % (exc.stage, exc),
              file=sys.stderr)
        return EXIT_ANALYSIS_FAILED

    report = summarize(reading, ReadingContext())
    if args.format == "json":
        print(json.dumps({"reading": reading.to_dict(),
                          "report": report.to_dict()},
                         indent=2, sort_keys=True))
    else:
        _print_reading_table(reading, report, sys.stdout)
    if reading.status is ReadingStatus.UNREADABLE:
        return EXIT_ANALYSIS_FAILED
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        if args.spec:
            spec = CorpusSpec.from_dict(json.loads(_read_text(args.spec,
                                                              "spec file")))
        else:
            spec = CorpusSpec()
        overrides = {}
        if args.count is not None:
            overrides["count"] = args.count
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            import dataclasses
            spec = dataclasses.replace(spec, **overrides)
        manifest = generate_corpus(spec, args.out)
    except (_BadInput, OutOfRange, ValueError, KeyError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_INPUT
    print(json.dumps({"count": len(manifest), "out": str(args.out),
                      "manifest": str(Path(args.out) / "manifest.json")},
                     sort_keys=True))
    return EXIT_OK


def _serve_settings(args):
    """config file > flags > environment > defaults."""
    settings = {
        "port": int(os.environ.get("PORT", 8000)),
        "dataDir": os.environ.get("DATA_DIR", "relay-data"),
        "authToken": os.environ.get("AUTH_TOKEN"),
        "workers": 1,
    }
    if args.token is not None:
        settings["authToken"] = args.token
    if args.config:
        loaded = json.loads(_read_text(args.config, "config file"))
        if not isinstance(loaded, dict):
            raise _BadInput("config file must hold a JSON object")
        settings.update({k: v for k, v in loaded.items() if v is not None})
    return settings


def cmd_serve(args) -> int:
    try:
        settings = _serve_settings(args)
    except (_BadInput, json.JSONDecodeError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_INPUT

    # Probing first turns "port already in use" into a clean exit code
    # instead of a stack trace out of the event loop.
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, settings["port"]))
    except OSError as exc:
        print("error: cannot bind port %d: %s" % (settings["port"], exc),
              file=sys.stderr)
        return EXIT_SERVICE_ERROR
    finally:
        probe.close()

    import uvicorn

    from .relay import RelayService, RelayStore, create_app

    service = RelayService(RelayStore(settings["dataDir"]),
                           workers=int(settings.get("workers", 1)))
    service.start()
    app = create_app(service, auth_token=settings.get("authToken"))
    try:
        uvicorn.run(app, host=args.host, port=settings["port"],
                    log_level="warning")
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_SERVICE_ERROR
    finally:
        service.stop()  # drains in-flight work; pending stays on disk
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .relay import simulate_device
    from .synth import CorpusManifest

    try:
        manifest = CorpusManifest.load(args.manifest)
    except (OSError, ValueError, KeyError) as exc:
        print("error: manifest %r: %s" % (args.manifest, exc),
              file=sys.stderr)
        return EXIT_BAD_INPUT

    try:
        report = simulate_device(manifest,
                                 base_url=args.server,
                                 cadence_s=args.cadence_min * 60.0,
                                 time_compression=args.compression,
                                 token=args.token)
    except (RelayError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_SERVICE_ERROR
    except SapsenseError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_BAD_INPUT
    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK if report.reconciled else EXIT_SERVICE_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sapsense",
        description="Colorimetric chip analysis and ingestion relay.")
    sub = parser.add_subparsers(dest="command", required=True)

    analyze_p = sub.add_parser("analyze", help="analyze one chip photo")
    analyze_p.add_argument("image", help="PNG or JPEG file")
    analyze_p.add_argument("--layout", help="layout JSON (default built-in)")
    analyze_p.add_argument("--scales", help="scales JSON (default built-in)")
    analyze_p.add_argument("--format", choices=("json", "table"),
                           default="json")
    analyze_p.set_defaults(func=cmd_analyze)

    generate_p = sub.add_parser("generate", help="render a synthetic corpus")
    generate_p.add_argument("--spec", help="corpus spec JSON")
    generate_p.add_argument("--out", required=True, help="output directory")
    generate_p.add_argument("--count", type=int, default=None)
    generate_p.add_argument("--seed", type=int, default=None)
    generate_p.set_defaults(func=cmd_generate)

    serve_p = sub.add_parser("serve", help="run the ingestion relay")
    serve_p.add_argument("config", nargs="?", default=None,
                         help="JSON config: port, dataDir, authToken, workers")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--token", default=None,
                         help="require this bearer token")
    serve_p.set_defaults(func=cmd_serve)

    simulate_p = sub.add_parser("simulate",
                                help="replay a corpus against a relay")
    simulate_p.add_argument("manifest", help="corpus manifest.json")
    simulate_p.add_argument("--server", default="http://127.0.0.1:8000")
    simulate_p.add_argument("--cadence-min", type=float, default=15.0,
                            dest="cadence_min")
    simulate_p.add_argument("--compression", type=float, default=1.0,
                            help="time compression factor (900 = 1 s/upload)")
    simulate_p.add_argument("--token", default=None)
    simulate_p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
