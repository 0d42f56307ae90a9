import argparse
import sys

from .adapter import AdapterConfig, serve_planner


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="planner-adapter")
    parser.add_argument("--mode", choices=("oracle-echo", "stub"), default="oracle-echo")
    parser.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    parser.add_argument("--endpoint", default="", help="harness base URL (oracle-echo mode)")
    parser.add_argument("--port", type=int, default=0, help="listen port (http transport)")
    parser.add_argument("--timeout", type=float, default=60.0)
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig(
            mode=args.mode,
            transport=args.transport,
            endpoint=args.endpoint,
            port=args.port,
            timeout=args.timeout,
        )
    except ValueError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    serve_planner(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
