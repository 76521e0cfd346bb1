"""Command-line front end: plot_results <spec.json>.

The spec file holds one plot spec object or a list of them; each spec
produces one image.  Matplotlib runs on the Agg backend unless the
environment already chose one, so the tool works without a display.
"""

import argparse
import os
import sys


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plot_results",
        description="Render convergence and conservation figures from "
        "solver CSV output.",
    )
    parser.add_argument("spec", help="JSON file of plot specs")
    args = parser.parse_args(argv)

    os.environ.setdefault("MPLBACKEND", "Agg")
    from .plots import PlotError, load_specs, plot

    try:
        for spec in load_specs(args.spec):
            result = plot(spec)
            print(f"wrote {result['output']}")
    except (PlotError, OSError) as exc:
        print(f"plot_results: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
