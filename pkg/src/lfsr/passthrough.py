"""Pass-through backend: echoes the PGM it receives.

Usage: ``python -m lfsr.passthrough --scale 3 < in.pgm > out.pgm``
"""

import argparse
import sys


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scale", type=int, required=True)
    ap.parse_args(argv)
    sys.stdout.buffer.write(sys.stdin.buffer.read())
    sys.stdout.buffer.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
