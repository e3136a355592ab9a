#!/usr/bin/env python3
"""Minimal external backend: reads a 16-bit PGM on stdin and writes it back.

Template for wrapping a real single-image SR model:

    lfsr superres --backend "external:python3 scripts/passthrough_backend.py" ...
"""
import argparse
import sys

ap = argparse.ArgumentParser()
ap.add_argument("--scale", type=int, required=True)
ap.parse_args()
sys.stdout.buffer.write(sys.stdin.buffer.read())
