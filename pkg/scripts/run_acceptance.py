#!/usr/bin/env python3
"""Print one PASS/FAIL line per acceptance criterion; exit 1 if any fails."""

import runpy
from pathlib import Path

runpy.run_path(str(Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"),
               run_name="__main__")
