#!/usr/bin/env python3
"""Regenerate docs/PARAMETERS.md from the live registry."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from thyia.params import write_parameter_reference  # noqa: E402

if __name__ == "__main__":
    target = os.path.join(os.path.dirname(__file__), "..", "docs", "PARAMETERS.md")
    os.makedirs(os.path.dirname(target), exist_ok=True)
    write_parameter_reference(target)
    print(f"wrote {os.path.normpath(target)}")
