#!/usr/bin/env python3
"""
Main entry point for cccharts when run from a source checkout.

Equivalent to the installed `cccharts` console script.
"""

import os
import sys

# Add the current directory to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from cccharts.cli import main

if __name__ == "__main__":
    sys.exit(main())
