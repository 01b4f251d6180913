#!/usr/bin/env python3
"""
extlab - Main Application Entry Point
Checks for correct and normal extensions of differential operators
"""

import sys
import os

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))


def check_dependencies():
    """Check if all required dependencies are installed"""
    try:
        import numpy
        import scipy
        import yaml
        import orjson
        import psutil
        import tqdm
        return True
    except ImportError as e:
        print(f"ERROR: Missing required dependency: {e}", file=sys.stderr)
        print("\nPlease run the installation script:", file=sys.stderr)
        print("  ./install.sh", file=sys.stderr)
        return False


def main():
    """Main application entry point"""
    if not check_dependencies():
        sys.exit(1)

    try:
        from cli.main import main as cli_main
    except ImportError as e:
        print(f"ERROR: Failed to import CLI module: {e}", file=sys.stderr)
        sys.exit(1)

    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
