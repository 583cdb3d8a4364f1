"""
Entry point for running edgefuse as a module.

Usage:
    python -m edgefuse COMMAND [options]
"""

from edgefuse import main

if __name__ == "__main__":
    main()
