#!/usr/bin/env python3
"""
Run edgefuse from a source checkout without installing it.

Usage:
    python run.py [--config FILE] COMMAND [options]

Commands: gen, gt, train, infer, segment, eval, refine.

    ./run.py --config configs/desk.cfg gen --out data/desk --scenes 64
    ./run.py --config configs/desk.cfg train --dataset data/desk --out runs/desk
    ./run.py eval --dataset data/desk --start 56 --method net=seg/net --out results
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent / "src"))

from edgefuse import main  # noqa: E402

if __name__ == "__main__":
    main()
