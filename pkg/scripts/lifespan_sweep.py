"""Lifespan sweep over epsilon; epsilons come from the config or ``--eps``.

    python scripts/lifespan_sweep.py scripts/configs/lifespan_case7.cfg
"""

import sys

from boussinesq_lab.harness import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["scripts/configs/lifespan_case7.cfg"]
    sys.exit(main(["sweep-lifespan", *args]))
