"""Mollifier Cauchy study; deltas come from the config or ``--deltas``.

    python scripts/cauchy_study.py scripts/configs/cauchy_case12.cfg
"""

import sys

from boussinesq_lab.harness import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["scripts/configs/cauchy_case12.cfg"]
    sys.exit(main(["sweep-cauchy", *args]))
