"""Run an acceptance suite and write the verdicts as JSON.

    python scripts/run_acceptance.py all --json verdicts.json
"""

import sys

from boussinesq_lab.harness import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["all"]
    sys.exit(main(["acceptance", *args]))
