"""
Command-line entry point
Noncommutative L_p inequality lab

    python main.py verify --seed 42 --trials 50
    python main.py sweep --dims 2,3 --p-grid 2,3,4 --out reports/sweep.csv
    python main.py counterexample --p 1
"""

import sys

from app.cli.cli import main

if __name__ == "__main__":
    sys.exit(main())
