"""Run the acceptance suite and show one PASS/FAIL line per criterion."""
import pathlib
import subprocess
import sys

root = pathlib.Path(__file__).resolve().parent.parent
sys.exit(subprocess.call([sys.executable, "-m", "pytest", "-q", "-s", str(root / "tests" / "test_acceptance.py")]))
