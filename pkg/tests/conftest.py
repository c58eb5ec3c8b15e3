import sys
from pathlib import Path

# Oracles live next to the tests, not inside the package.
sys.path.insert(0, str(Path(__file__).resolve().parent))
