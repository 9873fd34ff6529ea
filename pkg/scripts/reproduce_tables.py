"""
Table reproduction script
Runs the moment table and the policy comparison into outputs/tables/
"""

import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from main import main  # noqa: E402


def reproduce(mode: str, scenario: Path, out_root: Path, jobs: int) -> int:
    """Run one mode into its own subdirectory"""
    out_dir = out_root / mode
    print(f"Running {mode} -> {out_dir}")
    code = main(["--config", str(scenario), "--mode", mode, "--out", str(out_dir), "--jobs", str(jobs)])
    print(f"{mode} finished with exit code {code}")
    return code


if __name__ == "__main__":
    scenario = PROJECT_ROOT / "configs" / "default_scenario.env"
    out_root = PROJECT_ROOT / "outputs" / "tables"
    jobs = int(sys.argv[1]) if len(sys.argv) > 1 else 1

    codes = [reproduce(mode, scenario, out_root, jobs) for mode in ("moments", "compare")]
    sys.exit(max(codes))
