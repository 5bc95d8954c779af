"""
Augmentation benchmark runner.

  python pipelines/augment-bench/run.py <command> [stage args...]

Commands
  ingest | plan | augment | quality | train | eval | report   one stage; args pass through
  train-eval                                                train, eval, report
  all                                                       ingest, plan, augment text, augment image,
                                                            quality, train, eval, report

Multi-stage commands forward only the shared flags (--config, --out, --seed, --set) to each
stage. Stage output goes to stderr; stdout carries exactly one JSON status object. The exit
code is the failing stage's exit code (0 when every stage passed).
"""

import json
import subprocess
import sys
from pathlib import Path

SCRIPTS = Path(__file__).parent / "scripts"
sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))
sys.path.insert(0, str(SCRIPTS))
from configuration_loader import apply_overrides, common_parser, load_raw  # noqa: E402

STAGES = ["ingest", "plan", "augment", "quality", "train", "eval", "report"]

# Stage name -> script file; augment.py would shadow the augment package.
SCRIPT_NAMES = {"augment": "augmentation"}

SEQUENCES = {
    "train-eval": [("train", []), ("eval", []), ("report", [])],
    "all": [
        ("ingest",  []),
        ("plan",    []),
        ("augment", ["--modality", "text"]),
        ("augment", ["--modality", "image"]),
        ("quality", []),
        ("train",   []),
        ("eval",    []),
        ("report",  []),
    ],
}


def _error_summary(r):
    combined = (r.stdout + "\n" + r.stderr).strip()
    lines = [ln for ln in combined.splitlines() if ln.strip()]
    return lines[-1] if lines else f"exit code {r.returncode}"


def _run_dir(args) -> str | None:
    """out_dir the stages will write to, or None when the config cannot be read."""
    known, _ = common_parser("").parse_known_args(args)
    if known.out:
        return known.out
    try:
        return str(apply_overrides(load_raw(known.config), known.set)["out_dir"])
    except Exception:
        return None


def _shared_args(args) -> list[str]:
    known, _ = common_parser("").parse_known_args(args)
    shared = ["--config", known.config]
    if known.out:
        shared += ["--out", known.out]
    if known.seed is not None:
        shared += ["--seed", str(known.seed)]
    for item in known.set:
        shared += ["--set", item]
    return shared


def run_pipeline(command, args):
    if command in SEQUENCES:
        shared = _shared_args(args)
        steps = [(stage, extra + shared) for stage, extra in SEQUENCES[command]]
    else:
        steps = [(command, list(args))]

    run_dir = _run_dir(args)
    for stage, stage_args in steps:
        r = subprocess.run(
            [sys.executable, str(SCRIPTS / f"{SCRIPT_NAMES.get(stage, stage)}.py"), *stage_args],
            capture_output=True,
            text=True,
        )
        sys.stderr.write(r.stdout)
        sys.stderr.write(r.stderr)
        if r.returncode != 0:
            return {
                "status": "failed",
                "stage": " ".join([stage, *stage_args[:2]]) if stage == "augment" else stage,
                "run_dir": run_dir,
                "error_summary": _error_summary(r),
            }, r.returncode

    return {
        "status": "completed",
        "stage": command,
        "run_dir": run_dir,
        "error_summary": None,
    }, 0


def main():
    commands = [*STAGES, *SEQUENCES]
    if len(sys.argv) < 2 or sys.argv[1] not in commands:
        sys.exit(f"Usage: run.py {{{'|'.join(commands)}}} [args...]")
    result, code = run_pipeline(sys.argv[1], sys.argv[2:])
    print(json.dumps(result))
    sys.exit(code)


if __name__ == "__main__":
    main()
