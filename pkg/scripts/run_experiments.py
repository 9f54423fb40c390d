"""
Master script for the full experiment sequence.

Runs the lambdipole subcommands one after another:
1. Build the closed-form dipole and its parameters
2. Verify PDE residual convergence and interface continuity
3. Relax toward the energy maximizer and compare with the dipole
4. Evolve the unperturbed dipole (conservation and translation check)
5. Sweep perturbation sizes for the orbital stability table

Usage:
    # Full sequence
    python scripts/run_experiments.py

    # Individual steps
    python scripts/run_experiments.py --only dipole verify

    # Skip the expensive ones
    python scripts/run_experiments.py --skip maximize stability

    # Quick smoke run on coarse grids
    python scripts/run_experiments.py --quick --lambda 3
"""

import argparse
import subprocess
import sys
from pathlib import Path

STEPS = ["dipole", "verify", "maximize", "evolve", "stability"]

DESCRIPTIONS = {
    "dipole": "Building the closed-form dipole",
    "verify": "Verifying residual convergence",
    "maximize": "Relaxing toward the energy maximizer",
    "evolve": "Evolving the unperturbed dipole",
    "stability": "Sweeping perturbation sizes",
}

EXIT_MEANINGS = {
    1: "I/O error",
    2: "domain or infeasible parameters",
    3: "verification failed",
    4: "maximizer did not converge",
    5: "numerical abort",
    64: "usage error",
}


class ExperimentPipeline:
    def __init__(self, project_root: Path, out_root: Path, lam: float, quick: bool = False):
        self.project_root = project_root
        self.out_root = out_root
        self.lam = lam
        self.quick = quick

    def step_args(self, step: str) -> list:
        """Command-line arguments for one subcommand."""
        args = [step, "--lambda", str(self.lam), "--out", str(self.out_root / step)]
        if step == "verify":
            return args
        if self.quick:
            args += ["--nx", "64", "--ny", "32"]
        if step == "maximize" and self.quick:
            args += ["--max-iters", "200", "--tol-rel", "1e-5"]
        if step == "evolve" and self.quick:
            args += ["--t-end-units", "1"]
        if step == "stability" and self.quick:
            args += ["--t-end-units", "1", "--amplitudes", "0.01", "0.02"]
        return args

    def run_step(self, step: str, description: str) -> int:
        """Run one subcommand and return its exit code."""
        print("\n" + "="*60)
        print(f"{description}")
        print("="*60)

        cmd = [sys.executable, "-m", "lambdipole"] + self.step_args(step)
        try:
            result = subprocess.run(cmd, cwd=self.project_root)
        except OSError as e:
            print(f"✗ Error running {step}: {e}")
            return 1

        if result.returncode == 0:
            print(f"✓ {description} completed")
        else:
            meaning = EXIT_MEANINGS.get(result.returncode, "unknown failure")
            print(f"✗ {description} failed with exit code {result.returncode} ({meaning})")
        return result.returncode

    def run_pipeline(self, steps: list) -> int:
        print("="*60)
        print("LAMB DIPOLE EXPERIMENTS")
        print("="*60)
        print(f"\nlambda = {self.lam}, outputs under {self.out_root}")
        if self.quick:
            print("Quick mode: coarse grids and short horizons\n")

        steps_run = []
        steps_failed = []
        for i, step in enumerate(steps, 1):
            code = self.run_step(step, f"Step {i}/{len(steps)}: {DESCRIPTIONS[step]}")
            if code == 0:
                steps_run.append(step)
            else:
                steps_failed.append(f"{step} ({code})")

        # Summary
        print("\n" + "="*60)
        print("PIPELINE SUMMARY")
        print("="*60)

        if steps_run:
            print(f"\n✓ Completed steps: {', '.join(steps_run)}")
        if steps_failed:
            print(f"\n✗ Failed steps: {', '.join(steps_failed)}")
        print("\n" + "="*60)

        if not steps_failed:
            print("\n✓ All experiments complete!")
            print("\nEvery step directory holds a manifest.json listing its outputs.")
        return 0 if not steps_failed else 1


def main():
    parser = argparse.ArgumentParser(description="Run the Lamb dipole experiment sequence")
    parser.add_argument('--only', nargs='+', choices=STEPS, default=None,
                        help='Run only these steps')
    parser.add_argument('--skip', nargs='+', choices=STEPS, default=[],
                        help='Skip these steps')
    parser.add_argument('--lambda', dest='lam', type=float, default=2.0,
                        help='vortex-strength parameter (> 1)')
    parser.add_argument('--out-root', type=Path, default=Path("runs"),
                        help='Parent directory for per-step outputs')
    parser.add_argument('--quick', action='store_true',
                        help='Coarse grids and short horizons')
    args = parser.parse_args()

    steps = [s for s in (args.only or STEPS) if s not in args.skip]
    if not steps:
        print("✗ Nothing to run")
        sys.exit(64)

    project_root = Path(__file__).parent.parent
    pipeline = ExperimentPipeline(project_root, args.out_root, args.lam, args.quick)
    sys.exit(pipeline.run_pipeline(steps))


if __name__ == "__main__":
    main()
