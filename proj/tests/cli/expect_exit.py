"""Run a command and require a specific exit code (and optional stdout substrings)."""
import subprocess
import sys


def main() -> int:
    expected = int(sys.argv[1])
    sep = sys.argv.index("--")
    needles, cmd = sys.argv[2:sep], sys.argv[sep + 1:]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    sys.stdout.write(proc.stdout)
    sys.stdout.write(proc.stderr)
    ok = proc.returncode == expected
    if not ok:
        print(f"exit code {proc.returncode}, expected {expected}")
    for needle in needles:
        if needle not in proc.stdout:
            print(f"missing from stdout: {needle!r}")
            ok = False
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
