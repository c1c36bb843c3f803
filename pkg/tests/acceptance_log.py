"""Shared registry of acceptance-criterion status lines."""

LINES = []


def record(number, title, passed, detail=""):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    LINES.append(line)
    print(line, flush=True)
    return passed
