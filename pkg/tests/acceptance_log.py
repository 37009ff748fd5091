"""Pass/fail lines of the acceptance criteria, printed at the end of the session."""

RESULTS = {}


def record(number, ok, detail):
    RESULTS[number] = (bool(ok), detail)
    line = format_line(number)
    print(line)
    return line


def format_line(number):
    ok, detail = RESULTS[number]
    return f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def lines():
    return [format_line(k) for k in sorted(RESULTS)]
