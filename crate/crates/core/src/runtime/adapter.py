# Loads an extraction script, runs its main(html) and prints the result as
# one JSON line on stdout. Anything the script prints goes to stderr.
import __future__
import json
import sys
import types


def _text(value):
    if isinstance(value, str):
        return value
    if isinstance(value, bytes):
        return value.decode("utf-8", "replace")
    if value is None:
        return ""
    return str(value)


def _load(path):
    with open(path, encoding="utf-8") as f:
        source = f.read()
    code = compile(source, path, "exec", flags=__future__.annotations.compiler_flag, dont_inherit=True)
    module = types.ModuleType("extraction_script")
    module.__file__ = path
    sys.modules["extraction_script"] = module
    exec(code, module.__dict__)
    return module


def run(script_path, html_path):
    out = sys.stdout
    sys.stdout = sys.stderr
    with open(html_path, encoding="utf-8", errors="replace") as f:
        html = f.read()
    module = _load(script_path)
    entry = getattr(module, "main", None)
    if not callable(entry):
        raise SystemExit("script does not define main(html)")
    result = entry(html)
    rows = []
    for item in result or []:
        if isinstance(item, (str, bytes, dict)) or not hasattr(item, "__iter__"):
            raise TypeError("expected a sequence of (subject, predicate, object), got %r" % (item,))
        rows.append([_text(v) for v in item])
    out.write(json.dumps(rows, ensure_ascii=False))
    out.write("\n")
    out.flush()


if __name__ == "__main__":
    run(sys.argv[1], sys.argv[2])
