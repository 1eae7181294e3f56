"""Restricted query executor speaking the dfqa NDJSON worker protocol.

Reads exec frames on stdin, runs the query against the table with only
pandas, numpy and math available, and writes one result frame per request.
Runs standalone (``python3 worker.py``) or via ``dfqa worker``.
"""

import ast
import builtins
import datetime as _dt
import decimal
import json
import math
import os
import resource
import sys
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

PROTOCOL_VERSION = 1

ALLOWED_IMPORTS = {"pandas": pd, "numpy": np, "math": math}

BANNED_NAMES = frozenset({
    "open", "exec", "eval", "compile", "input", "breakpoint", "globals", "locals",
    "vars", "getattr", "setattr", "delattr", "__import__",
})

# Attributes that reach files, processes or interpreter internals.
BANNED_ATTRS = frozenset({
    "to_csv", "to_excel", "to_json", "to_pickle", "to_parquet", "to_hdf", "to_sql",
    "to_feather", "to_html", "to_latex", "to_markdown", "to_stata", "to_clipboard",
    "to_xml", "to_orc", "tofile", "dump", "dumps", "save", "savez", "savez_compressed",
    "savetxt", "load", "loadtxt", "genfromtxt", "fromfile", "fromregex", "memmap",
    "DataSource", "ExcelWriter", "HDFStore", "ExcelFile", "io", "os", "sys", "lib",
    "ctypeslib", "testing", "distutils", "f2py", "compat", "util", "plotting", "builtins",
    "subprocess", "f_globals", "f_locals", "f_builtins", "f_back", "f_code", "gi_frame",
    "gi_code", "cr_frame", "cr_code", "ag_frame", "ag_code", "tb_frame", "tb_next",
    "co_code", "mro", "modules", "system", "popen",
})

SAFE_BUILTINS = {
    name: getattr(builtins, name)
    for name in (
        "len", "min", "max", "sum", "sorted", "range", "abs", "round", "str", "int",
        "float", "bool", "list", "dict", "set", "tuple", "enumerate", "zip", "print",
    )
}


class Rejected(Exception):
    pass


def _restricted_import(name, globals=None, locals=None, fromlist=(), level=0):
    root = name.split(".")[0]
    if level != 0 or root not in ALLOWED_IMPORTS or "." in name:
        raise ImportError("import of '%s' is not allowed" % name)
    return ALLOWED_IMPORTS[root]


def vet(tree):
    """Raises Rejected for any construct outside the safety policy."""
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                if alias.name not in ALLOWED_IMPORTS:
                    raise Rejected("disallowed import '%s'" % alias.name)
        elif isinstance(node, ast.ImportFrom):
            if node.level or node.module not in ALLOWED_IMPORTS:
                raise Rejected("disallowed import '%s'" % (node.module or "."))
            for alias in node.names:
                if alias.name == "*" or alias.name.startswith("_") or alias.name in BANNED_ATTRS:
                    raise Rejected("disallowed import of '%s'" % alias.name)
        elif isinstance(node, ast.Name):
            if node.id in BANNED_NAMES or node.id.startswith("__"):
                raise Rejected("banned name '%s'" % node.id)
        elif isinstance(node, ast.Attribute):
            if node.attr.startswith("__"):
                raise Rejected("dunder access '%s'" % node.attr)
            if node.attr in BANNED_ATTRS or node.attr.startswith("read_"):
                raise Rejected("banned attribute '%s'" % node.attr)
        elif isinstance(node, ast.Call):
            func = node.func
            if isinstance(func, ast.Attribute) and func.attr == "to_string":
                if node.args or any(k.arg == "buf" for k in node.keywords):
                    raise Rejected("to_string with an output target")
        elif isinstance(node, (ast.Global, ast.Nonlocal)):
            raise Rejected("global/nonlocal statements")
        elif isinstance(node, ast.Constant) and isinstance(node.value, str) and "__" in node.value:
            # Blocks format-string traversal such as "{0.__class__}".
            if "{" in node.value:
                raise Rejected("dunder reference in format string")


# ---------------------------------------------------------------------------
# Table materialization


def _materialize(table):
    names = [c["name"] for c in table["columns"]]
    dtypes = [c["dtype"] for c in table["columns"]]
    rows = table["rows"]
    data = {}
    for i, (name, dtype) in enumerate(zip(names, dtypes)):
        col = [r[i] for r in rows]
        has_null = any(v is None for v in col)
        if dtype == "int":
            data[name] = pd.Series(col, dtype="float64" if has_null else "int64")
        elif dtype == "float":
            data[name] = pd.Series([np.nan if v is None else v for v in col], dtype="float64")
        elif dtype == "bool":
            data[name] = pd.Series(col, dtype="object" if has_null else "bool")
        elif dtype == "datetime":
            raw = [v["$dt"] if isinstance(v, dict) else v for v in col]
            data[name] = pd.to_datetime(pd.Series(raw, dtype="object"), errors="coerce", format="ISO8601")
        else:
            data[name] = pd.Series(col, dtype="object")
    df = pd.DataFrame(data, columns=names)
    if len(set(names)) != len(names):
        raise ValueError("duplicate column names")
    return df


# ---------------------------------------------------------------------------
# Canonicalization


class TooLarge(Exception):
    pass


def _iso(value):
    if isinstance(value, np.datetime64):
        value = pd.Timestamp(value)
    if isinstance(value, _dt.datetime):
        if value.tzinfo is None and value.time() == _dt.time(0) and getattr(value, "nanosecond", 0) == 0:
            return value.strftime("%Y-%m-%d")
        return value.isoformat()
    return value.isoformat()


def _scalar(value):
    if value is None or value is pd.NaT or value is pd.NA:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, decimal.Decimal):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, str):
        return value
    if isinstance(value, (_dt.datetime, _dt.date, np.datetime64)):
        if isinstance(value, np.datetime64) and np.isnat(value):
            return None
        return {"$dt": _iso(value)}
    try:
        missing = pd.isna(value)
        if isinstance(missing, (bool, np.bool_)) and missing:
            return None
    except (TypeError, ValueError):
        pass
    return str(value)


def _dtype_of(v):
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, dict):
        return "datetime"
    return "string"


_RANK = {"null": 0, "bool": 1, "number": 2, "string": 3, "datetime": 4}


def _sort_key(v):
    kind = _dtype_of(v)
    if kind == "null":
        return (0, 0)
    if kind == "datetime":
        return (4, v["$dt"])
    return (_RANK[kind], v)


def _check(cells, max_cells):
    if cells > max_cells:
        raise TooLarge("result has %d cells, limit is %d" % (cells, max_cells))


def _default_index(index):
    return isinstance(index, pd.RangeIndex) and index.start == 0 and index.step == 1


def canonicalize(value, max_cells):
    try:
        return _canonicalize(value, max_cells)
    except TooLarge as e:
        return {"kind": "error", "error": "result_too_large", "message": str(e)}


def _canonicalize(value, max_cells):
    if isinstance(value, pd.DataFrame):
        _check(value.shape[0] * value.shape[1], max_cells)
        frame = value
        if not _default_index(frame.index):
            # Named or non-integer labels (groupby keys) carry meaning; bare
            # row positions left over from filtering do not.
            labelled = any(n is not None for n in frame.index.names) or not pd.api.types.is_integer_dtype(frame.index)
            try:
                frame = frame.reset_index(drop=not labelled)
            except ValueError:
                frame = frame.reset_index(drop=not labelled, allow_duplicates=True)
        _check(frame.shape[0] * frame.shape[1], max_cells)
        columns = [str(c) if not isinstance(c, tuple) else " ".join(str(p) for p in c if p != "") for c in frame.columns]
        rows = [[_scalar(v) for v in row] for row in frame.itertuples(index=False, name=None)]
        return {"kind": "table", "columns": columns, "rows": rows}
    if isinstance(value, pd.Series):
        _check(len(value), max_cells)
        index = [_scalar(v) if not isinstance(v, tuple) else str(v) for v in value.index]
        return {
            "kind": "series",
            "name": None if value.name is None else str(value.name),
            "index": index,
            "values": [_scalar(v) for v in value.tolist()],
        }
    if isinstance(value, np.ndarray):
        if value.ndim == 0:
            return _scalar_result(_scalar(value.item()))
        _check(value.size, max_cells)
        if value.ndim == 2:
            return {
                "kind": "table",
                "columns": [str(i) for i in range(value.shape[1])],
                "rows": [[_scalar(v) for v in row] for row in value.tolist()],
            }
        return {"kind": "list", "values": [_element(v) for v in value.ravel().tolist()]}
    if isinstance(value, (pd.Index, pd.Categorical, pd.api.extensions.ExtensionArray)):
        _check(len(value), max_cells)
        return {"kind": "list", "values": [_element(v) for v in list(value)]}
    if isinstance(value, (list, tuple)):
        _check(len(value), max_cells)
        return {"kind": "list", "values": [_element(v) for v in value]}
    if isinstance(value, (set, frozenset)):
        _check(len(value), max_cells)
        return {"kind": "list", "values": sorted((_element(v) for v in value), key=_sort_key)}
    if isinstance(value, dict):
        _check(len(value), max_cells)
        return {
            "kind": "series",
            "name": None,
            "index": [_element(k) for k in value.keys()],
            "values": [_element(v) for v in value.values()],
        }
    return _scalar_result(_scalar(value))


def _element(v):
    if isinstance(v, (list, tuple, set, frozenset, dict, pd.Series, pd.DataFrame, np.ndarray)):
        return str(v)
    return _scalar(v)


def _scalar_result(v):
    return {"kind": "scalar", "dtype": _dtype_of(v), "value": v}


def _error(kind, message):
    return {"kind": "error", "error": kind, "message": message}


# ---------------------------------------------------------------------------
# Execution


def _vm_bytes():
    try:
        with open("/proc/self/status") as fh:
            for line in fh:
                if line.startswith("VmSize:"):
                    return int(line.split()[1]) * 1024
    except OSError:
        pass
    return 0


def _set_memory_limit(memory_mb):
    soft, hard = resource.getrlimit(resource.RLIMIT_AS)
    # The budget is on top of the interpreter's own footprint.
    target = _vm_bytes() + memory_mb * 1024 * 1024
    if hard != resource.RLIM_INFINITY:
        target = min(target, hard)
    resource.setrlimit(resource.RLIMIT_AS, (target, hard))
    return soft, hard


def run(table, source, limits):
    try:
        tree = ast.parse(source, mode="exec")
    except SyntaxError as e:
        return _error("runtime_error", "SyntaxError: %s" % e)
    try:
        vet(tree)
    except Rejected as e:
        return _error("rejected_unsafe", str(e))

    try:
        df = _materialize(table)
    except Exception as e:  # noqa: BLE001
        return _error("runtime_error", "table payload: %s" % e)

    body = tree.body
    last = None
    if body and isinstance(body[-1], ast.Expr):
        last = ast.Expression(body[-1].value)
        body = body[:-1]
    module = ast.Module(body=body, type_ignores=[])
    builtins = dict(SAFE_BUILTINS)
    builtins["__import__"] = _restricted_import
    namespace = {"df": df, "pd": pd, "np": np, "math": math, "__builtins__": builtins}

    saved = _set_memory_limit(int(limits.get("memory_mb", 512)))
    try:
        exec(compile(module, "<query>", "exec"), namespace)
        tail = eval(compile(last, "<query>", "eval"), namespace) if last is not None else None
        if "result" in namespace:
            value = namespace["result"]
        elif last is not None:
            value = tail
        else:
            return _error("no_result", "query did not assign 'result' and does not end in an expression")
        return canonicalize(value, int(limits.get("max_result_cells", 100000)))
    except (MemoryError, RecursionError) as e:
        return _error("resource_limit", "%s: %s" % (type(e).__name__, e))
    except BaseException as e:  # noqa: BLE001
        if isinstance(e, (SystemExit, KeyboardInterrupt)) and not isinstance(e, Exception):
            return _error("runtime_error", type(e).__name__)
        return _error("runtime_error", "%s: %s" % (type(e).__name__, e))
    finally:
        resource.setrlimit(resource.RLIMIT_AS, saved)


def main():
    # Keep the protocol channel private: anything the query prints goes to stderr.
    proto = os.fdopen(os.dup(1), "w", encoding="utf-8", newline="\n")
    os.dup2(2, 1)
    sys.stdout = sys.stderr

    def send(frame):
        proto.write(json.dumps(frame, ensure_ascii=False, allow_nan=False, separators=(",", ":")) + "\n")
        proto.flush()

    send({"type": "hello", "protocol_version": PROTOCOL_VERSION})
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            frame = json.loads(line)
        except ValueError:
            send({"type": "result", "request_id": "", "result": _error("runtime_error", "malformed frame"), "wall_ms": 0})
            continue
        if frame.get("type") == "shutdown":
            break
        if frame.get("type") != "exec":
            continue
        start = time.monotonic()
        result = run(frame.get("table", {"columns": [], "rows": []}), frame.get("query", ""), frame.get("limits", {}))
        wall_ms = int((time.monotonic() - start) * 1000)
        try:
            send({"type": "result", "request_id": frame.get("request_id", ""), "result": result, "wall_ms": wall_ms})
        except (TypeError, ValueError) as e:
            send({"type": "result", "request_id": frame.get("request_id", ""),
                  "result": _error("runtime_error", "unserializable result: %s" % e), "wall_ms": wall_ms})


if __name__ == "__main__":
    main()
