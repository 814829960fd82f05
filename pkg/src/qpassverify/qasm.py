"""OpenQASM 2.0 subset: one ``qreg``, optional one ``creg``, the fixed gate
set, ``barrier`` and ``measure``."""

from __future__ import annotations

import ast
import math
import operator
import re

from .circuit import Circuit, CircuitError, Gate

_QASM_TO_KIND = {
    "x": "X", "y": "Y", "z": "Z", "h": "H", "t": "T", "s": "S",
    "cx": "CX", "swap": "SWAP", "rz": "RZ", "u1": "U1", "u2": "U2", "u3": "U3",
    "barrier": "BARRIER", "measure": "MEASURE",
}
_KIND_TO_QASM = {v: k for k, v in _QASM_TO_KIND.items()}


class QasmSyntaxError(CircuitError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {msg}")
        self.line, self.col = line, col


class UnsupportedConstructError(QasmSyntaxError):
    def __init__(self, construct: str, line: int, col: int):
        super().__init__(f"unsupported construct {construct!r}", line, col)
        self.construct = construct


class QubitIndexError(QasmSyntaxError):
    pass


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub,
           ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}


def _eval_angle(expr: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(expr)

    return ev(ast.parse(expr.strip(), mode="eval"))


_STMT = re.compile(r"\s*([^;]*);", re.S)
_ARG = re.compile(r"^\s*(\w+)\s*\[\s*(\d+)\s*\]\s*$")
_GATE = re.compile(r"^([a-z]\w*)\s*(?:\(([^)]*)\))?\s*(.*)$", re.S)
_COND = re.compile(r"^if\s*\(\s*\w+\s*==\s*\d+\s*\)\s*(.*)$", re.S)


def _strip_comments(text: str) -> str:
    return re.sub(r"//[^\n]*", lambda m: " " * len(m.group()), text)


def parse_qasm(text: str) -> Circuit:
    src = _strip_comments(text)
    # offsets -> (line, col)
    line_starts = [0] + [i + 1 for i, ch in enumerate(src) if ch == "\n"]

    def where(offset):
        import bisect
        ln = bisect.bisect_right(line_starts, offset)
        return ln, offset - line_starts[ln - 1] + 1

    qreg = creg = None
    nq = 0
    ncreg = 0
    gates: list[Gate] = []
    pos = 0
    saw_header = False
    for m in _STMT.finditer(src):
        if src[pos:m.start()].strip():
            raise QasmSyntaxError("unexpected text", *where(pos))
        pos = m.end()
        body = m.group(1).strip()
        start = m.start(1) + (len(m.group(1)) - len(m.group(1).lstrip()))
        loc = where(start)
        if not body:
            continue
        if body.startswith("OPENQASM"):
            if body.split()[-1] != "2.0":
                raise UnsupportedConstructError(body, *loc)
            saw_header = True
            continue
        if body.startswith("include"):
            if body.split(None, 1)[1].strip() != '"qelib1.inc"':
                raise UnsupportedConstructError(body, *loc)
            continue
        if body.startswith(("qreg", "creg")):
            decl = _ARG.match(body[4:])
            if not decl:
                raise QasmSyntaxError(f"bad register declaration {body!r}", *loc)
            name, size = decl.group(1), int(decl.group(2))
            if body.startswith("qreg"):
                if qreg is not None:
                    raise UnsupportedConstructError("multiple qreg", *loc)
                qreg, nq = name, size
            else:
                if creg is not None:
                    raise UnsupportedConstructError("multiple creg", *loc)
                creg, ncreg = name, size
            continue
        conditioned = False
        cond = _COND.match(body)
        if cond:
            conditioned, body = True, cond.group(1)
        gm = _GATE.match(body)
        if not gm:
            raise QasmSyntaxError(f"cannot parse statement {body!r}", *loc)
        name, params_txt, args_txt = gm.groups()
        if name not in _QASM_TO_KIND:
            raise UnsupportedConstructError(name, *loc)
        if qreg is None:
            raise QasmSyntaxError("gate before qreg declaration", *loc)
        kind = _QASM_TO_KIND[name]
        params = []
        if params_txt is not None and params_txt.strip():
            try:
                params = [_eval_angle(p) for p in params_txt.split(",")]
            except (ValueError, SyntaxError, ZeroDivisionError):
                raise QasmSyntaxError(f"bad angle expression {params_txt!r}", *loc) from None
        clbit = None
        if kind == "MEASURE":
            parts = args_txt.split("->")
            if len(parts) != 2:
                raise QasmSyntaxError("measure needs '-> c[i]'", *loc)
            args_txt = parts[0]
            cm = _ARG.match(parts[1])
            if not cm or cm.group(1) != creg:
                raise QasmSyntaxError(f"unknown classical target {parts[1].strip()!r}", *loc)
            clbit = int(cm.group(2))
            if clbit >= ncreg:
                raise QubitIndexError(f"clbit {clbit} out of range", *loc)
        qubits = []
        for arg in args_txt.split(","):
            am = _ARG.match(arg)
            if not am:
                raise QasmSyntaxError(f"bad qubit argument {arg.strip()!r}", *loc)
            if am.group(1) != qreg:
                raise QasmSyntaxError(f"unknown register {am.group(1)!r}", *loc)
            q = int(am.group(2))
            if q >= nq:
                raise QubitIndexError(f"qubit {q} out of range for {qreg}[{nq}]", *loc)
            qubits.append(q)
        try:
            gates.append(Gate(kind, tuple(qubits), tuple(params), conditioned, clbit))
        except CircuitError as e:
            raise QasmSyntaxError(str(e), *loc) from None
    if src[pos:].strip():
        raise QasmSyntaxError("unterminated statement", *where(pos + len(src[pos:]) - len(src[pos:].lstrip())))
    if not saw_header:
        raise QasmSyntaxError("missing 'OPENQASM 2.0;' header", 1, 1)
    if qreg is None:
        raise QasmSyntaxError("missing qreg declaration", 1, 1)
    return Circuit(nq, tuple(gates), ncreg)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def emit_qasm(c: Circuit) -> str:
    ncreg = c.ncreg
    needs_creg = any(g.kind == "MEASURE" or g.conditioned for g in c.gates)
    if needs_creg:
        ncreg = max([ncreg, 1] + [g.clbit + 1 for g in c.gates if g.clbit is not None])
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.nqreg}];"]
    if ncreg:
        lines.append(f"creg c[{ncreg}];")
    for g in c.gates:
        s = _KIND_TO_QASM[g.kind]
        if g.params:
            s += "(" + ",".join(_fmt(p) for p in g.params) + ")"
        s += " " + ",".join(f"q[{q}]" for q in g.qubits)
        if g.kind == "MEASURE":
            s += f" -> c[{g.clbit}]"
        if g.conditioned:
            s = "if(c==1) " + s
        lines.append(s + ";")
    return "\n".join(lines) + "\n"
