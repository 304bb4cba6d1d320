"""Reader/writer for the SDPA sparse format (.dat-s) and the CSV report.

Format: optional comment lines starting with ``"`` or ``*``; then the number
of constraints m, the number of blocks, the block sizes (negative size =
diagonal block), the m right-hand side values, and whitespace-separated
5-tuples ``matno blkno i j value`` with matno 0 denoting the objective.
Braces, parentheses and commas are accepted as separators in the header
lines.  Duplicate entries are summed; entries with i > j are transposed.
"""

from __future__ import annotations

import io

import numpy as np

from .model import CoeffMatrix, SdpProblem

_SEPARATORS = str.maketrans({c: " " for c in ",{}()"})


class ParseError(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def _tokens(text: str, lineno: int, what: str) -> list[str]:
    toks = text.translate(_SEPARATORS).split()
    if not toks:
        raise ParseError(lineno, f"expected {what}")
    return toks


def parse_sdpa(data) -> SdpProblem:
    """Parse SDPA sparse input (str, bytes, or a text stream)."""
    if isinstance(data, bytes):
        text = data.decode("utf-8", errors="replace")
    elif hasattr(data, "read"):
        text = data.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8", errors="replace")
    else:
        text = data
    lines = text.splitlines()
    pos = 0

    def next_content_line(what: str):
        nonlocal pos
        while pos < len(lines):
            pos += 1
            stripped = lines[pos - 1].strip()
            if not stripped or stripped[0] in '"*':
                continue
            return stripped, pos
        raise ParseError(len(lines), f"unexpected end of file, expected {what}")

    def parse_int(tok: str, lineno: int, what: str) -> int:
        try:
            return int(float(tok)) if "." in tok or "e" in tok.lower() else int(tok)
        except ValueError:
            raise ParseError(lineno, f"bad {what}: {tok!r}") from None

    def parse_float(tok: str, lineno: int, what: str) -> float:
        try:
            return float(tok)
        except ValueError:
            raise ParseError(lineno, f"bad {what}: {tok!r}") from None

    line, ln = next_content_line("number of constraints")
    m = parse_int(_tokens(line, ln, "number of constraints")[0], ln, "constraint count")
    if m < 0:
        raise ParseError(ln, f"negative constraint count {m}")

    line, ln = next_content_line("number of blocks")
    nblocks = parse_int(_tokens(line, ln, "number of blocks")[0], ln, "block count")
    if nblocks <= 0:
        raise ParseError(ln, f"block count must be positive, got {nblocks}")

    line, ln = next_content_line("block sizes")
    toks = _tokens(line, ln, "block sizes")
    if len(toks) != nblocks:
        raise ParseError(ln, f"expected {nblocks} block sizes, found {len(toks)}")
    blocks = [parse_int(t, ln, "block size") for t in toks]
    if any(s == 0 for s in blocks):
        raise ParseError(ln, "zero block size")

    # b may spill over several lines in some exports; keep reading until we
    # have m values.
    bvals: list[float] = []
    bline = ln
    while len(bvals) < m:
        line, bline = next_content_line("right-hand side values")
        for t in _tokens(line, bline, "right-hand side values"):
            bvals.append(parse_float(t, bline, "right-hand side value"))
    if len(bvals) != m:
        raise ParseError(bline, f"expected {m} right-hand side values, found {len(bvals)}")

    orders = [abs(s) for s in blocks]
    entries: dict[tuple[int, int], list] = {}

    while pos < len(lines):
        pos += 1
        raw = lines[pos - 1].strip()
        if not raw or raw[0] in '"*':
            continue
        toks = raw.translate(_SEPARATORS).split()
        if len(toks) % 5 != 0:
            raise ParseError(pos, f"expected 5-tuples, found {len(toks)} tokens")
        for base in range(0, len(toks), 5):
            matno = parse_int(toks[base], pos, "matrix number")
            blkno = parse_int(toks[base + 1], pos, "block number")
            i = parse_int(toks[base + 2], pos, "row index")
            j = parse_int(toks[base + 3], pos, "column index")
            v = parse_float(toks[base + 4], pos, "value")
            if not 0 <= matno <= m:
                raise ParseError(pos, f"matrix number {matno} out of range 0..{m}")
            if not 1 <= blkno <= nblocks:
                raise ParseError(pos, f"block number {blkno} out of range 1..{nblocks}")
            order = orders[blkno - 1]
            if not (1 <= i <= order and 1 <= j <= order):
                raise ParseError(pos, f"index ({i},{j}) outside block {blkno} of order {order}")
            if blocks[blkno - 1] < 0 and i != j:
                raise ParseError(pos, f"off-diagonal entry ({i},{j}) in diagonal block {blkno}")
            entries.setdefault((matno, blkno - 1), []).append((i - 1, j - 1, v))

    def build(matno: int, k: int) -> CoeffMatrix:
        tri = entries.get((matno, k))
        dim = orders[k]
        if not tri:
            return CoeffMatrix.zero(dim)
        r, c, v = zip(*tri)
        return CoeffMatrix.from_triplets(dim, r, c, v)

    C = [build(0, k) for k in range(nblocks)]
    A = [[build(i + 1, k) for k in range(nblocks)] for i in range(m)]
    return SdpProblem(blocks, A, C, np.asarray(bvals))


def write_sdpa(problem: SdpProblem, name: str = "") -> str:
    """Serialize a problem in SDPA sparse format; round-trips exactly."""
    out = io.StringIO()
    if name or problem.name:
        out.write(f'"{name or problem.name}\n')
    out.write(f"{problem.m}\n")
    out.write(f"{problem.nblocks}\n")
    out.write(" ".join(str(s) for s in problem.blocks) + "\n")
    out.write(" ".join(format(v, ".17g") for v in problem.b) + "\n")

    def emit(matno: int, k: int, coeff: CoeffMatrix):
        for r, c, v in zip(coeff.rows, coeff.cols, coeff.vals):
            out.write(f"{matno} {k + 1} {r + 1} {c + 1} {format(v, '.17g')}\n")

    for k, coeff in enumerate(problem.C):
        emit(0, k, coeff)
    for i, row in enumerate(problem.A):
        for k, coeff in enumerate(row):
            emit(i + 1, k, coeff)
    return out.getvalue()


REPORT_COLUMNS = ["instance", "err1", "err2", "err3", "err4", "err5", "err6",
                  "time_seconds", "status"]


def write_report(results) -> str:
    """CSV report with one row per instance; see REPORT_COLUMNS."""
    lines = [",".join(REPORT_COLUMNS)]
    for res in results:
        errs = ",".join(format(e, ".2e") for e in res.dimacs)
        lines.append(f"{res.name},{errs},{res.time_seconds:.3f},{res.status.value}")
    return "\n".join(lines) + "\n"
