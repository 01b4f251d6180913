"""
Spec Parser - line-based extension spec files and boundary-condition text
Hand-written recursive descent with line/column error positions
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union
import logging

import numpy as np

from utils.errors import SpecError, SpecSyntaxError
from utils.settings import Settings

logger = logging.getLogger(__name__)

EXAMPLE_ODE = 'ode'
EXAMPLE_CR = 'cauchy-riemann'
EXAMPLES = (EXAMPLE_ODE, EXAMPLE_CR)
TASKS = ('verify', 'solve-system', 'sweep', 'spectrum')

# Serialization order
KEYS = ('example', 'a11', 'a12', 'a21', 'a22', 'a', 'n', 'M', 'task', 'tol_analytic', 'tol_quadrature')
ODE_KEYS = ('a11', 'a12', 'a21', 'a22')
CR_KEYS = ('a',)
TOLERANCE_KEYS = ('tol_analytic', 'tol_quadrature')

GRID_LIMITS = {'n': (8, 4096), 'M': (4, 64)}
BOUNDARY_TOKENS = ("y(0)", "y(1)", "y'(0)", "y'(1)")


@dataclass(frozen=True)
class SpecDocument:
    """Parsed spec file"""

    example: str
    params: Tuple[complex, ...]
    grid: int
    tasks: Tuple[str, ...]
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def grid_key(self) -> str:
        return 'n' if self.example == EXAMPLE_ODE else 'M'

    def settings(self, base: Settings) -> Settings:
        return base.with_overrides(self.tolerances)

    def to_dict(self) -> Dict:
        names = ODE_KEYS if self.example == EXAMPLE_ODE else CR_KEYS
        return {
            'example': self.example,
            'params': {k: [v.real, v.imag] for k, v in zip(names, self.params)},
            self.grid_key: self.grid,
            'tasks': list(self.tasks),
            'tolerances': dict(self.tolerances),
        }


@dataclass(frozen=True)
class BoundaryForm:
    """Coefficients on (y(0), y(1), y'(0), y'(1)), first nonzero entry 1"""

    coefficients: Tuple[complex, complex, complex, complex]

    def as_row(self) -> np.ndarray:
        return np.array(self.coefficients, dtype=complex)

    def to_text(self) -> str:
        parts = [f"({format_complex(c)})*{token}" for c, token in zip(self.coefficients, BOUNDARY_TOKENS) if c != 0]
        return '+'.join(parts) + '=0'


def _is_digit(ch: str) -> bool:
    return len(ch) == 1 and '0' <= ch <= '9'


class _Cursor:
    """Character cursor over one line"""

    def __init__(self, text: str, line: int, offset: int = 0):
        self.text = text
        self.line = line
        self.offset = offset
        self.pos = 0

    @property
    def column(self) -> int:
        return self.offset + self.pos + 1

    def error(self, message: str) -> SpecSyntaxError:
        return SpecSyntaxError(message, line=self.line, column=self.column)

    def skip_spaces(self):
        while self.pos < len(self.text) and self.text[self.pos] in ' \t':
            self.pos += 1

    def peek(self) -> str:
        self.skip_spaces()
        return self.text[self.pos] if self.pos < len(self.text) else ''

    def at_end(self) -> bool:
        return self.peek() == ''

    def take(self, expected: str):
        if not self.text.startswith(expected, self.pos):
            raise self.error(f"Expected '{expected}'")
        self.pos += len(expected)

    def number(self) -> float:
        """digits [. digits] [e [sign] digits]"""
        self.skip_spaces()
        start = self.pos
        text = self.text
        while self.pos < len(text) and _is_digit(text[self.pos]):
            self.pos += 1
        if self.pos < len(text) and text[self.pos] == '.':
            self.pos += 1
            while self.pos < len(text) and _is_digit(text[self.pos]):
                self.pos += 1
        mantissa = text[start:self.pos]
        if not any(_is_digit(ch) for ch in mantissa):
            self.pos = start
            raise self.error("Expected a number")
        if self.pos < len(text) and text[self.pos] in 'eE':
            mark = self.pos
            self.pos += 1
            if self.pos < len(text) and text[self.pos] in '+-':
                self.pos += 1
            digits = self.pos
            while self.pos < len(text) and _is_digit(text[self.pos]):
                self.pos += 1
            if self.pos == digits:
                self.pos = mark
                raise self.error("Malformed exponent")
        value = float(text[start:self.pos])
        if not np.isfinite(value):
            self.pos = start
            raise self.error("Number out of range")
        return value

    def starts_number(self) -> bool:
        ch = self.peek()
        return _is_digit(ch) or ch == '.'

    def sign(self) -> float:
        ch = self.peek()
        if ch in ('+', '-'):
            self.pos += 1
            return -1.0 if ch == '-' else 1.0
        return 1.0

    def imaginary_unit(self) -> bool:
        if self.peek() == 'i':
            self.pos += 1
            return True
        return False

    def complex_literal(self) -> complex:
        """[sign] (number [i] | i) [sign (number i | i)]"""
        first_sign = self.sign()
        real, imag = 0.0, 0.0
        if self.imaginary_unit():
            imag = first_sign
            first_is_imag = True
        elif self.starts_number():
            value = first_sign * self.number()
            first_is_imag = self.imaginary_unit()
            if first_is_imag:
                imag = value
            else:
                real = value
        else:
            raise self.error("Expected a number or 'i' after the sign" if self.pos else "Expected a complex number")

        if first_is_imag or self.peek() not in ('+', '-'):
            return complex(real, imag)

        second_sign = self.sign()
        if self.imaginary_unit():
            return complex(real, second_sign)
        if not self.starts_number():
            raise self.error("Dangling operator: expected the imaginary part")
        value = self.number()
        if not self.imaginary_unit():
            raise self.error("Second term of a complex literal must be imaginary")
        return complex(real, second_sign * value)


def _parse_complex_value(value: str, line: int, column: int) -> complex:
    cursor = _Cursor(value, line, column - 1)
    result = cursor.complex_literal()
    if not cursor.at_end():
        raise cursor.error(f"Unexpected character '{cursor.peek()}'")
    return result


def _parse_int_value(value: str, line: int, column: int) -> int:
    stripped = value.strip()
    if not stripped or not all(_is_digit(ch) for ch in stripped):
        raise SpecSyntaxError("Expected a positive integer", line=line, column=column)
    return int(stripped)


def _parse_positive_real(value: str, line: int, column: int) -> float:
    cursor = _Cursor(value, line, column - 1)
    number = cursor.number()
    if not cursor.at_end():
        raise cursor.error(f"Unexpected character '{cursor.peek()}'")
    if number <= 0:
        raise SpecError("Tolerance must be positive", line=line, column=column)
    return number


def _split_lines(text: Union[str, bytes]) -> List[str]:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode('utf-8')
        except UnicodeDecodeError as e:
            raise SpecSyntaxError(f"Spec is not valid UTF-8 (byte {e.start})", line=1, column=1) from e
    return text.replace('\r\n', '\n').split('\n')


def parse_spec(text: Union[str, bytes]) -> SpecDocument:
    """
    Parse a spec document

    Args:
        text: key=value lines, '#' comments, LF or CRLF

    Returns:
        SpecDocument: parsed document

    Raises:
        SpecSyntaxError: malformed line or literal
        SpecError: unknown, duplicate, missing or misplaced keys and range errors
    """
    entries: Dict[str, Tuple[object, int, int]] = {}
    tasks: List[str] = []

    lines = _split_lines(text)
    # missing keys are reported after the last line
    end = (len(lines), 1)
    for number, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0]
        if not line.strip():
            continue
        if '=' not in line:
            indent = len(line) - len(line.lstrip())
            raise SpecSyntaxError("Expected key=value", line=number, column=indent + 1)

        key_part, value = line.split('=', 1)
        key = key_part.strip()
        key_column = len(key_part) - len(key_part.lstrip()) + 1
        value_column = len(key_part) + 2
        if not key or not (key[0].isalpha() or key[0] == '_') or not all(ch.isalnum() or ch == '_' for ch in key):
            raise SpecSyntaxError(f"Invalid key '{key}'", line=number, column=key_column)
        if key not in KEYS:
            raise SpecError(f"Unknown key '{key}'", line=number, column=key_column)
        if key != 'task' and key in entries:
            raise SpecError(f"Duplicate key '{key}'", line=number, column=key_column)

        stripped = value.strip()
        if not stripped:
            raise SpecSyntaxError(f"Missing value for '{key}'", line=number, column=value_column)

        if key == 'example':
            if stripped not in EXAMPLES:
                raise SpecError(f"Unknown example '{stripped}'", line=number, column=value_column)
            parsed = stripped
        elif key == 'task':
            if stripped not in TASKS:
                raise SpecError(f"Unknown task '{stripped}'", line=number, column=value_column)
            tasks.append(stripped)
            continue
        elif key in ODE_KEYS or key in CR_KEYS:
            parsed = _parse_complex_value(value, number, value_column)
        elif key in GRID_LIMITS:
            parsed = _parse_int_value(value, number, value_column)
            low, high = GRID_LIMITS[key]
            if not low <= parsed <= high:
                raise SpecError(f"'{key}' must be in [{low}, {high}], got {parsed}", line=number, column=value_column)
        else:
            parsed = _parse_positive_real(value, number, value_column)
        entries[key] = (parsed, number, key_column)

    if 'example' not in entries:
        raise SpecError("Missing required key 'example'", *end)
    example = entries['example'][0]
    required, foreign = (ODE_KEYS + ('n',), CR_KEYS + ('M',))
    if example == EXAMPLE_CR:
        required, foreign = foreign, required
    for key in foreign:
        if key in entries:
            _, line, column = entries[key]
            raise SpecError(f"Key '{key}' does not belong to a '{example}' spec", line=line, column=column)
    for key in required:
        if key not in entries:
            raise SpecError(f"Missing required key '{key}'", *end)
    if not tasks:
        raise SpecError("Missing required key 'task'", *end)

    params = tuple(entries[k][0] for k in required[:-1])
    tolerances = {k: entries[k][0] for k in TOLERANCE_KEYS if k in entries}
    document = SpecDocument(example, params, entries[required[-1]][0], tuple(tasks), tolerances)
    logger.debug(f"Parsed spec: {document.example}, tasks {list(document.tasks)}")
    return document


def format_real(value: float) -> str:
    return format(float(value), '.17g')


def format_complex(value: complex) -> str:
    """Literal accepted by the complex grammar, 17 significant digits"""
    value = complex(value)
    imag = value.imag
    sign = '-' if np.signbit(imag) else '+'
    return f"{format_real(value.real)}{sign}{format_real(abs(imag))}i"


def serialize(doc: SpecDocument) -> str:
    """
    Canonical text of a document

    Args:
        doc: document

    Returns:
        str: LF-terminated lines in canonical key order
    """
    names = ODE_KEYS if doc.example == EXAMPLE_ODE else CR_KEYS
    values = dict(zip(names, doc.params))
    lines = [f"example={doc.example}"]
    for key in KEYS[1:]:
        if key in values:
            lines.append(f"{key}={format_complex(values[key])}")
        elif key == doc.grid_key:
            lines.append(f"{key}={doc.grid}")
        elif key == 'task':
            lines.extend(f"task={task}" for task in doc.tasks)
        elif key in doc.tolerances:
            lines.append(f"{key}={format_real(doc.tolerances[key])}")
    return '\n'.join(lines) + '\n'


def round_trip(doc: SpecDocument) -> SpecDocument:
    return parse_spec(serialize(doc))


class _BoundaryParser:
    """side '=' side, side := [sign] term (sign term)*, term := factor ([*] factor)*"""

    def __init__(self, text: str):
        self.cursor = _Cursor(text, line=1)

    def parse(self) -> np.ndarray:
        lhs = self.side()
        if self.cursor.peek() != '=':
            raise self.cursor.error("Expected '='")
        self.cursor.take('=')
        rhs = self.side()
        if not self.cursor.at_end():
            raise self.cursor.error(f"Unexpected character '{self.cursor.peek()}'")
        return lhs - rhs

    def side(self) -> np.ndarray:
        if self.cursor.peek() in ('', '='):
            raise self.cursor.error("Empty side of the condition")
        total = np.zeros(4, dtype=complex)
        sign = self.cursor.sign()
        while True:
            total += sign * self.term()
            if self.cursor.peek() not in ('+', '-'):
                return total
            sign = self.cursor.sign()

    def term(self) -> np.ndarray:
        coefficient = 1.0 + 0j
        variable: Optional[int] = None
        expect_factor = True
        while expect_factor:
            start = self.cursor.column
            factor = self.factor()
            if isinstance(factor, int):
                if variable is not None:
                    raise SpecSyntaxError("Nonlinear term: product of boundary values", line=1, column=start)
                variable = factor
            else:
                coefficient *= factor
            ch = self.cursor.peek()
            if ch == '*':
                self.cursor.take('*')
            else:
                expect_factor = ch in ('y', '(', '.', 'i') or _is_digit(ch)
        out = np.zeros(4, dtype=complex)
        if variable is None:
            if coefficient != 0:
                raise self.cursor.error("Constant term: boundary conditions are homogeneous")
            return out
        out[variable] = coefficient
        return out

    def factor(self) -> Union[int, complex]:
        cursor = self.cursor
        ch = cursor.peek()
        for index, token in enumerate(BOUNDARY_TOKENS):
            if cursor.text.startswith(token, cursor.pos):
                cursor.pos += len(token)
                return index
        if ch == 'y':
            raise cursor.error("Unknown boundary token")
        if ch == '(':
            cursor.take('(')
            value = cursor.complex_literal()
            if cursor.peek() != ')':
                raise cursor.error("Expected ')'")
            cursor.take(')')
            return value
        if ch == 'i':
            cursor.pos += 1
            return 1j
        if cursor.starts_number():
            value = cursor.number()
            return complex(0, value) if cursor.imaginary_unit() else complex(value)
        if ch == '':
            raise cursor.error("Dangling operator")
        raise cursor.error(f"Unexpected character '{ch}'")


def parse_boundary_condition(text: str) -> BoundaryForm:
    """
    Parse one linear boundary condition

    Args:
        text: e.g. "y(0)+y(1)=0" or "y'(0)=(0.5-0.5i)*y'(1)"

    Returns:
        BoundaryForm: lhs - rhs, scaled so the first nonzero coefficient is 1

    Raises:
        SpecSyntaxError: unknown token, nonlinear term, empty side or trivial condition
    """
    vector = _BoundaryParser(text).parse()
    nonzero = np.flatnonzero(vector)
    if nonzero.size == 0:
        raise SpecSyntaxError("Condition has no nonzero coefficient", line=1, column=1)
    vector = vector / vector[nonzero[0]]
    return BoundaryForm(tuple(complex(v) for v in vector))


def parse_complex(text: str, line: int = 1) -> complex:
    """Parse one complex literal such as '1.5-2i', 'i' or '-0.0866i'"""
    return _parse_complex_value(text, line, 1)
