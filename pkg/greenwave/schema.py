"""
Greenwave Config Schema
Typed field definitions, constraints and section validation for run
configurations
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Sequence


class DataType(Enum):
    """Supported field types"""

    INTEGER = "INTEGER"
    FLOAT = "FLOAT"
    STRING = "STRING"
    FLOAT_LIST = "FLOAT_LIST"
    INTEGER_LIST = "INTEGER_LIST"
    # expression string, number, or {"grid": [...], "values": [...]} table
    SIGNAL = "SIGNAL"


class FieldConstraint(Enum):
    """Field constraints"""

    REQUIRED = "REQUIRED"
    POSITIVE = "POSITIVE"
    NON_NEGATIVE = "NON_NEGATIVE"


def _number(value: Any, kind: str) -> float:
    # bool is a subclass of int, reject it explicitly
    if isinstance(value, bool):
        raise TypeError(f"Boolean cannot be converted to {kind}")
    if isinstance(value, str):
        raise TypeError(f"Expected a number, got string '{value}'")
    return value


class Field:
    """One configuration entry of a section"""

    def __init__(
        self,
        name: str,
        data_type: DataType,
        constraints: Optional[List[FieldConstraint]] = None,
        default: Any = None,
        choices: Optional[Sequence[str]] = None,
        length: Optional[int] = None,
    ):
        self.name = name
        self.data_type = data_type
        self.constraints = constraints or []
        self.default = default
        self.choices = tuple(choices) if choices else None
        self.length = length

        if self.choices and data_type != DataType.STRING:
            raise ValueError(f"Field '{name}': choices need a STRING field")

    def is_required(self) -> bool:
        return FieldConstraint.REQUIRED in self.constraints

    def convert_value(self, value: Any) -> Any:
        """Convert value to this field's type"""
        if value is None:
            return None

        if self.data_type == DataType.INTEGER:
            value = _number(value, "INTEGER")
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"Expected an integer, got {value}")
            return int(value)

        if self.data_type == DataType.FLOAT:
            return float(_number(value, "FLOAT"))

        if self.data_type == DataType.STRING:
            if not isinstance(value, str):
                raise TypeError(f"Expected a string, got {value!r}")
            return value

        if self.data_type in (DataType.FLOAT_LIST, DataType.INTEGER_LIST):
            if not isinstance(value, (list, tuple)):
                raise TypeError(f"Expected a list, got {value!r}")
            if self.data_type == DataType.FLOAT_LIST:
                return [float(_number(v, "FLOAT")) for v in value]
            items = []
            for v in value:
                v = _number(v, "INTEGER")
                if isinstance(v, float) and not v.is_integer():
                    raise ValueError(f"Expected integers, got {v}")
                items.append(int(v))
            return items

        if self.data_type == DataType.SIGNAL:
            if isinstance(value, bool):
                raise TypeError("Boolean is not a signal")
            if isinstance(value, (int, float, str)):
                return value
            if isinstance(value, dict):
                missing = {"grid", "values"} - set(value)
                if missing:
                    raise ValueError(
                        f"Sample table needs keys {sorted(missing)}"
                    )
                grid = [float(_number(v, "FLOAT")) for v in value["grid"]]
                values = [float(_number(v, "FLOAT")) for v in value["values"]]
                if len(grid) != len(values) or len(grid) < 4:
                    raise ValueError(
                        "Sample table needs matching 'grid' and 'values' "
                        "with at least 4 entries"
                    )
                return {"grid": grid, "values": values}
            raise TypeError(f"Cannot convert {value!r} to SIGNAL")

        return value

    def validate_value(self, value: Any) -> tuple[bool, Optional[str]]:
        """
        Validate a value against this field's type and constraints
        Returns: (is_valid, error_message)
        """
        if value is None:
            if self.is_required():
                return False, f"Field '{self.name}' is required"
            return True, None

        try:
            converted = self.convert_value(value)
        except (ValueError, TypeError) as e:
            return False, f"Invalid value for '{self.name}': {str(e)}"

        numbers = []
        if isinstance(converted, (int, float)) and not isinstance(
            converted, bool
        ):
            numbers = [converted]
        elif isinstance(converted, list):
            numbers = converted

        if FieldConstraint.POSITIVE in self.constraints:
            if any(not v > 0 for v in numbers):
                return False, f"Field '{self.name}' must be positive"
        if FieldConstraint.NON_NEGATIVE in self.constraints:
            if any(not v >= 0 for v in numbers):
                return False, f"Field '{self.name}' must be non-negative"

        if self.choices and converted not in self.choices:
            return (
                False,
                (
                    f"Field '{self.name}' must be one of "
                    f"{', '.join(self.choices)}"
                ),
            )
        if self.length is not None and isinstance(converted, list):
            if len(converted) != self.length:
                return (
                    False,
                    f"Field '{self.name}' needs {self.length} entries",
                )

        return True, None

    def __repr__(self):
        constraints_str = ", ".join(c.value for c in self.constraints)
        return f"{self.name} {self.data_type.value} {constraints_str}".strip()


class Section:
    """A named group of fields (one JSON object of the run config)"""

    def __init__(self, name: str, fields: List[Field]):
        self.name = name
        self.fields = {f.name: f for f in fields}
        if len(self.fields) != len(fields):
            raise ValueError(f"Duplicate field names in section '{name}'")

    def validate(self, data: Dict[str, Any]) -> tuple[bool, List[str]]:
        """
        Validate one section of data
        Returns: (is_valid, list_of_errors) with errors named section.field
        """
        if not isinstance(data, dict):
            return False, [f"{self.name}: expected an object"]
        errors = []

        for key in data.keys():
            if key not in self.fields:
                errors.append(f"{self.name}.{key}: unknown field")

        for name, spec in self.fields.items():
            value = data.get(name, spec.default)
            is_valid, error = spec.validate_value(value)
            if not is_valid:
                errors.append(f"{self.name}.{name}: {error}")

        return len(errors) == 0, errors

    def convert(self, data: Dict[str, Any]) -> Dict[str, Any]:
        """Converted values with defaults filled in"""
        return {
            name: spec.convert_value(data.get(name, spec.default))
            for name, spec in self.fields.items()
        }

    def __repr__(self):
        fields_str = ", ".join(repr(f) for f in self.fields.values())
        return f"[{self.name}] {fields_str}"
