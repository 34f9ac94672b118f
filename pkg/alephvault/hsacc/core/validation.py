from cerberus import Validator


LOSS_TERMS = ("rec", "mmi", "mmd", "inf")


# The loss subsets of the ablation table, in its column order (M-1 ... M-15).
ABLATION_TABLE = (
    ("rec",),
    ("mmi",),
    ("mmd",),
    ("inf",),
    ("mmd", "inf"),
    ("rec", "mmd"),
    ("rec", "inf"),
    ("mmi", "mmd"),
    ("rec", "mmi"),
    ("mmi", "inf"),
    ("rec", "mmd", "inf"),
    ("rec", "mmi", "mmd"),
    ("mmi", "mmd", "inf"),
    ("rec", "mmi", "inf"),
    ("rec", "mmi", "mmd", "inf"),
)


def _split(value: str, separator: str = ","):
    return [part.strip() for part in value.split(separator) if part.strip()]


class HsaccValidator(Validator):
    """
    This validator adds the following:
    - Coercion of the textual values found in configuration files
      (booleans, comma-separated integer / float / name lists, and
      ablation grids).
    - Default coercion, by declared type, for every schema entry not
      declaring its own coercion.
    Values that already come with the right type are kept as they are.
    """

    def _normalize_coerce_str2bool(self, value):
        """
        Coerces a boolean from strings like true/false, yes/no, on/off, 1/0.
        :param value: The value to coerce.
        :return: The coerced boolean.
        """

        if isinstance(value, bool):
            return value
        lowered = str(value).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"'{value}' is not a boolean")

    def _normalize_coerce_str2ints(self, value):
        """
        Coerces a list of integers from a comma-separated string.
        :param value: The value to coerce.
        :return: The list of integers.
        """

        if isinstance(value, str):
            return [int(part) for part in _split(value)]
        return [int(part) for part in value]

    def _normalize_coerce_str2floats(self, value):
        """
        Coerces a list of floats from a comma-separated string.
        :param value: The value to coerce.
        :return: The list of floats.
        """

        if isinstance(value, str):
            return [float(part) for part in _split(value)]
        return [float(part) for part in value]

    def _normalize_coerce_str2names(self, value):
        """
        Coerces a list of lowercase names from a comma-separated string.
        :param value: The value to coerce.
        :return: The list of names.
        """

        if isinstance(value, str):
            return [part.lower() for part in _split(value)]
        return [str(part).lower() for part in value]

    def _normalize_coerce_str2subsets(self, value):
        """
        Coerces an ablation grid. The grid is a semicolon-separated list of
        cells, each cell being either a table tag (M-1 ... M-15) or a list
        of loss terms joined by '+' (e.g. rec+mmi). The word "all" stands
        for the 15 cells of the table.
        :param value: The value to coerce.
        :return: A list of tuples of loss term names, in canonical order.
        """

        if not isinstance(value, str):
            return [tuple(cell) for cell in value]
        if value.strip().lower() == "all":
            return list(ABLATION_TABLE)
        result = []
        for cell in _split(value, ";"):
            upper = cell.upper()
            if upper.startswith("M-"):
                index = int(upper[2:])
                if not 1 <= index <= len(ABLATION_TABLE):
                    raise ValueError(f"Unknown ablation cell: {cell}")
                result.append(ABLATION_TABLE[index - 1])
            else:
                terms = {part.lower() for part in _split(cell, "+")}
                unknown = terms.difference(LOSS_TERMS)
                if unknown:
                    raise ValueError(f"Unknown loss terms in ablation cell '{cell}': {sorted(unknown)}")
                result.append(tuple(term for term in LOSS_TERMS if term in terms))
        return result

    _DEFAULT_COERCERS = {
        "integer": int,
        "float": float,
        "boolean": "str2bool",
    }

    @classmethod
    def apply_default_coercers(cls, schema, tracked=None):
        """
        In-place modifies a schema to add the default coercers to the input
        documents before validation. This method should be called only once
        per schema.
        :param schema: The schema to in-place modify and add the coercers.
        :param tracked: The already-tracked levels for this schema.
        """

        # Circular dependencies are ignored - they are already treated.
        if tracked is None:
            tracked = set()
        schema_id = id(schema)
        if schema_id in tracked:
            return

        if 'coerce' not in schema:
            coercer = cls._DEFAULT_COERCERS.get(schema.get('type'))
            if coercer is not None:
                schema['coerce'] = coercer
        # We iterate over all the existing dictionaries to repeat this pattern.
        # For this we also track the current schema, to avoid circular dependencies.
        tracked.add(schema_id)
        for sub_schema in schema.values():
            if isinstance(sub_schema, dict):
                cls.apply_default_coercers(sub_schema, tracked)
        tracked.remove(schema_id)
