"""The seven stance categories with their numeric codes and rubric text."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidLabel


@dataclass(frozen=True)
class StanceLabel:
    code: int
    name: str
    rubric: str


LABELS: tuple[StanceLabel, ...] = (
    StanceLabel(0, "ANTI_HAMAS", "Ataca o responsabiliza explícitamente a Hamás y lo señala como grupo terrorista."),
    StanceLabel(1, "ANTI_ISRAEL", "Señala a Israel, su gobierno o sus dirigentes como culpables de actos inmorales en el conflicto."),
    StanceLabel(2, "ANTI_PALESTINO", "Responsabiliza a la población palestina del conflicto o la ataca por su religión o posición."),
    StanceLabel(3, "SIN_POSTURA", "No toma postura explícita hacia Israel ni Hamás, o ataca a ambos bandos por igual."),
    StanceLabel(4, "NO_RELACIONADO", "Sin relación con la controversia: otros temas, noticias ajenas o ataques sin conexión explícita."),
    StanceLabel(5, "PRO_ISRAEL", "Apoya explícitamente a Israel, defiende su actuar o se preocupa por su población."),
    StanceLabel(6, "PRO_PALESTINO", "Apoya explícitamente al pueblo palestino o se preocupa por la población de Gaza."),
)

NUM_CLASSES = len(LABELS)
VALID_CODES = frozenset(label.code for label in LABELS)

_BY_CODE = {label.code: label for label in LABELS}


def label_for(code: int) -> StanceLabel:
    try:
        return _BY_CODE[code]
    except KeyError:
        raise InvalidLabel(f"label code {code} outside 0..{NUM_CLASSES - 1}")


def check_code(code: int) -> int:
    if code not in VALID_CODES:
        raise InvalidLabel(f"label code {code} outside 0..{NUM_CLASSES - 1}")
    return code


def schema_as_dicts() -> list[dict]:
    return [
        {"code": label.code, "name": label.name, "rubric": label.rubric}
        for label in LABELS
    ]
