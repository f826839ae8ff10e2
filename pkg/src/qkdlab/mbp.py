"""Scripted "magical ball" protocol used to reproduce the worked tables.

A ball is encoded with a keyword (OD, EV, M2, L3) and a value n in 1..4 that
satisfies it. A question (nOD: "is n odd?", nL3: "is n less than 3?") is
answered Yes=1 / No=0. Keywords map to bits EV=M2=0, OD=L3=1; OD/EV belong
to the nOD basis and M2/L3 to the nL3 basis.
"""
from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = {
    "OD": lambda n: n % 2 == 1,
    "EV": lambda n: n % 2 == 0,
    "M2": lambda n: n > 2,
    "L3": lambda n: n < 3,
}
KEYWORD_BIT = {"EV": 0, "M2": 0, "OD": 1, "L3": 1}
KEYWORD_BASIS = {"OD": "nOD", "EV": "nOD", "M2": "nL3", "L3": "nL3"}
QUESTIONS = {"nOD": lambda n: n % 2 == 1, "nL3": lambda n: n < 3}
ANSWER_KEYWORD = {("nOD", 1): "OD", ("nOD", 0): "EV", ("nL3", 1): "L3", ("nL3", 0): "M2"}


class ScriptError(ValueError):
    pass


def check_encoding(keyword: str, n: int) -> None:
    if keyword not in KEYWORDS:
        raise ScriptError(f"unknown keyword {keyword!r}")
    if n not in (1, 2, 3, 4):
        raise ScriptError(f"value {n} is not in 1..4")
    if not KEYWORDS[keyword](n):
        raise ScriptError(f"value {n} does not satisfy keyword {keyword}")


def ask(question: str, n: int) -> int:
    if question not in QUESTIONS:
        raise ScriptError(f"unknown question {question!r}")
    return int(QUESTIONS[question](n))


@dataclass
class EveStep:
    question: str
    resend_value: int


@dataclass
class ScriptSlot:
    keyword: str
    value: int
    bob_question: str
    eve: EveStep | None = None


@dataclass
class SlotResult:
    slot: int
    alice_bit: int
    eve_answer: int | None
    delivered_value: int
    bob_answer: int
    kept: bool

    @property
    def error(self) -> bool:
        return self.kept and self.alice_bit != self.bob_answer


def run_script(script: list[ScriptSlot]) -> list[SlotResult]:
    """Evaluate a scripted run. Slots are numbered from 1."""
    out = []
    for i, s in enumerate(script, start=1):
        check_encoding(s.keyword, s.value)
        if s.bob_question not in QUESTIONS:
            raise ScriptError(f"slot {i}: unknown question {s.bob_question!r}")
        delivered, eve_answer = s.value, None
        if s.eve is not None:
            eve_answer = ask(s.eve.question, s.value)
            kw = ANSWER_KEYWORD[(s.eve.question, eve_answer)]
            try:
                check_encoding(kw, s.eve.resend_value)
            except ScriptError as exc:
                raise ScriptError(f"slot {i}: Eve's resend inconsistent with her answer: {exc}") from None
            delivered = s.eve.resend_value
        bob = ask(s.bob_question, delivered)
        kept = KEYWORD_BASIS[s.keyword] == s.bob_question
        out.append(SlotResult(i, KEYWORD_BIT[s.keyword], eve_answer, delivered, bob, kept))
    return out


def sifted(results: list[SlotResult]):
    kept = [r for r in results if r.kept]
    return [r.slot for r in kept], [r.alice_bit for r in kept], [r.bob_answer for r in kept]


def qber(results: list[SlotResult]) -> float:
    kept = [r for r in results if r.kept]
    return sum(r.error for r in kept) / len(kept) if kept else float("nan")


# Worked example data ------------------------------------------------------

TABLE1_KEYWORDS = ["OD", "M2", "L3", "EV", "L3", "M2", "EV", "EV", "L3", "EV", "OD", "M2"]
TABLE1_VALUES = [3, 4, 2, 2, 1, 3, 4, 2, 1, 4, 1, 3]
BOB_QUESTIONS = ["nOD", "nOD", "nL3", "nOD", "nL3", "nL3", "nL3", "nOD", "nOD", "nL3", "nOD", "nL3"]
EVE_QUESTIONS = ["nOD", "nL3", "nL3", "nL3", "nOD", "nOD", "nL3", "nL3", "nOD", "nOD", "nL3", "nOD"]
EVE_VALUES = [3, 3, 1, 2, 3, 4, 4, 1, 1, 2, 2, 3]
# The eavesdropping run is a fresh encoding: ball 6 (keyword M2) picked n=4,
# which is what Eve's "No" to nOD in that slot requires.
TABLE3_VALUES = [3, 4, 2, 2, 1, 4, 4, 2, 1, 4, 1, 3]


def table2_script() -> list[ScriptSlot]:
    return [ScriptSlot(k, n, q) for k, n, q in zip(TABLE1_KEYWORDS, TABLE1_VALUES, BOB_QUESTIONS)]


def table3_script() -> list[ScriptSlot]:
    return [ScriptSlot(k, n, q, EveStep(eq, m))
            for k, n, q, eq, m in zip(TABLE1_KEYWORDS, TABLE3_VALUES, BOB_QUESTIONS,
                                      EVE_QUESTIONS, EVE_VALUES)]
