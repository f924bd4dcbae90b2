"""Code and demographic groupings used by the temporal and probe analytics.

The ICD-10 block table is a config value, not a hardcoded truth: the default
below covers the chapters that occur in dermatology corpora, and callers can
pass their own ``(start, end, name)`` ranges. Codes that match no range map to
``"unmapped"``. Ranges are matched in table order, first match wins, so more
specific entries (e.g. the C7A-C7B pair) must precede broader ones.
"""
from __future__ import annotations

from typing import Optional, Sequence

BlockTable = Sequence[tuple[str, str, str]]

DEFAULT_ICD_BLOCKS: BlockTable = (
    # Infectious and parasitic (A00-B99)
    ("A00", "A09", "A00-A09"),
    ("A15", "A19", "A15-A19"),
    ("A20", "A28", "A20-A28"),
    ("A30", "A49", "A30-A49"),
    ("A50", "A64", "A50-A64"),
    ("A65", "A69", "A65-A69"),
    ("A70", "A74", "A70-A74"),
    ("A75", "A79", "A75-A79"),
    ("A80", "A89", "A80-A89"),
    ("A90", "A99", "A90-A99"),
    ("B00", "B09", "B00-B09"),
    ("B10", "B10", "B10"),
    ("B15", "B19", "B15-B19"),
    ("B20", "B24", "B20-B24"),
    ("B25", "B34", "B25-B34"),
    ("B35", "B49", "B35-B49"),
    ("B50", "B64", "B50-B64"),
    ("B65", "B83", "B65-B83"),
    ("B85", "B89", "B85-B89"),
    ("B90", "B94", "B90-B94"),
    ("B95", "B97", "B95-B97"),
    ("B99", "B99", "B99"),
    # Neoplasms (C00-D49); C7A/C7B precede C76-C80 so they win the match
    ("C7A", "C7B", "C7A-C7B"),
    ("C00", "C14", "C00-C14"),
    ("C15", "C26", "C15-C26"),
    ("C30", "C39", "C30-C39"),
    ("C40", "C41", "C40-C41"),
    ("C43", "C44", "C43-C44"),
    ("C45", "C49", "C45-C49"),
    ("C50", "C50", "C50"),
    ("C51", "C58", "C51-C58"),
    ("C60", "C63", "C60-C63"),
    ("C64", "C68", "C64-C68"),
    ("C69", "C72", "C69-C72"),
    ("C73", "C75", "C73-C75"),
    ("C76", "C80", "C76-C80"),
    ("C81", "C96", "C81-C96"),
    ("D00", "D09", "D00-D09"),
    ("D10", "D36", "D10-D36"),
    ("D37", "D48", "D37-D48"),
    ("D49", "D49", "D49"),
    # Endocrine, nutritional, metabolic (E00-E89)
    ("E00", "E07", "E00-E07"),
    ("E08", "E13", "E08-E13"),
    ("E15", "E16", "E15-E16"),
    ("E20", "E35", "E20-E35"),
    ("E36", "E36", "E36"),
    ("E40", "E46", "E40-E46"),
    ("E50", "E64", "E50-E64"),
    ("E65", "E68", "E65-E68"),
    ("E70", "E88", "E70-E88"),
    ("E89", "E89", "E89"),
    # Circulatory (I00-I99)
    ("I00", "I02", "I00-I02"),
    ("I05", "I09", "I05-I09"),
    ("I10", "I16", "I10-I16"),
    ("I20", "I25", "I20-I25"),
    ("I26", "I28", "I26-I28"),
    ("I30", "I52", "I30-I52"),
    ("I60", "I69", "I60-I69"),
    ("I70", "I79", "I70-I79"),
    ("I80", "I89", "I80-I89"),
    ("I95", "I99", "I95-I99"),
    # Skin (L00-L99)
    ("L00", "L08", "L00-L08"),
    ("L10", "L14", "L10-L14"),
    ("L20", "L30", "L20-L30"),
    ("L40", "L45", "L40-L45"),
    ("L49", "L54", "L49-L54"),
    ("L55", "L59", "L55-L59"),
    ("L60", "L75", "L60-L75"),
    ("L76", "L76", "L76"),
    ("L80", "L99", "L80-L99"),
    # Congenital (Q00-Q99)
    ("Q00", "Q07", "Q00-Q07"),
    ("Q10", "Q18", "Q10-Q18"),
    ("Q20", "Q28", "Q20-Q28"),
    ("Q30", "Q34", "Q30-Q34"),
    ("Q35", "Q37", "Q35-Q37"),
    ("Q38", "Q45", "Q38-Q45"),
    ("Q50", "Q56", "Q50-Q56"),
    ("Q60", "Q64", "Q60-Q64"),
    ("Q65", "Q79", "Q65-Q79"),
    ("Q80", "Q89", "Q80-Q89"),
    ("Q90", "Q99", "Q90-Q99"),
    # Symptoms and signs (R00-R99)
    ("R00", "R09", "R00-R09"),
    ("R10", "R19", "R10-R19"),
    ("R20", "R23", "R20-R23"),
    ("R25", "R29", "R25-R29"),
    ("R30", "R39", "R30-R39"),
    ("R40", "R46", "R40-R46"),
    ("R47", "R49", "R47-R49"),
    ("R50", "R69", "R50-R69"),
    ("R70", "R79", "R70-R79"),
    ("R80", "R82", "R80-R82"),
    ("R83", "R89", "R83-R89"),
    ("R90", "R94", "R90-R94"),
    ("R97", "R97", "R97"),
    ("R99", "R99", "R99"),
)

UNMAPPED_BLOCK = "unmapped"


def icd_category(code: str) -> str:
    """First three characters before any dot, uppercased (e.g. 'L23.7' -> 'L23')."""
    return code.split(".")[0].strip().upper()[:3]


def icd_block(code: Optional[str], table: BlockTable = DEFAULT_ICD_BLOCKS) -> Optional[str]:
    """Map an ICD-10 code to its block name, or 'unmapped' when no range matches."""
    if code is None or not code.strip():
        return None
    cat = icd_category(code)
    if len(cat) < 3:
        return UNMAPPED_BLOCK
    for start, end, name in table:
        if start <= cat <= end:
            return name
    return UNMAPPED_BLOCK


FST_GROUPS = ("I-II", "III-IV", "V-VI")


def fst_group(fst: Optional[int]) -> Optional[str]:
    """Coarse three-way skin-type grouping: 1-2, 3-4, 5-6."""
    if fst is None:
        return None
    return FST_GROUPS[(fst - 1) // 2]


AGE_BINS = ((0, 17, "0-17"), (18, 29, "18-29"), (30, 49, "30-49"), (50, 69, "50-69"))
AGE_TOP_BIN = "70+"


def age_group(age: Optional[float]) -> Optional[str]:
    if age is None:
        return None
    for lo, hi, name in AGE_BINS:
        if lo <= age <= hi:
            return name
    return AGE_TOP_BIN
