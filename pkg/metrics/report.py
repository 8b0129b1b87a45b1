"""
指标报告 - key=value 机器可读块 + ASCII 表格
"""

import io
from typing import List, Optional, Tuple, Union

from rich import box
from rich.console import Console
from rich.table import Table

from .cross_view import CvScores


UNDEFINED = 'undefined'
REPORT_WIDTH = 60


def _fmt(value: Optional[Union[float, int]]) -> str:
    if value is None:
        return UNDEFINED
    if isinstance(value, int):
        return str(value)
    return f'{value:.6f}'


def report_items(scores: CvScores) -> List[Tuple[str, str]]:
    return [
        ('cvma', _fmt(scores.cvma)),
        ('cvidp', _fmt(scores.cvidp)),
        ('cvidr', _fmt(scores.cvidr)),
        ('cvidf1', _fmt(scores.cvidf1)),
        ('idtp', _fmt(scores.idtp)),
        ('idfp', _fmt(scores.idfp)),
        ('idfn', _fmt(scores.idfn)),
        ('misses', _fmt(scores.misses)),
        ('false_positives', _fmt(scores.false_positives)),
        ('mismatches', _fmt(scores.mismatches)),
        ('gt_detections', _fmt(scores.gt_detections)),
        ('pred_detections', _fmt(scores.pred_detections)),
    ]


def render_table(scores: CvScores) -> str:
    """固定宽度、无颜色的 ASCII 表格"""
    table = Table(title='Cross-view tracking metrics', box=box.ASCII, show_lines=False)
    table.add_column('metric', justify='left')
    table.add_column('value', justify='right')
    for key, value in report_items(scores):
        table.add_row(key, value)
    buffer = io.StringIO()
    console = Console(file=buffer, width=REPORT_WIDTH, color_system=None, force_terminal=False,
                      highlight=False, emoji=False)
    console.print(table)
    return buffer.getvalue()


def format_report(scores: CvScores) -> str:
    """先 key=value 块，空行，再表格"""
    lines = [f'{key}={value}' for key, value in report_items(scores)]
    return '\n'.join(lines) + '\n\n' + render_table(scores)


def parse_report(text: str) -> dict:
    """读取报告中的 key=value 块"""
    values = {}
    for line in text.splitlines():
        if not line.strip():
            break
        key, _, value = line.partition('=')
        values[key.strip()] = value.strip()
    return values
