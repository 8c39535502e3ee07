"""Generate Excel workbooks with run summaries and convergence charts."""

from pathlib import Path
from typing import Dict, Sequence
import logging

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.chart import LineChart, Reference, ScatterChart, Series
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter

logger = logging.getLogger(__name__)


class ExcelGenerator:
    """Generate an Excel workbook with one worksheet per result table."""

    def __init__(self, output_file: Path, theme_colors: Dict[str, str]):
        self.output_file = Path(output_file)
        self.theme_colors = theme_colors
        self.workbook = Workbook()

        # Remove default sheet
        if 'Sheet' in self.workbook.sheetnames:
            self.workbook.remove(self.workbook['Sheet'])

    def _apply_header_style(self, sheet, row: int = 1):
        """Apply header styling to a row."""
        header_fill = PatternFill(
            start_color=self.theme_colors['header_bg'],
            end_color=self.theme_colors['header_bg'],
            fill_type='solid'
        )
        header_font = Font(
            color=self.theme_colors['header_text'],
            bold=True,
            size=11
        )

        for cell in sheet[row]:
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = Alignment(horizontal='center', vertical='center')

    def _autosize_columns(self, sheet):
        """Auto-size columns based on content."""
        for column in sheet.columns:
            column_letter = get_column_letter(column[0].column)
            max_length = max((len(str(cell.value)) for cell in column if cell.value is not None), default=0)
            sheet.column_dimensions[column_letter].width = min(max_length + 2, 50)

    def _write_frame(self, sheet, df: pd.DataFrame, header_row: int = 1):
        """Write a DataFrame with a styled header row; returns the last data row."""
        for col_idx, header in enumerate(df.columns, 1):
            sheet.cell(header_row, col_idx, str(header))

        for row_idx, row in enumerate(df.itertuples(index=False), header_row + 1):
            for col_idx, value in enumerate(row, 1):
                if isinstance(value, (np.floating, float)):
                    value = float(value)
                elif isinstance(value, np.integer):
                    value = int(value)
                sheet.cell(row_idx, col_idx, value)

        self._apply_header_style(sheet, header_row)
        return header_row + len(df)

    def create_summary_sheet(self, metrics: Dict):
        """Create Summary worksheet listing every run metric."""
        logger.info("Creating Summary worksheet")

        sheet = self.workbook.create_sheet("Summary")

        sheet['A1'] = "Schrodingerized Helmholtz run"
        sheet['A1'].font = Font(size=16, bold=True, color=self.theme_colors['primary'])

        sheet['A3'] = "Metric"
        sheet['B3'] = "Value"
        self._apply_header_style(sheet, 3)

        row = 4
        for key, value in metrics.items():
            sheet[f'A{row}'] = key
            sheet[f'A{row}'].font = Font(bold=True)
            sheet[f'B{row}'] = float(value) if isinstance(value, np.floating) else value
            row += 1

        self._autosize_columns(sheet)

    def create_solution_sheet(self, solution: pd.DataFrame):
        """Create Solution worksheet: exact and recovered solution against x."""
        logger.info("Creating Solution worksheet")

        sheet = self.workbook.create_sheet("Solution")
        last_row = self._write_frame(sheet, solution)
        self._autosize_columns(sheet)

        chart = ScatterChart()
        chart.title = "Real part of u and recovered v"
        chart.style = 13
        chart.x_axis.title = "x"
        chart.y_axis.title = "Re"

        x_values = Reference(sheet, min_col=1, min_row=2, max_row=last_row)
        for col in (2, 4):
            values = Reference(sheet, min_col=col, min_row=1, max_row=last_row)
            chart.series.append(Series(values, x_values, title_from_data=True))

        sheet.add_chart(chart, "H2")

    def create_series_sheet(self, series: pd.DataFrame):
        """Create Time Series worksheet with a log-scale error chart."""
        logger.info("Creating Time Series worksheet")

        sheet = self.workbook.create_sheet("Time Series")
        last_row = self._write_frame(sheet, series)
        self._autosize_columns(sheet)

        chart = LineChart()
        chart.title = "Error of v(t)"
        chart.style = 10
        chart.y_axis.title = "max-norm error"
        chart.x_axis.title = "t"
        chart.y_axis.scaling.logBase = 10

        data = Reference(sheet, min_col=2, max_col=series.shape[1], min_row=1, max_row=last_row)
        categories = Reference(sheet, min_col=1, min_row=2, max_row=last_row)

        chart.add_data(data, titles_from_data=True)
        chart.set_categories(categories)

        if len(series) > 24:
            chart.x_axis.tickLblSkip = len(series) // 8

        sheet.add_chart(chart, f"A{last_row + 3}")

    def create_study_sheet(self, study: pd.DataFrame, sweep: str, plotted: Sequence[str] = ()):
        """Create Study worksheet: one row per sweep point, charting the given columns."""
        logger.info(f"Creating Study worksheet ({sweep}-sweep)")

        sheet = self.workbook.create_sheet("Study")
        last_row = self._write_frame(sheet, study)
        self._autosize_columns(sheet)

        columns = [c for c in plotted if c in study.columns]
        if not columns:
            return

        chart = LineChart()
        chart.title = f"Convergence against {sweep}"
        chart.style = 12
        chart.x_axis.title = sweep
        chart.y_axis.scaling.logBase = 10

        for name in columns:
            col = list(study.columns).index(name) + 1
            chart.add_data(Reference(sheet, min_col=col, min_row=1, max_row=last_row), titles_from_data=True)
        sweep_col = list(study.columns).index(sweep) + 1 if sweep in study.columns else 1
        chart.set_categories(Reference(sheet, min_col=sweep_col, min_row=2, max_row=last_row))

        sheet.add_chart(chart, f"A{last_row + 3}")

    def save(self):
        """Save workbook to file."""
        logger.info(f"Saving Excel workbook to {self.output_file}")
        self.output_file.parent.mkdir(parents=True, exist_ok=True)
        self.workbook.save(self.output_file)
        logger.info("Excel workbook saved successfully")
