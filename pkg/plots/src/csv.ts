/**
 * Minimal CSV reading for gaplab output files.
 *
 * The files are machine-written: one header row, comma separators, no quoting,
 * '.' decimal separator, empty cells for null. Anything else is an error.
 */

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export class CsvError extends Error {}

export function parseCsv(text: string): Table {
  // gaplab CSVs may open with one '# ...' provenance comment line
  const lines = text
    .split(/\r?\n/)
    .filter((line) => line.length > 0 && !line.startsWith('#'));
  if (lines.length === 0) {
    throw new CsvError('empty CSV: no header row');
  }
  const columns = lines[0].split(',');
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== columns.length) {
      throw new CsvError(`row ${i + 1} has ${cells.length} cells, header has ${columns.length}`);
    }
    const row: Record<string, string> = {};
    columns.forEach((c, j) => (row[c] = cells[j]));
    return row;
  });
  return { columns, rows };
}

/** Assert the table carries every column a figure kind consumes. */
export function requireColumns(table: Table, needed: string[]): void {
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new CsvError(
      `missing columns: ${missing.join(', ')} (file has: ${table.columns.join(', ')})`,
    );
  }
}

export function numbersOf(table: Table, column: string): number[] {
  return table.rows.map((row) => {
    const cell = row[column];
    if (cell === '' || cell === undefined) return NaN;
    const value = Number(cell);
    if (Number.isNaN(value) && cell !== 'nan') {
      throw new CsvError(`column ${column} holds non-numeric cell ${JSON.stringify(cell)}`);
    }
    return value;
  });
}
