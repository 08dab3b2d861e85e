/**
 * The four figure kinds rendered from gaplab CSV files.
 *
 * Rendering is read-only over the inputs and deterministic: the same CSV
 * bytes always produce the same SVG bytes. No statistic is recomputed here;
 * every number drawn comes straight from a CSV cell.
 */

import { CsvError, numbersOf, parseCsv, requireColumns, Table } from './csv';
import { frame, Frame, PALETTE } from './svg';

export type FigureKind = 'tail_vs_bound' | 'theta_density' | 'scaling' | 'crossover';

export interface FigureSpec {
  kind: FigureKind;
  input: string; // CSV text (callers read the file)
  title?: string;
  statistic?: string; // tail_vs_bound: keep one statistic when the file holds several
  logY?: boolean;
}

const FLOOR = 1e-7; // probabilities of zero are drawn at the axis floor

function finitePositive(values: number[]): number[] {
  return values.filter((v) => Number.isFinite(v) && v > 0);
}

function span(values: number[], pad = 1.3): [number, number] {
  if (values.length === 0) throw new CsvError('no data rows to plot');
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  return [lo / pad, hi * pad];
}

interface SeriesRow {
  epsilon: number;
  pHat: number;
  lo: number;
  hi: number;
  bound: number;
  boundTag: string;
  isTheorem: boolean;
  key: string;
}

function tailSeries(table: Table, statistic?: string): Map<string, SeriesRow[]> {
  requireColumns(table, [
    'statistic',
    'epsilon',
    'p_hat',
    'wilson_low',
    'wilson_high',
    'bound_tag',
    'bound_clamped',
  ]);
  const eps = numbersOf(table, 'epsilon');
  const pHat = numbersOf(table, 'p_hat');
  const lo = numbersOf(table, 'wilson_low');
  const hi = numbersOf(table, 'wilson_high');
  const bound = numbersOf(table, 'bound_clamped');
  const theorem = table.columns.includes('bound_is_theorem')
    ? numbersOf(table, 'bound_is_theorem')
    : table.rows.map(() => 1);
  const param = table.columns.includes('param_value') ? table.rows.map((r) => r['param_value']) : table.rows.map(() => '');
  const out = new Map<string, SeriesRow[]>();
  table.rows.forEach((row, i) => {
    if (statistic && row['statistic'] !== statistic) return;
    const key = param[i] ? `${row['statistic']}[${param[i]}]` : row['statistic'];
    const list = out.get(key) ?? [];
    list.push({
      epsilon: eps[i],
      pHat: pHat[i],
      lo: lo[i],
      hi: hi[i],
      bound: bound[i],
      boundTag: row['bound_tag'],
      isTheorem: theorem[i] > 0,
      key,
    });
    out.set(key, list);
  });
  if (out.size === 0) {
    throw new CsvError(statistic ? `no rows with statistic ${statistic}` : 'no data rows to plot');
  }
  return out;
}

/** Empirical tail points with Wilson bars against the clamped bound curves. */
export function renderTailVsBound(spec: FigureSpec): string {
  const table = parseCsv(spec.input);
  const series = tailSeries(table, spec.statistic);
  const all = [...series.values()].flat();
  const xDomain = span(all.map((r) => r.epsilon), 1.15);
  const positives = finitePositive(all.flatMap((r) => [r.pHat, r.bound, r.hi]));
  const yLow = Math.max(Math.min(...positives, 1) / 5, FLOOR);
  const f = frame({
    title: spec.title ?? 'empirical tail vs clamped bound',
    xLabel: 'deviation level',
    yLabel: 'probability',
    xKind: 'log',
    yKind: 'log',
    xDomain,
    yDomain: [yLow, 1.5],
  });
  const clampY = (v: number) => f.y(Math.max(v, yLow));
  let color = 0;
  for (const [key, rows] of series) {
    rows.sort((a, b) => a.epsilon - b.epsilon || a.boundTag.localeCompare(b.boundTag));
    const byTag = new Map<string, SeriesRow[]>();
    rows.forEach((r) => byTag.set(r.boundTag, [...(byTag.get(r.boundTag) ?? []), r]));
    const pointColor = PALETTE[color % PALETTE.length];
    const seen = new Set<number>();
    for (const r of rows) {
      if (seen.has(r.epsilon)) continue;
      seen.add(r.epsilon);
      const px = f.x(r.epsilon);
      f.doc.line(px, clampY(r.lo), px, clampY(r.hi), pointColor, 1);
      f.doc.circle(px, clampY(r.pHat), 2.5, pointColor);
    }
    let dashIndex = 0;
    for (const [tag, tagRows] of byTag) {
      if (!tag) continue;
      const curveColor = PALETTE[(color + 1 + dashIndex) % PALETTE.length];
      const dash = tagRows[0].isTheorem ? '' : '6,3';
      f.doc.polyline(tagRows.map((r) => [f.x(r.epsilon), clampY(r.bound)]), curveColor, 1.5, dash);
      f.doc.text(f.plot.right - 4, f.plot.top + 14 + 14 * dashIndex + 30 * color, `${key} bound: ${tag}`, 10, 'end');
      dashIndex += 1;
    }
    f.doc.text(f.plot.right - 4, f.plot.top + 14 * byTag.size + 4 + 30 * color, `${key} empirical`, 10, 'end');
    color += 1;
  }
  return f.doc.render();
}

/** Histogram bars of the sampled angle with the analytic density overlaid. */
export function renderThetaDensity(spec: FigureSpec): string {
  const table = parseCsv(spec.input);
  requireColumns(table, ['bin_low', 'bin_high', 'density_empirical', 'density_analytic']);
  const lows = numbersOf(table, 'bin_low');
  const highs = numbersOf(table, 'bin_high');
  const empirical = numbersOf(table, 'density_empirical');
  const analytic = numbersOf(table, 'density_analytic');
  if (lows.length === 0) throw new CsvError('no data rows to plot');
  const yMax = Math.max(...empirical, ...analytic.filter(Number.isFinite)) * 1.1 || 1;
  const f = frame({
    title: spec.title ?? 'overlap angle: sampled histogram vs analytic density',
    xLabel: 'angle',
    yLabel: 'density',
    xKind: 'linear',
    yKind: 'linear',
    xDomain: [lows[0], highs[highs.length - 1]],
    yDomain: [0, yMax],
  });
  for (let i = 0; i < lows.length; i++) {
    const x0 = f.x(lows[i]);
    const x1 = f.x(highs[i]);
    f.doc.rect(x0, f.y(empirical[i]), x1 - x0, f.y(0) - f.y(empirical[i]), PALETTE[0], 0.55);
  }
  const curve: Array<[number, number]> = [];
  for (let i = 0; i < lows.length; i++) {
    if (Number.isFinite(analytic[i])) curve.push([f.x((lows[i] + highs[i]) / 2), f.y(Math.min(analytic[i], yMax))]);
  }
  f.doc.polyline(curve, PALETTE[1], 2);
  f.doc.text(f.plot.right - 4, f.plot.top + 14, 'sampled', 10, 'end');
  f.doc.text(f.plot.right - 4, f.plot.top + 28, 'analytic', 10, 'end');
  return f.doc.render();
}

/** Median with interquartile band against the grid variable (log-log by default). */
export function renderScaling(spec: FigureSpec): string {
  const table = parseCsv(spec.input);
  requireColumns(table, ['statistic', 'x_name', 'x_value', 'q25', 'q50', 'q75']);
  const x = numbersOf(table, 'x_value');
  const q25 = numbersOf(table, 'q25');
  const q50 = numbersOf(table, 'q50');
  const q75 = numbersOf(table, 'q75');
  if (x.length === 0) throw new CsvError('no data rows to plot');
  const stats = [...new Set(table.rows.map((r) => r['statistic']))];
  const positives = finitePositive([...q25, ...q50, ...q75]);
  const logY = spec.logY ?? true;
  const yValues = positives.length ? positives : [1e-3, 1];
  const f = frame({
    title: spec.title ?? 'deviation scaling',
    xLabel: table.rows[0]['x_name'] || 'grid value',
    yLabel: 'median (interquartile band)',
    xKind: 'log',
    yKind: logY ? 'log' : 'linear',
    xDomain: span(x, 1.2),
    yDomain: logY ? span(yValues) : [0, Math.max(...yValues) * 1.1],
  });
  stats.forEach((stat, s) => {
    const idx = table.rows.map((r, i) => (r['statistic'] === stat ? i : -1)).filter((i) => i >= 0);
    idx.sort((a, b) => x[a] - x[b]);
    const color = PALETTE[s % PALETTE.length];
    const floor = f.y.domain[0];
    const band: Array<[number, number]> = [
      ...idx.map((i) => [f.x(x[i]), f.y(Math.max(q75[i], floor))] as [number, number]),
      ...[...idx].reverse().map((i) => [f.x(x[i]), f.y(Math.max(q25[i], floor))] as [number, number]),
    ];
    if (band.length >= 3) {
      f.doc.parts.push(
        `<polygon points="${band.map(([px, py]) => `${px.toFixed(2)},${py.toFixed(2)}`).join(' ')}" fill="${color}" fill-opacity="0.15"/>`,
      );
    }
    f.doc.polyline(idx.map((i) => [f.x(x[i]), f.y(Math.max(q50[i], floor))]), color, 2);
    idx.forEach((i) => f.doc.circle(f.x(x[i]), f.y(Math.max(q50[i], floor)), 2.5, color));
    f.doc.text(f.plot.right - 4, f.plot.top + 14 + 14 * s, stat, 10, 'end');
  });
  return f.doc.render();
}

/** Log bounds against log dimension with the crossover window marked. */
export function renderCrossover(spec: FigureSpec): string {
  const table = parseCsv(spec.input);
  requireColumns(table, ['log10_d', 'log10_poly', 'log10_exp', 'd_low', 'd_high']);
  const g = numbersOf(table, 'log10_d');
  const poly = numbersOf(table, 'log10_poly');
  const expo = numbersOf(table, 'log10_exp');
  if (g.length === 0) throw new CsvError('no data rows to plot');
  const ys = [...poly, ...expo].filter(Number.isFinite);
  const f = frame({
    title: spec.title ?? 'polynomial vs exponential tail over dimension',
    xLabel: 'log10 D',
    yLabel: 'log10 bound',
    xKind: 'linear',
    yKind: 'linear',
    xDomain: [Math.min(...g), Math.max(...g)],
    yDomain: [Math.min(...ys) - 2, Math.max(...ys) + 2],
  });
  const clip = (v: number) => Math.min(Math.max(v, f.y.domain[0]), f.y.domain[1]);
  f.doc.polyline(g.map((gi, i) => [f.x(gi), f.y(clip(poly[i]))]), PALETTE[0], 2);
  f.doc.polyline(g.map((gi, i) => [f.x(gi), f.y(clip(expo[i]))]), PALETTE[1], 2);
  const dLow = numbersOf(table, 'd_low')[0];
  const dHigh = numbersOf(table, 'd_high')[0];
  for (const [d, label] of [
    [dLow, 'window start'],
    [dHigh, 'window end'],
  ] as Array<[number, string]>) {
    if (Number.isFinite(d)) {
      const px = f.x(Math.log10(d));
      f.doc.line(px, f.plot.top, px, f.plot.bottom, '#444444', 1, '4,3');
      f.doc.text(px, f.plot.top - 4, `${label}: D = ${d.toExponential(2)}`, 10);
    }
  }
  f.doc.text(f.plot.right - 4, f.plot.top + 14, 'polynomial', 10, 'end');
  f.doc.text(f.plot.right - 4, f.plot.top + 28, 'exponential', 10, 'end');
  return f.doc.render();
}

const RENDERERS: Record<FigureKind, (spec: FigureSpec) => string> = {
  tail_vs_bound: renderTailVsBound,
  theta_density: renderThetaDensity,
  scaling: renderScaling,
  crossover: renderCrossover,
};

export const FIGURE_KINDS = Object.keys(RENDERERS) as FigureKind[];

export function render(spec: FigureSpec): string {
  const renderer = RENDERERS[spec.kind];
  if (!renderer) {
    throw new CsvError(`unknown figure kind ${spec.kind}; known: ${FIGURE_KINDS.join(', ')}`);
  }
  return renderer(spec);
}
