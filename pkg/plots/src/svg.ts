/**
 * Tiny deterministic SVG builder: scales, axes, and shape helpers.
 *
 * Everything is emitted as plain strings with fixed number formatting, so the
 * same inputs always produce the same bytes.
 */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  kind: 'linear' | 'log';
}

function makeScale(kind: 'linear' | 'log', domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = kind === 'log' ? [Math.log10(domain[0]), Math.log10(domain[1])] : domain;
  const span = d1 - d0 || 1;
  const f = ((value: number) => {
    const v = kind === 'log' ? Math.log10(value) : value;
    return range[0] + ((v - d0) / span) * (range[1] - range[0]);
  }) as Scale;
  f.domain = domain;
  f.range = range;
  f.kind = kind;
  return f;
}

export const linearScale = (domain: [number, number], range: [number, number]) =>
  makeScale('linear', domain, range);
export const logScale = (domain: [number, number], range: [number, number]) =>
  makeScale('log', domain, range);

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return '0';
  return x.toFixed(2).replace(/\.00$/, '');
}

export function ticks(scale: Scale, count = 6): number[] {
  const [lo, hi] = scale.domain;
  if (scale.kind === 'log') {
    const out: number[] = [];
    const start = Math.ceil(Math.log10(lo));
    const stop = Math.floor(Math.log10(hi));
    for (let e = start; e <= stop; e++) out.push(10 ** e);
    if (out.length >= 2) return out;
  }
  const step = (hi - lo) / (count - 1);
  return Array.from({ length: count }, (_, i) => lo + i * step);
}

export function tickLabel(value: number): string {
  if (value === 0) return '0';
  const magnitude = Math.abs(value);
  if (magnitude >= 1e4 || magnitude < 1e-3) return value.toExponential(0).replace('+', '');
  return Number(value.toPrecision(3)).toString();
}

export class SvgDoc {
  parts: string[] = [];

  constructor(
    public width: number,
    public height: number,
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
      `<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>`,
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke: string, width = 1, dash = ''): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : '';
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  polyline(points: Array<[number, number]>, stroke: string, width = 1.5, dash = ''): void {
    if (points.length === 0) return;
    const attr = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    const d = dash ? ` stroke-dasharray="${dash}"` : '';
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string, opacity = 1): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(Math.max(w, 0))}" height="${fmt(Math.max(h, 0))}" fill="${fill}" fill-opacity="${opacity}"/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string): void {
    this.parts.push(`<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`);
  }

  text(x: number, y: number, content: string, size = 11, anchor = 'middle', rotate = 0): void {
    const transform = rotate ? ` transform="rotate(${rotate} ${fmt(x)} ${fmt(y)})"` : '';
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}"${transform}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return this.parts.join('\n') + '\n</svg>\n';
  }
}

export function escapeXml(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export interface Frame {
  doc: SvgDoc;
  x: Scale;
  y: Scale;
  plot: { left: number; right: number; top: number; bottom: number };
}

export interface FrameOptions {
  width?: number;
  height?: number;
  title: string;
  xLabel: string;
  yLabel: string;
  xKind: 'linear' | 'log';
  yKind: 'linear' | 'log';
  xDomain: [number, number];
  yDomain: [number, number];
}

/** Axes, grid, labels; returns scales mapping data to pixel coordinates. */
export function frame(options: FrameOptions): Frame {
  const width = options.width ?? 640;
  const height = options.height ?? 420;
  const plot = { left: 64, right: width - 16, top: 36, bottom: height - 48 };
  const doc = new SvgDoc(width, height);
  const x = makeScale(options.xKind, options.xDomain, [plot.left, plot.right]);
  const y = makeScale(options.yKind, options.yDomain, [plot.bottom, plot.top]);
  for (const t of ticks(x)) {
    const px = x(t);
    doc.line(px, plot.top, px, plot.bottom, '#dddddd');
    doc.text(px, plot.bottom + 16, tickLabel(t));
  }
  for (const t of ticks(y)) {
    const py = y(t);
    doc.line(plot.left, py, plot.right, py, '#dddddd');
    doc.text(plot.left - 6, py + 3, tickLabel(t), 11, 'end');
  }
  doc.line(plot.left, plot.bottom, plot.right, plot.bottom, '#333333');
  doc.line(plot.left, plot.top, plot.left, plot.bottom, '#333333');
  doc.text((plot.left + plot.right) / 2, 20, options.title, 13);
  doc.text((plot.left + plot.right) / 2, height - 12, options.xLabel);
  doc.text(16, (plot.top + plot.bottom) / 2, options.yLabel, 11, 'middle', -90);
  return { doc, x, y, plot };
}

export const PALETTE = ['#1f6fb2', '#d1495b', '#3f8f4d', '#8e6cc3', '#c98a19', '#3aa6a6'];
