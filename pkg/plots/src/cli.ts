#!/usr/bin/env node
/**
 * Render one figure from a gaplab CSV file.
 *
 *   gaplab-plot --kind theta_density --in run.csv --out run.svg [--statistic S] [--title T]
 *
 * Exit codes: 0 written, 2 bad arguments or bad input data.
 */

import { readFileSync, writeFileSync } from 'fs';
import { CsvError } from './csv';
import { FIGURE_KINDS, FigureKind, render } from './figures';

interface Args {
  kind: FigureKind;
  input: string;
  output: string;
  statistic?: string;
  title?: string;
  yScale?: 'log' | 'linear';
}

export function parseArgs(argv: string[]): Args {
  const values: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith('--') || value === undefined) {
      throw new Error(`expected --flag value pairs, got ${JSON.stringify(argv)}`);
    }
    values[flag.slice(2)] = value;
  }
  const kind = values['kind'] as FigureKind;
  if (!FIGURE_KINDS.includes(kind)) {
    throw new Error(`--kind must be one of ${FIGURE_KINDS.join(', ')}`);
  }
  if (!values['in'] || !values['out']) {
    throw new Error('--in and --out are required');
  }
  const yScale = values['y-scale'] as Args['yScale'];
  if (yScale !== undefined && yScale !== 'log' && yScale !== 'linear') {
    throw new Error('--y-scale must be log or linear');
  }
  return {
    kind,
    input: values['in'],
    output: values['out'],
    statistic: values['statistic'],
    title: values['title'],
    yScale,
  };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`argument error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const text = readFileSync(args.input, 'utf-8');
    const svg = render({
      kind: args.kind,
      input: text,
      statistic: args.statistic,
      title: args.title,
      logY: args.yScale === undefined ? undefined : args.yScale === 'log',
    });
    writeFileSync(args.output, svg, 'utf-8');
    console.log(`wrote ${args.output} (${svg.length} bytes)`);
    return 0;
  } catch (err) {
    if (err instanceof CsvError) {
      console.error(`data error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
