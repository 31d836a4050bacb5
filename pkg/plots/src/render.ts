/**
 * render --diagnostics d.csv [--cost c.csv] [--allocations a.csv] --beta B --out fig.svg
 *
 * Builds the four-panel multilevel convergence figure:
 *   top left   log2 variance per level (estimator and level difference)
 *   top right  log2 |mean| per level
 *   bottomed   paths per level for each target accuracy, and eps^2 x cost
 * Dotted overlays carry the theoretical reference slopes -(2 - beta) and
 * -(1 - beta/2) on the top panels and the cost exponent 4(beta-1)/(2-beta)
 * on the cost panel (beta > 1). Without a cost CSV only the two top panels
 * are produced (with a warning). Output is an SVG document written to --out.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import {
  ALLOCATIONS_SCHEMA,
  COST_SCHEMA,
  DIAGNOSTICS_SCHEMA,
  SchemaError,
  Table,
  column,
  readCsv,
  validateSchema,
} from "./csv";
import { PanelSpec, Series, renderFigure } from "./figure";

interface Args {
  diagnostics: string;
  cost?: string;
  allocations?: string;
  beta: number;
  out: string;
}

export function parseArgs(argv: string[]): Args {
  const out: Partial<Args> = {};
  for (let i = 0; i < argv.length; i++) {
    const key = argv[i];
    const need = () => {
      if (i + 1 >= argv.length) throw new Error(`missing value for ${key}`);
      return argv[++i];
    };
    switch (key) {
      case "--diagnostics":
        out.diagnostics = need();
        break;
      case "--cost":
        out.cost = need();
        break;
      case "--allocations":
        out.allocations = need();
        break;
      case "--beta":
        out.beta = Number(need());
        break;
      case "--out":
        out.out = need();
        break;
      default:
        throw new Error(`unknown argument ${key}`);
    }
  }
  if (!out.diagnostics || !out.out || out.beta === undefined || Number.isNaN(out.beta)) {
    throw new Error("required: --diagnostics PATH --beta B --out PATH");
  }
  return out as Args;
}

function referenceLine(levels: number[], anchor: number, slope: number, label: string): Series {
  const x = levels;
  const y = levels.map((l) => anchor + slope * (l - levels[0]));
  return { x, y, label, color: "#cc2222", dashed: true };
}

export function buildPanels(args: Args): { panels: PanelSpec[]; warnings: string[] } {
  const warnings: string[] = [];
  const diag = readCsv(args.diagnostics);
  validateSchema(diag, DIAGNOSTICS_SCHEMA, "diagnostics");
  const levels = column(diag, "level");
  const beta = args.beta;
  const varSlope = -(2 - beta);
  const meanSlope = -(1 - beta / 2);

  const diffLevels = levels.filter((l) => l >= 1);
  const diffVar = column(diag, "log2_var_diff").filter((_, i) => levels[i] >= 1);
  const diffMean = column(diag, "log2_mean_diff").filter((_, i) => levels[i] >= 1);

  const variancePanel: PanelSpec = {
    title: "level variances",
    xLabel: "level l",
    yLabel: "log2 variance",
    series: [
      { x: levels, y: column(diag, "log2_var_Pl"), label: "P_l", color: "#1f6fb2" },
      { x: diffLevels, y: diffVar, label: "P_l - P_{l-1}", color: "#2a9d4e" },
    ],
  };
  const meanPanel: PanelSpec = {
    title: "level means",
    xLabel: "level l",
    yLabel: "log2 |mean|",
    series: [
      { x: levels, y: column(diag, "log2_mean_Pl"), label: "P_l", color: "#1f6fb2" },
      { x: diffLevels, y: diffMean, label: "P_l - P_{l-1}", color: "#2a9d4e" },
    ],
  };
  if (diffLevels.length >= 1 && Number.isFinite(diffVar[0])) {
    variancePanel.series.push(
      referenceLine(diffLevels, diffVar[0], varSlope, `slope ${varSlope.toFixed(2)}`)
    );
  }
  if (diffLevels.length >= 1 && Number.isFinite(diffMean[0])) {
    meanPanel.series.push(
      referenceLine(diffLevels, diffMean[0], meanSlope, `slope ${meanSlope.toFixed(2)}`)
    );
  }
  const panels = [variancePanel, meanPanel];

  if (!args.cost) {
    warnings.push("no cost CSV given: rendering the two top panels only");
    return { panels, warnings };
  }
  const cost = readCsv(args.cost);
  validateSchema(cost, COST_SCHEMA, "cost");
  const eps = column(cost, "eps");
  const logEps = eps.map((e) => Math.log10(e));

  const allocPanel: PanelSpec = {
    title: "paths per level",
    xLabel: "level l",
    yLabel: "log10 N_l",
    series: [],
  };
  if (args.allocations) {
    const alloc = readCsv(args.allocations);
    validateSchema(alloc, ALLOCATIONS_SCHEMA, "allocations");
    const aEps = column(alloc, "eps");
    const aLevel = column(alloc, "level");
    const aN = column(alloc, "n_paths");
    const palette = ["#1f6fb2", "#2a9d4e", "#b06fc4", "#b27a1f", "#3bb2b2", "#777777"];
    [...new Set(aEps)].forEach((e, i) => {
      const xs: number[] = [];
      const ys: number[] = [];
      for (let j = 0; j < aEps.length; j++) {
        if (aEps[j] === e) {
          xs.push(aLevel[j]);
          ys.push(Math.log10(aN[j]));
        }
      }
      allocPanel.series.push({ x: xs, y: ys, label: `eps=${e}`, color: palette[i % palette.length] });
    });
  } else {
    // fixed cost schema only: show how many levels each accuracy needed
    allocPanel.title = "levels per accuracy";
    allocPanel.xLabel = "log10 eps";
    allocPanel.yLabel = "levels";
    allocPanel.series.push({ x: logEps, y: column(cost, "levels"), label: "L(eps)", color: "#1f6fb2" });
  }

  const eps2cost = column(cost, "eps2_cost").map((v) => Math.log10(v));
  const proxy = column(cost, "mc_proxy_cost").map((v, i) => Math.log10(eps[i] * eps[i] * v));
  const costPanel: PanelSpec = {
    title: "eps^2 x cost",
    xLabel: "log10 eps",
    yLabel: "log10 eps^2 cost",
    series: [
      { x: logEps, y: eps2cost, label: "MLMC", color: "#2a9d4e" },
      { x: logEps, y: proxy, label: "MC proxy", color: "#1f6fb2" },
    ],
  };
  if (beta > 1) {
    const expo = (4 * (beta - 1)) / (2 - beta);
    // eps^2 cost ~ eps^{-expo}: slope -expo against log10 eps, anchored at the first point
    const ref = logEps.map((le) => eps2cost[0] - expo * (le - logEps[0]));
    costPanel.series.push({ x: logEps, y: ref, label: `slope ${-expo.toFixed(2)}`, color: "#cc2222", dashed: true });
  }
  panels.push(allocPanel, costPanel);
  return { panels, warnings };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`render: ${(err as Error).message}`);
    return 2;
  }
  try {
    const { panels, warnings } = buildPanels(args);
    for (const w of warnings) {
      console.warn(`render: warning: ${w}`);
    }
    const svg = renderFigure(panels);
    fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
    fs.writeFileSync(args.out, svg);
    console.log(`render: wrote ${panels.length}-panel figure to ${args.out} (SVG format)`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`render: schema violation in column '${err.column}': ${err.message}`);
      return 1;
    }
    console.error(`render: ${(err as Error).message}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
