// Dropper exports: the wire pattern re-wrapped as the engine's portable
// pattern-file JSON, so a creature lifted in the browser can reseed a
// headless run unchanged.

import type { GeneRanges, PatternWire } from './protocol.js'

export const PATTERN_FORMAT = 'evolenia-pattern'
export const N_PARAMS = 9

export function patternFileDoc(pattern: PatternWire, schema: GeneRanges): Record<string, unknown> {
  return {
    format: PATTERN_FORMAT,
    version: 1,
    channels: pattern.channels,
    n_kernels: pattern.n_kernels,
    n_params: N_PARAMS,
    side: pattern.side,
    radius: pattern.radius,
    center: pattern.center,
    schema,
    phenotype: pattern.phenotype,
    genotype: pattern.genotype,
    averaged_genotype: pattern.averaged_genotype,
  }
}

export function patternFileName(pattern: PatternWire, step: number): string {
  const [x, y] = pattern.center
  return `pattern_step${step}_at${x}x${y}.json`
}
