// Client-side mirror of the gene decode and the kernel/growth math, so a
// sampled genotype can be plotted without another server round trip.

import type { GeneRanges } from './protocol.js'

export const PARAM_NAMES = ['r1', 'w1', 'b1', 'r2', 'w2', 'b2', 'm', 's', 'h'] as const
export type ParamName = (typeof PARAM_NAMES)[number]

export interface DecodedKernel {
  r1: number
  w1: number
  b1: number
  r2: number
  w2: number
  b2: number
  m: number
  s: number
  h: number
}

export function decodeGene(schema: GeneRanges, name: ParamName, gene: number): number {
  const range = schema[name]
  if (!range) throw new Error(`schema has no range for gene ${name}`)
  const [lo, hi] = range
  return lo + gene * (hi - lo)
}

// genotype column: the 9 normalized genes of one kernel, PARAM_NAMES order
export function decodeKernelGenes(schema: GeneRanges, genes: number[]): DecodedKernel {
  if (genes.length !== PARAM_NAMES.length) {
    throw new Error(`expected ${PARAM_NAMES.length} genes, got ${genes.length}`)
  }
  const out = {} as Record<ParamName, number>
  PARAM_NAMES.forEach((name, i) => {
    out[name] = decodeGene(schema, name, genes[i]!)
  })
  return out as DecodedKernel
}

// averaged_genotype arrives as 9 rows of n_kernels values
export function decodeGenotype(schema: GeneRanges, genotype: number[][]): DecodedKernel[] {
  const nKernels = genotype[0]?.length ?? 0
  const kernels: DecodedKernel[] = []
  for (let k = 0; k < nKernels; k++) {
    kernels.push(decodeKernelGenes(schema, genotype.map((row) => row[k]!)))
  }
  return kernels
}

export function gaussianBump(x: number, center: number, width: number, amplitude: number): number {
  const d = x - center
  return amplitude * Math.exp(-(d * d) / (2 * width * width))
}

// radial kernel profile on x in [0, 1] (unnormalized, as plotted)
export function kernelProfile(d: DecodedKernel, x: number): number {
  return gaussianBump(x, d.r1, d.w1, d.b1) + gaussianBump(x, d.r2, d.w2, d.b2)
}

export type GrowthForm = 'bipolar' | 'unipolar'

export function growthValue(u: number, m: number, s: number, h: number, form: GrowthForm): number {
  const d = u - m
  const g = Math.exp(-(d * d) / (2 * s * s))
  return form === 'bipolar' ? h * (2 * g - 1) : h * g
}

export function sampleCurve(f: (x: number) => number, n: number): { xs: number[]; ys: number[] } {
  const xs: number[] = []
  const ys: number[] = []
  for (let i = 0; i < n; i++) {
    const x = i / (n - 1)
    xs.push(x)
    ys.push(f(x))
  }
  return { xs, ys }
}
