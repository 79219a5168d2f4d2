// Line plots for kernel profiles and growth curves, one canvas each.

import { DecodedKernel, GrowthForm, growthValue, kernelProfile, sampleCurve } from './genes.js'

const COLORS = [
  '#e4572e', '#17bebb', '#ffc914', '#76b041', '#8338ec',
  '#ff006e', '#3a86ff', '#fb5607', '#06d6a0', '#b5179e',
  '#f15bb5', '#00bbf9', '#9ef01a', '#ff9f1c', '#7b2cbf',
]

export function kernelColor(k: number): string {
  return COLORS[k % COLORS.length]!
}

interface PlotRange {
  lo: number
  hi: number
}

function drawAxes(ctx: CanvasRenderingContext2D, w: number, h: number, range: PlotRange): void {
  ctx.clearRect(0, 0, w, h)
  ctx.strokeStyle = '#444'
  ctx.lineWidth = 1
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1)
  if (range.lo < 0 && range.hi > 0) {
    const y0 = h - ((0 - range.lo) / (range.hi - range.lo)) * h
    ctx.beginPath()
    ctx.moveTo(0, y0)
    ctx.lineTo(w, y0)
    ctx.stroke()
  }
}

function drawSeries(
  ctx: CanvasRenderingContext2D,
  w: number,
  h: number,
  ys: number[],
  range: PlotRange,
  color: string,
): void {
  ctx.strokeStyle = color
  ctx.lineWidth = 1.5
  ctx.beginPath()
  const span = range.hi - range.lo || 1
  ys.forEach((y, i) => {
    const px = (i / (ys.length - 1)) * w
    const py = h - ((y - range.lo) / span) * h
    if (i === 0) ctx.moveTo(px, py)
    else ctx.lineTo(px, py)
  })
  ctx.stroke()
}

export function plotKernels(canvas: HTMLCanvasElement, kernels: DecodedKernel[], selected: number | null): void {
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const { width: w, height: h } = canvas
  const series = kernels.map((d) => sampleCurve((x) => kernelProfile(d, x), 160).ys)
  const hi = Math.max(1e-6, ...series.flat())
  const range = { lo: 0, hi }
  drawAxes(ctx, w, h, range)
  series.forEach((ys, k) => {
    ctx.globalAlpha = selected === null || selected === k ? 1 : 0.18
    drawSeries(ctx, w, h, ys, range, kernelColor(k))
  })
  ctx.globalAlpha = 1
}

export function plotGrowth(
  canvas: HTMLCanvasElement,
  kernels: DecodedKernel[],
  form: GrowthForm,
  selected: number | null,
): void {
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const { width: w, height: h } = canvas
  const series = kernels.map((d) => sampleCurve((u) => growthValue(u, d.m, d.s, d.h, form), 160).ys)
  const flat = series.flat()
  const hi = Math.max(1e-6, ...flat)
  const lo = Math.min(form === 'bipolar' ? -hi : 0, ...flat)
  const range = { lo, hi }
  drawAxes(ctx, w, h, range)
  series.forEach((ys, k) => {
    ctx.globalAlpha = selected === null || selected === k ? 1 : 0.18
    drawSeries(ctx, w, h, ys, range, kernelColor(k))
  })
  ctx.globalAlpha = 1
}
