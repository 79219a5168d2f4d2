// Canvas rendering of frame payloads. Images arrive as raw bytes in
// row-major (rows, cols[, 3]) order with row = world y axis.

import { decodeBase64, fnv1a64Hex } from './checksum.js'
import type { FrameMessage } from './protocol.js'

export interface DecodedFrameImage {
  cols: number
  rows: number
  bytes: Uint8Array
  checksumOk: boolean
}

export function decodeFrameImage(frame: FrameMessage): DecodedFrameImage {
  const cols = Math.floor(frame.width / frame.downsample)
  const rows = Math.floor(frame.height / frame.downsample)
  const bytes = decodeBase64(frame.phenotype_rgb8)
  if (bytes.length !== rows * cols * 3) {
    throw new Error(`frame payload holds ${bytes.length} bytes, expected ${rows * cols * 3}`)
  }
  return { cols, rows, bytes, checksumOk: fnv1a64Hex(bytes) === frame.image_checksum }
}

export function drawRgb8(canvas: HTMLCanvasElement, bytes: Uint8Array, cols: number, rows: number): void {
  canvas.width = cols
  canvas.height = rows
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const img = ctx.createImageData(cols, rows)
  for (let i = 0, j = 0; i < bytes.length; i += 3, j += 4) {
    img.data[j] = bytes[i]!
    img.data[j + 1] = bytes[i + 1]!
    img.data[j + 2] = bytes[i + 2]!
    img.data[j + 3] = 255
  }
  ctx.putImageData(img, 0, 0)
}

export function drawGray8(canvas: HTMLCanvasElement, bytes: Uint8Array, cols: number, rows: number): void {
  canvas.width = cols
  canvas.height = rows
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const img = ctx.createImageData(cols, rows)
  for (let i = 0, j = 0; i < bytes.length; i++, j += 4) {
    const v = bytes[i]!
    img.data[j] = v
    img.data[j + 1] = v
    img.data[j + 2] = v
    img.data[j + 3] = 255
  }
  ctx.putImageData(img, 0, 0)
}

// canvas click -> world pixel, accounting for CSS scaling and downsample
export function canvasToWorld(
  canvas: HTMLCanvasElement,
  clientX: number,
  clientY: number,
  downsample: number,
): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect()
  const col = ((clientX - rect.left) / rect.width) * canvas.width
  const row = ((clientY - rect.top) / rect.height) * canvas.height
  return { x: Math.floor(col * downsample), y: Math.floor(row * downsample) }
}
