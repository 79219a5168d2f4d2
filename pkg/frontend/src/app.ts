// Viewer entry point: one WebSocket session wired to the panels.

import { Session, SessionView } from './client.js'
import { DecodedKernel, PARAM_NAMES, decodeGenotype } from './genes.js'
import { patternFileDoc, patternFileName } from './pattern.js'
import { plotGrowth, plotKernels } from './plots.js'
import { EventRecord, FrameMessage, GeneRanges, PatternWire, commands } from './protocol.js'
import { canvasToWorld, decodeFrameImage, drawGray8, drawRgb8 } from './render.js'

const EVENT_ROW_CAP = 200

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id)
  if (!el) throw new Error(`missing element #${id}`)
  return el as T
}

const ui = {
  url: byId<HTMLInputElement>('url'),
  connect: byId<HTMLButtonElement>('connect'),
  status: byId<HTMLSpanElement>('status'),
  pheno: byId<HTMLCanvasElement>('pheno'),
  framemeta: byId<HTMLSpanElement>('framemeta'),
  checksum: byId<HTMLSpanElement>('checksum'),
  genome: byId<HTMLCanvasElement>('genome'),
  param: byId<HTMLSelectElement>('param'),
  kernel: byId<HTMLSelectElement>('kernel'),
  downsample: byId<HTMLSelectElement>('downsample'),
  mut: byId<HTMLInputElement>('mut'),
  mutval: byId<HTMLSpanElement>('mutval'),
  pen: byId<HTMLInputElement>('pen'),
  penval: byId<HTMLSpanElement>('penval'),
  pause: byId<HTMLButtonElement>('pause'),
  stepn: byId<HTMLButtonElement>('stepn'),
  steps: byId<HTMLInputElement>('steps'),
  restart: byId<HTMLButtonElement>('restart'),
  seed: byId<HTMLInputElement>('seed'),
  walls: byId<HTMLInputElement>('walls'),
  stats: byId<HTMLElement>('stats'),
  radius: byId<HTMLInputElement>('radius'),
  kplot: byId<HTMLCanvasElement>('kplot'),
  gplot: byId<HTMLCanvasElement>('gplot'),
  sampleinfo: byId<HTMLElement>('sampleinfo'),
  exportBtn: byId<HTMLButtonElement>('export'),
  events: byId<HTMLUListElement>('events'),
  lasterror: byId<HTMLElement>('lasterror'),
}

let session: Session | null = null
let schema: GeneRanges | null = null
let growthForm: 'bipolar' | 'unipolar' = 'bipolar'
let lastPattern: PatternWire | null = null
let lastKernels: DecodedKernel[] = []
let lastEventStep = -1

function setStatus(view: SessionView): void {
  ui.status.textContent = view.connection + (view.paused ? ' (paused)' : '')
  ui.status.className = view.connection
  document.body.classList.toggle('disconnected', view.connection === 'disconnected')
}

function syncControls(view: SessionView): void {
  if (view.mutationRate !== null && document.activeElement !== ui.mut) {
    ui.mut.value = String(view.mutationRate)
  }
  if (view.penalizationRate !== null && document.activeElement !== ui.pen) {
    ui.pen.value = String(view.penalizationRate)
  }
  ui.mutval.textContent = view.mutationRate === null ? '-' : view.mutationRate.toFixed(2)
  ui.penval.textContent = view.penalizationRate === null ? '-' : view.penalizationRate.toFixed(2)
  if (view.wallsEnabled !== null) ui.walls.checked = view.wallsEnabled
  ui.pause.textContent = view.paused ? 'resume' : 'pause'
  ui.lasterror.textContent = view.lastError ?? ''
}

function describeEvent(ev: EventRecord): string {
  const name = PARAM_NAMES[ev.param] ?? String(ev.param)
  const delta = `${ev.delta >= 0 ? '+' : ''}${ev.delta.toFixed(4)}`
  const at = ev.center ? ` @(${ev.center[0]},${ev.center[1]})` : ''
  return `step ${ev.step}  ${ev.kind}  gene ${name} k${ev.kernel}  d=${delta}  ${ev.region_pixels}px${at}`
}

function feedEvents(events: EventRecord[]): void {
  const fresh = events.filter((ev) => ev.step > lastEventStep)
  if (fresh.length === 0) return
  lastEventStep = Math.max(...fresh.map((ev) => ev.step))
  for (const ev of fresh) {
    const li = document.createElement('li')
    li.textContent = describeEvent(ev)
    li.className = ev.kind
    ui.events.prepend(li)
  }
  while (ui.events.childElementCount > EVENT_ROW_CAP) ui.events.lastElementChild?.remove()
}

function showStats(frame: FrameMessage): void {
  const s = frame.stats
  const mass = s.mass.map((m) => m.toFixed(0)).join(' / ')
  ui.stats.textContent =
    `step ${s.step}   mass ${mass}   occupied ${(s.occupied_fraction * 100).toFixed(1)}%   ` +
    `alive ${(s.alpha_fraction * 100).toFixed(1)}%   mutations ${s.mutations}   ` +
    `penalizations ${s.penalizations}   ${s.steps_per_sec.toFixed(1)} steps/s`
}

function showFrame(frame: FrameMessage): void {
  const img = decodeFrameImage(frame)
  drawRgb8(ui.pheno, img.bytes, img.cols, img.rows)
  ui.framemeta.textContent = `${frame.width}x${frame.height} /${frame.downsample}`
  ui.checksum.textContent = img.checksumOk ? `checksum ok ${frame.image_checksum}` : 'CHECKSUM MISMATCH'
  ui.checksum.className = img.checksumOk ? 'ok' : 'bad'
  if (frame.genome_gray8 && frame.genome_layer) {
    const bytes = Uint8Array.from(atob(frame.genome_gray8), (ch) => ch.charCodeAt(0))
    drawGray8(ui.genome, bytes, img.cols, img.rows)
  }
  showStats(frame)
  feedEvents(frame.events)
}

function plotSample(pattern: PatternWire): void {
  if (!schema) return
  if (!pattern.averaged_genotype) {
    ui.sampleinfo.textContent = 'no living genes under the dropper'
    lastKernels = []
    return
  }
  lastKernels = decodeGenotype(schema, pattern.averaged_genotype)
  plotKernels(ui.kplot, lastKernels, null)
  plotGrowth(ui.gplot, lastKernels, growthForm, null)
  ui.sampleinfo.textContent =
    `sampled r=${pattern.radius} at (${pattern.center[0]}, ${pattern.center[1]}), ` +
    `${pattern.n_kernels} kernels`
  ui.exportBtn.disabled = false
}

function sendView(): void {
  if (!session) return
  const p = ui.param.selectedIndex
  const k = Number(ui.kernel.value)
  session.send(commands.setView({ genome_layer: [p, k] })).catch(() => {})
}

function connect(): void {
  session?.close()
  ui.events.replaceChildren()
  lastEventStep = -1
  const socket = new WebSocket(ui.url.value)
  const s = new Session(socket)
  session = s

  s.onChange = (view) => {
    setStatus(view)
    syncControls(view)
  }

  s.onHello = (hello) => {
    schema = hello.config.schema
    growthForm = hello.config.growth_form === 'unipolar' ? 'unipolar' : 'bipolar'
    ui.param.replaceChildren(
      ...PARAM_NAMES.map((name, i) => new Option(`${name}`, String(i), i === 0, i === 6)),
    )
    ui.kernel.replaceChildren(
      ...Array.from({ length: hello.config.n_kernels }, (_, k) => new Option(`k${k}`, String(k), k === 0, k === 0)),
    )
    const divisors = [1, 2, 4, 8, 16].filter(
      (f) => hello.config.width % f === 0 && hello.config.height % f === 0,
    )
    ui.downsample.replaceChildren(
      ...divisors.map((f) => new Option(`1/${f}`, String(f), f === 1, f === hello.view.downsample)),
    )
    sendView()
  }

  s.onFrame = showFrame
}

ui.connect.addEventListener('click', connect)

ui.mut.addEventListener('change', () => {
  session?.send(commands.setRates({ mutation_rate: Number(ui.mut.value) })).catch(() => {
    if (session) syncControls(session.view) // revert to the last acked value
  })
})
ui.pen.addEventListener('change', () => {
  session?.send(commands.setRates({ penalization_rate: Number(ui.pen.value) })).catch(() => {
    if (session) syncControls(session.view)
  })
})

ui.pause.addEventListener('click', () => {
  if (!session) return
  session.send(session.view.paused ? commands.resume() : commands.pause()).catch(() => {})
})

ui.stepn.addEventListener('click', () => {
  const n = Math.max(1, Number(ui.steps.value) || 1)
  session?.send(commands.step(n)).catch(() => {})
})

ui.restart.addEventListener('click', () => {
  const raw = ui.seed.value.trim()
  const seed = raw === '' ? undefined : Number(raw)
  session?.send(commands.restart(seed)).then(() => {
    ui.events.replaceChildren()
    lastEventStep = -1
  }).catch(() => {})
})

ui.walls.addEventListener('change', () => {
  if (!session?.view.hello) return
  const cfg = session.view.hello.config
  const bar: [number, number, number, number] = [
    Math.floor(cfg.width / 2) - 2, 0, 4, cfg.height,
  ]
  session.send(commands.setWalls(ui.walls.checked, ui.walls.checked ? [bar] : undefined)).catch(() => {
    if (session) syncControls(session.view)
  })
})

ui.param.addEventListener('change', sendView)
ui.kernel.addEventListener('change', sendView)
ui.downsample.addEventListener('change', () => {
  session?.send(commands.setView({ downsample: Number(ui.downsample.value) })).catch(() => {})
})

ui.pheno.addEventListener('click', (ev) => {
  if (!session?.view.frame) return
  const ds = session.view.frame.downsample
  const { x, y } = canvasToWorld(ui.pheno, ev.clientX, ev.clientY, ds)
  if (ev.shiftKey && lastPattern) {
    session.send(commands.paste(x, y, lastPattern)).catch(() => {})
    return
  }
  const radius = Math.max(0, Number(ui.radius.value) || 16)
  session.send(commands.sample(x, y, radius)).then((ack) => {
    lastPattern = ack.result.pattern as unknown as PatternWire
    plotSample(lastPattern)
  }).catch(() => {})
})

ui.exportBtn.addEventListener('click', () => {
  if (!lastPattern || !schema || !session?.view.frame) return
  const doc = patternFileDoc(lastPattern, schema)
  const blob = new Blob([JSON.stringify(doc, null, 1) + '\n'], { type: 'application/json' })
  const a = document.createElement('a')
  a.href = URL.createObjectURL(blob)
  a.download = patternFileName(lastPattern, session.view.frame.step)
  a.click()
  URL.revokeObjectURL(a.href)
})

ui.url.value = `ws://${location.hostname || '127.0.0.1'}:8765`
ui.exportBtn.disabled = true
