// Wire protocol types and guards. The server speaks JSON over a
// WebSocket: one hello, then frames, plus one ack or error per command
// matched by the client-chosen id.

export interface GeneRanges {
  [name: string]: [number, number]
}

export interface ServerConfig {
  width: number
  height: number
  n_channels: number
  n_kernels: number
  kernel_radius: number
  n_rings: number
  epsilon: number
  dt: number
  growth_form: string
  mutation_rate: number
  penalization_rate: number
  schema: GeneRanges
  wiring: { source: number[]; target: number[] }
  [key: string]: unknown
}

export interface HelloMessage {
  type: 'hello'
  protocol: number
  config: ServerConfig
  view: { genome_layer: [number, number] | null; downsample: number }
}

export interface FrameStats {
  step: number
  mass: number[]
  occupied_fraction: number
  alpha_fraction: number
  mutations: number
  penalizations: number
  steps_per_sec: number
  mutation_rate: number
  penalization_rate: number
}

export interface EventRecord {
  step: number
  kind: 'mutation' | 'penalization'
  param: number
  kernel: number
  delta: number
  region_pixels: number
  center?: [number, number]
  half_size?: number
}

export interface FrameMessage {
  type: 'frame'
  step: number
  width: number
  height: number
  downsample: number
  stats: FrameStats
  phenotype_rgb8: string
  genome_layer: [number, number] | null
  genome_gray8: string | null
  events: EventRecord[]
  state_checksum: string
  image_checksum: string
  paused?: boolean
}

export interface AckMessage {
  type: 'ack'
  id: string | number | null
  ok: true
  cmd: string
  result: Record<string, unknown>
}

export interface ErrorMessage {
  type: 'error'
  id: string | number | null
  ok: false
  message: string
}

export type ServerMessage = HelloMessage | FrameMessage | AckMessage | ErrorMessage

export interface PatternWire {
  channels: number
  n_kernels: number
  side: number
  radius: number
  center: [number, number]
  phenotype: string
  genotype: string
  averaged_genotype: number[][] | null
}

const isNum = (v: unknown): v is number => typeof v === 'number' && Number.isFinite(v)
const isStr = (v: unknown): v is string => typeof v === 'string'

export function parseServerMessage(text: string): ServerMessage {
  let obj: unknown
  try {
    obj = JSON.parse(text)
  } catch {
    throw new Error('server sent unparseable JSON')
  }
  if (typeof obj !== 'object' || obj === null) throw new Error('server message is not an object')
  const m = obj as Record<string, unknown>
  switch (m.type) {
    case 'hello':
      if (!isNum(m.protocol) || typeof m.config !== 'object' || m.config === null) {
        throw new Error('malformed hello')
      }
      return m as unknown as HelloMessage
    case 'frame':
      if (!isNum(m.step) || !isStr(m.phenotype_rgb8) || !isStr(m.image_checksum) ||
          typeof m.stats !== 'object' || m.stats === null || !Array.isArray(m.events)) {
        throw new Error('malformed frame')
      }
      return m as unknown as FrameMessage
    case 'ack':
      if (m.ok !== true || !isStr(m.cmd)) throw new Error('malformed ack')
      return m as unknown as AckMessage
    case 'error':
      if (!isStr(m.message)) throw new Error('malformed error message')
      return m as unknown as ErrorMessage
    default:
      throw new Error(`unknown message type ${String(m.type)}`)
  }
}

// Command builders; every command carries a fresh correlation id.

let nextId = 1

export function freshId(): number {
  return nextId++
}

export type Command = { cmd: string; id: number } & Record<string, unknown>

export const commands = {
  setRates(rates: { mutation_rate?: number; penalization_rate?: number }): Command {
    return { cmd: 'set_rates', id: freshId(), ...rates }
  },
  setWalls(enabled: boolean, rects?: [number, number, number, number][]): Command {
    return rects === undefined
      ? { cmd: 'set_walls', id: freshId(), enabled }
      : { cmd: 'set_walls', id: freshId(), enabled, rects }
  },
  setView(view: { genome_layer?: [number, number] | null; downsample?: number }): Command {
    return { cmd: 'set_view', id: freshId(), ...view }
  },
  pause(): Command {
    return { cmd: 'pause', id: freshId() }
  },
  resume(): Command {
    return { cmd: 'resume', id: freshId() }
  },
  step(n: number): Command {
    return { cmd: 'step', id: freshId(), n }
  },
  restart(rngSeed?: number): Command {
    return rngSeed === undefined
      ? { cmd: 'restart', id: freshId() }
      : { cmd: 'restart', id: freshId(), rng_seed: rngSeed }
  },
  sample(x: number, y: number, radius: number): Command {
    return { cmd: 'sample', id: freshId(), x, y, radius }
  },
  paste(x: number, y: number, pattern: PatternWire): Command {
    return { cmd: 'paste', id: freshId(), x, y, pattern }
  },
  stats(): Command {
    return { cmd: 'stats', id: freshId() }
  },
}
