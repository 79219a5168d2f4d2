// Session state machine. The viewer is a pure client: every control value
// it displays comes from a server ack or frame, never from optimistic
// local state, so the UI can never silently diverge from the run.

import {
  AckMessage,
  Command,
  ErrorMessage,
  FrameMessage,
  HelloMessage,
  ServerMessage,
  parseServerMessage,
} from './protocol.js'

// The subset of the WebSocket API the session needs; the browser socket
// and the node ws package both satisfy it.
export interface SocketLike {
  send(data: string): void
  close(): void
  addEventListener(type: 'open' | 'close', cb: () => void): void
  addEventListener(type: 'message', cb: (ev: { data: unknown }) => void): void
}

export type ConnectionState = 'connecting' | 'connected' | 'disconnected'

export interface SessionView {
  connection: ConnectionState
  hello: HelloMessage | null
  frame: FrameMessage | null
  // acked control values
  mutationRate: number | null
  penalizationRate: number | null
  wallsEnabled: boolean | null
  paused: boolean
  genomeLayer: [number, number] | null
  downsample: number | null
  lastError: string | null
}

interface Pending {
  command: Command
  resolve: (msg: AckMessage) => void
  reject: (err: Error) => void
}

export class Session {
  readonly view: SessionView = {
    connection: 'connecting',
    hello: null,
    frame: null,
    mutationRate: null,
    penalizationRate: null,
    wallsEnabled: null,
    paused: false,
    genomeLayer: null,
    downsample: null,
    lastError: null,
  }

  onHello: (hello: HelloMessage) => void = () => {}
  onFrame: (frame: FrameMessage) => void = () => {}
  onChange: (view: SessionView) => void = () => {}

  private pending = new Map<number, Pending>()

  constructor(private socket: SocketLike) {
    socket.addEventListener('open', () => {
      this.view.connection = 'connected'
      this.onChange(this.view)
    })
    socket.addEventListener('close', () => {
      this.view.connection = 'disconnected'
      for (const p of this.pending.values()) p.reject(new Error('connection closed'))
      this.pending.clear()
      this.onChange(this.view)
    })
    socket.addEventListener('message', (ev) => {
      this.handleText(String(ev.data))
    })
  }

  handleText(text: string): void {
    let msg: ServerMessage
    try {
      msg = parseServerMessage(text)
    } catch (err) {
      this.view.lastError = (err as Error).message
      this.onChange(this.view)
      return
    }
    this.handle(msg)
  }

  handle(msg: ServerMessage): void {
    switch (msg.type) {
      case 'hello':
        this.view.connection = 'connected'
        this.view.hello = msg
        this.view.mutationRate = msg.config.mutation_rate
        this.view.penalizationRate = msg.config.penalization_rate
        this.view.genomeLayer = msg.view.genome_layer
        this.view.downsample = msg.view.downsample
        this.onHello(msg)
        break
      case 'frame':
        this.view.frame = msg
        this.view.paused = msg.paused ?? this.view.paused
        // the frame restates the rates in force, so the display keeps
        // tracking the server even if an ack was missed
        this.view.mutationRate = msg.stats.mutation_rate
        this.view.penalizationRate = msg.stats.penalization_rate
        this.onFrame(msg)
        break
      case 'ack':
        this.applyAck(msg)
        break
      case 'error': {
        this.view.lastError = msg.message
        const id = typeof msg.id === 'number' ? msg.id : NaN
        const p = this.pending.get(id)
        if (p) {
          this.pending.delete(id)
          p.reject(new Error(msg.message))
        }
        break
      }
    }
    this.onChange(this.view)
  }

  private applyAck(msg: AckMessage): void {
    const r = msg.result
    switch (msg.cmd) {
      case 'set_rates':
        this.view.mutationRate = r.mutation_rate as number
        this.view.penalizationRate = r.penalization_rate as number
        break
      case 'set_walls':
        this.view.wallsEnabled = (r as { enabled?: boolean }).enabled ?? null
        break
      case 'set_view':
        this.view.genomeLayer = (r.genome_layer as [number, number] | null) ?? null
        this.view.downsample = r.downsample as number
        break
      case 'pause':
      case 'resume':
        this.view.paused = r.paused as boolean
        break
    }
    const id = typeof msg.id === 'number' ? msg.id : NaN
    const p = this.pending.get(id)
    if (p) {
      this.pending.delete(id)
      p.resolve(msg)
    }
  }

  // Send one command; resolves with the ack, rejects on an error reply or
  // disconnect. The view changes only when the reply arrives.
  send(command: Command): Promise<AckMessage> {
    return new Promise((resolve, reject) => {
      this.pending.set(command.id, { command, resolve, reject })
      try {
        this.socket.send(JSON.stringify(command))
      } catch (err) {
        this.pending.delete(command.id)
        reject(err as Error)
      }
    })
  }

  close(): void {
    this.socket.close()
  }
}
