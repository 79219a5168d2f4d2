// 64-bit FNV-1a, matching the server's checksum of raw image bytes.

const FNV_OFFSET = 0xcbf29ce484222325n
const FNV_PRIME = 0x100000001b3n
const MASK64 = 0xffffffffffffffffn

export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET
  for (let i = 0; i < data.length; i++) {
    h ^= BigInt(data[i]!)
    h = (h * FNV_PRIME) & MASK64
  }
  return h
}

export function fnv1a64Hex(data: Uint8Array): string {
  return fnv1a64(data).toString(16).padStart(16, '0')
}

// base64 -> bytes that works in both the browser and node test runs
export function decodeBase64(b64: string): Uint8Array {
  if (typeof atob === 'function') {
    const bin = atob(b64)
    const out = new Uint8Array(bin.length)
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i)
    return out
  }
  return new Uint8Array(Buffer.from(b64, 'base64'))
}

export function encodeBase64(bytes: Uint8Array): string {
  if (typeof btoa === 'function') {
    let bin = ''
    for (let i = 0; i < bytes.length; i++) bin += String.fromCharCode(bytes[i]!)
    return btoa(bin)
  }
  return Buffer.from(bytes).toString('base64')
}
