// Canonical binary encoding of contract calls and transactions, mirroring
// the node's wire format: big-endian fixed-width integers, 4-byte
// length-prefixed variable fields, raw 20-byte addresses.

export type CallKind =
  | 'add_recipient'
  | 'remove_recipient'
  | 'send_allowance'
  | 'add_funds'
  | 'get_balance'
  | 'register_bank_account'

export interface ContractCall {
  kind: CallKind
  recipient?: string // 0x-hex address
  amount?: bigint
  account?: string
}

const CALL_TAGS: Record<CallKind, number> = {
  add_recipient: 1,
  remove_recipient: 2,
  send_allowance: 3,
  add_funds: 4,
  get_balance: 5,
  register_bank_account: 6,
}

export function hexToBytes(hex: string): Uint8Array {
  const clean = hex.startsWith('0x') ? hex.slice(2) : hex
  if (clean.length % 2 !== 0 || /[^0-9a-fA-F]/.test(clean)) {
    throw new Error(`bad hex string: ${hex.slice(0, 20)}`)
  }
  const out = new Uint8Array(clean.length / 2)
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(clean.slice(2 * i, 2 * i + 2), 16)
  }
  return out
}

export function bytesToHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, '0')).join('')
}

export function concat(...parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0))
  let offset = 0
  for (const part of parts) {
    out.set(part, offset)
    offset += part.length
  }
  return out
}

export function u8(value: number): Uint8Array {
  return Uint8Array.of(value & 0xff)
}

export function u32(value: number): Uint8Array {
  const out = new Uint8Array(4)
  new DataView(out.buffer).setUint32(0, value)
  return out
}

export function u64(value: bigint): Uint8Array {
  if (value < 0n || value >= 1n << 64n) throw new Error(`u64 out of range: ${value}`)
  const out = new Uint8Array(8)
  new DataView(out.buffer).setBigUint64(0, value)
  return out
}

export function varBytes(data: Uint8Array): Uint8Array {
  return concat(u32(data.length), data)
}

export function address(hex: string): Uint8Array {
  const raw = hexToBytes(hex)
  if (raw.length !== 20) throw new Error(`address must be 20 bytes: ${hex}`)
  return raw
}

export function encodeCall(call: ContractCall): Uint8Array {
  const tag = CALL_TAGS[call.kind]
  if (!tag) throw new Error(`unknown call kind ${call.kind}`)
  switch (call.kind) {
    case 'add_recipient':
    case 'remove_recipient':
      return concat(u8(tag), address(call.recipient!))
    case 'send_allowance':
      return concat(u8(tag), address(call.recipient!), u64(call.amount!))
    case 'add_funds':
      return concat(u8(tag), u64(call.amount!))
    case 'get_balance':
      return u8(tag)
    case 'register_bank_account':
      return concat(
        u8(tag),
        address(call.recipient!),
        varBytes(new TextEncoder().encode(call.account!)),
      )
  }
}

export function txSigningBytes(sender: string, nonce: bigint, call: ContractCall): Uint8Array {
  return concat(address(sender), u64(nonce), encodeCall(call))
}

// Request-envelope bytes covered by X-AN-Signature.
export function requestBytes(method: string, path: string, nonce: string, body: string): Uint8Array {
  const head = new TextEncoder().encode(`${method.toUpperCase()}\n${path}\n${nonce}\n`)
  return concat(head, new TextEncoder().encode(body))
}

export function callToJson(call: ContractCall): Record<string, string> {
  const out: Record<string, string> = { kind: call.kind }
  if (call.recipient !== undefined) out.recipient = call.recipient
  if (call.amount !== undefined) out.amount = call.amount.toString()
  if (call.account !== undefined) out.account = call.account
  return out
}
