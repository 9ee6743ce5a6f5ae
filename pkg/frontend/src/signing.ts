// Client-side signing: Ed25519 keys held in memory only, addresses derived
// as the first 20 bytes of keccak-256 of the public key.

import * as ed from '@noble/ed25519'
import { keccak_256 } from '@noble/hashes/sha3.js'
import { sha512 } from '@noble/hashes/sha2.js'

import { bytesToHex, hexToBytes } from './encoding'

ed.hashes.sha512 = sha512

export interface SigningKey {
  seed: Uint8Array
  publicKey: Uint8Array
  address: string // 0x-hex
}

export function keccak256(data: Uint8Array): Uint8Array {
  return keccak_256(data)
}

export function deriveAddress(publicKey: Uint8Array): string {
  return '0x' + bytesToHex(keccak_256(publicKey).slice(0, 20))
}

export function keyFromSeed(seedHex: string): SigningKey {
  const seed = hexToBytes(seedHex.trim())
  if (seed.length !== 32) throw new Error('seed must be 32 bytes of hex')
  const publicKey = ed.getPublicKey(seed)
  return { seed, publicKey, address: deriveAddress(publicKey) }
}

export function sign(key: SigningKey, message: Uint8Array): Uint8Array {
  return ed.sign(message, key.seed)
}
