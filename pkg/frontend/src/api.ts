// Typed client for the node's HTTP API. Mutating and balance requests are
// signed with the session key; the transaction nonce cursor lives in
// session.ts so submissions stay serialized.

import { ContractCall, bytesToHex, callToJson, requestBytes, txSigningBytes } from './encoding'
import { SigningKey, sign } from './signing'

export interface ActorInfo {
  address: string
  role: 'organization' | 'recipient' | 'observer'
  display_name: string
  scheme: string
  public_key: string
  next_nonce: string
}

export interface EventRow {
  kind: 'AllowanceSent' | 'FundsAdded' | 'BankAccountRegistered'
  actor: string
  subject: string
  amount: string
  tx_hash: string
  height: number
  account_digest?: string
}

export interface BlockInfo {
  height: number
  hash: string
  parent_hash: string
  proposer: number
  state_root: string
  transactions: Array<{
    sender: string
    nonce: string
    call: Record<string, string>
    hash: string
  }>
  votes: Array<{ voter: number; round: number }>
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public detail: string,
    public payload: Record<string, unknown>,
  ) {
    super(detail ? `${code}: ${detail}` : code)
  }
}

export class NodeApi {
  constructor(
    public baseUrl: string,
    private key?: SigningKey,
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
    signed = false,
  ): Promise<Record<string, unknown>> {
    const text = body === undefined ? '' : JSON.stringify(body)
    const headers: Record<string, string> = {}
    if (text) headers['Content-Type'] = 'application/json'
    if (signed) {
      if (!this.key) throw new ApiError(0, 'NoKey', 'no signing key loaded', {})
      const nonce = String(Date.now() * 1000 + Math.floor(Math.random() * 1000))
      headers['X-AN-Sender'] = this.key.address
      headers['X-AN-Nonce'] = nonce
      headers['X-AN-Signature'] = bytesToHex(
        sign(this.key, requestBytes(method, path, nonce, text)),
      )
    }
    let response: Response
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers,
        body: text || undefined,
      })
    } catch (err) {
      throw new ApiError(0, 'Unreachable', String(err), {})
    }
    const payload = (await response.json().catch(() => ({}))) as Record<string, unknown>
    if (!response.ok) {
      const code = String(payload.error ?? response.status)
      const reason = payload.reason ? ` (${payload.reason})` : ''
      throw new ApiError(response.status, code, String(payload.detail ?? '') + reason, payload)
    }
    return payload
  }

  health() {
    return this.request('GET', '/v1/health')
  }

  actor(address: string): Promise<ActorInfo> {
    return this.request('GET', `/v1/actors/${address}`) as Promise<unknown> as Promise<ActorInfo>
  }

  registerActor(publicKeyHex: string, role: string, displayName: string) {
    return this.request(
      'POST',
      '/v1/actors',
      { public_key: publicKeyHex, role, display_name: displayName },
      true,
    )
  }

  async balance(address: string): Promise<{ amount: string; height: number }> {
    const payload = await this.request('GET', `/v1/balances/${address}`, undefined, true)
    return { amount: String(payload.amount), height: Number(payload.height) }
  }

  async events(filters: {
    kind?: string
    address?: string
    from?: number
    to?: number
  } = {}): Promise<EventRow[]> {
    const params = new URLSearchParams()
    if (filters.kind) params.set('kind', filters.kind)
    if (filters.address) params.set('address', filters.address)
    if (filters.from !== undefined) params.set('from', String(filters.from))
    if (filters.to !== undefined) params.set('to', String(filters.to))
    const query = params.toString()
    const payload = await this.request('GET', `/v1/events${query ? '?' + query : ''}`)
    return payload.events as EventRow[]
  }

  block(height: number): Promise<BlockInfo> {
    return this.request('GET', `/v1/blocks/${height}`) as Promise<unknown> as Promise<BlockInfo>
  }

  async tx(hash: string): Promise<{ height: number; index: number } | null> {
    try {
      const payload = await this.request('GET', `/v1/txs/${hash}`)
      return { height: Number(payload.height), index: Number(payload.index) }
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null
      throw err
    }
  }

  settle(address: string) {
    return this.request('POST', `/v1/settlements/${address}`, {}, true)
  }

  // Sign and submit one contract call at an explicit nonce.
  async submit(call: ContractCall, nonce: bigint): Promise<string> {
    if (!this.key) throw new ApiError(0, 'NoKey', 'no signing key loaded', {})
    const signature = sign(this.key, txSigningBytes(this.key.address, nonce, call))
    const payload = await this.request(
      'POST',
      '/v1/txs',
      {
        sender: this.key.address,
        nonce: nonce.toString(),
        call: callToJson(call),
        signature: bytesToHex(signature),
      },
      true,
    )
    return String(payload.tx_hash)
  }
}
