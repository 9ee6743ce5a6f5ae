// Session identity: the loaded key, its role on the node, and a nonce
// cursor kept in sync with the node. Submissions are serialized through a
// promise chain so concurrent form submits cannot race the cursor.

import { ApiError, NodeApi } from './api'
import { ContractCall } from './encoding'
import { SigningKey, keyFromSeed } from './signing'

export type Role = 'organization' | 'recipient' | 'observer'

export interface TxStatus {
  txHash: string
  state: 'pending' | 'committed' | 'failed'
  height?: number
  error?: string
}

export class Session {
  readonly api: NodeApi
  private nonce: bigint
  private queue: Promise<unknown> = Promise.resolve()

  private constructor(
    readonly key: SigningKey,
    readonly role: Role,
    readonly displayName: string,
    api: NodeApi,
    nextNonce: bigint,
  ) {
    this.api = api
    this.nonce = nextNonce
  }

  static async open(nodeUrl: string, seedHex: string): Promise<Session> {
    const key = keyFromSeed(seedHex)
    const api = new NodeApi(nodeUrl, key)
    const actor = await api.actor(key.address)
    return new Session(key, actor.role, actor.display_name, api, BigInt(actor.next_nonce))
  }

  get address(): string {
    return this.key.address
  }

  // Serialized submit with one nonce-resync retry on BadNonce.
  submit(call: ContractCall): Promise<string> {
    const task = this.queue.then(async () => {
      try {
        const hash = await this.api.submit(call, this.nonce)
        this.nonce += 1n
        return hash
      } catch (err) {
        if (err instanceof ApiError && err.code === 'BadNonce') {
          const expected = err.payload.expected
          this.nonce = expected !== undefined
            ? BigInt(String(expected))
            : BigInt((await this.api.actor(this.address)).next_nonce)
          const hash = await this.api.submit(call, this.nonce)
          this.nonce += 1n
          return hash
        }
        throw err
      }
    })
    // keep the chain alive when a submit fails
    this.queue = task.catch(() => undefined)
    return task
  }

  // Submit and poll inclusion; onChange fires on every status transition.
  async submitTracked(
    call: ContractCall,
    onChange: (status: TxStatus) => void,
    pollMs = 150,
    attempts = 100,
  ): Promise<TxStatus> {
    let txHash: string
    try {
      txHash = await this.submit(call)
    } catch (err) {
      const failed: TxStatus = {
        txHash: '',
        state: 'failed',
        error: err instanceof Error ? err.message : String(err),
      }
      onChange(failed)
      return failed
    }
    let status: TxStatus = { txHash, state: 'pending' }
    onChange(status)
    for (let i = 0; i < attempts; i++) {
      try {
        const located = await this.api.tx(txHash)
        if (located) {
          status = { txHash, state: 'committed', height: located.height }
          onChange(status)
          return status
        }
      } catch (err) {
        status = {
          txHash,
          state: 'failed',
          error: err instanceof Error ? err.message : String(err),
        }
        onChange(status)
        return status
      }
      await new Promise((resolve) => setTimeout(resolve, pollMs))
    }
    status = { txHash, state: 'failed', error: 'not committed in time' }
    onChange(status)
    return status
  }
}
