// Audit feed: incremental height-cursor polling and conjunctive filters.

import { beforeEach, describe, expect, it } from 'vitest'

import golden from './fixtures/golden.json'
import { NodeApi } from '../src/api'
import { AuditFeed } from '../src/ui/feed'
import { FakeNode } from './fakenode'

const ORG = golden.address
const ALICE = '0x' + '11'.repeat(20)

describe('audit feed', () => {
  let node: FakeNode

  beforeEach(() => {
    node = new FakeNode(ORG)
    node.install()
  })

  function seedEvents() {
    node.events.push(
      { kind: 'FundsAdded', actor: ORG, subject: ORG, amount: '1000',
        tx_hash: 'a'.repeat(64), height: 1 },
      { kind: 'AllowanceSent', actor: ORG, subject: ALICE, amount: '30',
        tx_hash: 'b'.repeat(64), height: 2 },
    )
    node.height = 2
  }

  it('accumulates rows and advances the cursor', async () => {
    seedEvents()
    const feed = new AuditFeed(new NodeApi(node.base), () => undefined)
    const fresh = await feed.poll()
    expect(fresh).toHaveLength(2)
    expect(feed.cursor).toBe(3)
    // nothing new: second poll returns empty without duplicating rows
    expect(await feed.poll()).toHaveLength(0)
    expect(feed.rows).toHaveLength(2)
    // a later event shows up incrementally
    node.events.push({ kind: 'BankAccountRegistered', actor: ORG, subject: ALICE,
                       amount: '0', tx_hash: 'c'.repeat(64), height: 3 })
    node.height = 3
    expect(await feed.poll()).toHaveLength(1)
    expect(feed.cursor).toBe(4)
  })

  it('notifies only about new rows', async () => {
    seedEvents()
    const seen: string[] = []
    const feed = new AuditFeed(new NodeApi(node.base),
                               (rows) => seen.push(...rows.map((r) => r.kind)))
    await feed.poll()
    await feed.poll()
    expect(seen).toEqual(['FundsAdded', 'AllowanceSent'])
  })

  it('applies kind and address filters conjunctively', async () => {
    seedEvents()
    const feed = new AuditFeed(new NodeApi(node.base), () => undefined)
    await feed.poll()
    expect(feed.filtered('AllowanceSent')).toHaveLength(1)
    expect(feed.filtered(undefined, ALICE)).toHaveLength(1)
    expect(feed.filtered('FundsAdded', ALICE)).toHaveLength(0)
    expect(feed.filtered()).toHaveLength(2)
  })

  it('reports unreachable nodes and keeps state', async () => {
    seedEvents()
    let unreachable = 0
    const feed = new AuditFeed(new NodeApi(node.base), () => undefined,
                               () => { unreachable += 1 })
    await feed.poll()
    globalThis.fetch = (() => Promise.reject(new Error('down'))) as typeof fetch
    await feed.poll()
    expect(unreachable).toBe(1)
    expect(feed.rows).toHaveLength(2)
    expect(feed.cursor).toBe(3)
  })
})
