// Recipient table derived from committed blocks: authorization comes from
// add/remove transactions, account registration from its event, balances
// from signed balance queries. No client-side balance arithmetic.

import { BlockInfo, NodeApi } from '../api'

export interface RecipientRow {
  address: string
  authorized: boolean
  balance: string
  accountRegistered: boolean
}

export class RecipientTable {
  rows = new Map<string, RecipientRow>()
  private nextHeight = 1

  constructor(private api: NodeApi) {}

  private row(address: string): RecipientRow {
    let row = this.rows.get(address)
    if (!row) {
      row = { address, authorized: false, balance: '0', accountRegistered: false }
      this.rows.set(address, row)
    }
    return row
  }

  fold(block: BlockInfo): void {
    for (const tx of block.transactions) {
      const recipient = tx.call.recipient
      if (!recipient) continue
      if (tx.call.kind === 'add_recipient') this.row(recipient).authorized = true
      else if (tx.call.kind === 'remove_recipient') this.row(recipient).authorized = false
      else if (tx.call.kind === 'register_bank_account') {
        this.row(recipient).accountRegistered = true
      } else if (tx.call.kind === 'send_allowance') this.row(recipient) // appears in table
    }
  }

  // Catch up with committed blocks, then refresh balances from the node.
  async sync(tipHeight: number): Promise<void> {
    while (this.nextHeight <= tipHeight) {
      this.fold(await this.api.block(this.nextHeight))
      this.nextHeight += 1
    }
    for (const row of this.rows.values()) {
      const answer = await this.api.balance(row.address)
      row.balance = answer.amount
    }
  }

  list(): RecipientRow[] {
    return [...this.rows.values()].sort((a, b) => a.address.localeCompare(b.address))
  }
}
