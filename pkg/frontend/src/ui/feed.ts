// Live audit feed: polls /v1/events incrementally by height cursor and
// keeps the accumulated rows; rendering applies kind/address filters.
// Newly observed AllowanceSent events raise toast notifications.

import { EventRow, NodeApi } from '../api'

export class AuditFeed {
  rows: EventRow[] = []
  cursor = 1 // genesis carries no events; heights start at 1
  private timer: ReturnType<typeof setInterval> | null = null
  private inflight = false

  constructor(
    private api: NodeApi,
    private onNew: (rows: EventRow[]) => void,
    private onUnreachable?: (err: unknown) => void,
  ) {}

  async poll(): Promise<EventRow[]> {
    if (this.inflight) return [] // overlapping polls would double-append
    this.inflight = true
    let fresh: EventRow[]
    try {
      fresh = await this.api.events({ from: this.cursor })
    } catch (err) {
      this.onUnreachable?.(err)
      return []
    } finally {
      this.inflight = false
    }
    if (fresh.length > 0) {
      this.rows.push(...fresh)
      this.cursor = Math.max(...fresh.map((e) => e.height)) + 1
      this.onNew(fresh)
    }
    return fresh
  }

  filtered(kind?: string, address?: string): EventRow[] {
    return this.rows.filter(
      (row) =>
        (!kind || row.kind === kind) &&
        (!address || row.subject === address || row.actor === address),
    )
  }

  start(intervalMs = 1000): void {
    if (this.timer) return
    void this.poll()
    this.timer = setInterval(() => void this.poll(), intervalMs)
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer)
      this.timer = null
    }
  }
}
