// Console bootstrap: pick the node URL, open a session from a pasted seed,
// render the panels the session's role allows, start the audit feed.

import { ApiError, NodeApi } from './api'
import { Session } from './session'
import { clear, el } from './ui/dom'
import { AuditFeed } from './ui/feed'
import {
  renderAccessNotice,
  renderBalances,
  renderFeed,
  renderOperatorPanels,
  renderRecipientPanel,
  toast,
} from './ui/panels'
import { RecipientTable } from './ui/recipients'

export function nodeUrlFromLocation(location: Location): string {
  const param = new URLSearchParams(location.search).get('node')
  return (param ?? location.origin).replace(/\/$/, '')
}

export interface App {
  root: HTMLElement
  session: Session
  feed: AuditFeed
  refresh: () => Promise<void>
  stop: () => void
}

export async function startApp(root: HTMLElement, nodeUrl: string,
                               seedHex: string, pollMs = 800): Promise<App> {
  const session = await Session.open(nodeUrl, seedHex)
  const recipients = new RecipientTable(session.api)
  const statuses = new Map()
  let orgBalance = 0n
  let ownBalance = '0'
  let banner: HTMLElement | null = null

  const feed = new AuditFeed(
    session.api,
    (fresh) => {
      for (const row of fresh) {
        if (row.kind === 'AllowanceSent') {
          toast(`Allowance of ${row.amount} sent to ${row.subject.slice(0, 10)}…`, 'allowance')
        }
      }
      refresh().catch(() => undefined) // transient refresh failures retry next poll
    },
    () => {
      if (!banner) {
        banner = el('div', { class: 'banner-error' },
                    ['Node unreachable; retrying…'])
        root.prepend(banner)
      }
    },
  )

  async function refresh(): Promise<void> {
    if (banner) {
      banner.remove()
      banner = null
    }
    if (session.role === 'organization') {
      const health = await session.api.health()
      await recipients.sync(Number(health.height))
      orgBalance = BigInt((await session.api.balance(session.address)).amount)
    } else if (session.role === 'recipient') {
      ownBalance = (await session.api.balance(session.address)).amount
    }
    render()
  }

  function render(): void {
    clear(root)
    root.append(el('header', {}, [
      el('h1', {}, ['Allowance console']),
      el('p', { class: 'identity' }, [
        `${session.displayName || session.address} — ${session.role}`]),
    ]))
    if (session.role === 'organization') {
      root.append(renderOperatorPanels({
        session,
        recipients,
        orgBalance: () => orgBalance,
        refresh,
        statuses,
      }))
      root.append(renderBalances(session.address, orgBalance.toString(), recipients))
    } else if (session.role === 'recipient') {
      root.append(renderRecipientPanel(session, ownBalance, feed))
    }
    // everyone sees the audit feed
    root.append(renderFeed(feed))

    // inspection via URL hash: recipients get an access notice for others
    const inspected = new URLSearchParams(window.location.hash.slice(1)).get('address')
    if (inspected && inspected !== session.address) {
      void session.api.balance(inspected).then(
        (answer) => root.append(el('p', { class: 'inspect' },
                                   [`${inspected}: ${answer.amount}`])),
        (err) => {
          if (err instanceof ApiError) root.append(renderAccessNotice(inspected, err))
        },
      )
    }
  }

  await refresh()
  feed.start(pollMs)
  return {
    root,
    session,
    feed,
    refresh,
    stop: () => feed.stop(),
  }
}

function renderLogin(root: HTMLElement, nodeUrl: string): void {
  const seed = el('input', {
    type: 'password',
    placeholder: 'signing seed (64 hex chars); kept in memory only',
    autocomplete: 'off',
  })
  const message = el('p', { class: 'login-error' })
  const form = el('form', { class: 'login' }, [
    el('h1', {}, ['Allowance console']),
    el('p', {}, [`node: ${nodeUrl}`]),
    seed,
    el('button', { type: 'submit' }, ['Open session']),
    message,
  ])
  form.addEventListener('submit', (event) => {
    event.preventDefault()
    startApp(root, nodeUrl, (seed as HTMLInputElement).value).then(
      () => undefined,
      (err) => {
        message.textContent = err instanceof Error ? err.message : String(err)
      },
    )
  })
  clear(root)
  root.append(form)
}

export function boot(): void {
  const root = document.getElementById('app')
  if (!root) return
  const api = new NodeApi(nodeUrlFromLocation(window.location))
  api.health().then(
    () => renderLogin(root, api.baseUrl),
    () => {
      renderLogin(root, api.baseUrl)
      root.prepend(el('div', { class: 'banner-error' },
                      [`Cannot reach node at ${api.baseUrl}`]))
    },
  )
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  boot()
}
