// Console panels. Operator panels render only for an organization session;
// a recipient session gets its balance card and own history. Form submits
// track pending → committed transitions next to each form.

import { ApiError } from '../api'
import { ContractCall } from '../encoding'
import { Session, TxStatus } from '../session'
import { clear, el, shortAddress, shortHash } from './dom'
import { AuditFeed } from './feed'
import { RecipientTable } from './recipients'

export function toast(message: string, kind = 'info'): void {
  let stack = document.getElementById('toast-stack')
  if (!stack) {
    stack = el('div', { id: 'toast-stack', class: 'toast-stack' })
    document.body.append(stack)
  }
  const node = el('div', { class: `toast toast-${kind}` }, [message])
  stack.append(node)
  setTimeout(() => node.remove(), 6000)
}

// Status lines survive re-renders: the latest TxStatus per form lives in the
// shared map and a fresh node re-displays it.
function statusLine(
  key: string,
  statuses: Map<string, TxStatus>,
): [HTMLElement, (status: TxStatus) => void] {
  const node = el('p', { class: 'tx-status', 'data-form': key, 'data-state': 'idle' })
  const show = (status: TxStatus) => {
    node.dataset.state = status.state
    if (status.state === 'pending') {
      node.textContent = `pending ${shortHash(status.txHash)}`
    } else if (status.state === 'committed') {
      node.textContent = `committed at height ${status.height} (${shortHash(status.txHash)})`
    } else {
      node.textContent = `failed: ${status.error}`
    }
  }
  const existing = statuses.get(key)
  if (existing) show(existing)
  const update = (status: TxStatus) => {
    statuses.set(key, status)
    show(status)
  }
  return [node, update]
}

function form(
  legend: string,
  fields: HTMLElement[],
  submitLabel: string,
  onSubmit: (form: HTMLFormElement) => Promise<void> | void,
): HTMLElement {
  const node = el('form', { class: 'panel-form' })
  node.append(el('legend', {}, [legend]), ...fields, el('button', { type: 'submit' }, [submitLabel]))
  node.addEventListener('submit', (event) => {
    event.preventDefault()
    void onSubmit(node as HTMLFormElement)
  })
  return node
}

function textInput(name: string, placeholder: string, attrs: Record<string, string> = {}): HTMLElement {
  return el('input', { name, placeholder, autocomplete: 'off', ...attrs })
}

function fieldValue(node: HTMLFormElement, name: string): string {
  return (node.querySelector(`[name=${name}]`) as HTMLInputElement).value.trim()
}

export interface OperatorDeps {
  session: Session
  recipients: RecipientTable
  orgBalance: () => bigint
  refresh: () => Promise<void>
  statuses: Map<string, TxStatus>
}

async function runTracked(
  deps: OperatorDeps,
  call: ContractCall,
  update: (status: TxStatus) => void,
): Promise<void> {
  const status = await deps.session.submitTracked(call, update)
  if (status.state === 'committed') await deps.refresh()
}

export function renderOperatorPanels(deps: OperatorDeps): HTMLElement {
  const root = el('section', { id: 'operator-panels', class: 'panels' })
  root.append(el('h2', {}, ['Operator actions']))

  // add funds
  {
    const [status, update] = statusLine('funds', deps.statuses)
    root.append(
      form(
        'Add funds',
        [textInput('amount', 'amount (minor units)', { inputmode: 'numeric' })],
        'Add',
        async (node) => {
          await runTracked(deps, { kind: 'add_funds', amount: BigInt(fieldValue(node, 'amount')) }, update)
        },
      ),
      status,
    )
  }

  // recipient management
  {
    const [status, update] = statusLine('recipients', deps.statuses)
    const addressField = textInput('recipient', 'recipient address 0x…')
    const node = el('form', { class: 'panel-form' })
    node.append(el('legend', {}, ['Manage recipients']), addressField)
    const add = el('button', { type: 'button', 'data-action': 'add' }, ['Authorize'])
    const remove = el('button', { type: 'button', 'data-action': 'remove' }, ['Remove'])
    add.addEventListener('click', () =>
      void runTracked(deps, { kind: 'add_recipient', recipient: fieldValue(node as HTMLFormElement, 'recipient') }, update))
    remove.addEventListener('click', () =>
      void runTracked(deps, { kind: 'remove_recipient', recipient: fieldValue(node as HTMLFormElement, 'recipient') }, update))
    node.append(add, remove)
    root.append(node, status)
  }

  // bank-account registration: plaintext lives only in this request body
  {
    const [status, update] = statusLine('bank-account', deps.statuses)
    const account = textInput('account', 'bank account (plaintext, hashed on-chain)')
    const submit = el('button', { type: 'submit', disabled: 'disabled' }, ['Register'])
    const node = el('form', { class: 'panel-form' })
    node.append(
      el('legend', {}, ['Register bank account']),
      textInput('recipient', 'recipient address 0x…'),
      account,
      submit,
    )
    account.addEventListener('input', () => {
      // empty account would fail the contract guard; keep submit disabled
      if ((account as HTMLInputElement).value.length > 0) submit.removeAttribute('disabled')
      else submit.setAttribute('disabled', 'disabled')
    })
    node.addEventListener('submit', (event) => {
      event.preventDefault()
      const plaintext = (account as HTMLInputElement).value
      ;(account as HTMLInputElement).value = '' // never kept client-side
      submit.setAttribute('disabled', 'disabled')
      void runTracked(
        deps,
        {
          kind: 'register_bank_account',
          recipient: fieldValue(node as HTMLFormElement, 'recipient'),
          account: plaintext,
        },
        update,
      )
    })
    root.append(node, status)
  }

  // send allowance, with an over-balance warning before submit
  {
    const [status, update] = statusLine('allowance', deps.statuses)
    const warning = el('p', { class: 'warning', hidden: 'hidden' })
    let warned = false
    root.append(
      form(
        'Send allowance',
        [
          textInput('recipient', 'recipient address 0x…'),
          textInput('amount', 'amount', { inputmode: 'numeric' }),
          warning,
        ],
        'Send',
        async (node) => {
          const amount = BigInt(fieldValue(node, 'amount'))
          if (amount > deps.orgBalance() && !warned) {
            warning.textContent =
              `amount exceeds the organization balance (${deps.orgBalance()}); submit again to force`
            warning.removeAttribute('hidden')
            warned = true
            return
          }
          warning.setAttribute('hidden', 'hidden')
          warned = false
          await runTracked(
            deps,
            { kind: 'send_allowance', recipient: fieldValue(node, 'recipient'), amount },
            update,
          )
        },
      ),
      status,
    )
  }

  return root
}

export function renderBalances(orgAddress: string, orgBalance: string,
                               recipients: RecipientTable): HTMLElement {
  const root = el('section', { id: 'balances', class: 'panels' })
  root.append(el('h2', {}, ['Balances']))
  const card = el('div', { class: 'balance-card', 'data-address': orgAddress })
  card.append(
    el('strong', {}, ['Treasury']),
    el('span', { class: 'amount' }, [orgBalance]),
    el('code', {}, [shortAddress(orgAddress)]),
  )
  root.append(card)
  const table = el('table', { class: 'recipient-table' })
  table.append(el('tr', {}, [
    el('th', {}, ['recipient']), el('th', {}, ['authorized']),
    el('th', {}, ['balance']), el('th', {}, ['account'])]))
  for (const row of recipients.list()) {
    table.append(el('tr', { 'data-address': row.address }, [
      el('td', {}, [el('code', {}, [shortAddress(row.address)])]),
      el('td', {}, [row.authorized ? 'yes' : 'no']),
      el('td', { class: 'amount' }, [row.balance]),
      el('td', {}, [row.accountRegistered ? 'registered' : '—']),
    ]))
  }
  root.append(table)
  return root
}

export function renderRecipientPanel(session: Session, balance: string,
                                     feed: AuditFeed): HTMLElement {
  const root = el('section', { id: 'recipient-panel', class: 'panels' })
  root.append(el('h2', {}, ['Your account']))
  const card = el('div', { class: 'balance-card', 'data-address': session.address })
  card.append(
    el('strong', {}, [session.displayName || 'Recipient']),
    el('span', { class: 'amount' }, [balance]),
    el('code', {}, [session.address]),
  )
  root.append(card)
  const history = el('table', { class: 'history-table' })
  history.append(el('tr', {}, [
    el('th', {}, ['height']), el('th', {}, ['event']), el('th', {}, ['amount'])]))
  for (const row of feed.filtered(undefined, session.address)) {
    history.append(el('tr', {}, [
      el('td', {}, [String(row.height)]),
      el('td', {}, [row.kind]),
      el('td', { class: 'amount' }, [row.amount]),
    ]))
  }
  root.append(history)
  return root
}

export function renderAccessNotice(address: string, err: ApiError): HTMLElement {
  return el('section', { class: 'access-notice' }, [
    el('h2', {}, ['Access restricted']),
    el('p', {}, [`You are not allowed to view ${shortAddress(address)}: ${err.message}`]),
  ])
}

export function renderFeed(feed: AuditFeed, kind?: string, address?: string): HTMLElement {
  const root = el('section', { id: 'audit-feed', class: 'panels' })
  root.append(el('h2', {}, ['Audit feed']))
  const table = el('table', { class: 'feed-table' })
  table.append(el('tr', {}, [
    el('th', {}, ['height']), el('th', {}, ['event']), el('th', {}, ['subject']),
    el('th', {}, ['amount']), el('th', {}, ['tx'])]))
  const rows = feed.filtered(kind, address)
  if (rows.length === 0) {
    root.append(table, el('p', { class: 'empty' }, ['No events yet.']))
    return root
  }
  for (const row of rows) {
    table.append(el('tr', { 'data-kind': row.kind }, [
      el('td', {}, [String(row.height)]),
      el('td', {}, [row.kind]),
      el('td', {}, [el('code', {}, [shortAddress(row.subject)])]),
      el('td', { class: 'amount' }, [row.amount]),
      el('td', {}, [el('code', {}, [shortHash(row.tx_hash)])]),
    ]))
  }
  root.append(table)
  return root
}

export { clear }
