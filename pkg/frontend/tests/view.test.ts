// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from 'vitest'

import { StudyApi } from '../src/api.js'
import { SessionController } from '../src/controller.js'
import { render } from '../src/view.js'
import { MockServer, VERSIONS } from './mockServer.js'

let root: HTMLElement

beforeEach(() => {
  document.body.innerHTML = '<main id="app"></main>'
  root = document.getElementById('app')!
})

const noHandlers = { onScore: () => {}, onContinue: () => {} }

async function startedController(server = new MockServer()) {
  const api = new StudyApi('', server.fetch)
  const controller = new SessionController(api, 'rater-ui')
  await controller.start()
  return { server, controller }
}

describe('screens', () => {
  it('calibration screens show the anchor score, rating screens do not', async () => {
    const { controller } = await startedController()
    render(root, controller.state, noHandlers)
    expect(root.querySelector('.screen-calibration')).toBeTruthy()
    expect(root.querySelector('.anchor')!.textContent).toContain('1')
    expect(root.querySelector('.scores')).toBeNull()

    let state = controller.state
    for (let i = 0; i < 10; i++) {
      state = (await controller.submit(state.item!.anchor_score!)).state
    }
    render(root, state, noHandlers)
    expect(root.querySelector('.screen-rating')).toBeTruthy()
    expect(root.querySelector('.anchor')).toBeNull()
    expect(root.querySelectorAll('.scores button')).toHaveLength(5)
  })

  it('shows rating progress as k of 160', async () => {
    const { controller } = await startedController()
    let state = controller.state
    for (let i = 0; i < 10; i++) {
      state = (await controller.submit(state.item!.anchor_score!)).state
    }
    state = (await controller.submit(3)).state
    render(root, state, noHandlers)
    expect(root.querySelector('.progress')!.textContent).toBe('Image 2 of 160')
  })

  it('renders the completion screen after the last item', async () => {
    const server = new MockServer(1, 1) // tiny session: 2 calibration + 8 rating
    const { controller } = await startedController(server)
    let state = controller.state
    while (!state.done) {
      const score = state.item!.kind === 'calibration' ? state.item!.anchor_score! : 5
      state = (await controller.submit(score)).state
    }
    render(root, state, noHandlers)
    expect(root.querySelector('.screen-complete')).toBeTruthy()
    expect(root.textContent).toContain('8 of 8')
  })

  it('inline error is shown without advancing', async () => {
    const { controller } = await startedController()
    let state = controller.state
    for (let i = 0; i < 10; i++) {
      state = (await controller.submit(state.item!.anchor_score!)).state
    }
    const result = await controller.submit(9)
    render(root, controller.state, noHandlers, result.reason)
    expect(root.querySelector('.error')!.textContent).toMatch(/1 to 5/)
    expect(root.querySelector('.progress')!.textContent).toBe('Image 1 of 160')
  })
})

describe('blinding and presentation', () => {
  it('never puts version labels or image ids into the DOM', async () => {
    const server = new MockServer(2, 1) // walk every screen of a short session
    const { controller } = await startedController(server)
    let state = controller.state
    const forbidden = [...VERSIONS].sort((a, b) => b.length - a.length)
    while (true) {
      render(root, state, noHandlers)
      const html = root.innerHTML
      for (const label of forbidden) {
        expect(html).not.toContain(`>${label}<`)
        expect(html).not.toContain(`${label}.png`)
        expect(html).not.toContain(`/${label}/`)
      }
      expect(html).not.toMatch(/image_id|version/)
      if (state.done) break
      const score = state.item!.kind === 'calibration' ? state.item!.anchor_score! : 2
      state = (await controller.submit(score)).state
    }
  })

  it('stimulus images carry no size attributes or scaling styles', async () => {
    const { controller } = await startedController()
    render(root, controller.state, noHandlers)
    const img = root.querySelector('img.stimulus')!
    expect(img.getAttribute('width')).toBeNull()
    expect(img.getAttribute('height')).toBeNull()
    expect(img.getAttribute('style')).toBeNull()
    expect(img.getAttribute('src')).toMatch(/^\/stimuli\//)
  })

  it('score buttons call the handler with their value', async () => {
    const { controller } = await startedController()
    let state = controller.state
    for (let i = 0; i < 10; i++) {
      state = (await controller.submit(state.item!.anchor_score!)).state
    }
    const onScore = vi.fn()
    render(root, state, { onScore, onContinue: () => {} })
    const buttons = root.querySelectorAll<HTMLButtonElement>('.scores button')
    buttons[3]!.click()
    expect(onScore).toHaveBeenCalledWith(4)
  })

  it('continue button acknowledges a calibration item', async () => {
    const { controller } = await startedController()
    const onContinue = vi.fn()
    render(root, controller.state, { onScore: () => {}, onContinue })
    root.querySelector<HTMLButtonElement>('button.continue')!.click()
    expect(onContinue).toHaveBeenCalledOnce()
  })
})
