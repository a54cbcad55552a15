import { describe, expect, it } from 'vitest'

import { StudyApi } from '../src/api.js'
import { SessionController } from '../src/controller.js'
import { MockServer } from './mockServer.js'

function setup() {
  const server = new MockServer()
  const api = new StudyApi('', server.fetch)
  const controller = new SessionController(api, 'rater-1')
  return { server, api, controller }
}

describe('session lifecycle', () => {
  it('starts with 10 calibration items before any rating item', async () => {
    const { controller } = setup()
    let state = await controller.start()
    expect(state.calibration.total).toBe(10)
    expect(state.progress.total).toBe(160)
    for (let i = 0; i < 10; i++) {
      expect(state.item?.kind).toBe('calibration')
      const anchor = state.item!.anchor_score!
      expect(i < 5 ? anchor === 1 : anchor === 5).toBe(true)
      state = (await controller.submit(anchor)).state
    }
    expect(state.item?.kind).toBe('rating')
    expect(state.calibration.answered).toBe(10)
    expect(state.progress.answered).toBe(0)
  })

  it('advances through all 160 rating items to completion', async () => {
    const { server, controller } = setup()
    let state = await controller.start()
    while (!state.done) {
      const score = state.item!.kind === 'calibration' ? state.item!.anchor_score! : 3
      state = (await controller.submit(score)).state
    }
    expect(state.progress).toEqual({ answered: 160, total: 160 })
    expect(server.records).toHaveLength(160)
  })

  it('resumes at the first unanswered item after a reload', async () => {
    const { server, api, controller } = setup()
    let state = await controller.start()
    for (let i = 0; i < 13; i++) {
      const score = state.item!.kind === 'calibration' ? state.item!.anchor_score! : 4
      state = (await controller.submit(score)).state
    }
    const pendingItem = state.item!.item_id
    const recordsBefore = server.records.length

    // a fresh controller (new page load) resuming by session id
    const revived = new SessionController(api, 'rater-1')
    const resumed = await revived.start(state.session_id)
    expect(resumed.item?.item_id).toBe(pendingItem)
    expect(resumed.progress.answered).toBe(state.progress.answered)
    expect(server.records.length).toBe(recordsBefore)

    // resuming by rater id alone also lands on the same session
    const byRater = new SessionController(api, 'rater-1')
    const resumed2 = await byRater.start()
    expect(resumed2.session_id).toBe(state.session_id)
    expect(resumed2.item?.item_id).toBe(pendingItem)
  })

  it('rejects out-of-range and non-integer scores without advancing', async () => {
    const { server, controller } = setup()
    let state = await controller.start()
    for (let i = 0; i < 10; i++) {
      state = (await controller.submit(state.item!.anchor_score!)).state
    }
    const current = state.item!.item_id
    for (const bad of [0, 6, 2.5, NaN]) {
      const result = await controller.submit(bad)
      expect(result.accepted).toBe(false)
      expect(result.reason).toBeTruthy()
      expect(result.state.item?.item_id).toBe(current)
    }
    expect(server.records).toHaveLength(0)
  })

  it('double submits create exactly one record', async () => {
    const { server, controller } = setup()
    let state = await controller.start()
    for (let i = 0; i < 10; i++) {
      state = (await controller.submit(state.item!.anchor_score!)).state
    }
    // double-click: two concurrent submits for the same item
    const [first, second] = await Promise.all([
      controller.submit(4),
      controller.submit(4),
    ])
    expect([first.accepted, second.accepted].filter(Boolean)).toHaveLength(1)
    expect(server.records).toHaveLength(1)
    expect(controller.state.progress.answered).toBe(1)

    // a retry of the same payload after the fact is idempotent server-side
    const again = await controller.submit(4)
    expect(again.state.progress.answered).toBe(2)
    expect(server.records).toHaveLength(2)
  })

  it('keeps calibration acknowledgements at the anchor score', async () => {
    const { controller } = setup()
    await controller.start()
    const result = await controller.submit(3) // anchor is 1
    expect(result.accepted).toBe(false)
    expect(controller.state.calibration.answered).toBe(0)
  })

  it('surfaces transient network failures and stays resumable', async () => {
    const { server, controller } = setup()
    let state = await controller.start()
    for (let i = 0; i < 10; i++) {
      state = (await controller.submit(state.item!.anchor_score!)).state
    }
    const current = state.item!.item_id
    server.failNextSubmits = 1
    await expect(controller.submit(2)).rejects.toThrow()
    // nothing advanced or stored; the same item is still pending
    expect(controller.state.item?.item_id).toBe(current)
    expect(server.records).toHaveLength(0)
    const retry = await controller.submit(2)
    expect(retry.accepted).toBe(true)
    expect(server.records).toHaveLength(1)
  })
})
