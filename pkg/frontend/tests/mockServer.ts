// In-memory stand-in for the study service, mirroring its JSON shapes and
// semantics: calibration items precede a fixed permutation of rating items,
// version labels stay server-side, resubmits are idempotent, conflicting
// rewrites are rejected, and each stored score appends one record.

import { FetchLike } from '../src/api.js'

export const VERSIONS = [
  'NN', 'bicubic', 'M_p', 'M_pva', 'M_pca', 'M_pcsa', 'M_pcsva', 'HR',
] as const

interface ServerItem {
  item_id: string
  kind: 'calibration' | 'rating'
  image_id: string
  version: string
  anchor_score?: number
  token: string
}

interface ServerSession {
  session_id: string
  rater_id: string
  items: ServerItem[]
  answered: Map<string, number>
}

export interface StoredRecord {
  rater_id: string
  image_id: string
  version: string
  score: number
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  })
}

export class MockServer {
  sessions = new Map<string, ServerSession>()
  byRater = new Map<string, string>()
  records: StoredRecord[] = []
  failNextSubmits = 0
  private counter = 0

  constructor(
    readonly imagesPerRater = 20,
    readonly calibrationPerAnchor = 5,
  ) {}

  private buildSession(raterId: string): ServerSession {
    const sid = `s${this.counter++}`
    const items: ServerItem[] = []
    for (let i = 0; i < this.calibrationPerAnchor; i++) {
      items.push({
        item_id: `${sid}-c${i}`, kind: 'calibration', image_id: `im${i}`,
        version: 'NN', anchor_score: 1, token: `t${sid}c${i}`,
      })
    }
    for (let i = 0; i < this.calibrationPerAnchor; i++) {
      items.push({
        item_id: `${sid}-c${this.calibrationPerAnchor + i}`, kind: 'calibration',
        image_id: `im${i}`, version: 'HR', anchor_score: 5,
        token: `t${sid}h${i}`,
      })
    }
    const pairs: Array<[string, string]> = []
    for (let img = 0; img < this.imagesPerRater; img++) {
      for (const version of VERSIONS) {
        pairs.push([`im${img}`, version])
      }
    }
    // deterministic shuffle
    let seed = 1234
    for (let i = pairs.length - 1; i > 0; i--) {
      seed = (seed * 48271) % 2147483647
      const j = seed % (i + 1)
      const a = pairs[i]!
      pairs[i] = pairs[j]!
      pairs[j] = a
    }
    pairs.forEach(([img, version], rank) => {
      items.push({
        item_id: `${sid}-r${rank}`, kind: 'rating', image_id: img,
        version, token: `t${sid}r${rank}`,
      })
    })
    return { session_id: sid, rater_id: raterId, items, answered: new Map() }
  }

  private sessionView(session: ServerSession) {
    const rating = session.items.filter((it) => it.kind === 'rating')
    const calibration = session.items.filter((it) => it.kind === 'calibration')
    const answeredRating = rating.filter((it) => session.answered.has(it.item_id)).length
    const answeredCalib = calibration.filter((it) => session.answered.has(it.item_id)).length
    const next = session.items.find((it) => !session.answered.has(it.item_id)) ?? null
    return {
      session_id: session.session_id,
      progress: { answered: answeredRating, total: rating.length },
      calibration: { answered: answeredCalib, total: calibration.length },
      done: next === null,
      item: next && {
        item_id: next.item_id,
        kind: next.kind,
        image_url: `/stimuli/${next.token}`,
        ...(next.kind === 'calibration' ? { anchor_score: next.anchor_score } : {}),
      },
    }
  }

  /** FetchLike entry point routing the same paths as the real service. */
  fetch: FetchLike = async (input, init) => {
    const url = new URL(input, 'http://study.test')
    const method = init?.method ?? 'GET'
    const body = init?.body ? JSON.parse(String(init.body)) : {}

    if (method === 'POST' && url.pathname === '/sessions') {
      const raterId = body.rater_id as string
      let sid = this.byRater.get(raterId)
      if (!sid) {
        const session = this.buildSession(raterId)
        this.sessions.set(session.session_id, session)
        this.byRater.set(raterId, session.session_id)
        sid = session.session_id
      }
      return json(200, this.sessionView(this.sessions.get(sid)!))
    }

    const sessionMatch = url.pathname.match(/^\/sessions\/([^/]+)(\/.*)?$/)
    if (sessionMatch) {
      const session = this.sessions.get(sessionMatch[1]!)
      if (!session) return json(404, { detail: 'unknown session' })
      const tail = sessionMatch[2] ?? ''
      if (method === 'GET' && (tail === '' || tail === '/next')) {
        return json(200, this.sessionView(session))
      }
      if (method === 'POST' && tail === '/scores') {
        if (this.failNextSubmits > 0) {
          this.failNextSubmits--
          return json(503, { detail: 'temporarily unavailable' })
        }
        const { item_id, score } = body as { item_id: string; score: number }
        if (!Number.isInteger(score) || score < 1 || score > 5) {
          return json(422, { detail: `score ${score} outside 1..5` })
        }
        const item = session.items.find((it) => it.item_id === item_id)
        if (!item) return json(422, { detail: 'item not in session' })
        const prior = session.answered.get(item_id)
        if (prior !== undefined) {
          if (prior !== score) return json(409, { detail: 'conflicting resubmission' })
        } else {
          session.answered.set(item_id, score)
          if (item.kind === 'rating') {
            this.records.push({
              rater_id: session.rater_id, image_id: item.image_id,
              version: item.version, score,
            })
          }
        }
        const view = this.sessionView(session)
        return json(200, {
          status: prior !== undefined ? 'duplicate' : 'stored',
          item_id,
          progress: view.progress,
          done: view.done,
        })
      }
    }
    return json(404, { detail: `no route for ${method} ${url.pathname}` })
  }
}
